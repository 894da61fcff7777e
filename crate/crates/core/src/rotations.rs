//! 3D rotations in axis-angle, unit-quaternion, matrix and continuous 6-DoF
//! form, with conversion, slerp and geodesic distance.
//!
//! Quaternions are canonicalized to `w >= 0`; when `w == 0` the first nonzero
//! vector component is made positive. The 6-DoF encoding is the first two
//! columns of the rotation matrix, decoded by Gram-Schmidt in column order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cross3, dot3, norm3, scale3, sub3, Mat3, Quat, Vec3};
use crate::scalar::Real;

/// Representation tag. `N` in the per-joint pose layout is `dim()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Representation {
    #[serde(rename = "axis_angle")]
    AxisAngle,
    #[serde(rename = "quaternion")]
    Quaternion,
    #[serde(rename = "matrix")]
    Matrix,
    #[serde(rename = "sixd")]
    SixD,
}

impl Representation {
    pub const ALL: [Representation; 4] =
        [Representation::AxisAngle, Representation::Quaternion, Representation::Matrix, Representation::SixD];

    pub fn dim(self) -> usize {
        match self {
            Representation::AxisAngle => 3,
            Representation::Quaternion => 4,
            Representation::Matrix => 9,
            Representation::SixD => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Representation::AxisAngle => "axis_angle",
            Representation::Quaternion => "quaternion",
            Representation::Matrix => "matrix",
            Representation::SixD => "sixd",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid("representation", format!("unknown representation `{s}`")))
    }
}

/// A rotation tagged with the representation it is stored in.
///
/// * `AxisAngle`: rotation vector, angle in radians times the unit axis.
/// * `Quaternion`: `(w, x, y, z)`.
/// * `Matrix`: row-major 3x3.
/// * `SixD`: first matrix column followed by the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rotation<T> {
    AxisAngle([T; 3]),
    Quaternion([T; 4]),
    Matrix([T; 9]),
    SixD([T; 6]),
}

impl<T: Real> Rotation<T> {
    pub fn identity(repr: Representation) -> Self {
        let (o, z) = (T::one(), T::zero());
        match repr {
            Representation::AxisAngle => Rotation::AxisAngle([z; 3]),
            Representation::Quaternion => Rotation::Quaternion([o, z, z, z]),
            Representation::Matrix => Rotation::Matrix(Mat3::identity().to_row_major()),
            Representation::SixD => Rotation::SixD([o, z, z, z, o, z]),
        }
    }

    pub fn representation(&self) -> Representation {
        match self {
            Rotation::AxisAngle(_) => Representation::AxisAngle,
            Rotation::Quaternion(_) => Representation::Quaternion,
            Rotation::Matrix(_) => Representation::Matrix,
            Rotation::SixD(_) => Representation::SixD,
        }
    }

    pub fn components(&self) -> &[T] {
        match self {
            Rotation::AxisAngle(v) => v,
            Rotation::Quaternion(v) => v,
            Rotation::Matrix(v) => v,
            Rotation::SixD(v) => v,
        }
    }

    /// Builds a rotation from a flat component slice of length `repr.dim()`.
    pub fn from_components(repr: Representation, c: &[T]) -> Result<Self> {
        if c.len() != repr.dim() {
            return Err(Error::shape("rotation components", repr.dim(), c.len()));
        }
        Ok(match repr {
            Representation::AxisAngle => Rotation::AxisAngle([c[0], c[1], c[2]]),
            Representation::Quaternion => Rotation::Quaternion([c[0], c[1], c[2], c[3]]),
            Representation::Matrix => Rotation::Matrix(std::array::from_fn(|i| c[i])),
            Representation::SixD => Rotation::SixD(std::array::from_fn(|i| c[i])),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|x| x.is_finite())
    }

    pub fn from_quat(q: Quat<T>, repr: Representation) -> Result<Self> {
        Rotation::Quaternion(canonicalize_quat(q)?.to_array()).convert(repr)
    }

    pub fn from_matrix(m: &Mat3<T>, repr: Representation) -> Result<Self> {
        Rotation::Matrix(m.to_row_major()).convert(repr)
    }

    /// Canonical unit quaternion for this rotation.
    pub fn to_quat(&self) -> Result<Quat<T>> {
        if !self.is_finite() {
            return Err(Error::NonFinite("rotation"));
        }
        match self {
            Rotation::AxisAngle(v) => Ok(axis_angle_to_quat(*v)),
            Rotation::Quaternion(q) => canonicalize_quat(Quat::from_array(*q)),
            Rotation::Matrix(m) => Ok(matrix_to_quat(&Mat3::from_row_major(m))),
            Rotation::SixD(v) => Ok(matrix_to_quat(&sixd_decode(v)?)),
        }
    }

    pub fn to_matrix(&self) -> Result<Mat3<T>> {
        if !self.is_finite() {
            return Err(Error::NonFinite("rotation"));
        }
        match self {
            Rotation::Matrix(m) => Ok(Mat3::from_row_major(m)),
            Rotation::SixD(v) => sixd_decode(v),
            _ => Ok(quat_to_matrix(self.to_quat()?)),
        }
    }

    /// Converts to `target`. Converting to the value's own representation
    /// returns it unchanged; use [`Rotation::canonical`] to normalize.
    pub fn convert(&self, target: Representation) -> Result<Self> {
        if !self.is_finite() {
            return Err(Error::NonFinite("rotation"));
        }
        if self.representation() == target {
            return Ok(*self);
        }
        Ok(match target {
            Representation::AxisAngle => Rotation::AxisAngle(quat_to_axis_angle(self.to_quat()?)),
            Representation::Quaternion => Rotation::Quaternion(self.to_quat()?.to_array()),
            Representation::Matrix => Rotation::Matrix(self.to_matrix()?.to_row_major()),
            Representation::SixD => {
                let m = self.to_matrix()?;
                Rotation::SixD(sixd_encode(&m))
            }
        })
    }

    /// Canonical form in the same representation: unit quaternion with
    /// `w >= 0`, axis-angle with angle in `[0, pi]`, orthonormalized 6-DoF.
    pub fn canonical(&self) -> Result<Self> {
        let q = self.to_quat()?;
        match self.representation() {
            Representation::Quaternion => Ok(Rotation::Quaternion(q.to_array())),
            Representation::AxisAngle => Ok(Rotation::AxisAngle(quat_to_axis_angle(q))),
            Representation::Matrix => Ok(Rotation::Matrix(quat_to_matrix(q).to_row_major())),
            Representation::SixD => Ok(Rotation::SixD(sixd_encode(&self.to_matrix()?))),
        }
    }

    /// `self * other`: apply `other` first, then `self`. Result uses `self`'s representation.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        let q = self.to_quat()?.mul(other.to_quat()?);
        Rotation::from_quat(q, self.representation())
    }

    pub fn inverse(&self) -> Result<Self> {
        Rotation::from_quat(self.to_quat()?.conjugate(), self.representation())
    }

    pub fn apply(&self, v: Vec3<T>) -> Result<Vec3<T>> {
        Ok(self.to_matrix()?.mul_vec(v))
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> Result<T> {
        let q = self.to_quat()?;
        Ok(quat_angle(q))
    }

    pub fn cast<U: Real>(&self) -> Rotation<U> {
        let f = |x: &T| U::lit(x.to_f64_lossy());
        match self {
            Rotation::AxisAngle(v) => Rotation::AxisAngle(v.each_ref().map(f)),
            Rotation::Quaternion(v) => Rotation::Quaternion(v.each_ref().map(f)),
            Rotation::Matrix(v) => Rotation::Matrix(v.each_ref().map(f)),
            Rotation::SixD(v) => Rotation::SixD(v.each_ref().map(f)),
        }
    }
}

/// Free-function form of [`Rotation::convert`].
pub fn convert<T: Real>(r: &Rotation<T>, target: Representation) -> Result<Rotation<T>> {
    r.convert(target)
}

/// Normalizes `q` and applies the double-cover tie-break.
pub fn canonicalize_quat<T: Real>(q: Quat<T>) -> Result<Quat<T>> {
    if !q.is_finite() {
        return Err(Error::NonFinite("quaternion"));
    }
    let n = q.norm();
    if n == T::zero() {
        return Err(Error::ZeroQuaternion);
    }
    // already-unit input is left untouched so canonicalization is idempotent
    let q = if (n - T::one()).abs() <= T::lit(4.0) * T::epsilon() { q } else { q.scale(T::one() / n) };
    let flip = if q.w != T::zero() {
        q.w < T::zero()
    } else {
        [q.x, q.y, q.z].into_iter().find(|c| *c != T::zero()).is_some_and(|c| c < T::zero())
    };
    Ok(if flip { q.neg() } else { q })
}

fn quat_angle<T: Real>(q: Quat<T>) -> T {
    let two = T::lit(2.0);
    two * norm3(q.vector()).atan2(q.w.abs())
}

fn axis_angle_to_quat<T: Real>(v: Vec3<T>) -> Quat<T> {
    let theta = norm3(v);
    let half = theta / T::lit(2.0);
    // sin(theta/2)/theta
    let k = if theta < T::small_angle() {
        let t2 = theta * theta;
        T::lit(0.5) - t2 / T::lit(48.0) + t2 * t2 / T::lit(3840.0)
    } else {
        half.sin() / theta
    };
    let q = Quat::new(half.cos(), v[0] * k, v[1] * k, v[2] * k);
    canonicalize_quat(q).expect("axis-angle quaternion has unit norm")
}

fn quat_to_axis_angle<T: Real>(q: Quat<T>) -> Vec3<T> {
    let v = q.vector();
    let s = norm3(v);
    if s == T::zero() {
        return [T::zero(); 3];
    }
    let angle = T::lit(2.0) * s.atan2(q.w);
    scale3(v, angle / s)
}

pub(crate) fn quat_to_matrix<T: Real>(q: Quat<T>) -> Mat3<T> {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    let (o, two) = (T::one(), T::lit(2.0));
    Mat3([
        [o - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), o - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), o - two * (x * x + y * y)],
    ])
}

pub(crate) fn matrix_to_quat<T: Real>(m: &Mat3<T>) -> Quat<T> {
    let (o, two, quarter) = (T::one(), T::lit(2.0), T::lit(0.25));
    let tr = m.trace();
    let (m00, m11, m22) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    let q = if tr >= m00 && tr >= m11 && tr >= m22 {
        let s = (tr + o).sqrt() * two;
        Quat::new(quarter * s, (m[(2, 1)] - m[(1, 2)]) / s, (m[(0, 2)] - m[(2, 0)]) / s, (m[(1, 0)] - m[(0, 1)]) / s)
    } else if m00 >= m11 && m00 >= m22 {
        let s = (o + m00 - m11 - m22).sqrt() * two;
        Quat::new((m[(2, 1)] - m[(1, 2)]) / s, quarter * s, (m[(0, 1)] + m[(1, 0)]) / s, (m[(0, 2)] + m[(2, 0)]) / s)
    } else if m11 >= m22 {
        let s = (o + m11 - m00 - m22).sqrt() * two;
        Quat::new((m[(0, 2)] - m[(2, 0)]) / s, (m[(0, 1)] + m[(1, 0)]) / s, quarter * s, (m[(1, 2)] + m[(2, 1)]) / s)
    } else {
        let s = (o + m22 - m00 - m11).sqrt() * two;
        Quat::new((m[(1, 0)] - m[(0, 1)]) / s, (m[(0, 2)] + m[(2, 0)]) / s, (m[(1, 2)] + m[(2, 1)]) / s, quarter * s)
    };
    canonicalize_quat(q).unwrap_or_else(|_| Quat::identity())
}

/// First two columns of `m`, concatenated.
pub fn sixd_encode<T: Real>(m: &Mat3<T>) -> [T; 6] {
    let (c0, c1) = (m.col(0), m.col(1));
    [c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]]
}

/// Gram-Schmidt decode of the 6-DoF representation: normalize the first
/// column, remove its component from the second and normalize, then take the
/// cross product as the third column.
pub fn sixd_decode<T: Real>(v: &[T; 6]) -> Result<Mat3<T>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("6-DoF rotation"));
    }
    let a1: Vec3<T> = [v[0], v[1], v[2]];
    let a2: Vec3<T> = [v[3], v[4], v[5]];
    let n1 = norm3(a1);
    if n1 == T::zero() {
        return Err(Error::DegenerateSixD("first column is zero"));
    }
    let n2_in = norm3(a2);
    if n2_in == T::zero() {
        return Err(Error::DegenerateSixD("second column is zero"));
    }
    let b1 = scale3(a1, T::one() / n1);
    let u2 = sub3(a2, scale3(b1, dot3(b1, a2)));
    let n2 = norm3(u2);
    if n2 <= n2_in * T::epsilon() * T::lit(1024.0) {
        return Err(Error::DegenerateSixD("columns are parallel"));
    }
    let b2 = scale3(u2, T::one() / n2);
    let b3 = cross3(b1, b2);
    Ok(Mat3::from_cols(b1, b2, b3))
}

/// Shortest-arc spherical linear interpolation between unit quaternions.
pub fn slerp_quat<T: Real>(a: Quat<T>, b: Quat<T>, t: T) -> Quat<T> {
    let mut b = b;
    let mut d = a.dot(b);
    if d < T::zero() {
        b = b.neg();
        d = -d;
    }
    let threshold = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
    let q = if d > T::one() - threshold {
        a.scale(T::one() - t).add(b.scale(t))
    } else {
        let theta = d.min(T::one()).acos();
        let s = theta.sin();
        a.scale(((T::one() - t) * theta).sin() / s).add(b.scale((t * theta).sin() / s))
    };
    canonicalize_quat(q).unwrap_or(a)
}

/// Geodesic interpolation from `a` (`t = 0`) to `b` (`t = 1`), returned in
/// `a`'s representation.
pub fn slerp<T: Real>(a: &Rotation<T>, b: &Rotation<T>, t: T) -> Result<Rotation<T>> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid("t", format!("interpolation parameter {t} outside [0, 1]")));
    }
    let q = slerp_quat(a.to_quat()?, b.to_quat()?, t);
    Rotation::from_quat(q, a.representation())
}

/// Angle of `aᵀb`, in `[0, pi]`.
pub fn geodesic_distance<T: Real>(a: &Rotation<T>, b: &Rotation<T>) -> Result<T> {
    let qa = a.to_quat()?;
    let qa = qa.scale(T::one() / qa.norm());
    let qb = b.to_quat()?;
    let mut qb = qb.scale(T::one() / qb.norm());
    if qa.dot(qb) < T::zero() {
        qb = qb.neg();
    }
    // half-angle chord form: exact zero for equal inputs, accurate near 0 and pi
    let diff = qa.add(qb.neg()).norm();
    let sum = qa.add(qb).norm();
    Ok(T::lit(4.0) * diff.atan2(sum))
}

/// Rotation drawn uniformly from SO(3): a normalized 4D Gaussian quaternion.
pub fn random_quat<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Quat<T> {
    loop {
        let c: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            let q = Quat::new(T::lit(c[0] / n), T::lit(c[1] / n), T::lit(c[2] / n), T::lit(c[3] / n));
            if let Ok(q) = canonicalize_quat(q) {
                return q;
            }
        }
    }
}

/// Rotation of `angle` radians about `axis` (need not be unit length).
pub fn axis_angle<T: Real>(axis: Vec3<T>, angle: T) -> Rotation<T> {
    let n = norm3(axis);
    if n == T::zero() {
        return Rotation::identity(Representation::AxisAngle);
    }
    Rotation::AxisAngle(scale3(axis, angle / n))
}
