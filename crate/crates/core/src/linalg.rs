//! Fixed-size 3D linear algebra: vectors, 3x3 matrices, quaternions and a
//! small Jacobi SVD. Everything here is generic over [`Real`].

use std::ops::{Index, IndexMut, Mul};

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];

#[inline]
pub fn add3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3<T: Real>(a: Vec3<T>) -> T {
    // hypot-style scaling keeps tiny and huge vectors accurate
    let m = a[0].abs().max(a[1].abs()).max(a[2].abs());
    if m == T::zero() || !m.is_finite() {
        return m;
    }
    let (x, y, z) = (a[0] / m, a[1] / m, a[2] / m);
    m * (x * x + y * y + z * z).sqrt()
}

#[inline]
pub fn dist3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm3(sub3(a, b))
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn zeros() -> Self {
        Mat3([[T::zero(); 3]; 3])
    }

    pub fn diag(d: Vec3<T>) -> Self {
        let z = T::zero();
        Mat3([[d[0], z, z], [z, d[1], z], [z, z, d[2]]])
    }

    pub fn from_row_major(v: &[T; 9]) -> Self {
        Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn to_row_major(&self) -> [T; 9] {
        let m = &self.0;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn from_cols(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Mat3([[c0[0], c1[0], c2[0]], [c0[1], c1[1], c2[1]], [c0[2], c1[2], c2[2]]])
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn set_col(&mut self, j: usize, c: Vec3<T>) {
        for (i, v) in c.into_iter().enumerate() {
            self.0[i][j] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|x| *x = *x * s);
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0.iter().flatten().zip(other.0.iter().flatten()).fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Mat3<T>;

    fn mul(self, rhs: Mat3<T>) -> Mat3<T> {
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j] + self.0[i][2] * rhs.0[2][j];
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

/// Quaternion `w + xi + yj + zk`, stored as `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> Vec3<T> {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        let m = self.w.abs().max(self.x.abs()).max(self.y.abs()).max(self.z.abs());
        if m == T::zero() || !m.is_finite() {
            return m;
        }
        let s = Self::new(self.w / m, self.x / m, self.y / m, self.z / m);
        m * s.dot(s).sqrt()
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn neg(self) -> Self {
        self.scale(-T::one())
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * o`.
    pub fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Thin SVD `a = u * diag(s) * vᵀ` of a 3x3 matrix, singular values sorted
/// in descending order. `u` and `v` are orthogonal; `u` has determinant +1
/// whenever the smallest singular value vanishes.
#[derive(Debug, Clone, Copy)]
pub struct Svd3<T> {
    pub u: Mat3<T>,
    pub s: Vec3<T>,
    pub v: Mat3<T>,
}

/// One-sided Jacobi SVD.
pub fn svd3<T: Real>(a: &Mat3<T>) -> Svd3<T> {
    let mut w = *a;
    let mut v = Mat3::identity();
    let tol = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
            for i in 0..3 {
                alpha = alpha + w[(i, p)] * w[(i, p)];
                beta = beta + w[(i, q)] * w[(i, q)];
                gamma = gamma + w[(i, p)] * w[(i, q)];
            }
            if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (gamma + gamma);
            let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
            let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
            let c = T::one() / (T::one() + t * t).sqrt();
            let s = c * t;
            for m in [&mut w, &mut v] {
                for i in 0..3 {
                    let (mp, mq) = (m[(i, p)], m[(i, q)]);
                    m[(i, p)] = c * mp - s * mq;
                    m[(i, q)] = s * mp + c * mq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order = [0usize, 1, 2];
    let norms = [norm3(w.col(0)), norm3(w.col(1)), norm3(w.col(2))];
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Mat3::zeros();
    let mut vs = Mat3::zeros();
    let mut s = [T::zero(); 3];
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        vs.set_col(k, v.col(j));
    }
    let floor = s[0] * T::epsilon() * T::lit(16.0);
    for k in 0..3 {
        let j = order[k];
        if s[k] > floor && s[k] > T::zero() {
            u.set_col(k, scale3(w.col(j), T::one() / s[k]));
        }
    }
    // complete the left basis where singular values vanish
    if s[1] <= floor {
        let c0 = if s[0] > T::zero() { u.col(0) } else { [T::one(), T::zero(), T::zero()] };
        u.set_col(0, c0);
        let helper = if c0[0].abs() < T::lit(0.9) { [T::one(), T::zero(), T::zero()] } else { [T::zero(), T::one(), T::zero()] };
        let c1 = cross3(c0, helper);
        u.set_col(1, scale3(c1, T::one() / norm3(c1)));
    }
    if s[2] <= floor {
        let c2 = cross3(u.col(0), u.col(1));
        u.set_col(2, scale3(c2, T::one() / norm3(c2)));
    }
    Svd3 { u, s, v: vs }
}
