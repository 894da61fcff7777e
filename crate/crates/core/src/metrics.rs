//! Joint-position accuracy and smoothness metrics (MPJPE, PA-MPJPE,
//! acceleration error) and the 3D / 2D / SMPL-parameter training losses.
//!
//! Positions are meters; metrics report millimeters (and mm/s² for
//! acceleration). Joint 0 is the root for root-relative MPJPE. Procrustes
//! alignment is a full similarity (rotation, uniform scale, translation).
//! Acceleration is the central second difference scaled by `fps²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{add3, dist3, dot3, norm3, scale3, sub3, svd3, Mat3, Vec3};
use crate::motion::MotionSequence;
use crate::rotations::{Representation, Rotation};
use crate::scalar::{stable_sum, Real};

/// `T x J` joint positions in meters, sampled at `fps`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSequence<T> {
    positions: Vec<Vec3<T>>,
    joints: usize,
    fps: T,
}

impl<T: Real> JointSequence<T> {
    /// `positions` is frame-major, `frames * joints` long.
    pub fn new(positions: Vec<Vec3<T>>, joints: usize, fps: T) -> Result<Self> {
        if joints == 0 || positions.is_empty() || !positions.len().is_multiple_of(joints) {
            return Err(Error::shape("joint sequence", format!("non-empty multiple of {joints} joints"), positions.len()));
        }
        if !(fps > T::zero() && fps.is_finite()) {
            return Err(Error::invalid("fps", format!("must be positive, got {fps}")));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("joint positions"));
        }
        Ok(Self { positions, joints, fps })
    }

    pub fn from_frames(frames: Vec<Vec<Vec3<T>>>, fps: T) -> Result<Self> {
        let joints = frames.first().map_or(0, |f| f.len());
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.len() != joints) {
            return Err(Error::shape("joint sequence frame", joints, format!("{} joints in frame {i}", f.len())));
        }
        Self::new(frames.into_iter().flatten().collect(), joints, fps)
    }

    pub fn frames(&self) -> usize {
        self.positions.len() / self.joints
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn fps(&self) -> T {
        self.fps
    }

    pub fn frame(&self, t: usize) -> &[Vec3<T>] {
        &self.positions[t * self.joints..(t + 1) * self.joints]
    }

    pub fn positions(&self) -> &[Vec3<T>] {
        &self.positions
    }

    pub fn map_frames(&self, mut f: impl FnMut(usize, &[Vec3<T>]) -> Vec<Vec3<T>>) -> Result<Self> {
        let frames = (0..self.frames()).map(|t| f(t, self.frame(t))).collect();
        Self::from_frames(frames, self.fps)
    }
}

fn check_same_shape<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<()> {
    if pred.frames() != gt.frames() || pred.joints() != gt.joints() {
        return Err(Error::shape(
            "metric inputs",
            format!("{}x{}", gt.frames(), gt.joints()),
            format!("{}x{}", pred.frames(), pred.joints()),
        ));
    }
    Ok(())
}

const MM: f64 = 1000.0;

/// Root-relative per-frame mean joint error, in millimeters.
pub fn mpjpe_per_frame<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<Vec<T>> {
    check_same_shape(pred, gt)?;
    let mm = T::lit(MM);
    Ok((0..pred.frames())
        .into_par_iter()
        .map(|t| {
            let (p, g) = (pred.frame(t), gt.frame(t));
            let mean = stable_sum(p.iter().zip(g).map(|(a, b)| dist3(sub3(*a, p[0]), sub3(*b, g[0])))) / T::lit(p.len() as f64);
            mean * mm
        })
        .collect())
}

/// Mean per-joint position error after root alignment, in millimeters.
pub fn mpjpe<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<T> {
    let per = mpjpe_per_frame(pred, gt)?;
    Ok(stable_sum(per.iter().copied()) / T::lit(per.len() as f64))
}

/// Similarity transform `p -> scale * R p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform<T> {
    pub rotation: Rotation<T>,
    pub scale: T,
    pub translation: Vec3<T>,
}

impl<T: Real> SimilarityTransform<T> {
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(Representation::Matrix), scale: T::one(), translation: [T::zero(); 3] }
    }

    pub fn apply(&self, p: Vec3<T>) -> Result<Vec3<T>> {
        Ok(add3(scale3(self.rotation.apply(p)?, self.scale), self.translation))
    }
}

fn centroid<T: Real>(pts: &[Vec3<T>]) -> Vec3<T> {
    let n = T::lit(pts.len() as f64);
    std::array::from_fn(|a| stable_sum(pts.iter().map(|p| p[a])) / n)
}

/// Least-squares similarity alignment of `pred_frame` onto `gt_frame`.
///
/// Centers both point sets, takes the SVD `U S Vᵀ` of the cross-covariance
/// `Σ g pᵀ`, corrects a reflection with `D = diag(1, 1, sign det(U Vᵀ))`, and
/// sets `R = U D Vᵀ`, `s = tr(S D) / Σ|p|²`.
pub fn procrustes_align<T: Real>(pred_frame: &[Vec3<T>], gt_frame: &[Vec3<T>]) -> Result<(Vec<Vec3<T>>, SimilarityTransform<T>)> {
    if pred_frame.len() != gt_frame.len() {
        return Err(Error::shape("procrustes frames", gt_frame.len(), pred_frame.len()));
    }
    if pred_frame.len() < 3 {
        return Err(Error::DegeneratePoints(format!("need at least 3 points, got {}", pred_frame.len())));
    }
    let (mp, mg) = (centroid(pred_frame), centroid(gt_frame));
    let mut h = Mat3::zeros();
    let mut var_p = T::zero();
    for (p, g) in pred_frame.iter().zip(gt_frame) {
        let (pc, gc) = (sub3(*p, mp), sub3(*g, mg));
        var_p = var_p + dot3(pc, pc);
        for i in 0..3 {
            for j in 0..3 {
                h[(i, j)] = h[(i, j)] + gc[i] * pc[j];
            }
        }
    }
    let svd = svd3(&h);
    let rank_tol = T::epsilon().sqrt() * T::lit(1e-2);
    if svd.s[0] == T::zero() || svd.s[1] <= rank_tol * svd.s[0] || var_p == T::zero() {
        return Err(Error::DegeneratePoints(format!(
            "cross-covariance has rank < 2 (singular values {}, {}, {})",
            svd.s[0], svd.s[1], svd.s[2]
        )));
    }
    if pred_frame == gt_frame {
        return Ok((gt_frame.to_vec(), SimilarityTransform::identity()));
    }
    let d = if (svd.u.det() * svd.v.det()) < T::zero() { -T::one() } else { T::one() };
    let r = svd.u * Mat3::diag([T::one(), T::one(), d]) * svd.v.transpose();
    let scale = (svd.s[0] + svd.s[1] + d * svd.s[2]) / var_p;
    let translation = sub3(mg, scale3(r.mul_vec(mp), scale));
    let aligned = pred_frame.iter().map(|p| add3(scale3(r.mul_vec(*p), scale), translation)).collect();
    Ok((aligned, SimilarityTransform { rotation: Rotation::Matrix(r.to_row_major()), scale, translation }))
}

/// Per-frame mean joint error after Procrustes alignment, in millimeters.
pub fn pa_mpjpe_per_frame<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<Vec<T>> {
    check_same_shape(pred, gt)?;
    let mm = T::lit(MM);
    (0..pred.frames())
        .into_par_iter()
        .map(|t| {
            let (aligned, _) = procrustes_align(pred.frame(t), gt.frame(t))?;
            let n = T::lit(aligned.len() as f64);
            Ok(stable_sum(aligned.iter().zip(gt.frame(t)).map(|(a, b)| dist3(*a, *b))) / n * mm)
        })
        .collect()
}

pub fn pa_mpjpe<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<T> {
    let per = pa_mpjpe_per_frame(pred, gt)?;
    Ok(stable_sum(per.iter().copied()) / T::lit(per.len() as f64))
}

fn check_fps<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<()> {
    let (a, b) = (pred.fps(), gt.fps());
    if (a - b).abs() > T::lit(1e-9) * a.max(b) {
        return Err(Error::invalid("fps", format!("prediction at {a} fps but ground truth at {b} fps")));
    }
    Ok(())
}

fn second_difference<T: Real>(seq: &JointSequence<T>, t: usize, j: usize, fps2: T) -> Vec3<T> {
    let (prev, cur, next) = (seq.frame(t - 1)[j], seq.frame(t)[j], seq.frame(t + 1)[j]);
    let two = T::lit(2.0);
    std::array::from_fn(|a| (next[a] - two * cur[a] + prev[a]) * fps2)
}

/// Per-interior-frame acceleration error (frames `1..T-1`), in mm/s².
pub fn accel_error_per_frame<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<Vec<T>> {
    check_same_shape(pred, gt)?;
    check_fps(pred, gt)?;
    if pred.frames() < 3 {
        return Err(Error::InvalidSequence(format!("acceleration error needs >= 3 frames, got {}", pred.frames())));
    }
    let fps2 = pred.fps() * pred.fps();
    let (mm, n) = (T::lit(MM), T::lit(pred.joints() as f64));
    Ok((1..pred.frames() - 1)
        .into_par_iter()
        .map(|t| {
            let per_joint = (0..pred.joints()).map(|j| dist3(second_difference(pred, t, j, fps2), second_difference(gt, t, j, fps2)));
            stable_sum(per_joint) / n * mm
        })
        .collect())
}

/// Mean acceleration error over interior frames and joints, in mm/s².
pub fn accel_error<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<T> {
    let per = accel_error_per_frame(pred, gt)?;
    Ok(stable_sum(per.iter().copied()) / T::lit(per.len() as f64))
}

/// `Σ_t Σ_j |pred - gt|` over 3D joints (meters, no alignment).
pub fn loss_3d<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>) -> Result<T> {
    check_same_shape(pred, gt)?;
    Ok(stable_sum(pred.positions().iter().zip(gt.positions()).map(|(a, b)| dist3(*a, *b))))
}

/// `Σ_t Σ_j |pred - gt|` over 2D keypoints, one `Vec` per frame.
pub fn loss_2d<T: Real>(pred: &[Vec<[T; 2]>], gt: &[Vec<[T; 2]>]) -> Result<T> {
    if pred.len() != gt.len() {
        return Err(Error::shape("2D loss frames", gt.len(), pred.len()));
    }
    let mut terms = Vec::new();
    for (t, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.len() != g.len() {
            return Err(Error::shape("2D loss joints", g.len(), format!("{} in frame {t}", p.len())));
        }
        terms.extend(p.iter().zip(g).map(|(a, b)| {
            let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
            dx.hypot(dy)
        }));
    }
    Ok(stable_sum(terms))
}

fn l2<T: Real>(a: &[T], b: &[T]) -> T {
    stable_sum(a.iter().zip(b).map(|(x, y)| (*x - *y) * (*x - *y))).sqrt()
}

/// `|beta - beta_hat| + Σ_t |theta_t - theta_hat_t|` with poses compared in
/// their flattened 6-DoF encoding. Shape comes from frame 0; sequences
/// without betas contribute no shape term.
pub fn loss_smpl<T: Real>(pred: &MotionSequence<T>, gt: &MotionSequence<T>) -> Result<T> {
    if pred.len() != gt.len() || pred.joint_count() != gt.joint_count() {
        return Err(Error::shape(
            "SMPL loss layout",
            format!("{} frames x {} joints", gt.len(), gt.joint_count()),
            format!("{} frames x {} joints", pred.len(), pred.joint_count()),
        ));
    }
    if pred.has_betas() != gt.has_betas() {
        return Err(Error::shape("SMPL loss betas", gt.has_betas(), pred.has_betas()));
    }
    let shape = match (pred.frames.first().and_then(|f| f.betas.as_ref()), gt.frames.first().and_then(|f| f.betas.as_ref())) {
        (Some(a), Some(b)) => l2(a, b),
        _ => T::zero(),
    };
    let mut terms = vec![shape];
    for (p, g) in pred.frames.iter().zip(&gt.frames) {
        terms.push(l2(&p.sixd_row()?, &g.sixd_row()?));
    }
    Ok(stable_sum(terms))
}

/// Per-frame metric breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerFrameMetrics {
    pub mpjpe_mm: Vec<f64>,
    pub pa_mpjpe_mm: Vec<f64>,
    /// Interior frames only (`T - 2` entries).
    pub accel_err_mm_s2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    pub accel_err_mm_s2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_frame: Option<PerFrameMetrics>,
}

/// Computes all three metrics; `T >= 3` and `J >= 3` are required.
pub fn evaluate<T: Real>(pred: &JointSequence<T>, gt: &JointSequence<T>, per_frame: bool) -> Result<MetricsReport> {
    let m = mpjpe_per_frame(pred, gt)?;
    let pa = pa_mpjpe_per_frame(pred, gt)?;
    let acc = accel_error_per_frame(pred, gt)?;
    let to64 = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
    let mean = |v: &[f64]| stable_sum(v.iter().copied()) / v.len() as f64;
    let (m, pa, acc) = (to64(&m), to64(&pa), to64(&acc));
    Ok(MetricsReport {
        mpjpe_mm: mean(&m),
        pa_mpjpe_mm: mean(&pa),
        accel_err_mm_s2: mean(&acc),
        per_frame: per_frame.then_some(PerFrameMetrics { mpjpe_mm: m, pa_mpjpe_mm: pa, accel_err_mm_s2: acc }),
    })
}

/// Sum of squared residuals `Σ |s R p + t - g|²` for a transform.
pub fn alignment_residual<T: Real>(pred_frame: &[Vec3<T>], gt_frame: &[Vec3<T>], tf: &SimilarityTransform<T>) -> Result<T> {
    let mut terms = Vec::with_capacity(pred_frame.len());
    for (p, g) in pred_frame.iter().zip(gt_frame) {
        let d = norm3(sub3(tf.apply(*p)?, *g));
        terms.push(d * d);
    }
    Ok(stable_sum(terms))
}
