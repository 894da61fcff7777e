//! Motion augmentations: speed change by resampling, left/right mirroring, and
//! a random global root rotation, plus their Cartesian expansion over a
//! dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::PoseFrame;
use crate::rotations::{random_quat, slerp, Rotation};
use crate::scalar::Real;
use crate::skeleton::Skeleton;

pub use crate::motion::MotionSequence;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Each factor yields one resampled variant; empty means no resampling.
    pub speed_factors: Vec<f64>,
    pub enable_flip: bool,
    /// Number of random-root-rotation variants per sequence; 0 disables.
    pub root_rotation_samples: usize,
    pub rng_seed: u64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.speed_factors.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::invalid("speed_factors", format!("factor {f} is not positive")));
        }
        Ok(())
    }
}

/// Resamples `seq` so that playback at the unchanged fps runs `factor` times
/// faster. Output frame `i` samples input time `i * factor` (clamped to the
/// last frame): rotations by shortest-arc slerp, root translation linearly.
pub fn resample<T: Real>(seq: &MotionSequence<T>, factor: f64) -> Result<MotionSequence<T>> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid("factor", format!("speed factor must be positive, got {factor}")));
    }
    seq.validate_temporal()?;
    let n_in = seq.len();
    let n_out = ((n_in as f64 / factor).round() as usize).max(2);
    let last = (n_in - 1) as f64;
    let mut frames = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let s = (i as f64 * factor).clamp(0.0, last);
        let lo = s.floor() as usize;
        let w = s - lo as f64;
        if w == 0.0 {
            frames.push(seq.frames[lo].clone());
            continue;
        }
        let (a, b) = (&seq.frames[lo], &seq.frames[lo + 1]);
        let wt = T::lit(w);
        let rotations = a.rotations.iter().zip(&b.rotations).map(|(ra, rb)| slerp(ra, rb, wt)).collect::<Result<_>>()?;
        let root_translation = match (a.root_translation, b.root_translation) {
            (Some(ta), Some(tb)) => Some(std::array::from_fn(|k| ta[k] + (tb[k] - ta[k]) * wt)),
            _ => None,
        };
        frames.push(PoseFrame { rotations, betas: a.betas.clone(), root_translation });
    }
    Ok(MotionSequence { frames, fps: seq.fps, name: seq.name.clone() })
}

/// Conjugates a rotation by the sagittal mirror `M = diag(-1, 1, 1)`:
/// `R -> M R M`. Implemented per representation by sign flips, so applying
/// it twice is bitwise the identity.
pub fn mirror_rotation<T: Real>(r: &Rotation<T>) -> Rotation<T> {
    match *r {
        Rotation::AxisAngle([x, y, z]) => Rotation::AxisAngle([x, -y, -z]),
        Rotation::Quaternion([w, x, y, z]) => Rotation::Quaternion([w, x, -y, -z]),
        Rotation::Matrix(m) => {
            let mut out = m;
            for idx in [1, 2, 3, 6] {
                out[idx] = -out[idx];
            }
            Rotation::Matrix(out)
        }
        Rotation::SixD([a, b, c, d, e, f]) => Rotation::SixD([a, -b, -c, -d, e, f]),
    }
}

/// Mirrors the motion across the sagittal (x = 0) plane: joint rotations are
/// swapped through the skeleton's mirror map and conjugated by the mirror,
/// and the root translation's x component is negated.
pub fn flip_lr<T: Real, S: Real>(seq: &MotionSequence<T>, skel: &Skeleton<S>) -> Result<MotionSequence<T>> {
    let mirror = skel.mirror_map();
    if mirror.len() != seq.joint_count() {
        return Err(Error::shape("mirror map", seq.joint_count(), mirror.len()));
    }
    let frames = seq
        .frames
        .iter()
        .map(|f| PoseFrame {
            rotations: mirror.iter().map(|&m| mirror_rotation(&f.rotations[m])).collect(),
            betas: f.betas.clone(),
            root_translation: f.root_translation.map(|t| [-t[0], t[1], t[2]]),
        })
        .collect();
    Ok(MotionSequence { frames, fps: seq.fps, name: seq.name.clone() })
}

/// Left-multiplies every root rotation (and rotates the root translation)
/// by one rotation drawn uniformly from SO(3) with the given seed. Non-root
/// joints are untouched.
pub fn random_root_rotation<T: Real>(seq: &MotionSequence<T>, rng_seed: u64) -> Result<MotionSequence<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let q = random_quat::<T, _>(&mut rng);
    apply_root_rotation(seq, &Rotation::Quaternion(q.to_array()))
}

/// Left-applies `rot` to the root of every frame.
pub fn apply_root_rotation<T: Real>(seq: &MotionSequence<T>, rot: &Rotation<T>) -> Result<MotionSequence<T>> {
    let q = rot.to_quat()?;
    let m = rot.to_matrix()?;
    let mut out = seq.clone();
    for f in &mut out.frames {
        let root = &f.rotations[0];
        f.rotations[0] = Rotation::from_quat(q.mul(root.to_quat()?), root.representation())?;
        f.root_translation = f.root_translation.map(|t| m.mul_vec(t));
    }
    Ok(out)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for one output sequence, a pure function of the base seed and the
/// variant coordinates so results do not depend on scheduling.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(splitmix64(base), |acc, c| splitmix64(acc ^ splitmix64(*c)))
}

#[derive(Debug, Clone, Copy)]
struct Variant {
    seq: usize,
    speed: Option<usize>,
    flip: bool,
    rr: Option<usize>,
}

/// Cartesian expansion of the enabled augmentations, applied in the order
/// resample, flip, root rotation. Output is ordered by input sequence, then
/// speed factor, then flip (original first), then root-rotation sample.
/// Names record the chain, e.g. `walk+fr2+lr+rr1f3a...`.
pub fn augment_dataset<T: Real, S: Real>(
    seqs: &[MotionSequence<T>],
    cfg: &AugmentConfig,
    skel: &Skeleton<S>,
) -> Result<Vec<MotionSequence<T>>> {
    cfg.validate()?;
    let speeds: Vec<Option<usize>> =
        if cfg.speed_factors.is_empty() { vec![None] } else { (0..cfg.speed_factors.len()).map(Some).collect() };
    let flips: &[bool] = if cfg.enable_flip { &[false, true] } else { &[false] };
    let rrs: Vec<Option<usize>> =
        if cfg.root_rotation_samples == 0 { vec![None] } else { (0..cfg.root_rotation_samples).map(Some).collect() };

    let mut variants = Vec::new();
    for seq in 0..seqs.len() {
        for &speed in &speeds {
            for &flip in flips {
                for &rr in &rrs {
                    variants.push(Variant { seq, speed, flip, rr });
                }
            }
        }
    }

    variants
        .into_par_iter()
        .map(|v| {
            let src = &seqs[v.seq];
            let mut name = src.name.clone();
            let mut out = match v.speed {
                Some(s) => {
                    let f = cfg.speed_factors[s];
                    name.push_str(&format!("+fr{f}"));
                    resample(src, f)?
                }
                None => src.clone(),
            };
            if v.flip {
                out = flip_lr(&out, skel)?;
                name.push_str("+lr");
            }
            if let Some(k) = v.rr {
                let seed = derive_seed(cfg.rng_seed, &[v.seq as u64, v.speed.map_or(u64::MAX, |s| s as u64), v.flip as u64, k as u64]);
                out = random_root_rotation(&out, seed)?;
                name.push_str(&format!("+rr{seed:016x}"));
            }
            out.name = name;
            out.validate()?;
            Ok(out)
        })
        .collect()
}
