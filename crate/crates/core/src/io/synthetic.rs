//! Deterministic synthetic motion with known ground truth.
//!
//! * `constant`: every joint holds a fixed random rotation of angle
//!   `amplitude` about a random axis.
//! * `single_axis_sine`: joint `joint` rotates about `axis` by
//!   `amplitude * sin(2π · frequency · t / fps)`; all other joints identity.
//! * `multi_joint_sine`: every joint `j` rotates about its own random axis by
//!   `A_j sin(2π f_j t / fps + φ_j)` with `A_j ∈ [amplitude/2, amplitude]`,
//!   `f_j ∈ [frequency/2, 3·frequency/2]`, `φ_j ∈ [0, 2π)`. The components
//!   are returned by [`sine_components`].
//! * `random_walk_slerp`: keyframes every `keyframe_interval` frames, each
//!   the previous one composed with a Gaussian axis-angle step of standard
//!   deviation `step_std` per component; frames in between are slerped.
//!
//! When `with_translation` is set the root sits at `(0, root_height, 0)`,
//! except for `random_walk_slerp` where it also random-walks in the ground
//! plane with linear interpolation between keyframes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm3, scale3, Vec3};
use crate::motion::{MotionSequence, PoseFrame};
use crate::rotations::{axis_angle, random_quat, slerp, Representation, Rotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Constant,
    SingleAxisSine,
    MultiJointSine,
    RandomWalkSlerp,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [Self::Constant, Self::SingleAxisSine, Self::MultiJointSine, Self::RandomWalkSlerp];

    pub fn name(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::SingleAxisSine => "single_axis_sine",
            Self::MultiJointSine => "multi_joint_sine",
            Self::RandomWalkSlerp => "random_walk_slerp",
        }
    }
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::invalid(
                "kind",
                format!("unknown synthetic kind `{s}` (expected constant, single_axis_sine, multi_joint_sine or random_walk_slerp)"),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub frames: usize,
    pub fps: f64,
    pub joint_count: usize,
    /// Radians.
    pub amplitude: f64,
    /// Hertz.
    pub frequency: f64,
    /// Driven joint of `single_axis_sine`.
    pub joint: usize,
    pub axis: [f64; 3],
    /// Radians per keyframe step and component, `random_walk_slerp` only.
    pub step_std: f64,
    pub keyframe_interval: usize,
    pub with_translation: bool,
    pub root_height: f64,
    pub representation: Representation,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            frames: 120,
            fps: 30.0,
            joint_count: crate::skeleton::SMPL_JOINT_COUNT,
            amplitude: 0.5,
            frequency: 1.0,
            joint: 1,
            axis: [1.0, 0.0, 0.0],
            step_std: 0.15,
            keyframe_interval: 10,
            with_translation: true,
            root_height: 0.9,
            representation: Representation::AxisAngle,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self, kind: SyntheticKind) -> Result<()> {
        if self.frames < 1 {
            return Err(Error::invalid("frames", "must be at least 1"));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::invalid("fps", format!("must be positive, got {}", self.fps)));
        }
        if self.joint_count < 1 {
            return Err(Error::invalid("joint_count", "must be at least 1"));
        }
        for (name, v) in [("amplitude", self.amplitude), ("frequency", self.frequency), ("step_std", self.step_std)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.root_height.is_finite() {
            return Err(Error::invalid("root_height", "must be finite"));
        }
        if kind == SyntheticKind::SingleAxisSine {
            if self.joint >= self.joint_count {
                return Err(Error::invalid("joint", format!("{} out of range for {} joints", self.joint, self.joint_count)));
            }
            if !(norm3(self.axis) > 0.0) {
                return Err(Error::invalid("axis", "must be a nonzero finite vector"));
            }
        }
        if kind == SyntheticKind::RandomWalkSlerp && self.keyframe_interval < 1 {
            return Err(Error::invalid("keyframe_interval", "must be at least 1"));
        }
        Ok(())
    }
}

/// One sinusoidal joint track: `angle(t) = amplitude * sin(2π frequency_hz t / fps + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub joint: usize,
    pub axis: [f64; 3],
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
}

impl SineComponent {
    pub fn angle(&self, frame: usize, fps: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * self.frequency_hz * frame as f64 / fps + self.phase).sin()
    }
}

fn unit(v: Vec3<f64>) -> Vec3<f64> {
    scale3(v, 1.0 / norm3(v))
}

fn random_axis(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v: Vec3<f64> = std::array::from_fn(|_| StandardNormal.sample(rng));
        if norm3(v) > 1e-6 {
            return unit(v);
        }
    }
}

/// Sinusoid tracks of the sine kinds; empty for the others.
pub fn sine_components(kind: SyntheticKind, p: &SyntheticParams, seed: u64) -> Result<Vec<SineComponent>> {
    p.validate(kind)?;
    Ok(match kind {
        SyntheticKind::SingleAxisSine => {
            vec![SineComponent { joint: p.joint, axis: unit(p.axis), amplitude: p.amplitude, frequency_hz: p.frequency, phase: 0.0 }]
        }
        SyntheticKind::MultiJointSine => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..p.joint_count)
                .map(|j| SineComponent {
                    joint: j,
                    axis: random_axis(&mut rng),
                    amplitude: p.amplitude * rng.random_range(0.5..=1.0),
                    frequency_hz: p.frequency * rng.random_range(0.5..=1.5),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                })
                .collect()
        }
        _ => Vec::new(),
    })
}

pub fn generate_synthetic(kind: SyntheticKind, p: &SyntheticParams, seed: u64) -> Result<MotionSequence<f64>> {
    p.validate(kind)?;
    let repr = p.representation;
    let j = p.joint_count;
    let root = p.with_translation.then_some([0.0, p.root_height, 0.0]);
    let frames: Vec<PoseFrame<f64>> = match kind {
        SyntheticKind::Constant => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pose: Vec<Rotation<f64>> =
                (0..j).map(|_| axis_angle(random_axis(&mut rng), p.amplitude).convert(repr)).collect::<Result<_>>()?;
            (0..p.frames).map(|_| PoseFrame { rotations: pose.clone(), betas: None, root_translation: root }).collect()
        }
        SyntheticKind::SingleAxisSine | SyntheticKind::MultiJointSine => {
            let comps = sine_components(kind, p, seed)?;
            (0..p.frames)
                .map(|t| {
                    let mut f = PoseFrame::identity(j, repr);
                    for c in &comps {
                        f.rotations[c.joint] = axis_angle(c.axis, c.angle(t, p.fps)).convert(repr)?;
                    }
                    f.root_translation = root;
                    Ok(f)
                })
                .collect::<Result<_>>()?
        }
        SyntheticKind::RandomWalkSlerp => random_walk(p, seed)?,
    };
    let name = format!("{}-s{seed}", kind.name());
    MotionSequence::new(frames, p.fps, name)
}

fn random_walk(p: &SyntheticParams, seed: u64) -> Result<Vec<PoseFrame<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = p.keyframe_interval;
    let keys = p.frames.div_ceil(k) + 1;
    let mut key_poses: Vec<Vec<Rotation<f64>>> = Vec::with_capacity(keys);
    let mut key_roots: Vec<Vec3<f64>> = Vec::with_capacity(keys);
    let mut pose: Vec<Rotation<f64>> =
        (0..p.joint_count).map(|_| Rotation::from_quat(random_quat(&mut rng), Representation::Quaternion)).collect::<Result<_>>()?;
    let mut root = [0.0, p.root_height, 0.0];
    for _ in 0..keys {
        key_poses.push(pose.clone());
        key_roots.push(root);
        pose = pose
            .iter()
            .map(|r| {
                let step: Vec3<f64> = std::array::from_fn(|_| p.step_std * Distribution::<f64>::sample(&StandardNormal, &mut rng));
                r.compose(&Rotation::AxisAngle(step))
            })
            .collect::<Result<_>>()?;
        let (dx, dz): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        root[0] += 0.05 * dx;
        root[2] += 0.05 * dz;
    }
    (0..p.frames)
        .map(|t| {
            let (i, frac) = (t / k, (t % k) as f64 / k as f64);
            let rotations = key_poses[i]
                .iter()
                .zip(&key_poses[i + 1])
                .map(|(a, b)| slerp(a, b, frac)?.convert(p.representation))
                .collect::<Result<_>>()?;
            let (a, b) = (key_roots[i], key_roots[i + 1]);
            let root_translation = p.with_translation.then(|| std::array::from_fn(|d| a[d] + (b[d] - a[d]) * frac));
            Ok(PoseFrame { rotations, betas: None, root_translation })
        })
        .collect()
}
