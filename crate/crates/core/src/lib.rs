//! Numerics for human-motion modeling: rotation representations, skeletal
//! forward kinematics, motion augmentation, pose metrics, temporal smoothing
//! and windowing, and a motion variational autoencoder.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases at the crate root fix it to `f64`.

pub mod augmentation;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod motion_vae;
pub mod rotations;
pub mod scalar;
pub mod skeleton;
pub mod smoothing;

pub use error::{Error, Result};
pub use rotations::Representation;
pub use scalar::Real;

pub type Rotation = rotations::Rotation<f64>;
pub type PoseFrame = motion::PoseFrame<f64>;
pub type MotionSequence = motion::MotionSequence<f64>;
pub type Skeleton = skeleton::Skeleton<f64>;
pub type JointSequence = metrics::JointSequence<f64>;
pub type SimilarityTransform = metrics::SimilarityTransform<f64>;
pub use metrics::MetricsReport;
pub type VaeModel = motion_vae::VaeModel<f64>;
pub type LatentCode = motion_vae::LatentCode<f64>;

pub type Rotation32 = rotations::Rotation<f32>;
pub type PoseFrame32 = motion::PoseFrame<f32>;
pub type MotionSequence32 = motion::MotionSequence<f32>;
pub type Skeleton32 = skeleton::Skeleton<f32>;
pub type JointSequence32 = metrics::JointSequence<f32>;
