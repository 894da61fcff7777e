//! Pose frames and motion sequences.

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::rotations::{sixd_decode, Representation, Rotation};
use crate::scalar::Real;

/// Number of SMPL shape coefficients.
pub const NUM_BETAS: usize = 10;

/// One time step of body pose. `rotations[0]` is the root orientation in the
/// world frame; every other rotation is local to its parent joint.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFrame<T> {
    pub rotations: Vec<Rotation<T>>,
    pub betas: Option<Vec<T>>,
    pub root_translation: Option<Vec3<T>>,
}

impl<T: Real> PoseFrame<T> {
    pub fn identity(joint_count: usize, repr: Representation) -> Self {
        Self { rotations: vec![Rotation::identity(repr); joint_count], betas: None, root_translation: None }
    }

    pub fn joint_count(&self) -> usize {
        self.rotations.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = &self.betas {
            if b.len() != NUM_BETAS {
                return Err(Error::shape("pose frame betas", NUM_BETAS, b.len()));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("betas"));
            }
        }
        if self.root_translation.is_some_and(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("root translation"));
        }
        if self.rotations.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("joint rotation"));
        }
        Ok(())
    }

    /// Converts every joint rotation to `repr`.
    pub fn converted(&self, repr: Representation) -> Result<Self> {
        Ok(Self {
            rotations: self.rotations.iter().map(|r| r.convert(repr)).collect::<Result<_>>()?,
            betas: self.betas.clone(),
            root_translation: self.root_translation,
        })
    }

    /// Flattened 6-DoF encoding of all joints (`joint_count * 6` values).
    pub fn sixd_row(&self) -> Result<Vec<T>> {
        let mut row = Vec::with_capacity(self.rotations.len() * 6);
        for r in &self.rotations {
            match r.convert(Representation::SixD)? {
                Rotation::SixD(v) => row.extend_from_slice(&v),
                _ => unreachable!("converted to sixd"),
            }
        }
        Ok(row)
    }

    /// Inverse of [`PoseFrame::sixd_row`]: Gram-Schmidt decodes each joint and
    /// stores it in `repr`.
    pub fn from_sixd_row(row: &[T], repr: Representation) -> Result<Self> {
        if !row.len().is_multiple_of(6) {
            return Err(Error::shape("6-DoF pose row", "multiple of 6", row.len()));
        }
        let rotations = row
            .chunks_exact(6)
            .map(|c| {
                let m = sixd_decode(&std::array::from_fn(|i| c[i]))?;
                Rotation::from_matrix(&m, repr)
            })
            .collect::<Result<_>>()?;
        Ok(Self { rotations, betas: None, root_translation: None })
    }

    pub fn cast<U: Real>(&self) -> PoseFrame<U> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        PoseFrame {
            rotations: self.rotations.iter().map(|r| r.cast()).collect(),
            betas: self.betas.as_ref().map(|b| b.iter().map(c).collect()),
            root_translation: self.root_translation.map(|t| t.each_ref().map(c)),
        }
    }
}

/// Ordered pose frames sampled at `fps`, with a provenance name.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<T> {
    pub frames: Vec<PoseFrame<T>>,
    pub fps: T,
    pub name: String,
}

impl<T: Real> MotionSequence<T> {
    pub fn new(frames: Vec<PoseFrame<T>>, fps: T, name: impl Into<String>) -> Result<Self> {
        let seq = Self { frames, fps, name: name.into() };
        seq.validate()?;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joint_count())
    }

    pub fn has_betas(&self) -> bool {
        self.frames.first().is_some_and(|f| f.betas.is_some())
    }

    pub fn has_translation(&self) -> bool {
        self.frames.first().is_some_and(|f| f.root_translation.is_some())
    }

    /// Checks `fps > 0`, at least one frame, and a uniform frame layout.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > T::zero() && self.fps.is_finite()) {
            return Err(Error::InvalidSequence(format!("fps must be positive, got {}", self.fps)));
        }
        let Some(first) = self.frames.first() else {
            return Err(Error::InvalidSequence("sequence has no frames".into()));
        };
        let (j, b, t) = (first.joint_count(), first.betas.is_some(), first.root_translation.is_some());
        if j == 0 {
            return Err(Error::InvalidSequence("frames have no joints".into()));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.joint_count() != j || f.betas.is_some() != b || f.root_translation.is_some() != t {
                return Err(Error::InvalidSequence(format!("frame {i} layout differs from frame 0")));
            }
            f.validate().map_err(|e| Error::InvalidSequence(format!("frame {i}: {e}")))?;
        }
        Ok(())
    }

    /// Like [`MotionSequence::validate`] and additionally requires two frames.
    pub fn validate_temporal(&self) -> Result<()> {
        self.validate()?;
        if self.frames.len() < 2 {
            return Err(Error::InvalidSequence(format!("temporal operation needs >= 2 frames, got {}", self.frames.len())));
        }
        Ok(())
    }

    pub fn converted(&self, repr: Representation) -> Result<Self> {
        Ok(Self { frames: self.frames.iter().map(|f| f.converted(repr)).collect::<Result<_>>()?, fps: self.fps, name: self.name.clone() })
    }

    /// `T x (joint_count * 6)` row-major matrix of 6-DoF encoded poses.
    pub fn sixd_rows(&self) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.len() * self.joint_count() * 6);
        for f in &self.frames {
            out.extend(f.sixd_row()?);
        }
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> MotionSequence<U> {
        MotionSequence {
            frames: self.frames.iter().map(|f| f.cast()).collect(),
            fps: U::lit(self.fps.to_f64_lossy()),
            name: self.name.clone(),
        }
    }
}
