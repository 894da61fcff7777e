//! Slerp average filter and fixed-width temporal windowing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionSequence, PoseFrame};
use crate::rotations::slerp;
use crate::scalar::Real;

/// Default temporal window length in frames.
pub const DEFAULT_WINDOW: usize = 90;

/// Replaces each joint rotation at `t < T-1` by `slerp(q_t, q_{t+1}, ratio)`,
/// reading the original (unfiltered) neighbours. The last frame and all root
/// translations are left as they are.
pub fn slerp_average_filter<T: Real>(seq: &MotionSequence<T>, ratio: T) -> Result<MotionSequence<T>> {
    if !(ratio >= T::zero() && ratio <= T::one()) {
        return Err(Error::invalid("ratio", format!("filter ratio {ratio} outside [0, 1]")));
    }
    seq.validate_temporal()?;
    if ratio == T::zero() {
        return Ok(seq.clone());
    }
    let mut out = seq.clone();
    for (t, pair) in seq.frames.windows(2).enumerate() {
        let rotations = pair[0].rotations.iter().zip(&pair[1].rotations).map(|(a, b)| slerp(a, b, ratio)).collect::<Result<Vec<_>>>()?;
        out.frames[t].rotations = rotations;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSpec {
    pub width: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { width: DEFAULT_WINDOW, stride: DEFAULT_WINDOW }
    }
}

impl WindowSpec {
    pub fn new(width: usize, stride: usize) -> Result<Self> {
        let spec = Self { width, stride };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::invalid("width", format!("window width must be >= 2, got {}", self.width)));
        }
        if self.stride < 1 || self.stride > self.width {
            return Err(Error::invalid("stride", format!("stride must be in [1, {}], got {}", self.width, self.stride)));
        }
        Ok(())
    }

    /// Start frames of the windows covering `frames` input frames.
    pub fn starts(&self, frames: usize) -> Vec<usize> {
        let count = if frames <= self.width { 1 } else { (frames - self.width).div_ceil(self.stride) + 1 };
        (0..count).map(|k| k * self.stride).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowEntry {
    pub start: usize,
    /// Real frames in the window; the remaining `padding` repeat the last one.
    pub valid: usize,
    pub padding: usize,
}

/// Where each window came from, enough to undo [`sliding_windows`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowIndex {
    pub source_name: String,
    pub source_frames: usize,
    pub fps: f64,
    pub width: usize,
    pub stride: usize,
    pub windows: Vec<WindowEntry>,
}

/// Cuts `seq` into windows of exactly `spec.width` frames at `spec.stride`
/// spacing. A final partial window is padded by repeating the last frame.
pub fn sliding_windows<T: Real>(seq: &MotionSequence<T>, spec: &WindowSpec) -> Result<(Vec<MotionSequence<T>>, WindowIndex)> {
    spec.validate()?;
    seq.validate_temporal()?;
    let n = seq.len();
    let mut windows = Vec::new();
    let mut entries = Vec::new();
    for (k, start) in spec.starts(n).into_iter().enumerate() {
        let valid = spec.width.min(n - start);
        let padding = spec.width - valid;
        let mut frames = seq.frames[start..start + valid].to_vec();
        let last = frames.last().cloned().expect("window has at least one frame");
        frames.extend(std::iter::repeat_n(last, padding));
        windows.push(MotionSequence { frames, fps: seq.fps, name: format!("{}#w{k}", seq.name) });
        entries.push(WindowEntry { start, valid, padding });
    }
    let index = WindowIndex {
        source_name: seq.name.clone(),
        source_frames: n,
        fps: seq.fps.to_f64_lossy(),
        width: spec.width,
        stride: spec.stride,
        windows: entries,
    };
    Ok((windows, index))
}

/// How frames covered by more than one window are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapPolicy {
    #[default]
    TakeFirst,
    TakeLast,
    /// Linear crossfade from the earlier windows to the incoming one, slerp
    /// per joint and lerp for root translation.
    SlerpBlend,
}

impl std::str::FromStr for OverlapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "take_first" => Ok(Self::TakeFirst),
            "take_last" => Ok(Self::TakeLast),
            "slerp_blend" => Ok(Self::SlerpBlend),
            _ => Err(Error::invalid("overlap_policy", format!("unknown policy `{s}`"))),
        }
    }
}

fn blend_frames<T: Real>(a: &PoseFrame<T>, b: &PoseFrame<T>, w: T) -> Result<PoseFrame<T>> {
    let rotations =
        a.rotations.iter().zip(&b.rotations).map(|(x, y)| if x == y { Ok(*x) } else { slerp(x, y, w) }).collect::<Result<_>>()?;
    let root_translation = match (a.root_translation, b.root_translation) {
        (Some(x), Some(y)) => Some(std::array::from_fn(|k| x[k] + (y[k] - x[k]) * w)),
        (x, _) => x,
    };
    Ok(PoseFrame { rotations, betas: a.betas.clone(), root_translation })
}

/// Reassembles windows produced by [`sliding_windows`] (or windows of the
/// same layout, e.g. model reconstructions). Padding is dropped;
/// non-overlapping frames are copied verbatim.
pub fn stitch_windows<T: Real>(windows: &[MotionSequence<T>], index: &WindowIndex, policy: OverlapPolicy) -> Result<MotionSequence<T>> {
    let bad = |msg: String| Error::InconsistentWindows(msg);
    WindowSpec::new(index.width, index.stride).map_err(|e| bad(e.to_string()))?;
    if windows.len() != index.windows.len() {
        return Err(bad(format!("index lists {} windows, got {}", index.windows.len(), windows.len())));
    }
    let spec = WindowSpec { width: index.width, stride: index.stride };
    let starts = spec.starts(index.source_frames);
    if starts.len() != index.windows.len() {
        return Err(bad(format!("{} frames need {} windows, index lists {}", index.source_frames, starts.len(), index.windows.len())));
    }
    let mut out: Vec<Option<PoseFrame<T>>> = vec![None; index.source_frames];
    let mut covered = 0usize;
    for (k, ((w, e), start)) in windows.iter().zip(&index.windows).zip(starts).enumerate() {
        let expect_valid = index.width.min(index.source_frames - start);
        if e.start != start || e.valid != expect_valid || e.valid + e.padding != index.width {
            return Err(bad(format!("window {k}: entry {e:?} does not match width {} / stride {}", index.width, index.stride)));
        }
        if w.len() != index.width {
            return Err(bad(format!("window {k} has {} frames, expected {}", w.len(), index.width)));
        }
        let overlap = covered.saturating_sub(start);
        for i in 0..e.valid {
            let g = start + i;
            let incoming = &w.frames[i];
            out[g] = Some(match (out[g].take(), policy) {
                (None, _) => incoming.clone(),
                (Some(prev), OverlapPolicy::TakeFirst) => prev,
                (Some(_), OverlapPolicy::TakeLast) => incoming.clone(),
                (Some(prev), OverlapPolicy::SlerpBlend) => {
                    let weight = T::lit((i + 1) as f64 / (overlap + 1) as f64);
                    blend_frames(&prev, incoming, weight)?
                }
            });
        }
        covered = covered.max(start + e.valid);
    }
    let frames = out
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| bad(format!("frame {i} is not covered by any window"))))
        .collect::<Result<Vec<_>>>()?;
    MotionSequence::new(frames, T::lit(index.fps), index.source_name.clone())
}
