//! Motion files in two encodings.
//!
//! Binary, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MVKT"
//! 4       2     u16 format version (1)
//! 6       1     representation tag: 0 axis_angle, 1 quaternion, 2 matrix, 3 sixd
//! 7       1     payload precision in bytes: 4 (f32) or 8 (f64)
//! 8       1     flags: bit 0 betas present, bit 1 root translation present
//! 9       1     reserved, 0
//! 10      4     u32 joint count
//! 14      8     u64 frame count
//! 22      8     f64 fps
//! 30      4     u32 name length in bytes, then the UTF-8 name
//! ...           frames, each: joint_count * dim rotation values,
//!               10 betas if flagged, 3 translation values if flagged
//! ```
//!
//! JSON mirrors the same fields:
//! `{"format": "MVKT", "version": 1, "header": {...}, "payload": {"frames": [...]}}`.
//! Reals are written in shortest round-trip decimal form, so text files are
//! lossless too.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionSequence, PoseFrame, NUM_BETAS};
use crate::rotations::{Representation, Rotation};

pub const MOTION_MAGIC: [u8; 4] = *b"MVKT";
pub const MOTION_VERSION: u16 = 1;
const FIXED_HEADER_LEN: usize = 34;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionFormat {
    #[default]
    Json,
    Bin,
}

impl std::str::FromStr for MotionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "bin" => Ok(Self::Bin),
            other => Err(Error::invalid("format", format!("unknown format `{other}` (expected json or bin)"))),
        }
    }
}

/// Payload precision of binary files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Self::F32),
            "f64" => Ok(Self::F64),
            other => Err(Error::invalid("precision", format!("unknown precision `{other}` (expected f32 or f64)"))),
        }
    }
}

impl Precision {
    fn bytes(self) -> u8 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionHeader {
    pub fps: f64,
    pub joint_count: usize,
    pub representation: Representation,
    pub frame_count: usize,
    pub has_betas: bool,
    pub has_translation: bool,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub rotations: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_translation: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionPayload {
    pub frames: Vec<FrameRecord>,
}

/// In-memory form of a motion file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFile {
    pub format: String,
    pub version: u16,
    pub header: MotionHeader,
    pub payload: MotionPayload,
}

fn tag(r: Representation) -> u8 {
    match r {
        Representation::AxisAngle => 0,
        Representation::Quaternion => 1,
        Representation::Matrix => 2,
        Representation::SixD => 3,
    }
}

fn from_tag(t: u8) -> Result<Representation> {
    Ok(match t {
        0 => Representation::AxisAngle,
        1 => Representation::Quaternion,
        2 => Representation::Matrix,
        3 => Representation::SixD,
        other => return Err(Error::HeaderMismatch(format!("unknown representation tag {other}"))),
    })
}

/// Representation shared by every rotation, or axis-angle when they differ.
fn storage_representation(seq: &MotionSequence<f64>) -> Representation {
    let first = seq.frames.first().and_then(|f| f.rotations.first()).map(|r| r.representation());
    match first {
        Some(r) if seq.frames.iter().all(|f| f.rotations.iter().all(|x| x.representation() == r)) => r,
        _ => Representation::AxisAngle,
    }
}

impl MotionFile {
    pub fn from_sequence(seq: &MotionSequence<f64>) -> Result<Self> {
        seq.validate()?;
        let repr = storage_representation(seq);
        let frames = seq
            .frames
            .iter()
            .map(|f| {
                Ok(FrameRecord {
                    rotations: f.rotations.iter().map(|r| Ok(r.convert(repr)?.components().to_vec())).collect::<Result<_>>()?,
                    betas: f.betas.clone(),
                    root_translation: f.root_translation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format: String::from_utf8_lossy(&MOTION_MAGIC).into_owned(),
            version: MOTION_VERSION,
            header: MotionHeader {
                fps: seq.fps,
                joint_count: seq.joint_count(),
                representation: repr,
                frame_count: seq.len(),
                has_betas: seq.has_betas(),
                has_translation: seq.has_translation(),
                name: seq.name.clone(),
            },
            payload: MotionPayload { frames },
        })
    }

    pub fn to_sequence(&self) -> Result<MotionSequence<f64>> {
        if self.format.as_bytes() != MOTION_MAGIC {
            let mut found = [0u8; 4];
            for (d, s) in found.iter_mut().zip(self.format.bytes()) {
                *d = s;
            }
            return Err(Error::BadMagic { expected: MOTION_MAGIC, found });
        }
        if self.version != MOTION_VERSION {
            return Err(Error::UnsupportedVersion { found: self.version.into(), supported: MOTION_VERSION.into() });
        }
        let h = &self.header;
        if self.payload.frames.len() != h.frame_count {
            return Err(Error::HeaderMismatch(format!(
                "header frame_count {} but payload has {} frames",
                h.frame_count,
                self.payload.frames.len()
            )));
        }
        let frames = self
            .payload
            .frames
            .iter()
            .enumerate()
            .map(|(t, f)| {
                if f.rotations.len() != h.joint_count {
                    return Err(Error::HeaderMismatch(format!(
                        "frame {t}: header joint_count {} but {} rotations",
                        h.joint_count,
                        f.rotations.len()
                    )));
                }
                if f.betas.is_some() != h.has_betas || f.root_translation.is_some() != h.has_translation {
                    return Err(Error::HeaderMismatch(format!("frame {t}: optional fields disagree with header flags")));
                }
                let rotations = f
                    .rotations
                    .iter()
                    .map(|c| Rotation::from_components(h.representation, c))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::InvalidSequence(format!("frame {t}: {e}")))?;
                Ok(PoseFrame { rotations, betas: f.betas.clone(), root_translation: f.root_translation })
            })
            .collect::<Result<Vec<_>>>()?;
        MotionSequence::new(frames, h.fps, h.name.clone())
    }
}

pub fn encode_json(seq: &MotionSequence<f64>) -> Result<String> {
    let file = MotionFile::from_sequence(seq)?;
    Ok(serde_json::to_string_pretty(&file).expect("motion file serializes"))
}

pub fn decode_json(text: &str, origin: impl Into<PathBuf>) -> Result<MotionSequence<f64>> {
    let file: MotionFile = serde_json::from_str(text).map_err(|source| Error::Json { path: origin.into(), source })?;
    file.to_sequence()
}

pub fn encode_binary(seq: &MotionSequence<f64>, precision: Precision) -> Result<Vec<u8>> {
    let file = MotionFile::from_sequence(seq)?;
    let h = &file.header;
    let dim = h.representation.dim();
    let per_frame = h.joint_count * dim + if h.has_betas { NUM_BETAS } else { 0 } + if h.has_translation { 3 } else { 0 };
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + h.name.len() + h.frame_count * per_frame * precision.bytes() as usize);
    out.extend_from_slice(&MOTION_MAGIC);
    out.extend_from_slice(&MOTION_VERSION.to_le_bytes());
    out.push(tag(h.representation));
    out.push(precision.bytes());
    out.push(u8::from(h.has_betas) | (u8::from(h.has_translation) << 1));
    out.push(0);
    out.extend_from_slice(&(h.joint_count as u32).to_le_bytes());
    out.extend_from_slice(&(h.frame_count as u64).to_le_bytes());
    out.extend_from_slice(&h.fps.to_le_bytes());
    out.extend_from_slice(&(h.name.len() as u32).to_le_bytes());
    out.extend_from_slice(h.name.as_bytes());
    let mut put = |v: f64| match precision {
        Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
        Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
    };
    for f in &file.payload.frames {
        f.rotations.iter().flatten().for_each(|v| put(*v));
        f.betas.iter().flatten().for_each(|v| put(*v));
        f.root_translation.iter().flatten().for_each(|v| put(*v));
    }
    Ok(out)
}

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Fails with the offset of the field that could not be read in full.
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let avail = self.bytes.len() - self.pos;
        if n > avail {
            return Err(Error::Truncated { offset: self.pos, needed: n - avail });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<MotionSequence<f64>> {
    let mut r = ByteReader::new(bytes);
    let magic: [u8; 4] = r.array()?;
    if magic != MOTION_MAGIC {
        return Err(Error::BadMagic { expected: MOTION_MAGIC, found: magic });
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != MOTION_VERSION {
        return Err(Error::UnsupportedVersion { found: version.into(), supported: MOTION_VERSION.into() });
    }
    let [rtag, prec, flags, _reserved] = r.array()?;
    let representation = from_tag(rtag)?;
    let precision = match prec {
        4 => Precision::F32,
        8 => Precision::F64,
        other => return Err(Error::HeaderMismatch(format!("unsupported payload precision {other} bytes"))),
    };
    if flags & !0b11 != 0 {
        return Err(Error::HeaderMismatch(format!("unknown flag bits {flags:#04x}")));
    }
    let joint_count = u32::from_le_bytes(r.array()?) as usize;
    let frame_count = u64::from_le_bytes(r.array()?) as usize;
    let fps = f64::from_le_bytes(r.array()?);
    let name_len = u32::from_le_bytes(r.array()?) as usize;
    let name = std::str::from_utf8(r.take(name_len)?).map_err(|e| Error::HeaderMismatch(format!("name is not UTF-8: {e}")))?.to_owned();
    let (has_betas, has_translation) = (flags & 1 != 0, flags & 2 != 0);
    let dim = representation.dim();

    let get = |r: &mut ByteReader| -> Result<f64> {
        Ok(match precision {
            Precision::F32 => f32::from_le_bytes(r.array()?) as f64,
            Precision::F64 => f64::from_le_bytes(r.array()?),
        })
    };
    let mut frames = Vec::with_capacity(frame_count.min(1 << 20));
    for _ in 0..frame_count {
        let mut rotations = Vec::with_capacity(joint_count);
        for _ in 0..joint_count {
            rotations.push((0..dim).map(|_| get(&mut r)).collect::<Result<Vec<_>>>()?);
        }
        let betas = if has_betas { Some((0..NUM_BETAS).map(|_| get(&mut r)).collect::<Result<Vec<_>>>()?) } else { None };
        let root_translation = if has_translation { Some([get(&mut r)?, get(&mut r)?, get(&mut r)?]) } else { None };
        frames.push(FrameRecord { rotations, betas, root_translation });
    }
    if r.pos != bytes.len() {
        return Err(Error::HeaderMismatch(format!("{} trailing bytes after {frame_count} frames", bytes.len() - r.pos)));
    }
    MotionFile {
        format: String::from_utf8_lossy(&MOTION_MAGIC).into_owned(),
        version,
        header: MotionHeader { fps, joint_count, representation, frame_count, has_betas, has_translation, name },
        payload: MotionPayload { frames },
    }
    .to_sequence()
}

/// Reads either encoding, detected from the leading bytes.
pub fn read_motion(path: impl AsRef<Path>) -> Result<MotionSequence<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&MOTION_MAGIC) || (!bytes.is_empty() && MOTION_MAGIC.starts_with(&bytes)) {
        return decode_binary(&bytes);
    }
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::HeaderMismatch(format!("{}: not UTF-8: {e}", path.display())))?;
        return decode_json(text, path);
    }
    let mut found = [0u8; 4];
    for (d, s) in found.iter_mut().zip(&bytes) {
        *d = *s;
    }
    Err(Error::BadMagic { expected: MOTION_MAGIC, found })
}

pub fn write_motion(path: impl AsRef<Path>, seq: &MotionSequence<f64>, format: MotionFormat, precision: Precision) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MotionFormat::Json => encode_json(seq)?.into_bytes(),
        MotionFormat::Bin => encode_binary(seq, precision)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
