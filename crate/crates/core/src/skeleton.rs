//! Kinematic-tree body model: forward kinematics from joint rotations to
//! joint positions, linear shape offsets and weak-perspective projection.
//!
//! Joint positions come straight from the tree: the root sits at the frame's
//! root translation, and each child sits at its parent's position plus the
//! parent's global rotation applied to the child's rest offset (plus the
//! shape delta `shape_basis[j] · betas`). All lengths are in meters.
//!
//! # Skeleton file format
//!
//! UTF-8 text, one `key = value` per line. Blank lines and `#` comments are
//! ignored; unknown or repeated keys are errors.
//!
//! ```text
//! joint_count = 3
//! parents = -1, 0, 1          # comma-separated, root is -1
//! mirror = 0, 1, 2            # comma-separated left/right permutation
//! offsets =                   # joint_count rows of `x y z`
//!   0 0 0
//!   0 1 0
//!   0 1 0
//! shape_basis =               # optional: joint_count * 3 rows of 10 reals,
//!   ...                       # row j*3 + axis holds d(offset_j[axis])/d(beta)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{add3, Mat3, Vec3};
use crate::motion::{MotionSequence, NUM_BETAS};
use crate::scalar::Real;

pub use crate::motion::PoseFrame;

/// Number of joints in the SMPL kinematic tree.
pub const SMPL_JOINT_COUNT: usize = 24;

/// SMPL joint names, index-aligned with [`default_skeleton`].
pub const SMPL_JOINT_NAMES: [&str; SMPL_JOINT_COUNT] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

const SMPL_PARENTS: [i64; SMPL_JOINT_COUNT] = [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21];

const SMPL_MIRROR: [usize; SMPL_JOINT_COUNT] = [0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10, 12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22];

// Left-side and midline bone vectors (meters, +x = body left, +y = up,
// +z = forward). Right-side joints are the x-mirror of their partner.
const SMPL_OFFSETS_LEFT: [(usize, [f64; 3]); 15] = [
    (0, [0.0, 0.0, 0.0]),
    (1, [0.06, -0.09, 0.0]),
    (3, [0.0, 0.11, -0.02]),
    (4, [0.04, -0.38, 0.0]),
    (6, [0.0, 0.13, 0.0]),
    (7, [-0.01, -0.40, -0.04]),
    (9, [0.0, 0.05, 0.02]),
    (10, [0.02, -0.06, 0.12]),
    (12, [0.0, 0.21, -0.03]),
    (13, [0.07, 0.11, -0.01]),
    (15, [0.0, 0.09, 0.05]),
    (16, [0.12, 0.05, -0.01]),
    (18, [0.26, -0.01, -0.02]),
    (20, [0.25, 0.01, 0.0]),
    (22, [0.08, -0.01, -0.01]),
];

/// Kinematic tree with rest offsets, mirror map and optional shape basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton<T> {
    parents: Vec<Option<usize>>,
    rest_offsets: Vec<Vec3<T>>,
    mirror: Vec<usize>,
    shape_basis: Option<Vec<[[T; NUM_BETAS]; 3]>>,
}

impl<T: Real> Skeleton<T> {
    /// Validates and builds a skeleton. `parents` uses `-1` for the root.
    pub fn new(
        parents: &[i64],
        rest_offsets: Vec<Vec3<T>>,
        mirror: Vec<usize>,
        shape_basis: Option<Vec<[[T; NUM_BETAS]; 3]>>,
    ) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidSkeleton { joint: 0, reason: "skeleton has no joints".into() });
        }
        if rest_offsets.len() != n {
            return Err(Error::shape("skeleton offsets", n, rest_offsets.len()));
        }
        if mirror.len() != n {
            return Err(Error::shape("skeleton mirror map", n, mirror.len()));
        }
        if let Some(b) = &shape_basis {
            if b.len() != n {
                return Err(Error::shape("skeleton shape basis", n, b.len()));
            }
        }
        let mut parsed = Vec::with_capacity(n);
        for (j, &p) in parents.iter().enumerate() {
            parsed.push(match p {
                -1 => None,
                p if p >= 0 && (p as usize) < n && p as usize != j => Some(p as usize),
                p => return Err(Error::InvalidSkeleton { joint: j, reason: format!("parent index {p} out of range") }),
            });
        }
        let roots: Vec<usize> = (0..n).filter(|&j| parsed[j].is_none()).collect();
        // cycle check before ordering so a loop is reported as such
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parsed[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::SkeletonCycle { joint: start });
                }
            }
        }
        if roots.len() != 1 {
            return Err(Error::InvalidSkeleton {
                joint: roots.get(1).copied().unwrap_or(0),
                reason: format!("expected exactly one root, found {}", roots.len()),
            });
        }
        for (j, p) in parsed.iter().enumerate() {
            if let Some(p) = *p {
                if p >= j {
                    return Err(Error::InvalidSkeleton {
                        joint: j,
                        reason: format!("parent {p} does not precede child (topological order)"),
                    });
                }
            }
        }
        for (j, &m) in mirror.iter().enumerate() {
            if m >= n {
                return Err(Error::InvalidSkeleton { joint: j, reason: format!("mirror index {m} out of range") });
            }
            if mirror[m] != j {
                return Err(Error::InvalidSkeleton {
                    joint: j,
                    reason: format!("mirror map is not an involution ({j} -> {m} -> {})", mirror[m]),
                });
            }
            if parsed[m] != parsed[j].map(|p| mirror[p]) {
                return Err(Error::InvalidSkeleton { joint: j, reason: "mirror map does not respect the parent hierarchy".into() });
            }
        }
        if rest_offsets.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("skeleton offsets"));
        }
        Ok(Self { parents: parsed, rest_offsets, mirror, shape_basis })
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    /// Parent indices with `-1` for the root.
    pub fn parent_indices(&self) -> Vec<i64> {
        self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect()
    }

    pub fn rest_offsets(&self) -> &[Vec3<T>] {
        &self.rest_offsets
    }

    pub fn mirror_map(&self) -> &[usize] {
        &self.mirror
    }

    pub fn shape_basis(&self) -> Option<&[[[T; NUM_BETAS]; 3]]> {
        self.shape_basis.as_deref()
    }

    /// Rest offset of `joint` including the shape delta for `betas`.
    pub fn shaped_offset(&self, joint: usize, betas: Option<&[T]>) -> Result<Vec3<T>> {
        let base = self.rest_offsets[joint];
        let Some(betas) = betas else { return Ok(base) };
        if betas.len() != NUM_BETAS {
            return Err(Error::shape("betas", NUM_BETAS, betas.len()));
        }
        let Some(basis) = &self.shape_basis else {
            return Err(Error::invalid("betas", "frame has betas but the skeleton has no shape basis"));
        };
        let rows = &basis[joint];
        let delta: Vec3<T> = std::array::from_fn(|a| rows[a].iter().zip(betas).map(|(w, b)| *w * *b).sum());
        Ok(add3(base, delta))
    }

    pub fn cast<U: Real>(&self) -> Skeleton<U> {
        let c = |x: &T| U::lit(x.to_f64_lossy());
        Skeleton {
            parents: self.parents.clone(),
            rest_offsets: self.rest_offsets.iter().map(|o| o.each_ref().map(c)).collect(),
            mirror: self.mirror.clone(),
            shape_basis: self.shape_basis.as_ref().map(|b| b.iter().map(|rows| rows.each_ref().map(|r| r.each_ref().map(c))).collect()),
        }
    }
}

/// Joint positions for one frame, in meters.
pub fn forward_kinematics<T: Real>(skel: &Skeleton<T>, frame: &PoseFrame<T>) -> Result<Vec<Vec3<T>>> {
    let n = skel.joint_count();
    if frame.joint_count() != n {
        return Err(Error::shape("forward kinematics joints", n, frame.joint_count()));
    }
    let betas = frame.betas.as_deref();
    let mut globals: Vec<Mat3<T>> = Vec::with_capacity(n);
    let mut positions: Vec<Vec3<T>> = Vec::with_capacity(n);
    for j in 0..n {
        let local = frame.rotations[j].to_matrix()?;
        let offset = skel.shaped_offset(j, betas)?;
        match skel.parents[j] {
            None => {
                let t = frame.root_translation.unwrap_or([T::zero(); 3]);
                positions.push(add3(t, offset));
                globals.push(local);
            }
            Some(p) => {
                positions.push(add3(positions[p], globals[p].mul_vec(offset)));
                globals.push(globals[p] * local);
            }
        }
    }
    Ok(positions)
}

/// Forward kinematics over every frame, evaluated in parallel.
pub fn forward_kinematics_sequence<T: Real>(skel: &Skeleton<T>, seq: &MotionSequence<T>) -> Result<Vec<Vec<Vec3<T>>>> {
    seq.frames.par_iter().map(|f| forward_kinematics(skel, f)).collect()
}

/// Weak-perspective camera `{s, t_x, t_y}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPerspectiveCamera<T> {
    pub s: T,
    pub t_x: T,
    pub t_y: T,
}

impl<T: Real> WeakPerspectiveCamera<T> {
    pub fn new(s: T, t_x: T, t_y: T) -> Result<Self> {
        if !(s > T::zero() && s.is_finite()) {
            return Err(Error::invalid("s", format!("camera scale must be positive, got {s}")));
        }
        Ok(Self { s, t_x, t_y })
    }
}

/// `(x, y, z) -> (s*x + t_x, s*y + t_y)`.
pub fn project_weak_perspective<T: Real>(joints3d: &[Vec3<T>], cam: &WeakPerspectiveCamera<T>) -> Vec<[T; 2]> {
    joints3d.iter().map(|p| [cam.s * p[0] + cam.t_x, cam.s * p[1] + cam.t_y]).collect()
}

/// Bundled 24-joint SMPL-topology skeleton with synthetic, bilaterally
/// symmetric rest offsets and a synthetic 10-coefficient shape basis.
pub fn default_skeleton<T: Real>() -> Skeleton<T> {
    let mut offsets = [[0.0f64; 3]; SMPL_JOINT_COUNT];
    for (j, o) in SMPL_OFFSETS_LEFT {
        offsets[j] = o;
        let m = SMPL_MIRROR[j];
        offsets[m] = [-o[0], o[1], o[2]];
    }
    // each coefficient lengthens a group of bones proportionally (x-only for k = 4)
    let groups: [(&[usize], f64, bool); NUM_BETAS] = [
        (&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23], 0.05, false),
        (&[1, 2, 4, 5, 7, 8, 10, 11], 0.04, false),
        (&[16, 17, 18, 19, 20, 21, 22, 23], 0.04, false),
        (&[3, 6, 9, 12, 15], 0.04, false),
        (&[1, 2], 0.1, true),
        (&[13, 14], 0.08, false),
        (&[4, 5], 0.03, false),
        (&[7, 8], 0.03, false),
        (&[18, 19], 0.03, false),
        (&[20, 21, 22, 23], 0.03, false),
    ];
    let mut basis = vec![[[T::zero(); NUM_BETAS]; 3]; SMPL_JOINT_COUNT];
    for (k, (joints, gain, x_only)) in groups.iter().enumerate() {
        for &j in joints.iter() {
            for (axis, row) in basis[j].iter_mut().enumerate() {
                if !*x_only || axis == 0 {
                    row[k] = T::lit(gain * offsets[j][axis]);
                }
            }
        }
    }
    Skeleton::new(&SMPL_PARENTS, offsets.iter().map(|o| o.map(T::lit)).collect(), SMPL_MIRROR.to_vec(), Some(basis))
        .expect("bundled skeleton is valid")
}

impl Skeleton<f64> {
    /// Serializes to the skeleton text format; values use shortest
    /// round-trip formatting so `parse(to_text(s)) == s`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# motionkit skeleton\n");
        let join = |v: Vec<String>| v.join(", ");
        let _ = writeln!(out, "joint_count = {}", self.joint_count());
        let _ = writeln!(out, "parents = {}", join(self.parent_indices().iter().map(|p| p.to_string()).collect()));
        let _ = writeln!(out, "mirror = {}", join(self.mirror.iter().map(|m| m.to_string()).collect()));
        out.push_str("offsets =\n");
        for o in &self.rest_offsets {
            let _ = writeln!(out, "  {} {} {}", o[0], o[1], o[2]);
        }
        if let Some(basis) = &self.shape_basis {
            out.push_str("shape_basis =\n");
            for rows in basis {
                for row in rows {
                    let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                    let _ = writeln!(out, "  {}", cells.join(" "));
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a skeleton file.
pub fn load_skeleton(path: impl AsRef<Path>) -> Result<Skeleton<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_skeleton(&text, path)
}

/// Parses the skeleton text format; `origin` is only used in error messages.
pub fn parse_skeleton(text: &str, origin: impl Into<PathBuf>) -> Result<Skeleton<f64>> {
    let origin = origin.into();
    let err = |line: usize, reason: String| Error::Parse { path: origin.clone(), line, reason };

    let mut joint_count: Option<usize> = None;
    let mut parents: Option<Vec<i64>> = None;
    let mut mirror: Option<Vec<usize>> = None;
    let mut offsets: Option<Vec<Vec<f64>>> = None;
    let mut basis: Option<Vec<Vec<f64>>> = None;

    // (key, rows expected, row width, accumulated rows, line where block started)
    let mut block: Option<(&'static str, usize, usize, Vec<Vec<f64>>, usize)> = None;

    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim())).filter(|(_, l)| !l.is_empty()).collect();

    let finish_block =
        |b: (&'static str, usize, usize, Vec<Vec<f64>>, usize), offsets: &mut Option<Vec<Vec<f64>>>, basis: &mut Option<Vec<Vec<f64>>>| {
            match b.0 {
                "offsets" => *offsets = Some(b.3),
                _ => *basis = Some(b.3),
            }
        };

    for (lineno, line) in lines {
        if let Some(b) = block.as_mut() {
            if b.3.len() < b.1 && !line.contains('=') {
                let row = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| err(lineno, format!("{}: `{t}` is not a number", b.0))))
                    .collect::<Result<Vec<f64>>>()?;
                if row.len() != b.2 {
                    return Err(err(lineno, format!("{}: expected {} values per row, found {}", b.0, b.2, row.len())));
                }
                b.3.push(row);
                if b.3.len() == b.1 {
                    finish_block(block.take().unwrap(), &mut offsets, &mut basis);
                }
                continue;
            }
            let b = block.take().unwrap();
            return Err(err(lineno, format!("{}: expected {} rows, found {} (block started on line {})", b.0, b.1, b.3.len(), b.4)));
        }

        let Some((key, value)) = line.split_once('=') else {
            return Err(err(lineno, format!("expected `key = value`, found `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        let duplicate = match key {
            "joint_count" => joint_count.is_some(),
            "parents" => parents.is_some(),
            "mirror" => mirror.is_some(),
            "offsets" => offsets.is_some(),
            "shape_basis" => basis.is_some(),
            other => return Err(err(lineno, format!("unknown key `{other}`"))),
        };
        if duplicate {
            return Err(err(lineno, format!("duplicate key `{key}`")));
        }
        match key {
            "joint_count" => {
                let n = value.parse::<usize>().map_err(|_| err(lineno, format!("joint_count: `{value}` is not a count")))?;
                if n == 0 {
                    return Err(err(lineno, "joint_count must be positive".into()));
                }
                joint_count = Some(n);
            }
            "parents" => {
                parents = Some(
                    value
                        .split(',')
                        .map(|t| t.trim().parse::<i64>().map_err(|_| err(lineno, format!("parents: `{}` is not an index", t.trim()))))
                        .collect::<Result<_>>()?,
                );
            }
            "mirror" => {
                mirror = Some(
                    value
                        .split(',')
                        .map(|t| t.trim().parse::<usize>().map_err(|_| err(lineno, format!("mirror: `{}` is not an index", t.trim()))))
                        .collect::<Result<_>>()?,
                );
            }
            block_key @ ("offsets" | "shape_basis") => {
                if !value.is_empty() {
                    return Err(err(lineno, format!("{block_key}: values belong on the following lines")));
                }
                let n = joint_count.ok_or_else(|| err(lineno, format!("{block_key} must come after joint_count")))?;
                let (name, rows, width) = if block_key == "offsets" { ("offsets", n, 3) } else { ("shape_basis", n * 3, NUM_BETAS) };
                block = Some((name, rows, width, Vec::new(), lineno));
            }
            _ => unreachable!(),
        }
    }
    if let Some(b) = block {
        return Err(err(text.lines().count(), format!("{}: expected {} rows, found {}", b.0, b.1, b.3.len())));
    }

    let last = text.lines().count();
    let n = joint_count.ok_or_else(|| err(last, "missing key `joint_count`".into()))?;
    let parents = parents.ok_or_else(|| err(last, "missing key `parents`".into()))?;
    let mirror = mirror.ok_or_else(|| err(last, "missing key `mirror`".into()))?;
    let offsets = offsets.ok_or_else(|| err(last, "missing key `offsets`".into()))?;
    if parents.len() != n {
        return Err(err(last, format!("parents: expected {n} entries, found {}", parents.len())));
    }
    if mirror.len() != n {
        return Err(err(last, format!("mirror: expected {n} entries, found {}", mirror.len())));
    }
    let offsets = offsets.into_iter().map(|r| [r[0], r[1], r[2]]).collect();
    let basis = basis.map(|rows| rows.chunks_exact(3).map(|c| std::array::from_fn(|a| std::array::from_fn(|k| c[a][k]))).collect());
    Skeleton::new(&parents, offsets, mirror, basis)
}
