//! The `motionkit` command-line tool. Each subcommand is a thin wrapper over
//! library operations. Reports are JSON on standard output, or at `--out`
//! for commands whose only product is the report (`evaluate`,
//! `vae-gradcheck`, `skeleton-check`).
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
//! (training divergence or a failed gradient check).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::augment_dataset;
use crate::error::Error;
use crate::io::{generate_synthetic, read_motion, write_motion, MotionFormat, Precision, RunConfig, SyntheticKind, SyntheticParams};
use crate::metrics::{evaluate, JointSequence};
use crate::motion::MotionSequence;
use crate::motion_vae::{gradient_check, reconstruct_sequence, train_with_progress, GradCheckBatch, GradCheckReport, VaeConfig, VaeModel};
use crate::rotations::Representation;
use crate::skeleton::{default_skeleton, forward_kinematics_sequence, load_skeleton, Skeleton};
use crate::smoothing::{slerp_average_filter, sliding_windows, stitch_windows, OverlapPolicy, WindowIndex, WindowSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Suffix of the index file written by `window`; directory inputs skip it.
pub const WINDOW_INDEX_FILE: &str = "windows.index.json";

#[derive(Debug, Parser)]
#[command(
    name = "motionkit",
    version,
    about = "Human-motion numerics: rotations, kinematics, augmentation, metrics, smoothing and a motion VAE"
)]
pub struct Cli {
    /// Seed for every random choice; runs with the same seed are identical.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path (file or directory, see each command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Encoding of motion files written by the command.
    #[arg(long, global = true, default_value = "json")]
    pub format: MotionFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-encode a motion file, optionally changing the rotation representation.
    Convert(ConvertArgs),
    /// Apply speed, mirror and root-rotation augmentation to motion files; --out is a directory.
    Augment(AugmentArgs),
    /// Compare predicted and ground-truth motion through forward kinematics.
    Evaluate(EvaluateArgs),
    /// Slerp-average filter a motion file.
    Smooth(SmoothArgs),
    /// Cut a motion file into fixed-width windows; --out is a directory.
    Window(WindowArgs),
    /// Reassemble windows written by `window`.
    Stitch(StitchArgs),
    /// Train the motion VAE on windows of the input motion; --out is the model file.
    VaeTrain(VaeTrainArgs),
    /// Encode and decode a motion file with a trained model.
    VaeReconstruct(VaeReconstructArgs),
    /// Compare analytic VAE gradients with finite differences on a small random model.
    VaeGradcheck(VaeGradcheckArgs),
    /// Generate synthetic motion; --out is a file, or a directory when --count > 1.
    Synth(SynthArgs),
    /// Validate a skeleton file and report its structure.
    SkeletonCheck(SkeletonCheckArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Target representation: axis_angle, quaternion, matrix or sixd.
    #[arg(long)]
    pub repr: Option<Representation>,
    /// Binary payload precision: f64 (lossless) or f32.
    #[arg(long, default_value = "f64")]
    pub precision: Precision,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Motion files or directories of motion files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Comma-separated speed factors; an empty string disables resampling.
    #[arg(long)]
    pub speeds: Option<String>,
    #[arg(long, overrides_with = "no_flip")]
    pub flip: bool,
    #[arg(long)]
    pub no_flip: bool,
    #[arg(long)]
    pub root_rotations: Option<usize>,
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
    #[arg(long)]
    pub per_frame: bool,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Blend ratio in [0, 1].
    #[arg(long)]
    pub ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StitchArgs {
    /// Index file written by `window`; window files are read from its directory.
    #[arg(long)]
    pub index: PathBuf,
    /// take_first, take_last or slerp_blend.
    #[arg(long)]
    pub policy: Option<OverlapPolicy>,
}

#[derive(Debug, Args)]
pub struct VaeTrainArgs {
    /// Motion files or directories of motion files.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Window stride when cutting training windows (default: the window width).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub encoder_hidden: Option<usize>,
    #[arg(long)]
    pub decoder_hidden: Option<usize>,
    /// Two comma-separated perceptron widths, e.g. `64,64`.
    #[arg(long)]
    pub mlp: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub kl_weight: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Use the full-size architecture preset as the base configuration.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct VaeReconstructArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct VaeGradcheckArgs {
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    #[arg(long, default_value_t = 4)]
    pub window: usize,
    #[arg(long, default_value_t = 3)]
    pub latent: usize,
    #[arg(long, default_value_t = 2)]
    pub joints: usize,
    #[arg(long, default_value_t = 2)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub kl_weight: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// constant, single_axis_sine, multi_joint_sine or random_walk_slerp.
    #[arg(long)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub joints: Option<usize>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long)]
    pub repr: Option<Representation>,
}

#[derive(Debug, Args)]
pub struct SkeletonCheckArgs {
    /// Skeleton file; the bundled default when absent.
    #[arg(long)]
    pub skeleton: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertReport {
    pub input: String,
    pub output: String,
    pub format: MotionFormat,
    pub representation: Representation,
    pub frames: usize,
    pub joints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub name: String,
    pub path: String,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub inputs: usize,
    pub count: usize,
    pub speed_factors: Vec<f64>,
    pub enable_flip: bool,
    pub root_rotation_samples: usize,
    pub seed: u64,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub mpjpe_mm: f64,
    pub pa_mpjpe_mm: f64,
    pub accel_err_mm_s2: f64,
    pub frames: usize,
    pub joints: usize,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_frame: Option<crate::metrics::PerFrameMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothReport {
    pub input: String,
    pub output: String,
    pub ratio: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: String,
    pub width: usize,
    pub stride: usize,
    pub source_frames: usize,
    pub windows: Vec<OutputEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub output: String,
    pub policy: OverlapPolicy,
    pub windows: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCliReport {
    pub model: String,
    pub sequences: usize,
    pub windows: usize,
    pub parameters: usize,
    pub steps: u64,
    pub epochs: usize,
    pub config: VaeConfig,
    pub final_loss: LossSummary,
    pub history: Vec<crate::motion_vae::EpochLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub model: String,
    pub input: String,
    pub output: String,
    pub frames: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub kind: SyntheticKind,
    pub seed: u64,
    pub outputs: Vec<OutputEntry>,
    pub fps: f64,
    pub joints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonReport {
    pub path: String,
    pub joint_count: usize,
    pub root: usize,
    pub max_depth: usize,
    pub has_shape_basis: bool,
    /// Largest `|offset(mirror(j)) - reflect_x(offset(j))|` over joints, meters.
    pub max_mirror_error_m: f64,
    pub symmetric: bool,
}

/// Failure of one command, with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric_failure() { EXIT_NUMERIC } else { EXIT_DATA };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a path to an error message so diagnostics name the file.
fn at(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| {
        let mut c = CliError::from(e);
        let shown = path.display().to_string();
        if !c.message.contains(&shown) {
            c.message = format!("{shown}: {}", c.message);
        }
        c
    }
}

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if let Some(text) = report {
                print_stdout(&text);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Writes a report line, ignoring a closed pipe.
fn print_stdout(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

/// Runs a parsed command. Returns the JSON report to print, or `None` when
/// it was written to `--out`.
pub fn execute(cli: &Cli) -> CliResult<Option<String>> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { cli, config };
    match &cli.command {
        Command::Convert(a) => ctx.convert(a).map(Some),
        Command::Augment(a) => ctx.augment(a).map(Some),
        Command::Evaluate(a) => ctx.report_to_out(ctx.evaluate(a)?),
        Command::Smooth(a) => ctx.smooth(a).map(Some),
        Command::Window(a) => ctx.window(a).map(Some),
        Command::Stitch(a) => ctx.stitch(a).map(Some),
        Command::VaeTrain(a) => ctx.vae_train(a).map(Some),
        Command::VaeReconstruct(a) => ctx.vae_reconstruct(a).map(Some),
        Command::VaeGradcheck(a) => {
            let report = ctx.vae_gradcheck(a)?;
            let text = to_json(&report);
            let printed = ctx.report_to_out(text)?;
            if !report.passed {
                if let Some(t) = printed {
                    print_stdout(&t);
                }
                return Err(CliError::numeric(format!(
                    "gradient check failed: max relative error {:.3e} at {} exceeds {:.1e}",
                    report.max_rel_error, report.worst_parameter, report.tolerance
                )));
            }
            Ok(printed)
        }
        Command::Synth(a) => ctx.synth(a).map(Some),
        Command::SkeletonCheck(a) => ctx.report_to_out(ctx.skeleton_check(a)?),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: RunConfig,
}

fn ext(format: MotionFormat) -> &'static str {
    match format {
        MotionFormat::Json => "json",
        MotionFormat::Bin => "bin",
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' }).collect()
}

fn is_motion_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    (name.ends_with(".json") || name.ends_with(".bin")) && !name.ends_with(WINDOW_INDEX_FILE)
}

/// Expands directories into their motion files, sorted by name.
fn collect_inputs(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let rd = std::fs::read_dir(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            let mut files: Vec<PathBuf> =
                rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|f| f.is_file() && is_motion_file(f)).collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::data(format!("{}: directory contains no motion files", p.display())));
            }
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn read_seq(path: &Path) -> CliResult<MotionSequence<f64>> {
    read_motion(path).map_err(at(path))
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<Vec<T>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|_| CliError::usage(format!("--{flag}: cannot parse `{x}`")))).collect()
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(0)
    }

    fn out(&self, what: &str) -> CliResult<&Path> {
        self.cli.out.as_deref().ok_or_else(|| CliError::usage(format!("--out is required ({what})")))
    }

    fn write_seq(&self, path: &Path, seq: &MotionSequence<f64>, precision: Precision) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        }
        write_motion(path, seq, self.cli.format, precision).map_err(at(path))
    }

    fn out_dir(&self, what: &str) -> CliResult<PathBuf> {
        let dir = self.out(what)?.to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn report_to_out(&self, text: String) -> CliResult<Option<String>> {
        match &self.cli.out {
            Some(p) => {
                std::fs::write(p, format!("{text}\n")).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
                Ok(None)
            }
            None => Ok(Some(text)),
        }
    }

    fn skeleton(&self, flag: Option<&PathBuf>) -> CliResult<(Skeleton<f64>, String)> {
        match flag.or(self.config.evaluate.skeleton.as_ref()) {
            Some(p) => Ok((load_skeleton(p).map_err(at(p))?, p.display().to_string())),
            None => Ok((default_skeleton(), "<bundled>".to_owned())),
        }
    }

    fn convert(&self, a: &ConvertArgs) -> CliResult<String> {
        let seq = read_seq(&a.input)?;
        let seq = match a.repr {
            Some(r) => seq.converted(r).map_err(at(&a.input))?,
            None => seq,
        };
        let out = self.out("output motion file")?;
        self.write_seq(out, &seq, a.precision)?;
        let representation = seq.frames[0].rotations[0].representation();
        Ok(to_json(&ConvertReport {
            input: a.input.display().to_string(),
            output: out.display().to_string(),
            format: self.cli.format,
            representation,
            frames: seq.len(),
            joints: seq.joint_count(),
        }))
    }

    fn augment(&self, a: &AugmentArgs) -> CliResult<String> {
        let mut cfg = self.config.augment_or_default();
        if let Some(s) = &a.speeds {
            cfg.speed_factors = parse_list(s, "speeds")?;
        }
        if a.flip {
            cfg.enable_flip = true;
        }
        if a.no_flip {
            cfg.enable_flip = false;
        }
        if let Some(k) = a.root_rotations {
            cfg.root_rotation_samples = k;
        }
        if let Some(s) = self.cli.seed {
            cfg.rng_seed = s;
        }
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        let (skel, _) = self.skeleton(a.skeleton.as_ref())?;
        let files = collect_inputs(&a.input)?;
        let seqs: Vec<MotionSequence<f64>> = files.iter().map(|f| read_seq(f)).collect::<CliResult<_>>()?;
        let out = augment_dataset(&seqs, &cfg, &skel)?;
        let dir = self.out_dir("output directory")?;
        let mut outputs = Vec::with_capacity(out.len());
        for (i, s) in out.iter().enumerate() {
            let path = dir.join(format!("{i:05}-{}.{}", sanitize(&s.name), ext(self.cli.format)));
            self.write_seq(&path, s, Precision::F64)?;
            outputs.push(OutputEntry { name: s.name.clone(), path: path.display().to_string(), frames: s.len() });
        }
        Ok(to_json(&AugmentReport {
            inputs: seqs.len(),
            count: outputs.len(),
            speed_factors: cfg.speed_factors.clone(),
            enable_flip: cfg.enable_flip,
            root_rotation_samples: cfg.root_rotation_samples,
            seed: cfg.rng_seed,
            outputs,
        }))
    }

    fn evaluate(&self, a: &EvaluateArgs) -> CliResult<String> {
        let pred = read_seq(&a.pred)?;
        let gt = read_seq(&a.gt)?;
        let (skel, skel_name) = self.skeleton(a.skeleton.as_ref())?;
        let fk = |s: &MotionSequence<f64>, p: &Path| -> CliResult<JointSequence<f64>> {
            if s.joint_count() != skel.joint_count() {
                return Err(CliError::data(format!(
                    "{}: {} joints but skeleton {skel_name} has {}",
                    p.display(),
                    s.joint_count(),
                    skel.joint_count()
                )));
            }
            let frames = forward_kinematics_sequence(&skel, s).map_err(at(p))?;
            JointSequence::from_frames(frames, s.fps).map_err(at(p))
        };
        let (jp, jg) = (fk(&pred, &a.pred)?, fk(&gt, &a.gt)?);
        let per_frame = a.per_frame || self.config.evaluate.per_frame;
        let m = evaluate(&jp, &jg, per_frame).map_err(|e| CliError::data(format!("{} vs {}: {e}", a.pred.display(), a.gt.display())))?;
        Ok(to_json(&EvaluateReport {
            mpjpe_mm: m.mpjpe_mm,
            pa_mpjpe_mm: m.pa_mpjpe_mm,
            accel_err_mm_s2: m.accel_err_mm_s2,
            frames: jp.frames(),
            joints: jp.joints(),
            fps: gt.fps,
            per_frame: m.per_frame,
        }))
    }

    fn smooth(&self, a: &SmoothArgs) -> CliResult<String> {
        let ratio = a.ratio.unwrap_or(self.config.smoothing.ratio);
        let seq = read_seq(&a.input)?;
        let out_seq = slerp_average_filter(&seq, ratio).map_err(|e| match e {
            Error::InvalidArgument { .. } => CliError::usage(format!("--ratio: {e}")),
            other => at(&a.input)(other),
        })?;
        let out = self.out("output motion file")?;
        self.write_seq(out, &out_seq, Precision::F64)?;
        Ok(to_json(&SmoothReport { input: a.input.display().to_string(), output: out.display().to_string(), ratio, frames: out_seq.len() }))
    }

    fn window(&self, a: &WindowArgs) -> CliResult<String> {
        let spec = WindowSpec { width: a.width.unwrap_or(self.config.window.width), stride: a.stride.unwrap_or(self.config.window.stride) };
        spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
        let seq = read_seq(&a.input)?;
        let (windows, index) = sliding_windows(&seq, &spec).map_err(at(&a.input))?;
        let dir = self.out_dir("output directory")?;
        let mut entries = Vec::with_capacity(windows.len());
        for (k, w) in windows.iter().enumerate() {
            let path = dir.join(format!("w{k:05}.{}", ext(self.cli.format)));
            self.write_seq(&path, w, Precision::F64)?;
            entries.push(OutputEntry { name: w.name.clone(), path: path.display().to_string(), frames: w.len() });
        }
        let index_path = dir.join(WINDOW_INDEX_FILE);
        std::fs::write(&index_path, to_json(&index)).map_err(|e| CliError::data(format!("{}: {e}", index_path.display())))?;
        Ok(to_json(&WindowReport {
            index: index_path.display().to_string(),
            width: spec.width,
            stride: spec.stride,
            source_frames: seq.len(),
            windows: entries,
        }))
    }

    fn stitch(&self, a: &StitchArgs) -> CliResult<String> {
        let text = std::fs::read_to_string(&a.index).map_err(|e| CliError::data(format!("{}: {e}", a.index.display())))?;
        let index: WindowIndex = serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.index.display())))?;
        let dir = a.index.parent().unwrap_or(Path::new("."));
        let windows = (0..index.windows.len())
            .map(|k| {
                let json = dir.join(format!("w{k:05}.json"));
                let path = if json.exists() { json } else { dir.join(format!("w{k:05}.bin")) };
                read_seq(&path)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let policy = a.policy.unwrap_or(self.config.window.overlap_policy);
        let seq = stitch_windows(&windows, &index, policy).map_err(at(&a.index))?;
        let out = self.out("output motion file")?;
        self.write_seq(out, &seq, Precision::F64)?;
        Ok(to_json(&StitchReport { output: out.display().to_string(), policy, windows: windows.len(), frames: seq.len() }))
    }

    fn vae_train(&self, a: &VaeTrainArgs) -> CliResult<String> {
        let mut cfg = if a.paper_scale { VaeConfig::paper_scale() } else { self.config.vae.clone() };
        if let Some(v) = a.window {
            cfg.window = v;
        }
        if let Some(v) = a.latent {
            cfg.latent_dim = v;
        }
        if let Some(v) = a.encoder_hidden {
            cfg.encoder_hidden = v;
        }
        if let Some(v) = a.decoder_hidden {
            cfg.decoder_hidden = v;
        }
        if let Some(s) = &a.mlp {
            let v: Vec<usize> = parse_list(s, "mlp")?;
            if v.len() != 2 {
                return Err(CliError::usage(format!("--mlp: expected two widths, got {}", v.len())));
            }
            cfg.mlp_hidden = [v[0], v[1]];
        }
        if let Some(v) = a.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = a.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = a.kl_weight {
            cfg.kl_weight = v;
        }
        if let Some(v) = a.batch_size {
            cfg.batch_size = v;
        }
        if let Some(s) = self.cli.seed {
            cfg.rng_seed = s;
        }

        let files = collect_inputs(&a.input)?;
        let seqs: Vec<MotionSequence<f64>> = files.iter().map(|f| read_seq(f)).collect::<CliResult<_>>()?;
        let joints = seqs[0].joint_count();
        if let Some((f, s)) = files.iter().zip(&seqs).find(|(_, s)| s.joint_count() != joints) {
            return Err(CliError::data(format!("{}: {} joints, expected {joints} like the first input", f.display(), s.joint_count())));
        }
        cfg.input_dim = joints * 6;
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        let spec = WindowSpec { width: cfg.window, stride: a.stride.unwrap_or(cfg.window) };
        spec.validate().map_err(|e| CliError::usage(e.to_string()))?;

        let mut dataset = Vec::new();
        for (f, s) in files.iter().zip(&seqs) {
            let (windows, _) = sliding_windows(s, &spec).map_err(at(f))?;
            for w in windows {
                dataset.push(w.sixd_rows().map_err(at(f))?);
            }
        }
        let model_path = self.out("model file")?;
        let mut model = VaeModel::<f64>::new(cfg.clone())?;
        let every = (cfg.epochs / 10).max(1);
        let report = train_with_progress(&mut model, &dataset, |e, _| {
            if (e.epoch + 1) % every == 0 || e.epoch == 0 {
                eprintln!("epoch {:>5}  step {:>7}  loss {:.6e}  recon {:.6e}  kl {:.6e}", e.epoch + 1, e.step, e.total, e.recon, e.kl);
            }
            std::ops::ControlFlow::Continue(())
        })?;
        model.save(model_path).map_err(at(model_path))?;
        let final_loss = report.history.last().map(|h| LossSummary { total: h.total, recon: h.recon, kl: h.kl }).unwrap_or(LossSummary {
            total: f64::NAN,
            recon: f64::NAN,
            kl: f64::NAN,
        });
        let final_loss = if final_loss.total.is_nan() {
            let l = crate::motion_vae::evaluate_loss(&model, &dataset)?;
            LossSummary { total: l.total, recon: l.recon, kl: l.kl }
        } else {
            final_loss
        };
        Ok(to_json(&TrainCliReport {
            model: model_path.display().to_string(),
            sequences: seqs.len(),
            windows: dataset.len(),
            parameters: model.parameter_count(),
            steps: report.steps,
            epochs: cfg.epochs,
            config: cfg,
            final_loss,
            history: report.history,
        }))
    }

    fn vae_reconstruct(&self, a: &VaeReconstructArgs) -> CliResult<String> {
        let model = VaeModel::<f64>::load(&a.model).map_err(at(&a.model))?;
        let seq = read_seq(&a.input)?;
        let out_seq = reconstruct_sequence(&model, &seq).map_err(at(&a.input))?;
        let out = self.out("output motion file")?;
        self.write_seq(out, &out_seq, Precision::F64)?;
        Ok(to_json(&ReconstructReport {
            model: a.model.display().to_string(),
            input: a.input.display().to_string(),
            output: out.display().to_string(),
            frames: out_seq.len(),
            windows: seq.len().div_ceil(model.config.window).max(1),
        }))
    }

    fn vae_gradcheck(&self, a: &VaeGradcheckArgs) -> CliResult<GradCheckReport> {
        let cfg = VaeConfig {
            window: a.window,
            input_dim: a.joints * 6,
            latent_dim: a.latent,
            encoder_hidden: a.hidden,
            decoder_hidden: a.hidden,
            mlp_hidden: [a.hidden, a.hidden],
            kl_weight: a.kl_weight,
            rng_seed: self.seed(),
            ..VaeConfig::default()
        };
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if a.batch == 0 {
            return Err(CliError::usage("--batch must be at least 1"));
        }
        let model = VaeModel::<f64>::new(cfg.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed() ^ 0x9e37_79b9_7f4a_7c15);
        let windows = (0..a.batch).map(|_| (0..cfg.window * cfg.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let eps = (0..a.batch).map(|_| Some((0..cfg.latent_dim).map(|_| rng.random_range(-2.0..2.0)).collect())).collect();
        let batch = GradCheckBatch { windows, eps, kl_weight: a.kl_weight };
        Ok(gradient_check(&model, &batch, a.tolerance)?)
    }

    fn synth(&self, a: &SynthArgs) -> CliResult<String> {
        let mut p: SyntheticParams = self.config.synth.clone();
        if let Some(v) = a.frames {
            p.frames = v;
        }
        if let Some(v) = a.fps {
            p.fps = v;
        }
        if let Some(v) = a.joints {
            p.joint_count = v;
        }
        if let Some(v) = a.amplitude {
            p.amplitude = v;
        }
        if let Some(v) = a.frequency {
            p.frequency = v;
        }
        if let Some(v) = a.repr {
            p.representation = v;
        }
        p.validate(a.kind).map_err(|e| CliError::usage(e.to_string()))?;
        if a.count == 0 {
            return Err(CliError::usage("--count must be at least 1"));
        }
        let seed = self.seed();
        let out = self.out("output file or directory")?;
        let mut outputs = Vec::with_capacity(a.count);
        for i in 0..a.count as u64 {
            let s = seed.wrapping_add(i);
            let seq = generate_synthetic(a.kind, &p, s)?;
            let path = if a.count == 1 { out.to_path_buf() } else { out.join(format!("{}.{}", sanitize(&seq.name), ext(self.cli.format))) };
            self.write_seq(&path, &seq, Precision::F64)?;
            outputs.push(OutputEntry { name: seq.name.clone(), path: path.display().to_string(), frames: seq.len() });
        }
        Ok(to_json(&SynthReport { kind: a.kind, seed, outputs, fps: p.fps, joints: p.joint_count }))
    }

    fn skeleton_check(&self, a: &SkeletonCheckArgs) -> CliResult<String> {
        let (skel, path) = self.skeleton(a.skeleton.as_ref())?;
        let n = skel.joint_count();
        let root = (0..n).find(|j| skel.parent(*j).is_none()).expect("validated skeleton has a root");
        let mut depth = vec![0usize; n];
        for j in 0..n {
            if let Some(p) = skel.parent(j) {
                depth[j] = depth[p] + 1;
            }
        }
        let offs = skel.rest_offsets();
        let max_mirror_error_m = (0..n)
            .map(|j| {
                let (a, b) = (offs[j], offs[skel.mirror_map()[j]]);
                crate::linalg::norm3([b[0] + a[0], b[1] - a[1], b[2] - a[2]])
            })
            .fold(0.0, f64::max);
        Ok(to_json(&SkeletonReport {
            path,
            joint_count: n,
            root,
            max_depth: depth.into_iter().max().unwrap_or(0),
            has_shape_basis: skel.shape_basis().is_some(),
            max_mirror_error_m,
            symmetric: max_mirror_error_m < 1e-12,
        }))
    }
}
