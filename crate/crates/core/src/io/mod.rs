//! File formats, synthetic data and run configuration.

pub mod config;
pub mod motion_file;
pub mod synthetic;

pub use config::{default_cli_augment, EvaluateSettings, RunConfig, SmoothingSettings, WindowSettings};
pub use motion_file::{
    decode_binary, decode_json, encode_binary, encode_json, read_motion, write_motion, MotionFile, MotionFormat, MotionHeader, Precision,
    MOTION_MAGIC, MOTION_VERSION,
};
pub use synthetic::{generate_synthetic, sine_components, SineComponent, SyntheticKind, SyntheticParams};

pub(crate) use motion_file::ByteReader;

/// JSON schemas of the reports the command-line tool emits, keyed by command name.
pub const REPORT_SCHEMAS: &[(&str, &str)] = &[
    ("convert", include_str!("../../schemas/convert.schema.json")),
    ("synth", include_str!("../../schemas/synth.schema.json")),
    ("augment", include_str!("../../schemas/augment.schema.json")),
    ("evaluate", include_str!("../../schemas/evaluate.schema.json")),
    ("smooth", include_str!("../../schemas/smooth.schema.json")),
    ("window", include_str!("../../schemas/window.schema.json")),
    ("stitch", include_str!("../../schemas/stitch.schema.json")),
    ("vae-train", include_str!("../../schemas/vae-train.schema.json")),
    ("vae-reconstruct", include_str!("../../schemas/vae-reconstruct.schema.json")),
    ("vae-gradcheck", include_str!("../../schemas/vae-gradcheck.schema.json")),
    ("skeleton-check", include_str!("../../schemas/skeleton-check.schema.json")),
];

pub fn report_schema(command: &str) -> Option<&'static str> {
    REPORT_SCHEMAS.iter().find(|(c, _)| *c == command).map(|(_, s)| *s)
}
