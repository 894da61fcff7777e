#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use motionkit::metrics::{mpjpe, JointSequence};
use motionkit::skeleton::{forward_kinematics_sequence, Skeleton};
use motionkit::MotionSequence;

pub fn joints(skel: &Skeleton<f64>, seq: &MotionSequence) -> JointSequence<f64> {
    JointSequence::from_frames(forward_kinematics_sequence(skel, seq).unwrap(), seq.fps).unwrap()
}

/// Root-aligned FK-MPJPE between two motion sequences, in millimeters.
pub fn fk_mpjpe(skel: &Skeleton<f64>, pred: &MotionSequence, gt: &MotionSequence) -> f64 {
    mpjpe(&joints(skel, pred), &joints(skel, gt)).unwrap()
}

pub fn motionkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motionkit")).args(args).output().expect("motionkit binary runs")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

/// Validates a report against the bundled schema for `command`, returning the error list.
pub fn schema_errors(command: &str, report: &serde_json::Value) -> Vec<String> {
    let schema: serde_json::Value = serde_json::from_str(motionkit::io::report_schema(command).expect("schema exists")).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(report).map(|e| format!("{}: {e}", e.instance_path)).collect()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
