mod common;

use std::path::Path;

use common::{motionkit, read_json, schema_errors, stdout_json};

fn ok_report(command: &str, args: &[&str]) -> serde_json::Value {
    let mut full = vec![command];
    full.extend_from_slice(args);
    let out = motionkit(&full);
    assert!(out.status.success(), "{command} failed: {}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let errors = schema_errors(command, &report);
    assert!(errors.is_empty(), "{command} report violates its schema: {errors:?}\n{report:#}");
    report
}

fn fails_with(args: &[&str], code: i32) -> String {
    let out = motionkit(args);
    assert_eq!(out.status.code(), Some(code), "args {args:?}: stderr {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn synth(dir: &Path, name: &str, kind: &str, seed: &str) -> String {
    let path = p(dir, name);
    ok_report("synth", &["--kind", kind, "--frames", "40", "--seed", seed, "--out", &path]);
    path
}

#[test]
fn evaluate_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "random_walk_slerp", "4");
    let r = ok_report("evaluate", &["--pred", &a, "--gt", &a]);
    assert_eq!(r["mpjpe_mm"], 0.0);
    assert_eq!(r["pa_mpjpe_mm"], 0.0);
    assert_eq!(r["accel_err_mm_s2"], 0.0);
    assert_eq!(r["frames"], 40);
    assert_eq!(r["joints"], 24);
}

#[test]
fn evaluate_writes_per_frame_report_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "multi_joint_sine", "1");
    let b = synth(dir.path(), "b.json", "multi_joint_sine", "2");
    let out_path = p(dir.path(), "report.json");
    let out = motionkit(&["evaluate", "--pred", &a, "--gt", &b, "--per-frame", "--out", &out_path]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r = read_json(Path::new(&out_path));
    assert!(schema_errors("evaluate", &r).is_empty());
    assert_eq!(r["per_frame"]["mpjpe_mm"].as_array().unwrap().len(), 40);
    assert_eq!(r["per_frame"]["accel_err_mm_s2"].as_array().unwrap().len(), 38);
    assert!(r["pa_mpjpe_mm"].as_f64().unwrap() <= r["mpjpe_mm"].as_f64().unwrap());
}

#[test]
fn usage_errors_exit_1() {
    fails_with(&["evaluate", "--bogus-flag"], 1);
    fails_with(&["no-such-command"], 1);
    fails_with(&["synth", "--kind", "spiral", "--out", "x.json"], 1);
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "constant", "0");
    let msg = fails_with(&["smooth", "--input", &a, "--ratio", "1.5", "--out", &p(dir.path(), "s.json")], 1);
    assert!(msg.contains("ratio"), "{msg}");
    let msg = fails_with(&["convert", "--input", &a], 1);
    assert!(msg.contains("--out"), "{msg}");
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(motionkit(&["--help"]).status.code(), Some(0));
    assert_eq!(motionkit(&["--version"]).status.code(), Some(0));
    let help = String::from_utf8_lossy(&motionkit(&["augment", "--help"]).stdout).into_owned();
    assert!(help.contains("--speeds") && help.contains("--root-rotations"));
}

#[test]
fn data_errors_exit_2_and_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "missing.json");
    let msg = fails_with(&["evaluate", "--pred", &missing, "--gt", &missing], 2);
    assert!(msg.contains("missing.json"), "{msg}");

    let a = synth(dir.path(), "a.json", "constant", "0");
    let bin = p(dir.path(), "a.bin");
    ok_report("convert", &["--input", &a, "--format", "bin", "--out", &bin]);
    let bytes = std::fs::read(&bin).unwrap();
    let cut = p(dir.path(), "cut.bin");
    std::fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let msg = fails_with(&["smooth", "--input", &cut, "--out", &p(dir.path(), "s.json")], 2);
    assert!(msg.contains("cut.bin") && msg.contains("offset"), "{msg}");

    let mut bad = std::fs::read_to_string(&a).unwrap();
    bad = bad.replacen("\"fps\"", "\"fpz\"", 1);
    let bad_path = p(dir.path(), "bad.json");
    std::fs::write(&bad_path, bad).unwrap();
    let msg = fails_with(&["smooth", "--input", &bad_path, "--out", &p(dir.path(), "s.json")], 2);
    assert!(msg.contains("bad.json") && msg.contains("fpz"), "{msg}");

    let small = p(dir.path(), "small.json");
    ok_report("synth", &["--kind", "constant", "--joints", "5", "--frames", "10", "--out", &small]);
    let msg = fails_with(&["evaluate", "--pred", &small, "--gt", &small], 2);
    assert!(msg.contains("small.json") && msg.contains("skeleton"), "{msg}");
}

#[test]
fn numeric_failures_exit_3() {
    let msg = fails_with(&["vae-gradcheck", "--tolerance", "1e-300"], 3);
    assert!(msg.contains("gradient check failed"), "{msg}");

    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "multi_joint_sine", "0");
    let msg = fails_with(
        &[
            "vae-train",
            "--input",
            &a,
            "--window",
            "10",
            "--latent",
            "2",
            "--encoder-hidden",
            "4",
            "--decoder-hidden",
            "4",
            "--mlp",
            "4,4",
            "--epochs",
            "3",
            "--lr",
            "1e300",
            "--out",
            &p(dir.path(), "m.mvk"),
        ],
        3,
    );
    assert!(msg.contains("step"), "{msg}");
}

#[test]
fn config_file_sets_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "multi_joint_sine", "0");
    let cfg = p(dir.path(), "run.toml");
    std::fs::write(&cfg, "[smoothing]\nratio = 0.25\n[window]\nwidth = 16\nstride = 8\n").unwrap();
    let r = ok_report("smooth", &["--config", &cfg, "--input", &a, "--out", &p(dir.path(), "s.json")]);
    assert_eq!(r["ratio"], 0.25);
    let r = ok_report("smooth", &["--config", &cfg, "--input", &a, "--ratio", "0.75", "--out", &p(dir.path(), "s.json")]);
    assert_eq!(r["ratio"], 0.75);
    let r = ok_report("window", &["--config", &cfg, "--input", &a, "--out", &p(dir.path(), "w")]);
    assert_eq!((r["width"].as_u64(), r["stride"].as_u64()), (Some(16), Some(8)));

    std::fs::write(&cfg, "[smoothing]\nratoi = 0.25\n").unwrap();
    let msg = fails_with(&["smooth", "--config", &cfg, "--input", &a, "--out", &p(dir.path(), "s.json")], 1);
    assert!(msg.contains("run.toml") && msg.contains("ratoi"), "{msg}");
}

#[test]
fn window_then_stitch_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "random_walk_slerp", "9");
    let wdir = p(dir.path(), "w");
    let r = ok_report("window", &["--input", &a, "--width", "12", "--stride", "5", "--format", "bin", "--out", &wdir]);
    assert_eq!(r["windows"].as_array().unwrap().len(), 7);
    let back = p(dir.path(), "back.json");
    let index = r["index"].as_str().unwrap();
    for policy in ["take_first", "take_last", "slerp_blend"] {
        ok_report("stitch", &["--index", index, "--policy", policy, "--out", &back]);
        let (x, y) = (motionkit::io::read_motion(&a).unwrap(), motionkit::io::read_motion(&back).unwrap());
        assert_eq!(x, y, "{policy}");
    }
}

#[test]
fn convert_changes_representation_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "multi_joint_sine", "3");
    let q = p(dir.path(), "q.bin");
    let r = ok_report("convert", &["--input", &a, "--repr", "sixd", "--format", "bin", "--out", &q]);
    assert_eq!(r["representation"], "sixd");
    let back = p(dir.path(), "back.json");
    ok_report("convert", &["--input", &q, "--repr", "axis_angle", "--out", &back]);
    let r = ok_report("evaluate", &["--pred", &back, "--gt", &a]);
    assert!(r["mpjpe_mm"].as_f64().unwrap() < 1e-9);
}

#[test]
fn augment_is_deterministic_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let raw = p(dir.path(), "raw");
    ok_report("synth", &["--kind", "random_walk_slerp", "--count", "2", "--frames", "30", "--out", &raw]);
    let run = |out: &str, seed: &str| {
        ok_report("augment", &["--input", &raw, "--speeds", "1,1.5", "--root-rotations", "2", "--seed", seed, "--out", out])
    };
    let (o1, o2, o3) = (p(dir.path(), "a1"), p(dir.path(), "a2"), p(dir.path(), "a3"));
    let (r1, r2, r3) = (run(&o1, "5"), run(&o2, "5"), run(&o3, "6"));
    assert_eq!(r1["count"], 2 * 2 * 2 * 2);
    let files = |r: &serde_json::Value| -> Vec<Vec<u8>> {
        r["outputs"].as_array().unwrap().iter().map(|o| std::fs::read(o["path"].as_str().unwrap()).unwrap()).collect()
    };
    assert_eq!(files(&r1), files(&r2));
    assert_ne!(files(&r1), files(&r3));

    let r =
        ok_report("augment", &["--input", &raw, "--speeds", "", "--no-flip", "--root-rotations", "0", "--out", &p(dir.path(), "plain")]);
    assert_eq!(r["count"], 2);
}

#[test]
fn vae_commands_report_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.json", "multi_joint_sine", "0");
    let model = p(dir.path(), "m.mvk");
    let args = [
        "--input",
        a.as_str(),
        "--window",
        "8",
        "--latent",
        "3",
        "--encoder-hidden",
        "6",
        "--decoder-hidden",
        "6",
        "--mlp",
        "8,8",
        "--epochs",
        "2",
        "--seed",
        "4",
        "--out",
        model.as_str(),
    ];
    let r = ok_report("vae-train", &args);
    assert_eq!(r["windows"], 5);
    assert_eq!(r["history"].as_array().unwrap().len(), 2);
    assert_eq!(r["config"]["input_dim"], 144);
    let first = std::fs::read(&model).unwrap();
    ok_report("vae-train", &args);
    assert_eq!(first, std::fs::read(&model).unwrap(), "training is deterministic under --seed");

    let rec = p(dir.path(), "rec.json");
    let r = ok_report("vae-reconstruct", &["--model", &model, "--input", &a, "--out", &rec]);
    assert_eq!(r["frames"], 40);
    let seq = motionkit::io::read_motion(&rec).unwrap();
    seq.validate().unwrap();

    let r = ok_report("vae-gradcheck", &["--seed", "7"]);
    assert_eq!(r["passed"], true);
}

#[test]
fn skeleton_check_reports_bundled_and_file_skeletons() {
    let r = ok_report("skeleton-check", &[]);
    assert_eq!(r["joint_count"], 24);
    assert_eq!(r["symmetric"], true);
    let dir = tempfile::tempdir().unwrap();
    let path = p(dir.path(), "s.skel");
    std::fs::write(&path, include_str!("../data/default_skeleton.skel")).unwrap();
    let r = ok_report("skeleton-check", &["--skeleton", &path]);
    assert_eq!(r["path"], path.as_str());
    std::fs::write(&path, "joint_count = 2\nparents = -1, 5\n").unwrap();
    let msg = fails_with(&["skeleton-check", "--skeleton", &path], 2);
    assert!(msg.contains("s.skel"), "{msg}");
}
