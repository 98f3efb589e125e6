//! End-to-end command-line tests: every subcommand, exit-code contract,
//! determinism of seeded runs, and the report schema.

use std::path::Path;
use std::process::{Command, Output};

fn ictus_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ictus"))
}

fn run(args: &[&str]) -> Output {
    ictus_bin().args(args).output().expect("spawn ictus")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        r#"
[synth]
channels = 2
rate_hz = 64.0
seizure_s = 30.0
postictal_s = 60.0
gain = 3.0

[spectral]
scales = [1, 2, 3]
nfft = 32

[model]
conv3d_maps = [2, 2, 3]
conv2d_maps = [2, 2, 3]
fc_width = 8
head_widths = [8]

[train]
epochs = 2
batch_size = 16
lr = 0.001

[segmentation]
segment_s = 5.0
postictal_exclusion_s = 60.0
"#,
    )
    .unwrap();
    path
}

fn synth(dir: &Path, config: &Path, seed: u64) {
    let out = run(&[
        "synth",
        "--seed",
        &seed.to_string(),
        "--seizures",
        "2",
        "--hours",
        "0.1",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "synth failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest_payload_hash(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("synth-manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["inputs"][0]["sha256"].as_str().unwrap().to_string()
}

#[test]
fn synth_writes_recording_manifest_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());

    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    synth(&dir_a, &config, 7);
    synth(&dir_b, &config, 7);

    for f in ["recording.json", "recording.raw", "segments.jsonl", "synth-manifest.json"] {
        assert!(dir_a.join(f).exists(), "missing {f}");
    }
    // annotations present
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir_a.join("recording.json")).unwrap()).unwrap();
    assert_eq!(header["annotations"].as_array().unwrap().len(), 2);

    // identical invocations produce identical payload hashes
    assert_eq!(manifest_payload_hash(&dir_a), manifest_payload_hash(&dir_b));

    // different seed differs
    let dir_c = tmp.path().join("c");
    synth(&dir_c, &config, 8);
    assert_ne!(manifest_payload_hash(&dir_a), manifest_payload_hash(&dir_c));
}

#[test]
fn missing_required_flag_is_usage_error() {
    let out = run(&["synth", "--seizures", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--seed"), "usage text should mention the flag: {err}");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_detect_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path());
    let data = tmp.path().join("data");
    synth(&data, &config, 3);

    // train twice with the same seed: identical checkpoints
    let t1 = tmp.path().join("t1");
    let t2 = tmp.path().join("t2");
    for t in [&t1, &t2] {
        let out = run(&[
            "train",
            "--manifest",
            data.join("segments.jsonl").to_str().unwrap(),
            "--recording-dir",
            data.to_str().unwrap(),
            "--seed",
            "5",
            "--config",
            config.to_str().unwrap(),
            "--out-dir",
            t.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "train failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let ckpt1 = std::fs::read(t1.join("model.ckpt")).unwrap();
    let ckpt2 = std::fs::read(t2.join("model.ckpt")).unwrap();
    assert_eq!(ckpt1, ckpt2, "same seed must give bit-identical checkpoints");
    assert!(t1.join("training_curve.csv").exists());

    // detect with an impossible threshold: zero alarms
    let d_hi = tmp.path().join("d_hi");
    let out = run(&[
        "detect",
        "--recording",
        data.join("recording.json").to_str().unwrap(),
        "--checkpoint",
        t1.join("model.ckpt").to_str().unwrap(),
        "--thr",
        "1e9",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        d_hi.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let alarms: Vec<f64> =
        serde_json::from_str(&std::fs::read_to_string(d_hi.join("alarms.json")).unwrap()).unwrap();
    assert!(alarms.is_empty());

    // trace row count: steps at r = 10 from segment end to duration
    let trace = std::fs::read_to_string(d_hi.join("trace.csv")).unwrap();
    let rows = trace.lines().count() - 1;
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("recording.json")).unwrap()).unwrap();
    let duration = header["n_samples"].as_u64().unwrap() as f64 / header["rate_hz"].as_f64().unwrap();
    let expected = ((duration - 5.0) * 10.0).floor() as usize + 1;
    assert!(
        (rows as i64 - expected as i64).abs() <= 1,
        "trace rows {rows} vs expected {expected}"
    );

    // eval in trace mode emits the report schema
    let e = tmp.path().join("e");
    let out = run(&[
        "eval",
        "--recording",
        data.join("recording.json").to_str().unwrap(),
        "--trace",
        d_hi.join("trace.csv").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        e.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(e.join("report.json")).unwrap()).unwrap();
    for key in ["patient", "sensitivity", "n_false", "interictal_hours", "fdr_per_h", "seizures"] {
        assert!(report.get(key).is_some(), "report missing {key}");
    }
    // an impossible threshold means no detections anywhere
    assert_eq!(report["sensitivity"], "0/2");
    assert_eq!(report["fdr_per_h"], 0.0);

    // export-trace over a sub-span
    let x = tmp.path().join("x");
    let out = run(&[
        "export-trace",
        "--recording",
        data.join("recording.json").to_str().unwrap(),
        "--checkpoint",
        t1.join("model.ckpt").to_str().unwrap(),
        "--from",
        "100",
        "--to",
        "150",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        x.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(x.join("trace.csv")).unwrap();
    assert!(trace.lines().count() > 400); // ~45 s at 10 steps/s plus header
}

#[test]
fn empty_manifest_is_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("segments.jsonl");
    std::fs::write(&manifest, "").unwrap();
    let out = run(&[
        "train",
        "--manifest",
        manifest.to_str().unwrap(),
        "--seed",
        "1",
        "--out-dir",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_lambdas_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&[
        "detect",
        "--recording",
        "nonexistent.json",
        "--checkpoint",
        "nonexistent.ckpt",
        "--lambdas",
        "0.5,0.5",
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
