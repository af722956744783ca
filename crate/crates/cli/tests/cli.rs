use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qkernel(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkernel"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = qkernel(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn step_by_step_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--dataset", "xor", "--seed", "3", "--out", "data"], d);
    let gram = ok(&["gram", "--data", "data/train.csv", "--kernel", "cosine:1", "--out", "gram.csv"], d);
    assert!(gram.starts_with("780 kernel evaluations"), "{gram}");
    let train = ok(&["train", "--gram", "gram.csv", "--data", "data/train.csv", "--gamma", "1"], d);
    assert!(train.contains("train accuracy"), "{train}");
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["a"].as_array().unwrap().len(), 40);
    assert_eq!(model["gamma"], 1.0);
    let eval = ok(
        &["eval", "--model", "model.json", "--train", "data/train.csv", "--test", "data/test.csv"],
        d,
    );
    assert!(eval.starts_with("test accuracy"), "{eval}");
    ok(
        &[
            "boundary", "--model", "model.json", "--train", "data/train.csv", "--test", "data/test.csv", "--side", "35",
            "--svg", "boundary.svg",
        ],
        d,
    );
    assert_eq!(fs::read_to_string(d.join("grid.csv")).unwrap().lines().count(), 1226);
    assert!(fs::read_to_string(d.join("boundary.svg")).unwrap().starts_with("<svg"));

    let noisy = ok(
        &["gram", "--data", "data/train.csv", "--events", "2500", "--fidelity", "0.98", "--seed", "5", "--out", "noisy.csv"],
        d,
    );
    assert!(noisy.starts_with("780"));
    ok(&["train", "--gram", "noisy.csv", "--data", "data/train.csv", "--out", "noisy.json"], d);
}

#[test]
fn bench_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["bench", "--dataset", "moons", "--seed", "3", "--events", "2500", "--fidelity", "0.98", "--out", out]
    };
    ok(&args("a"), d);
    ok(&args("b"), d);
    let names = ["train.csv", "test.csv", "gram.csv", "grid.csv", "report.json", "model.json", "boundary.svg", "config.toml"];
    for name in names {
        let a = fs::read(d.join("a").join(name)).unwrap();
        let b = fs::read(d.join("b").join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs");
    }
    ok(&["bench", "--config", "a/config.toml", "--out", "c"], d);
    assert_eq!(fs::read(d.join("a/report.json")).unwrap(), fs::read(d.join("c/report.json")).unwrap());
}

#[test]
fn errors_are_stage_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = qkernel(&["gram", "--data", "missing.csv"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: read: i/o error at missing.csv"), "{err}");

    let out = qkernel(&["bench", "--kernel", "cosine:0", "--out", "x"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));

    let out = qkernel(&["bench", "--gamma=-1", "--out", "x"], d);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let out = qkernel(&["gen", "--dataset", "spiral"], d);
    assert!(!out.status.success());
}

#[test]
fn resolution_and_accuracy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let table = ok(&["resolve", "--lens", "2..6", "--families", "msi,tsq:3,optimized"], d);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "family,L,variance,resolution");
    assert_eq!(lines.len(), 1 + 3 * 5);
    let sweep = ok(&["sweep", "--datasets", "concentric", "--kernels", "cosine:1,cosine:2", "--gammas", "1,10"], d);
    assert_eq!(sweep.lines().count(), 5);
}
