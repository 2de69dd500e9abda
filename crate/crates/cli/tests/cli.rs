//! End-to-end tests of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_foresttune"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let output = run(&[]);
    assert_eq!(output.status.code(), Some(2));
    let text = format!("{}{}", stdout(&output), stderr(&output));
    assert!(text.contains("Usage"), "usage text expected, got: {text}");
}

#[test]
fn unknown_subcommand_exits_2() {
    let output = run(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bad_flag_value_exits_2() {
    let output = run(&["tune", "--data", "x.csv", "--target", "y", "--measure", "nope"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("unknown measure"));
}

#[test]
fn missing_file_is_a_runtime_error_with_module_prefix() {
    let output = run(&["train", "--data", "/no/such/file.csv", "--target", "y", "--out", "/tmp/x.model"]);
    assert_eq!(output.status.code(), Some(1));
    let err = stderr(&output);
    assert!(err.contains("error: data:"), "got: {err}");
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "train",
        "predict",
        "tune",
        "estimate-time",
        "oob-curve",
        "importance",
        "stability",
        "synth",
        "benchmark",
    ] {
        let output = run(&[sub, "--help"]);
        assert_eq!(output.status.code(), Some(0), "{sub} --help");
        assert!(stdout(&output).contains("Usage"), "{sub} help text");
    }
}

#[test]
fn seed_is_printed_and_env_fallback_works() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    let output = run(&["synth", "monks2", "--out", csv.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(output.status.code(), Some(0));
    assert!(stderr(&output).contains("seed: 9"));

    let output = bin()
        .env("FORESTTUNE_SEED", "123")
        .args(["synth", "monks2", "--out", csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(stderr(&output).contains("seed: 123"));
}

fn write_tiny_csv(path: &Path) {
    let text = "x1,x2,color,y\n\
                1.0,5.0,red,a\n\
                2.0,4.0,red,a\n\
                3.0,3.5,blue,b\n\
                4.0,2.0,blue,b\n\
                1.5,4.5,red,a\n\
                3.5,2.5,blue,b\n\
                2.5,4.2,red,a\n\
                4.2,1.8,blue,b\n";
    std::fs::write(path, text).unwrap();
}

#[test]
fn train_predict_round_trip_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_tiny_csv(&csv);
    let model_a = dir.path().join("a.model");
    let model_b = dir.path().join("b.model");

    for model in [&model_a, &model_b] {
        let output = run(&[
            "train",
            "--data",
            csv.to_str().unwrap(),
            "--target",
            "y",
            "--num-trees",
            "20",
            "--seed",
            "5",
            "--out",
            model.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    }
    // same seed, byte-identical model files
    let a = std::fs::read(&model_a).unwrap();
    let b = std::fs::read(&model_b).unwrap();
    assert_eq!(a, b);

    let preds = dir.path().join("p.csv");
    let output = run(&[
        "predict",
        "--model",
        model_a.to_str().unwrap(),
        "--data",
        csv.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "prediction,prob_a,prob_b");
    assert_eq!(lines.count(), 8);
    // the training data is cleanly separable, so training rows predict
    // their own labels
    assert!(text.lines().nth(1).unwrap().starts_with('a'));
}

#[test]
fn tune_prints_recommendation_block() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    run(&["synth", "sparse", "--n", "60", "--informative", "2", "--noise", "2", "--out", csv.to_str().unwrap()]);
    let history = dir.path().join("h.csv");
    let output = run(&[
        "tune",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--measure",
        "brier",
        "--num-trees",
        "20",
        "--warmup",
        "3",
        "--iters",
        "2",
        "--candidates",
        "30",
        "--seed",
        "4",
        "--history",
        history.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let out = stdout(&output);
    assert!(out.contains("Recommended parameter settings:"), "{out}");
    assert!(out.contains("mtry"), "{out}");
    assert!(out.contains("min.node.size"), "{out}");
    assert!(out.contains("sample.fraction"), "{out}");
    assert!(out.contains("Results:"), "{out}");
    assert!(out.contains("brier"), "{out}");
    let history_text = std::fs::read_to_string(&history).unwrap();
    assert!(history_text.starts_with("iteration,mtry,sample_fraction,min_node_size,objective"));
    assert_eq!(history_text.lines().count(), 6); // header + 5 evaluations
}

#[test]
fn estimate_time_prints_duration_format() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_tiny_csv(&csv);
    let output = run(&[
        "estimate-time",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--num-trees",
        "10",
        "--warmup",
        "2",
        "--iters",
        "3",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let out = stdout(&output);
    let line = out
        .lines()
        .find(|l| l.starts_with("Estimated tuning time:"))
        .expect("duration line");
    // "XM YS" shape
    let duration = line.trim_start_matches("Estimated tuning time:").trim();
    let parts: Vec<&str> = duration.split(' ').collect();
    assert_eq!(parts.len(), 2, "duration {duration:?}");
    assert!(parts[0].ends_with('M') && parts[1].ends_with('S'), "{duration:?}");
}

#[test]
fn oob_curve_and_importance_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    run(&["synth", "sparse", "--n", "50", "--informative", "2", "--noise", "1", "--out", csv.to_str().unwrap()]);

    let curve = dir.path().join("curve.csv");
    let output = run(&[
        "oob-curve",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--classify",
        "--num-trees",
        "20",
        "--grid",
        "5,10,20",
        "--out",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = std::fs::read_to_string(&curve).unwrap();
    assert!(text.starts_with("ntree,measure,value"));
    assert_eq!(text.lines().count(), 1 + 3 * 2); // two default measures

    let imp = dir.path().join("imp.csv");
    let output = run(&[
        "importance",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--classify",
        "--num-trees",
        "20",
        "--reps",
        "2",
        "--out",
        imp.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = std::fs::read_to_string(&imp).unwrap();
    assert!(text.starts_with("feature,importance,se"));
    assert_eq!(text.lines().count(), 4); // three features
}

#[test]
fn benchmark_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    run(&["synth", "sparse", "--n", "40", "--informative", "2", "--noise", "1", "--out", csv.to_str().unwrap()]);
    let out_dir = dir.path().join("bench");
    let output = run(&[
        "benchmark",
        "--dataset",
        &format!("{}=y", csv.display()),
        "--methods",
        "default,walk",
        "--folds",
        "2",
        "--num-trees",
        "10",
        "--measures",
        "mmce,brier",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    for file in ["means.csv", "ranks.csv", "manifest.txt"] {
        let path = out_dir.join(file);
        assert!(path.exists(), "{file} missing");
    }
    let means = std::fs::read_to_string(out_dir.join("means.csv")).unwrap();
    assert!(means.starts_with("method,mmce,brier,runtime"));
    assert_eq!(means.lines().count(), 3);
}

#[test]
fn stability_outputs_square_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    run(&["synth", "sparse", "--n", "40", "--informative", "2", "--noise", "1", "--out", csv.to_str().unwrap()]);
    let output = run(&[
        "stability",
        "--data",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--classify",
        "--num-trees",
        "10",
        "--forests",
        "3",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let out = stdout(&output);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "forest_0,forest_1,forest_2");
    assert_eq!(lines.count(), 3);
}
