use std::fs;
use std::process::Command;

use few::engine::FittedPipeline;

fn few() -> Command {
    Command::new(env!("CARGO_BIN_EXE_few"))
}

#[test]
fn datagen_parity_has_default_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("parity.csv");
    let status = few().args(["datagen", "parity", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 11);
    assert_eq!(lines.count(), 1124);
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("epi.csv");
    let model = dir.path().join("model.json");
    assert!(few()
        .args(["datagen", "epistasis", "--samples", "300", "--features", "6", "--seed", "2", "--out"])
        .arg(&data)
        .status()
        .unwrap()
        .success());
    let fit = few()
        .args(["fit", "--generations", "5", "--pop-size", "8", "--output-type", "bool", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let pipe = FittedPipeline::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(pipe.n_inputs, 6);
    assert_eq!(pipe.class_names, vec!["0", "1"]);

    let pred = few().args(["predict", "--target", "label", "--pipeline"]).arg(&model).arg("--data").arg(&data).output().unwrap();
    assert!(pred.status.success(), "{}", String::from_utf8_lossy(&pred.stderr));
    let labels: Vec<String> = String::from_utf8(pred.stdout).unwrap().lines().map(str::to_string).collect();
    assert_eq!(labels.len(), 300);
    assert!(labels.iter().all(|l| l == "0" || l == "1"));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let status = few()
        .args(["bench", "--methods", "gnb", "--splits", "1", "--data"])
        .arg(dir.path().join("nope.csv"))
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bad_options_are_usage_errors() {
    assert_eq!(few().args(["fit", "--data"]).status().unwrap().code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("p.csv");
    assert!(few().args(["datagen", "parity", "--samples", "64", "--features", "4", "--relevant", "2", "--out"]).arg(&data).status().unwrap().success());
    let code = few()
        .args(["fit", "--ml", "perceptron", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("m.json"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(1));
}

#[test]
fn bench_writes_results_and_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(few().args(["datagen", "parity", "--samples", "96", "--features", "5", "--relevant", "2", "--out"]).arg(&a).status().unwrap().success());
    assert!(few().args(["datagen", "epistasis", "--samples", "120", "--features", "4", "--out"]).arg(&b).status().unwrap().success());
    let results = dir.path().join("results.csv");
    let ranks = dir.path().join("ranks.csv");
    let run = few()
        .args(["bench", "--methods", "gnb,dtree", "--splits", "2", "--folds", "3", "--cap", "4", "--deterministic", "--threads", "1"])
        .arg("--data")
        .arg(&a)
        .arg("--data")
        .arg(&b)
        .arg("--out")
        .arg(&results)
        .arg("--rank-out")
        .arg(&ranks)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = fs::read_to_string(&results).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    let first = fs::read(&ranks).unwrap();
    // re-ranking the stored results reproduces the rank file
    fs::remove_file(&ranks).unwrap();
    assert!(few().args(["bench", "--rank-only", "--data"]).arg(&a).arg("--out").arg(&results).arg("--rank-out").arg(&ranks).status().unwrap().success());
    assert_eq!(fs::read(&ranks).unwrap(), first);
}
