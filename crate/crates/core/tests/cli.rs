use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detthin::cli::{RunManifest, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERIC, EXIT_OK};
use detthin::geometry::{PoissonModel, Window};
use detthin::io::{self, ModelFile};
use detthin::model::ThinningModel;

fn detthin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detthin")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    detthin(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, seed: &str, count: &str) -> PathBuf {
    let out = dir.join(name);
    let args = ["generate", "matern2", "--lambda", "10", "--rm", "0.253", "--T", count, "--seed", seed, "--out", s(&out)];
    assert_eq!(code(&args), EXIT_OK);
    out
}

fn write_model(dir: &Path, theta0: f64) -> PathBuf {
    let m = ThinningModel::gaussian([theta0, 0.0, 0.0, 0.0], 0.2, PoissonModel::new(10.0, Window::unit_disk()).unwrap())
        .unwrap();
    let path = dir.join(format!("model{theta0}.json"));
    io::write_json(&path, &ModelFile::from_model(&m).unwrap()).unwrap();
    path
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(generate(dir.path(), "a.jsonl", "5", "20")).unwrap();
    let b = fs::read(generate(dir.path(), "b.jsonl", "5", "20")).unwrap();
    let c = fs::read(generate(dir.path(), "c.jsonl", "6", "20")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.iter().filter(|&&x| x == b'\n').count(), 20);
    // Pair t depends only on (seed, t).
    let prefix = fs::read(generate(dir.path(), "d.jsonl", "5", "7")).unwrap();
    assert!(a.starts_with(&prefix));
}

#[test]
fn empty_and_malformed_training_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = generate(dir.path(), "empty.jsonl", "1", "0");
    assert_eq!(fs::read(&empty).unwrap(), b"");
    let out = dir.path().join("m.json");
    assert_eq!(code(&["fit", "--training", s(&empty), "--out", s(&out)]), EXIT_INPUT);

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"full\": [[0.0, 0.0]], \"retained_idx\": [4]}\n").unwrap();
    let run = detthin(&["fit", "--training", s(&bad), "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 1"));
    assert!(!out.exists());

    assert_eq!(code(&["fit", "--training", s(&dir.path().join("missing.jsonl")), "--out", s(&out)]), EXIT_INPUT);
    assert_eq!(code(&["estimate", "--model", "m.json", "--quantity", "K", "--out", "x"]), EXIT_INPUT);
    assert_eq!(code(&["generate", "matern2", "--lambda", "10", "--out", s(&out)]), EXIT_INPUT);
}

#[test]
fn fit_reports_non_convergence_and_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let training = generate(dir.path(), "t.jsonl", "3", "30");
    let out = dir.path().join("m.json");
    let args = ["fit", "--training", s(&training), "--sigma-grid", "0.2", "--max-iters", "1", "--out", s(&out)];
    assert_eq!(code(&args), EXIT_NOT_CONVERGED);
    let file: ModelFile = io::read_json(&out).unwrap();
    assert!(!file.fit.unwrap().converged);

    assert_eq!(code(&["fit", "--training", s(&training), "--sigma-grid", "0,0.2", "--out", s(&out)]), EXIT_OK);
    let file: ModelFile = io::read_json(&out).unwrap();
    assert!(file.fit.unwrap().converged);
}

#[test]
fn vanishing_retention_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), -60.0);
    let out = dir.path().join("g.csv");
    let args = ["estimate", "--model", s(&model), "--quantity", "G", "--n", "50", "--out", s(&out)];
    assert_eq!(code(&args), EXIT_NUMERIC);
}

#[test]
fn estimate_outputs_are_reproducible_across_threads_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.5);
    let run = |out: &Path, threads: &str, extra: &[&str]| {
        let mut args = vec!["estimate", "--model", s(&model), "--quantity", "H", "--seed", "9", "--out", s(out)];
        args.extend_from_slice(extra);
        let status = Command::new(env!("CARGO_BIN_EXE_detthin"))
            .args(&args)
            .env("DETTHIN_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(EXIT_OK));
        fs::read(out).unwrap()
    };
    let one = run(&dir.path().join("h1.csv"), "1", &["--n", "300"]);
    let four = run(&dir.path().join("h4.csv"), "4", &["--n", "300"]);
    assert_eq!(one, four);
    assert!(one.starts_with(b"r,value,se,n\n"));

    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"n": 300}"#).unwrap();
    let configured = run(&dir.path().join("hc.csv"), "2", &["--n", "10", "--config", s(&config)]);
    assert_eq!(one, configured);

    let manifest: RunManifest = io::read_json(&dir.path().join("hc.manifest.json")).unwrap();
    assert_eq!(manifest.command, "estimate");
    assert_eq!(manifest.config["n"], 300);
    assert_eq!(manifest.outputs[0].sha256, io::sha256_file(&dir.path().join("hc.csv")).unwrap());
    assert_eq!(manifest.inputs[0].sha256, io::sha256_file(&model).unwrap());

    fs::write(&config, r#"{"samples": 300}"#).unwrap();
    let out = dir.path().join("hx.csv");
    assert_eq!(code(&["estimate", "--model", s(&model), "--quantity", "H", "--config", s(&config), "--out", s(&out)]), EXIT_INPUT);
}

#[test]
fn scalar_estimates_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), 0.5);
    let out = dir.path().join("void.json");
    let args = ["estimate", "--model", s(&model), "--quantity", "void", "--radius", "0.2", "--n", "200", "--out", s(&out)];
    assert_eq!(code(&args), EXIT_OK);
    let v: serde_json::Value = io::read_json(&out).unwrap();
    assert_eq!(v["quantity"], "void");
    let p = v["value"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert_eq!(code(&["estimate", "--model", s(&model), "--quantity", "void", "--n", "10", "--out", s(&out)]), EXIT_INPUT);
}
