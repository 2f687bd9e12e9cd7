use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn boltzmap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boltzmap"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn boltzmap_threads(dir: &Path, threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boltzmap"))
        .current_dir(dir)
        .env("BOLTZMAP_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Rows of `name,value` CSV after the header comment and column line.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const COUPLINGS: &str = "0,0.5,-0.3\n0.5,0,0.2\n-0.3,0.2,0\n";

fn write_training_data(dir: &Path) {
    let mut text = String::new();
    for k in 0..60u32 {
        let row: Vec<&str> = (0..6)
            .map(|i| if (k * 7 + i * 3) % 5 < 2 { "1" } else { "0" })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(dir.join("data.csv"), text).unwrap();
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = boltzmap(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("Exit status"));
    assert_eq!(boltzmap(dir.path(), &["map", "--bogus"]).status.code(), Some(1));
    assert_eq!(boltzmap(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        boltzmap(dir.path(), &["cumulants", "--activation", "sigmoid"]).status.code(),
        Some(1)
    );
}

#[test]
fn missing_and_malformed_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = boltzmap(dir.path(), &["map", "--model", "nope.rbm"]);
    assert_eq!(missing.status.code(), Some(2));
    fs::write(dir.path().join("bad.rbm"), "not a model\n").unwrap();
    let bad = boltzmap(dir.path(), &["map", "--model", "bad.rbm"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn embed_then_map_reproduces_couplings() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("J.csv"), COUPLINGS).unwrap();
    stdout(&boltzmap(
        dir.path(),
        &["embed", "--couplings", "J.csv", "--out", "out/m.rbm"],
    ));
    assert!(dir.path().join("out/manifest.json").exists());
    let text = stdout(&boltzmap(
        dir.path(),
        &["map", "--model", "out/m.rbm", "--max-order", "3"],
    ));
    assert!(text.starts_with("# boltzmap map manifest-sha256="));
    let terms = boltzmap::InteractionModel::from_csv(&text, Some(3)).unwrap();
    let j = [[0.0, 0.5, -0.3], [0.5, 0.0, 0.2], [-0.3, 0.2, 0.0]];
    for a in 0..3 {
        assert!(terms.get(&[a]).abs() < 1e-9, "field {a}");
        for b in a + 1..3 {
            assert!((terms.get(&[a, b]) - j[a][b]).abs() < 1e-9);
        }
    }
    assert!(terms.get(&[0, 1, 2]).abs() < 1e-9);
}

#[test]
fn map_methods_agree_on_small_model() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("J.csv"), COUPLINGS).unwrap();
    stdout(&boltzmap(dir.path(), &["embed", "--couplings", "J.csv", "--out", "m.rbm"]));
    let expand = stdout(&boltzmap(dir.path(), &["map", "--model", "m.rbm", "--max-order", "3"]));
    let exact = stdout(&boltzmap(
        dir.path(),
        &["map", "--model", "m.rbm", "--max-order", "3", "--method", "exact"],
    ));
    let a = boltzmap::InteractionModel::from_csv(&expand, Some(3)).unwrap();
    let b = boltzmap::InteractionModel::from_csv(&exact, Some(3)).unwrap();
    for (s, x) in a.iter() {
        assert!((b.get(s.indices()) - x).abs() < 1e-9);
    }
}

#[test]
fn validate_reports_chi_square() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("J.csv"), COUPLINGS).unwrap();
    stdout(&boltzmap(dir.path(), &["embed", "--couplings", "J.csv", "--out", "m.rbm"]));
    let out = boltzmap(
        dir.path(),
        &[
            "--seed", "5", "validate", "--model", "m.rbm", "--samples", "500", "--trials", "4",
            "--burn-in", "50", "--summary", "summary.csv",
        ],
    );
    let table = stdout(&out);
    assert_eq!(csv_rows(&table).len(), 8);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("p_value"));
}

#[test]
fn training_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_training_data(dir.path());
    let args = [
        "--seed", "3", "train", "--data", "data.csv", "--activation", "step", "--hidden", "3",
        "--epochs", "4", "--minibatch", "10", "--eval-subset", "10", "--out", "run/m.rbm",
        "--log", "run/log.csv",
    ];
    let read = |name: &str| fs::read(dir.path().join("run").join(name)).unwrap();
    stdout(&boltzmap_threads(dir.path(), "1", &args));
    let (model_1, log_1) = (read("m.rbm"), read("log.csv"));
    stdout(&boltzmap_threads(dir.path(), "3", &args));
    assert_eq!(model_1, read("m.rbm"));
    assert_eq!(log_1, read("log.csv"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&read("manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!(String::from_utf8(log_1).unwrap().starts_with(&format!(
        "# boltzmap train manifest-sha256={}",
        manifest["digest"].as_str().unwrap()
    )));
}

#[test]
fn sample_and_eval_run_on_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    write_training_data(dir.path());
    stdout(&boltzmap(
        dir.path(),
        &[
            "train", "--data", "data.csv", "--activation", "relu", "--hidden", "2", "--epochs",
            "2", "--minibatch", "20", "--out", "m.rbm",
        ],
    ));
    stdout(&boltzmap(
        dir.path(),
        &["sample", "--model", "m.rbm", "--n-samples", "30", "--trials", "2", "--out", "s.csv"],
    ));
    let samples = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(samples.lines().filter(|l| !l.starts_with('#')).count(), 60);
    let eval = stdout(&boltzmap(
        dir.path(),
        &[
            "eval", "--model", "m.rbm", "--data", "data.csv", "--pl", "--exact", "--ais",
            "--runs", "10", "--temps", "200",
        ],
    ));
    let rows = csv_rows(&eval);
    let value = |name: &str| -> f64 {
        rows.iter().find(|r| r[0] == name).unwrap_or_else(|| panic!("{name} missing"))[1]
            .parse()
            .unwrap()
    };
    let exact = value("exact_log_z");
    assert!((value("ais_log_z") - exact).abs() < 0.1);
}

#[test]
fn cumulants_match_finite_differences() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&boltzmap(
        dir.path(),
        &["cumulants", "--activation", "relu", "--bias", "-0.5", "--max-order", "3"],
    ));
    for row in csv_rows(&text) {
        let (k, fd): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
        assert!((k - fd).abs() < 1e-4, "{row:?}");
    }
}
