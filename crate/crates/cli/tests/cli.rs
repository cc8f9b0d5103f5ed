use std::path::Path;
use std::process::{Command, Output};

use qhash_cli::sweep::point_seed;
use serde_json::Value;

fn qhash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhash")).args(args).env_remove("QHASH_WORKERS").output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_command_is_a_config_error() {
    let out = qhash(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no command"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "command = \"attack\"\nbogus = 1\n");
    let out = qhash(&["--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn hadamard_attack_with_six_leaked_bits() {
    let v = json(&qhash(&["attack", "--n", "8", "--construction", "hadamard", "--leak", "prefix:6", "--seed", "1"]));
    assert_eq!(v["e_s_star"], 0.25);
    assert_eq!(v["p_g"], 0.25);
    assert_eq!(v["delta"], 0.0);
    assert_eq!(v["holds"], true);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "command = \"attack\"\nleak = \"prefix:1\"\n[scheme]\nn = 4\n");
    let from_file = json(&qhash(&["--config", &cfg]));
    assert_eq!(from_file["n"], 4.0);
    assert_eq!(from_file["p_g"], 0.125);
    let overridden = json(&qhash(&["--config", &cfg, "attack", "--n", "6"]));
    assert_eq!(overridden["n"], 6.0);
    assert_eq!(overridden["leak"], "prefix:1");
}

#[test]
fn config_and_subcommand_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "command = \"swap\"\n[scheme]\nn = 2\n");
    assert_eq!(qhash(&["--config", &cfg, "attack"]).status.code(), Some(2));
}

#[test]
fn report_and_csv_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let out = qhash(&[
        "attack",
        "--n",
        "5",
        "--leak",
        "prefix:2",
        "--output",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["p_g"], 0.125);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().next().unwrap().contains("e_s_star"));
}

#[test]
fn decomposition_weights_sum_to_guessing_probability() {
    let dir = tempfile::tempdir().unwrap();
    let table = [[0.3, 0.1], [0.2, 0.1], [0.1, 0.2]];
    let input = write(
        dir.path(),
        "j.json",
        &serde_json::json!({"x_labels": ["a", "b", "c"], "y_labels": ["0", "1"], "table": table}).to_string(),
    );
    let pg: f64 = (0..2).map(|y| table.iter().map(|row| row[y]).fold(0.0, f64::max)).sum();
    for method in ["lattice", "levelsets"] {
        let v = json(&qhash(&["decompose", "--input", &input, "--method", method]));
        let weights: f64 = v["decomposition"]["atoms"].as_array().unwrap().iter().map(|a| a[1].as_f64().unwrap()).sum();
        assert!((weights - pg).abs() < 1e-12);
        assert!((v["weight_sum"].as_f64().unwrap() - pg).abs() < 1e-12);
        assert_eq!(v["methods_agree"], true);
    }
}

#[test]
fn single_point_sweep_matches_the_attack_command() {
    let master = 42u64;
    let out = qhash(&[
        "sweep",
        "--master-seed",
        &master.to_string(),
        "--n",
        "5",
        "--leak",
        "2",
        "--constructions",
        "random-linear",
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let field = |name: &str| rows[0][headers.iter().position(|h| h == name).unwrap()].to_string();

    let seed = point_seed(master, 0).to_string();
    let v =
        json(&qhash(&["attack", "--n", "5", "--construction", "random-linear", "--leak", "prefix:2", "--seed", &seed]));
    assert_eq!(field("seed"), seed);
    for key in ["e_s_star", "delta", "p_g", "bound"] {
        assert_eq!(field(key).parse::<f64>().unwrap(), v[key].as_f64().unwrap(), "{key}");
    }
}

#[test]
fn unreachable_overlap_target_exits_with_numerical_status() {
    let out = qhash(&[
        "fingerprint",
        "--n",
        "6",
        "--construction",
        "random-linear",
        "--code-len",
        "4",
        "--delta-target",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn invalid_worker_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_qhash"))
        .args(["sweep", "--n", "3"])
        .env("QHASH_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exported_scheme_can_be_loaded_back() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qhash(&["fingerprint", "--n", "3", "--construction", "random-linear", "--seed", "9"]));
    let file = write(dir.path(), "s.json", &v["scheme"].to_string());
    let back = json(&qhash(&["fingerprint", "--n", "3", "--construction", "external", "--scheme-file", &file]));
    assert_eq!(back["delta"], v["delta"]);
    assert_eq!(back["code_len"], v["code_len"]);
}

#[test]
fn swap_honest_submission_always_passes() {
    let v = json(&qhash(&["swap", "--n", "2", "--t", "3", "--leak", "prefix:1"]));
    assert_eq!(v["honest_min_acceptance"], 1.0);
    assert!(v["acceptance"].as_f64().unwrap() <= v["bound"].as_f64().unwrap() + 1e-9);
}
