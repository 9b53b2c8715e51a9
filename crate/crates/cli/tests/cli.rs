use std::path::Path;
use std::process::{Command, Output};

use bingnn_cli::config::ModelConfig;
use serde_json::Value;

fn bingnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bingnn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn small_config(dir: &Path) -> String {
    let c = ModelConfig {
        features: 24,
        hidden: 8,
        classes: 3,
        ..ModelConfig::gcn_bin(2)
    };
    let p = dir.join("model.json");
    std::fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_GRAPH: [&str; 4] = ["--synthetic-nodes", "90", "--synthetic-edges", "200"];

#[test]
fn convert_reports_tiles_and_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.txt");
    let output = dir.path().join("g.frdc");
    std::fs::write(&input, "# two edges\n0 1\n5 6\n").unwrap();
    let out = bingnn(&[
        "convert",
        input.to_str().unwrap(),
        output.to_str().unwrap(),
        "--nodes",
        "8",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = json(&out);
    assert_eq!(s["nnz_tiles"], 2);
    assert_eq!(s["nnz_bits"], 2);
    assert_eq!(s["file_bytes"], 72);
    assert_eq!(std::fs::metadata(&output).unwrap().len(), 72);
}

#[test]
fn convert_names_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.txt");
    std::fs::write(&input, "0 1\n1 two\n").unwrap();
    let out = bingnn(&[
        "convert",
        input.to_str().unwrap(),
        dir.path().join("g.frdc").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn verify_passes_and_a_corrupted_tile_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let mut args = vec!["verify", "--config", &config];
    args.extend(SMALL_GRAPH);
    let out = bingnn(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(r["status"], "pass");
    assert_eq!(r["bit_mismatches"], 0);

    args.extend(["--corrupt-tile", "0"]);
    let out = bingnn(&args);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["status"], "fail");
    assert!(r["corrupted_edge"].is_array());
    assert!(String::from_utf8_lossy(&out.stderr).contains("first bit mismatch"));
}

#[test]
fn bench_reports_memory_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let report = dir.path().join("bench.json");
    let mut args = vec![
        "--out",
        report.to_str().unwrap(),
        "bench",
        "--config",
        &config,
        "--reps",
        "2",
    ];
    args.extend(SMALL_GRAPH);
    let out = bingnn(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["reps"], 2);
    assert_eq!(r["verification"], "pass");
    assert!(r["memory"]["peak_allocated_bytes"].as_u64().unwrap() > 0);
    let kernels: Vec<&str> = r["kernels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|k| k["kernel"].as_str().unwrap())
        .collect();
    assert_eq!(
        kernels,
        ["BMM.FBB", "BSpMM.BBB", "BMM.BBF", "BSpMM.FBF", "Softmax"]
    );
}

#[test]
fn tune_emits_a_usable_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let mut args = vec![
        "tune",
        "--config",
        &config,
        "--reps",
        "1",
        "--strategy",
        "if-else",
    ];
    args.extend(SMALL_GRAPH);
    let out = bingnn(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    let winner = serde_json::to_string(&r["winner"]["config"]).unwrap();
    let c = ModelConfig::from_json(&winner).unwrap();
    assert!(c.instantiate(90).is_ok());
    assert_eq!(r["winner"]["strategy"], "if-else");
    assert!(r["candidates"].as_array().unwrap().len() > 1);
}
