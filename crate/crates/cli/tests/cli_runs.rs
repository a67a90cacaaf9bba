use std::fs;
use std::process::Command as Process;

use rcv_cli::{run, Command, InputFormat, RunConfig};
use rcv_core::ingest::SourceFormat;
use rcv_core::pipeline::AllowanceSetting;
use rcv_core::Error;

const E1: &str = "ranking,count\nA,4\nB,3\nC>B,2\n";

fn e1_config(command: Command, dir: &tempfile::TempDir) -> RunConfig {
    let input = dir.path().join("e1.csv");
    fs::write(&input, E1).unwrap();
    RunConfig::new(command, input, dir.path().join("out"))
}

#[test]
fn tabulate_writes_round_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = e1_config(Command::Tabulate, &dir);
    let text = run(&config).unwrap();
    assert!(text.starts_with("(B,A,C; LW)"));
    let rounds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.out.join("rounds.json")).unwrap()).unwrap();
    assert_eq!(rounds["structure"]["order"], serde_json::json!([1, 0, 2]));
    assert_eq!(rounds["structure"]["sequence"], serde_json::json!(["L", "W"]));
    assert!(config.out.join("manifest.json").exists());
}

#[test]
fn report_is_a_function_of_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = e1_config(Command::Analyze, &dir);
    config.allowance = AllowanceSetting::Percent { percent: 40.0 };
    config.iterations = 500;
    run(&config).unwrap();
    let analyzed = fs::read_to_string(config.out.join("report.md")).unwrap();
    let report_config = RunConfig::new(Command::Report, config.out.join("analysis.json"), dir.path().join("report"));
    run(&report_config).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("report/report.md")).unwrap(), analyzed);
    assert!(analyzed.contains("| A | A | 22.22% | Competitive | A 22.22% |"));
}

#[test]
fn manifest_records_config_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    let config = e1_config(Command::Reduce, &dir);
    run(&config).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["command"], "reduce");
    assert_eq!(manifest["input_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["artifacts"], serde_json::json!(["reduction.json"]));
}

#[test]
fn refuses_oversized_search_with_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("ranking,count\n");
    for (i, c) in "ABCDEFGHIJKL".chars().enumerate() {
        text.push_str(&format!("{c},{}\n", 10 + i));
    }
    let input = dir.path().join("wide.csv");
    fs::write(&input, text).unwrap();
    let mut config = RunConfig::new(Command::Analyze, input, dir.path().join("out"));
    config.allowance = AllowanceSetting::Percent { percent: 40.0 };
    match run(&config) {
        Err(Error::SearchTooLarge { relevant, cap, .. }) => {
            assert_eq!(relevant, 12);
            assert_eq!(cap, 10);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ingests_simple_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("cvr.csv");
    fs::write(&input, "rank1,rank2\nA,\nA,\nA,\nA,\nB,\nB,\nB,\nC,B\nC,B\n,\n").unwrap();
    let mut config = RunConfig::new(Command::Tabulate, input, dir.path().join("out"));
    config.format = InputFormat::Source(SourceFormat::SimpleCsv);
    let (instance, report) = rcv_cli::load_instance(&config).unwrap();
    assert_eq!(instance.total_ballots(), 9);
    assert_eq!(report.unwrap().discarded, 1);
    assert!(run(&config).unwrap().starts_with("(B,A,C; LW)"));
}

#[test]
fn binary_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_rcv"))
        .args(["analyze", "--input"])
        .arg(dir.path().join("missing.csv"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
    assert!(dir.path().join("out/error.json").exists());
}

#[test]
fn binary_runs_tabulate() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("e1.csv");
    fs::write(&input, E1).unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_rcv"))
        .args(["tabulate", "--input"])
        .arg(&input)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("2,4.0000,5.0000,,0.0000,W:B"));
}

#[test]
fn bootstrap_analyzes_selected_pool_members() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = e1_config(Command::Bootstrap, &dir);
    config.allowance = AllowanceSetting::Percent { percent: 40.0 };
    config.samples = 4;
    config.pool = Some(20);
    config.seed = 11;
    run(&config).unwrap();
    let mut files: Vec<String> = fs::read_dir(config.out.join("samples"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let expected: Vec<String> = rcv_core::bootstrap::select_samples(20, 4, 11)
        .unwrap()
        .iter()
        .map(|i| format!("sample_{i:05}.json"))
        .collect();
    assert_eq!(files, expected);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config.out.join("bootstrap.json")).unwrap()).unwrap();
    assert_eq!(summary["samples"], 4);
    let first = fs::read_to_string(config.out.join("bootstrap.csv")).unwrap();
    run(&config).unwrap();
    assert_eq!(fs::read_to_string(config.out.join("bootstrap.csv")).unwrap(), first);
}
