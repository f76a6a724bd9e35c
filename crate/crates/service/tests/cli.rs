use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use gce_core::scenario::{golden_dataset, task_script};
use gce_core::session::{load_dataset, read_log, write_lines, GenParams};
use gce_service::cli::run_cli_with_log_dir;

const GOLDEN_LOG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/golden/task_log.jsonl");

fn gce() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gce"))
}

fn arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

/// Golden dataset and its 31-task trace written to `dir`.
fn golden_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let ds = golden_dataset();
    let script = task_script(Arc::new(ds.clone()), &Default::default()).unwrap();
    let dataset = dir.join("golden.json");
    let trace = dir.join("tasks.trace.jsonl");
    std::fs::write(&dataset, serde_json::to_string(&ds).unwrap()).unwrap();
    std::fs::write(&trace, write_lines(&script.records)).unwrap();
    (dataset, trace)
}

#[test]
fn gen_defaults_write_39_by_5_by_150() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds.json");
    assert_eq!(run_cli_with_log_dir(["gce", "gen", "--seed", "3", "--out", &arg(&out)], None), 0);
    let ds = load_dataset(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!((ds.entities.len(), ds.variable_count(), ds.event_count()), (39, 5, 150));
    let same = gce_core::session::generate_dataset(&GenParams {
        seed: 3,
        ..GenParams::default()
    })
    .unwrap();
    assert_eq!(ds, same);
}

#[test]
fn replay_of_the_golden_trace_reproduces_the_golden_log() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, trace) = golden_files(dir.path());
    let out = dir.path().join("out/log.jsonl");
    let argv = ["gce", "replay", "--dataset", &arg(&dataset), "--trace", &arg(&trace), "--out", &arg(&out)];
    assert_eq!(run_cli_with_log_dir(argv, None), 0);
    assert!(std::fs::read(&out).unwrap() == std::fs::read(GOLDEN_LOG).unwrap());
}

#[test]
fn snap_guard_flag_and_sensor_reach_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, trace) = golden_files(dir.path());
    let base = ["gce", "replay", "--dataset", &arg(&dataset), "--trace", &arg(&trace)];
    let noisy = dir.path().join("noisy.jsonl");
    let argv: Vec<String> = base
        .iter()
        .map(|s| s.to_string())
        .chain(["--sensor".into(), "jitter=0.003,seed=2".into(), "--no-snap-guard".into()])
        .chain(["--out".into(), arg(&noisy)])
        .collect();
    assert_eq!(run_cli_with_log_dir(argv, None), 0);
    let noisy = std::fs::read(noisy).unwrap();
    assert!(!noisy.is_empty());
    assert!(noisy != std::fs::read(GOLDEN_LOG).unwrap());
}

#[test]
fn log_dir_overrides_the_output_location() {
    let dir = tempfile::tempdir().unwrap();
    let logs = tempfile::tempdir().unwrap();
    let (dataset, trace) = golden_files(dir.path());
    let status = gce()
        .args(["replay", "--dataset", &arg(&dataset), "--trace", &arg(&trace), "--out"])
        .arg(dir.path().join("ignored/run1.jsonl"))
        .env("GCE_LOG_DIR", logs.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(!dir.path().join("ignored/run1.jsonl").exists());
    let log = std::fs::read(logs.path().join("run1.jsonl")).unwrap();
    assert!(log == std::fs::read(GOLDEN_LOG).unwrap());
}

#[test]
fn stats_reports_the_golden_log() {
    let out = gce().args(["stats", "--json", "--log", GOLDEN_LOG]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let log = read_log(std::fs::File::open(GOLDEN_LOG).map(std::io::BufReader::new).unwrap()).unwrap();
    let events = log.iter().filter(|r| !r.is_marker()).count() as u64;
    assert_eq!(stats["total_events"], events);
    assert_eq!(stats["per_feature"]["ModeChanged"], 6);
    assert_eq!(stats["per_feature"]["TravelStarted"], 3);
    let segments = stats["segment_ms"].as_array().unwrap().len();
    assert_eq!(segments, 31);
    let sum: u64 = stats["per_feature"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(sum, events);
}

#[test]
fn stats_on_an_empty_log_is_a_zero_report() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = gce().args(["stats", "--json", "--log"]).arg(&empty).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["total_events"], 0);
    assert_eq!(stats["duration_ms"], 0);
    let text = gce().args(["stats", "--log"]).arg(&empty).output().unwrap();
    assert_eq!(text.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&text.stdout).contains("events: 0"));
}

#[test]
fn validate_accepts_good_files_and_rejects_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, trace) = golden_files(dir.path());
    assert_eq!(run_cli_with_log_dir(["gce", "validate", "--dataset", &arg(&dataset)], None), 0);
    assert_eq!(run_cli_with_log_dir(["gce", "validate", "--trace", &arg(&trace)], None), 0);

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(10, 11);
    let shuffled = dir.path().join("shuffled.jsonl");
    std::fs::write(&shuffled, lines.join("\n")).unwrap();
    assert_eq!(run_cli_with_log_dir(["gce", "validate", "--trace", &arg(&shuffled)], None), 2);

    let mut ds = golden_dataset();
    ds.entities[0].series[0].pop();
    let short = dir.path().join("short.json");
    std::fs::write(&short, serde_json::to_string(&ds).unwrap()).unwrap();
    let out = gce().args(["validate", "--dataset"]).arg(&short).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));

    let missing = dir.path().join("missing.json");
    assert_eq!(run_cli_with_log_dir(["gce", "validate", "--dataset", &arg(&missing)], None), 2);
}

#[test]
fn usage_errors_exit_1() {
    let out = gce().args(["replay", "--trace", "t.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = gce().args(["serve", "--port", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "serve needs --dataset or --gen");
    let out = gce().args(["replay", "--dataset", "d", "--trace", "t", "--sensor", "jitter=x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = gce().arg("--version").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
