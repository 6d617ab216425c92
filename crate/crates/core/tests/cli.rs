use std::fs;
use std::process::{Command, Output};

fn cwss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cwss"))
        .args(args)
        .env_remove("CWSS_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn score_of_perfect_decisions_is_one() {
    let o = cwss(&["score", "--stats", "10,0,0,31"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1");
}

#[test]
fn score_reads_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stats.csv");
    fs::write(&path, "a,b,c,d\n# comment\n0,10,31,0\n5,5,0,10\n").unwrap();
    let o = cwss(&["score", "--file", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().collect::<Vec<_>>(), ["-1", "0.5"]);
}

#[test]
fn usage_and_config_errors_exit_with_one() {
    assert_eq!(cwss(&["score", "--stats", "1,2,3"]).status.code(), Some(1));
    assert_eq!(cwss(&["frobnicate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"m": 0, "j": 7}"#).unwrap();
    let o = cwss(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains('m'));
    assert!(!dir.path().join("results.csv").exists());
}

#[test]
fn small_run_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"m": 100, "j": 3, "trials": 4, "snr_grid": [10, "inf"]}"#).unwrap();
    let out = dir.path().join("out");
    let o = cwss(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], cwss::experiment::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines.iter().any(|l| l.starts_with("mod-omp-def,inf,")));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    assert_eq!(json["rows"].as_array().unwrap().len(), 8);
}

#[test]
fn scenario_dump_then_load() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"m": 70, "j": 2}"#).unwrap();
    let dump = dir.path().join("trial.json");
    let o = cwss(&[
        "scenario",
        "dump",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--trial",
        "3",
        "--snr-index",
        "1",
        "--out",
        dump.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = cwss(&["scenario", "load", dump.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("seed 9 trial 3"));
    assert!(text.contains("common support (21 bins)"));
    assert!(text.contains("measurements at SNR 5 dB"));

    fs::write(&dump, "{\"seed\": 1}").unwrap();
    assert_eq!(cwss(&["scenario", "load", dump.to_str().unwrap()]).status.code(), Some(1));
}
