//! CLI behaviour: exit codes, file outputs, config precedence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sysrisk")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sysrisk-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_spreads(dir: &Path, days: usize) -> PathBuf {
    let path = dir.join("spreads.csv");
    let mut body = String::from("date,NORTH,SOUTH,EAST\n");
    let mut date = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    for i in 0..days {
        // smooth co-moving series with idiosyncratic wiggles
        let base = 80.0 + 20.0 * ((i as f64) / 40.0).sin();
        body.push_str(&format!(
            "{},{:.4},{:.4},{:.4}\n",
            date.format("%Y-%m-%d"),
            base + 5.0 * ((i as f64) / 7.0).sin(),
            base + 4.0 * ((i as f64) / 11.0).cos(),
            0.8 * base + 3.0 * ((i as f64) / 5.0).sin(),
        ));
        date = date.succ_opt().unwrap();
    }
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn tau_marshall_olkin_value_lands_in_csv() {
    let dir = temp_dir("tau");
    let (code, stdout, _) = run(&[
        "tau",
        "--family",
        "independence",
        "--alpha",
        "0.5,0.5",
        "--theta",
        "1,0,0",
        "--grid",
        "50",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0.333333"), "{stdout}");
    let taus = std::fs::read_to_string(dir.join("taus.csv")).unwrap();
    assert!(taus.lines().count() == 2, "{taus}");
    assert!(taus.contains("0.333333"), "{taus}");
    let grid = std::fs::read_to_string(dir.join("kendall_fn_1_2.csv")).unwrap();
    assert_eq!(grid.lines().count(), 51, "header plus 50 grid rows");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn tau_clayton_matches_library_value() {
    let dir = temp_dir("tau-clayton");
    let (code, stdout, _) = run(&[
        "tau",
        "--family",
        "clayton",
        "--alpha",
        "0.5,0.5",
        "--theta",
        "0,0.5,0.5",
        "--beta",
        "2,2",
        "--grid",
        "10",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    // tau = 0.375 with decomposition 1/3 + 1/48 + 1/48
    assert!(stdout.contains("0.375000"), "{stdout}");
    let taus = std::fs::read_to_string(dir.join("taus.csv")).unwrap();
    assert!(taus.contains("0.375000"), "{taus}");
    assert!(taus.contains("0.333333"), "{taus}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_theta_sum_exits_2() {
    let (code, _, stderr) = run(&[
        "tau",
        "--family",
        "independence",
        "--alpha",
        "0.5,0.5",
        "--theta",
        "0.5,0.2,0.2",
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("sum"), "{stderr}");
}

#[test]
fn unknown_flag_is_rejected() {
    let (code, _, _) = run(&["tau", "--no-such-flag", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn simulate_requires_minimum_sample_size() {
    let (code, _, stderr) = run(&[
        "simulate",
        "--family",
        "independence",
        "--alpha",
        "0.5,0.5",
        "--theta",
        "1,0,0",
        "--n",
        "10",
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("1000"), "{stderr}");
}

#[test]
fn simulate_writes_summary_with_z_scores() {
    let dir = temp_dir("simulate");
    let (code, stdout, _) = run(&[
        "simulate",
        "--family",
        "independence",
        "--alpha",
        "0.5,0.5",
        "--theta",
        "1,0,0",
        "--n",
        "20000",
        "--seed",
        "5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("tau_T1_T2"), "{stdout}");
    let csv = std::fs::read_to_string(dir.join("simulate_summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "statistic,empirical,theoretical,std_error,z_score"
    );
    // one tau row and one simultaneous row
    assert_eq!(lines.count(), 2, "{csv}");
    // the Marshall-Olkin tau 1/3 appears as the theoretical value
    assert!(csv.contains("0.333333"), "{csv}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn calibrate_full_pipeline_writes_riskiness_csv() {
    let dir = temp_dir("calibrate");
    let spreads = write_spreads(&dir, 400);
    let (code, stdout, _) = run(&[
        "calibrate",
        "--spreads",
        spreads.to_str().unwrap(),
        "--year",
        "2019",
        "--family",
        "clayton",
        "--lgd",
        "0.6",
        "--restarts",
        "6",
        "--max-iters",
        "1200",
        "--seed",
        "9",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("objective"), "{stdout}");
    let csv = std::fs::read_to_string(dir.join("riskiness_2019.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "entity,tau_x0_x,tau_x0_t");
    assert_eq!(lines.len(), 4, "{csv}");
    assert!(lines[1].starts_with("NORTH,"), "{csv}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn calibrate_missing_file_exits_3() {
    let (code, _, stderr) = run(&[
        "calibrate",
        "--spreads",
        "/nonexistent/nowhere.csv",
        "--year",
        "2019",
    ]);
    assert_eq!(code, 3, "{stderr}");
}

#[test]
fn calibrate_short_year_exits_3_naming_the_year() {
    let dir = temp_dir("short-year");
    let spreads = write_spreads(&dir, 10);
    let (code, _, stderr) = run(&[
        "calibrate",
        "--spreads",
        spreads.to_str().unwrap(),
        "--year",
        "2019",
    ]);
    assert_eq!(code, 3);
    assert!(stderr.contains("2019"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_spreads_exit_3_with_line_number() {
    let dir = temp_dir("malformed");
    let path = dir.join("bad.csv");
    std::fs::write(&path, "date,a,b\n2019-01-01,1,2\nnot-a-date,3,4\n").unwrap();
    let (code, _, stderr) = run(&[
        "calibrate",
        "--spreads",
        path.to_str().unwrap(),
        "--year",
        "2019",
    ]);
    assert_eq!(code, 3);
    assert!(stderr.contains("line 3"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn config_file_supplies_flags_with_cli_precedence() {
    let dir = temp_dir("config");
    let config = dir.join("run.json");
    std::fs::write(
        &config,
        r#"{"family": "independence", "alpha": "0.5,0.5", "theta": "1,0,0", "grid": 20}"#,
    )
    .unwrap();
    // everything from the config file
    let (code, stdout, _) = run(&[
        "tau",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0.333333"), "{stdout}");
    let grid = std::fs::read_to_string(dir.join("kendall_fn_1_2.csv")).unwrap();
    assert_eq!(grid.lines().count(), 21);
    // CLI overrides the config grid
    let (code, _, _) = run(&[
        "tau",
        "--config",
        config.to_str().unwrap(),
        "--grid",
        "5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let grid = std::fs::read_to_string(dir.join("kendall_fn_1_2.csv")).unwrap();
    assert_eq!(grid.lines().count(), 6);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn outputs_round_trip_at_declared_precision() {
    let dir = temp_dir("roundtrip");
    let (code, _, _) = run(&[
        "tau",
        "--family",
        "clayton",
        "--alpha",
        "0.55,0.65",
        "--theta",
        "0.1,0.5,0.4",
        "--beta",
        "1.7,2.9",
        "--grid",
        "25",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.join("taus.csv")).unwrap();
    let data_line = csv.lines().nth(1).unwrap();
    let tau_text = data_line.split(',').nth(4).unwrap();
    let parsed: f64 = tau_text.parse().unwrap();
    // reformatting the parsed value reproduces the text exactly
    assert_eq!(sysrisk::cli::format_sig(parsed), tau_text);
    std::fs::remove_dir_all(&dir).ok();
}
