use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use refcurve::design::TrialDesign;
use refcurve::logrank::{TestKind, TestResult};
use refcurve::simulation::{rejection_study, OslrReference, SimulationConfig, SimulationReport};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn stand_in() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/pbc_dpca_synthetic.csv")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refcurve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn new_test_on_three_subjects() {
    let (c, e) = (fixture("control.csv"), fixture("experimental.csv"));
    let v = ok_json(&["test", "--control", path(&c), "--experimental", path(&e)]);
    assert!((v["statistic"].as_f64().unwrap() - 0.4472).abs() < 1e-4);
    assert!((v["p_value"].as_f64().unwrap() - 0.6547).abs() < 1e-4);
    assert_eq!(v["variance_new"].as_f64().unwrap(), 1.25);
    assert_eq!(v["reject"], Value::Bool(false));
}

#[test]
fn identical_arms_give_zero() {
    let c = fixture("control.csv");
    let v = ok_json(&["test", "--control", path(&c), "--experimental", path(&c)]);
    assert_eq!(v["statistic"].as_f64().unwrap(), 0.0);
    assert_eq!(v["p_value"].as_f64().unwrap(), 1.0);
}

#[test]
fn all_modes_as_csv() {
    let (c, e) = (fixture("control.csv"), fixture("experimental.csv"));
    let out = run(&[
        "test",
        "--control",
        path(&c),
        "--experimental",
        path(&e),
        "--mode",
        "all",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("test,statistic"));
    assert!(lines[2].starts_with("oslr,0.5,"));
}

#[test]
fn combined_file_with_groups() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("both.csv");
    std::fs::write(&data, "time,status,group\n1,1,A\n2,1,A\n1.5,1,B\n").unwrap();
    let v = ok_json(&["test", "--data", path(&data)]);
    assert!((v["statistic"].as_f64().unwrap() - 0.4472).abs() < 1e-4);
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "time,status\n").unwrap();
    let c = fixture("control.csv");
    let out = run(&["test", "--control", path(&c), "--experimental", path(&empty)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty cohort"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,status\n1,1\n2,9\n").unwrap();
    let out = run(&["test", "--control", path(&c), "--experimental", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = run(&[
        "test",
        "--control",
        path(&c),
        "--experimental",
        path(&c),
        "--alpha",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--kappa", "1", "--accrual", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn degenerate_data_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let early = dir.path().join("early.csv");
    std::fs::write(&early, "time,status\n0.5,0\n").unwrap();
    let out = run(&[
        "test",
        "--control",
        path(&fixture("control.csv")),
        "--experimental",
        path(&early),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn schoenfeld_sizing() {
    let v = ok_json(&[
        "design",
        "--kappa",
        "1",
        "--s1",
        "0.5",
        "--omega0",
        "0.5",
        "--rate",
        "100",
        "--followup",
        "3",
        "--method",
        "schoenfeld",
    ]);
    assert_eq!(v["n_total"].as_u64().unwrap(), 82);
    assert_eq!(v["n_control"].as_u64().unwrap(), 41);
}

#[test]
fn new_sizing_reaches_target() {
    let v = ok_json(&[
        "design",
        "--kappa",
        "1",
        "--s1",
        "0.5",
        "--omega0",
        "0.5",
        "--rate",
        "100",
        "--followup",
        "3",
    ]);
    let n = v["n_total"].as_u64().unwrap();
    assert!((60..=90).contains(&n), "{n}");
    assert!(v["achieved_power"].as_f64().unwrap() >= 0.8);
    let out = run(&[
        "design",
        "--kappa",
        "1",
        "--s1",
        "0.5",
        "--omega0",
        "1",
        "--rate",
        "100",
        "--followup",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn power_curve_csv() {
    let out = run(&[
        "design",
        "--kappa",
        "1",
        "--s1",
        "0.5",
        "--omega0",
        "0.5",
        "--rate",
        "100",
        "--followup",
        "3",
        "--power-curve",
        "0.2,0.5,1.0",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let powers: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(powers.len(), 3);
    assert!(powers.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn inflation_on_stand_in_data() {
    let h = stand_in();
    let common = [
        "inflate",
        "--historical",
        path(&h),
        "--time-unit",
        "days",
        "--event-codes",
        "2",
        "--censor-codes",
        "0,1",
        "--accrual",
        "2",
        "--followup",
        "2",
    ];
    let v = ok_json(&[&common[..], &["--pi", "0.5"]].concat());
    let level = v["inflated_level"].as_f64().unwrap();
    assert!(level > 0.05 && level < 0.5);
    assert!(v["expected_var_new"].as_f64().unwrap() >= v["expected_var_oslr"].as_f64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let sweep_file = dir.path().join("sweep.csv");
    let out = run(&[
        &common[..],
        &[
            "--sweep",
            "pi",
            "--grid",
            "0.1:1:0.1",
            "--format",
            "csv",
            "--out",
            path(&sweep_file),
        ],
    ]
    .concat());
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&sweep_file).unwrap();
    let levels: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(levels.len(), 10);
    assert!(levels.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn simulation_json_round_trips_and_is_seeded() {
    let args = [
        "simulate",
        "--kappa",
        "0.75",
        "--n-total",
        "120",
        "--pi",
        "1",
        "--omega",
        "1",
        "--replications",
        "300",
        "--seed",
        "17",
    ];
    let first = run(&args);
    assert!(first.status.success());
    let again = Command::new(env!("CARGO_BIN_EXE_refcurve"))
        .args(args)
        .env("REFCURVE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(first.stdout, again.stdout);

    let parsed: SimulationReport = serde_json::from_slice(&first.stdout).unwrap();
    let config = SimulationConfig {
        design: TrialDesign {
            accrual_a: 1.2,
            followup_f: 3.0,
            rate_r: 100.0,
            pi: 1.0,
            alpha: 0.05,
            omega0: 1.0,
            kappa: 0.75,
            s1: 0.5,
        },
        omega_true: 1.0,
        n_total: Some(120),
        replications: 300,
        seed: 17,
        tests: vec![TestKind::New, TestKind::Oslr, TestKind::TwoSample],
        oslr_reference: OslrReference::Estimated,
    };
    assert_eq!(parsed, rejection_study(&config).unwrap());
}

#[test]
fn test_result_round_trips() {
    let (c, e) = (fixture("control.csv"), fixture("experimental.csv"));
    let out = run(&["test", "--control", path(&c), "--experimental", path(&e)]);
    let parsed: TestResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.m_hat, 0.5);
    assert_eq!(
        serde_json::to_string_pretty(&parsed).unwrap() + "\n",
        String::from_utf8(out.stdout).unwrap()
    );
}

#[test]
fn huge_alpha_rejects_nearly_always() {
    let v = ok_json(&[
        "simulate",
        "--kappa",
        "1",
        "--n-total",
        "200",
        "--alpha",
        "0.999",
        "--replications",
        "200",
        "--seed",
        "3",
        "--tests",
        "new",
    ]);
    assert!(v["tallies"][0]["rate"].as_f64().unwrap() > 0.99);
}

#[test]
fn table_cells() {
    let v = ok_json(&[
        "simulate",
        "--table",
        "t2",
        "--cells",
        "24",
        "--replications",
        "50",
        "--seed",
        "1",
    ]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["n_used"].as_u64().unwrap(), 82);
    assert_eq!(rows[0]["quantity"], "alpha_new");
    let out = run(&["simulate", "--table", "t1", "--cells", "999", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_setting() {
    let out = Command::new(env!("CARGO_BIN_EXE_refcurve"))
        .args([
            "test",
            "--control",
            path(&fixture("control.csv")),
            "--experimental",
            path(&fixture("control.csv")),
        ])
        .env("REFCURVE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
