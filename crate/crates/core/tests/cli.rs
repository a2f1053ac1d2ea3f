use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_jump-kelly");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn write_market(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const ARBITRAGE_MARKET: &str = r#"{
  "n": 1,
  "mu": 0.08,
  "sigma": 0.15,
  "r": 0.03,
  "lambda": 1,
  "atoms": [{"x": 0.01, "p": 0.5}, {"x": 0.2, "p": 0.5}]
}"#;

#[test]
fn kelly_reports_the_rule() {
    let out = run(&["kelly", "--paper-example"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let b = v["b_star"][0].as_f64().unwrap();
    assert!((b - 0.5853989710224445).abs() < 1e-9);
    for key in ["growth_rate", "gradient_norm", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn artifacts_are_reproducible() {
    let cases: [&[&str]; 5] = [
        &[
            "simulate",
            "--paper-example",
            "--horizon",
            "30",
            "--dt",
            "0.5",
            "--seed",
            "11",
        ],
        &[
            "simulate",
            "--paper-example",
            "--horizon",
            "10",
            "--paths",
            "200",
            "--seed",
            "11",
        ],
        &["outperform", "--paper-example", "--t-max", "20"],
        &[
            "phi-game",
            "--paper-example",
            "--c",
            "1",
            "--n-paths",
            "2000",
            "--seed",
            "5",
        ],
        &["saddle", "--paper-example", "--grid-points", "21"],
    ];
    for args in cases {
        let a = run(args);
        let b = run(args);
        assert!(
            a.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&a.stderr)
        );
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let a = run(&[
        "simulate",
        "--paper-example",
        "--horizon",
        "5",
        "--seed",
        "1",
    ]);
    let b = run(&[
        "simulate",
        "--paper-example",
        "--horizon",
        "5",
        "--seed",
        "2",
    ]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn csv_headers_record_parameters() {
    let text = stdout(&run(&[
        "simulate",
        "--paper-example",
        "--horizon",
        "2",
        "--dt",
        "1",
        "--seed",
        "42",
        "--rules",
        "k=kelly,one=1",
    ]));
    let comments: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    assert!(comments.iter().any(|l| l.starts_with("# market: ")));
    let params = comments
        .iter()
        .find(|l| l.starts_with("# params: "))
        .unwrap();
    let params: Value = serde_json::from_str(params.trim_start_matches("# params: ")).unwrap();
    assert_eq!(params["seed"], 42);
    assert_eq!(params["horizon"], 2.0);
    assert_eq!(params["rules"], serde_json::json!(["k", "one"]));

    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "t,k,one,N_t,U_t");
    assert_eq!(data.len(), 4);
    assert!(data[1].starts_with("0,1,1,0,0"));
}

#[test]
fn outperform_curve_has_expected_columns() {
    let text = stdout(&run(&[
        "outperform",
        "--paper-example",
        "--t-max",
        "300",
        "--t-step",
        "100",
    ]));
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    let last = &rows[3];
    assert_eq!(last[0], "300");
    for cell in &last[1..] {
        assert!(cell.parse::<f64>().unwrap() > 0.9);
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kelly.json");
    let out = run(&["kelly", "--paper-example", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["b_star"].is_array());
}

#[test]
fn market_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let market = write_market(
        dir.path(),
        "m.json",
        r#"{"n": 1, "nu": 0.07, "sigma": 0.15, "r": 0.03, "lambda": 1,
            "atoms": [{"x": 1.0, "p": 0.5}, {"x": -0.5, "p": 0.5}]}"#,
    );
    let from_file = run(&["kelly", "--market", &market]);
    let built_in = run(&["kelly", "--paper-example"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, built_in.stdout);
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let arb = write_market(dir.path(), "arb.json", ARBITRAGE_MARKET);
    let broken = write_market(dir.path(), "broken.json", "{\n  \"n\": 1,\n  \"mu\": 0.1,\n  \"sigma\": 0.2,\n  \"r\": 0,\n  \"lambda\": 0,\n  \"atoms\": [],\n  \"extra\": 1\n}");

    let missing = run(&["kelly"]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_record(&missing)["error"]["kind"], "config");

    let bad_file = run(&["kelly", "--market", &broken]);
    assert_eq!(bad_file.status.code(), Some(2));
    let msg = error_record(&bad_file)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("line 8"), "{msg}");

    let invalid = run(&["validate", "--market", &arb]);
    assert_eq!(invalid.status.code(), Some(3));
    let report: Value = serde_json::from_str(&stdout(&invalid)).unwrap();
    assert_eq!(report["result"], "FAIL");
    assert_eq!(report["no_arbitrage"]["result"], "FAIL");

    let refused = run(&["kelly", "--market", &arb]);
    assert_eq!(refused.status.code(), Some(3));
    assert_eq!(error_record(&refused)["error"]["kind"], "validation");

    // The diffusion penalty keeps the growth rate bounded, so the override
    // still finds a finite optimum.
    let overridden = run(&["kelly", "--market", &arb, "--allow-arbitrage"]);
    assert!(overridden.status.success());

    // Without diffusion the growth rate is unbounded along the arbitrage.
    let pure = write_market(
        dir.path(),
        "pure.json",
        &ARBITRAGE_MARKET.replace("0.15", "0"),
    );
    let diverged = run(&["kelly", "--market", &pure, "--allow-arbitrage"]);
    assert_eq!(diverged.status.code(), Some(4));
    assert_eq!(error_record(&diverged)["error"]["kind"], "solver");
}

#[test]
fn validate_reports_interval_and_certificate() {
    let out = run(&["validate", "--paper-example"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"], "PASS");
    assert_eq!(v["admissible_interval"]["lower"], -1.0);
    assert_eq!(v["admissible_interval"]["upper"], 2.0);
    assert_eq!(v["no_arbitrage"]["result"], "PASS");
}

#[test]
fn inadmissible_rules_need_the_override() {
    let refused = run(&[
        "simulate",
        "--paper-example",
        "--rules",
        "2.5",
        "--horizon",
        "5",
    ]);
    assert_eq!(refused.status.code(), Some(2));
    let allowed = run(&[
        "simulate",
        "--paper-example",
        "--rules",
        "2.5",
        "--horizon",
        "50",
        "--allow-inadmissible",
    ]);
    assert!(allowed.status.success());
    let text = stdout(&allowed);
    assert!(text
        .lines()
        .any(|l| l.starts_with("# bankrupt 2.5 at t = ")));
}

#[test]
fn primitive_game_needs_no_market() {
    let out = run(&["phi-game", "--primitive", "--n-paths", "1000"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["n"], 1000);
    assert!(v["stderr"].as_f64().unwrap() > 0.0);
}
