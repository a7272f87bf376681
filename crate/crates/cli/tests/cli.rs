use std::process::{Command, Output};

use sdirand_core::witness::quantum_bound;
use sdirand_core::{EpsilonPair, WitnessBounds};
use serde_json::Value;

fn sdirand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdirand")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

/// CSV output without the `#` provenance lines.
fn body(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn bounds_match_library_values() {
    let o = sdirand(&["bounds", "--eps1", "0", "--eps2", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let lib = WitnessBounds::compute(EpsilonPair::ZERO);
    assert_eq!(v["E_c"].as_f64().unwrap(), 0.75);
    assert_eq!(v["E_q"].as_f64().unwrap(), lib.e_q);
    assert!((v["E_q"].as_f64().unwrap() - 0.853553).abs() < 1e-6);
    assert!((v["H_at_Eq"].as_f64().unwrap() - 0.228443).abs() < 1e-5);
    assert_eq!(v["p_min"].as_f64(), lib.p_min);
    assert_eq!(v["feasible"], Value::Bool(true));
    assert_eq!(v["branch"], "t<=1");
    for key in ["t", "delta", "sigma"] {
        assert!(v[key].is_number(), "{key}");
    }
    assert_eq!(v["provenance"]["command"], "bounds");
    assert_eq!(v["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn bounds_infeasible_and_out_of_range() {
    let o = sdirand(&["bounds", "--eps1", "0.2", "--eps2", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["feasible"], Value::Bool(false));

    let o = sdirand(&["bounds", "--eps1", "0.6", "--eps2", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.5"));

    let o = sdirand(&["bounds", "--eps1", "0.4", "--eps2", "0.4"]);
    let v = json(&o);
    assert_eq!(v["branch"], "t>1");
    assert_eq!(v["E_q"].as_f64().unwrap(), quantum_bound(EpsilonPair::new(0.4, 0.4).unwrap()).0);
    assert!(v["p_min"].is_null());

    assert_eq!(sdirand(&["bounds", "--eps1", "0.1"]).status.code(), Some(2));
    assert_eq!(sdirand(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn region_boundary_crossings() {
    let o = sdirand(&["region", "--grid", "200", "--eps-max", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = body(&text);
    assert_eq!(rows[0], "eps1,eps2,feasible,E_c,E_q,H_at_Eq");
    assert_eq!(rows.len(), 1 + 200 * 200);
    let feasible = |i: usize, j: usize| rows[1 + 200 * i + j].split(',').nth(2).unwrap() == "true";
    // Grid step is 0.0025; the diagonal flips between 0.135 and 0.1375 and the
    // eps2 = 0 axis between 0.22 and 0.2225.
    assert!(feasible(54, 54) && !feasible(55, 55));
    assert!(feasible(88, 0) && !feasible(89, 0));
    assert!((0..200).all(|j| feasible(0, j)));
}

#[test]
fn tradeoff_endpoints() {
    let o = sdirand(&["tradeoff", "--eps1", "0", "--eps2", "0", "--points", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let header_line = text.lines().find(|l| l.starts_with("# header: ")).unwrap();
    let header: Value = serde_json::from_str(header_line.trim_start_matches("# header: ")).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "E,p,H,case,alpha_star");
    assert_eq!(rows.len(), 65);
    let parse = |row: &str| -> (f64, f64) {
        let f: Vec<&str> = row.split(',').collect();
        (f[0].parse().unwrap(), f[2].parse().unwrap())
    };
    let (e_first, h_first) = parse(rows[1]);
    let (e_last, h_last) = parse(rows[64]);
    assert!((e_first - header["E_l"].as_f64().unwrap()).abs() < 1e-11);
    assert_eq!(h_first, 0.0);
    assert!((e_last - 0.853553).abs() < 1e-6);
    assert!((h_last - 0.228443).abs() < 1e-5);

    let o = sdirand(&["tradeoff", "--eps1", "0.2", "--eps2", "0.2"]);
    assert_eq!(o.status.code(), Some(4));
    let o = sdirand(&["tradeoff", "--eps1", "0", "--eps2", "0", "--points", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let args = ["region", "--grid", "30", "--eps-max", "0.3"];
    let a = sdirand(&args);
    let b = sdirand(&args);
    assert_eq!(a.stdout, b.stdout);
    let c = sdirand(&["region", "--grid", "30", "--eps-max", "0.31"]);
    let hash = |o: &Output| stdout(o).lines().find(|l| l.starts_with("# config-sha256")).unwrap().to_string();
    assert_ne!(hash(&a), hash(&c));

    let sim = ["simulate", "--eps1", "0.05", "--eps2", "0.05", "--trials", "20000", "--seed", "9"];
    let a = sdirand(&sim);
    let b = Command::new(env!("CARGO_BIN_EXE_sdirand")).args(sim).env("SDIRAND_THREADS", "2").output().unwrap();
    let c = sdirand(&[&sim[..], &["--sequential"]].concat());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["summary"], json(&c)["summary"]);
}

#[test]
fn simulate_summary_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("trials.csv");
    let o = sdirand(&[
        "simulate", "--eps1", "0", "--eps2", "0", "--trials", "1000000", "--seed", "1",
        "--log-csv", log.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let s = &v["summary"];
    let e_hat = s["E_hat"].as_f64().unwrap();
    let se = s["std_err"].as_f64().unwrap();
    assert!((e_hat - 0.853553).abs() <= 3.0 * se);
    assert_eq!(s["trials"].as_u64(), Some(1_000_000));
    assert_eq!(v["provenance"]["seed"].as_u64(), Some(1));
    let text = std::fs::read_to_string(&log).unwrap();
    let rows = body(&text);
    assert_eq!(rows[0], "lambda,a0,a1,y,b");
    assert_eq!(rows.len(), 1_000_001);

    let o = sdirand(&["simulate", "--eps1", "0.1", "--eps2", "0", "--trials", "10", "--observer", "--format", "csv"]);
    let text = stdout(&o);
    let rows = body(&text);
    assert_eq!(rows[0], "a0,a1,y,b");
    assert_eq!(rows.len(), 11);

    let o = sdirand(&["simulate", "--eps1", "0", "--eps2", "0", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_rejects_bad_strategy_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, "{\"locals\": []}").unwrap();
    let o = sdirand(&["simulate", "--eps1", "0", "--eps2", "0", "--trials", "10", "--strategy-file", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let o = sdirand(&["verify", "--suite", "classical"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["grid"].as_array().unwrap().len(), 25);

    let o = sdirand(&["verify", "--suite", "quantum", "--tol", "1e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let o = sdirand(&["verify", "--suite", "quantum", "--tol", "1e-300", "--budget", "1000", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert_eq!(body(&text)[0], "suite,eps1,eps2,k,p,analytic,oracle,gap,pass");

    let o = sdirand(&["verify", "--suite", "quantum", "--budget", "10"]);
    assert_eq!(o.status.code(), Some(2));
}
