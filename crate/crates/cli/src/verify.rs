//! Analytic-versus-oracle comparison suites behind `sdirand verify`.

use std::io::{self, Write};

use clap::ValueEnum;
use log::info;
use serde::Serialize;

use sdirand_core::adversary::{solve_lambda_distribution, LambdaMode};
use sdirand_core::format::sig12;
use sdirand_core::oracle::{classical_enumeration, constrained_search_against, quantum_search, OracleReport, SearchMode};
use sdirand_core::tradeoff::{convexify_f, curve};
use sdirand_core::witness::{is_feasible, min_entropy_at_max_violation};
use sdirand_core::{EpsilonPair, Exec, LambdaDistribution, Result};

/// Per-axis bias values; every feasible pair of the product grid is checked.
pub const GRID: [f64; 5] = [0.0, 0.03, 0.06, 0.09, 0.12];
/// Guessing probabilities sampled per bias pair in the tradeoff suite.
pub const TRADEOFF_SAMPLES: usize = 10;
pub const DEFAULT_QUANTUM_BUDGET: u64 = 1_000_000;
pub const DEFAULT_TRADEOFF_BUDGET: u64 = 100_000;
/// Tolerance on the curve endpoint `H(E_q)` against the closed form.
pub const ENDPOINT_TOLERANCE: f64 = 1e-6;
/// One-sided slack for oracles that must never beat a proven maximum.
pub const UPPER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Classical,
    Quantum,
    Tradeoff,
    All,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub eps1: f64,
    pub eps2: f64,
    /// Hidden-variable index for per-λ checks.
    pub k: Option<u8>,
    pub p: Option<f64>,
    pub analytic: f64,
    pub oracle: f64,
    pub gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub tol: f64,
    pub checks: Vec<Check>,
    pub failures: usize,
    pub max_abs_gap: f64,
    pub reports: Vec<OracleReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub grid: Vec<(f64, f64)>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

pub fn feasible_grid() -> Vec<EpsilonPair> {
    let mut out = Vec::new();
    for &e1 in &GRID {
        for &e2 in &GRID {
            let e = EpsilonPair::new(e1, e2).expect("grid values lie in [0, 1/2)");
            if is_feasible(e) {
                out.push(e);
            }
        }
    }
    out
}

fn finish(suite: Suite, tol: f64, checks: Vec<Check>, reports: Vec<OracleReport>) -> SuiteReport {
    let failures = checks.iter().filter(|c| !c.pass).count();
    let max_abs_gap = checks.iter().map(|c| c.gap.abs()).fold(0.0, f64::max);
    info!("suite {suite:?}: {} checks, {failures} failures, max |gap| {max_abs_gap:e}", checks.len());
    SuiteReport { suite, tol, checks, failures, max_abs_gap, reports }
}

fn from_report(r: &OracleReport, k: Option<u8>, pass: bool) -> Check {
    Check {
        eps1: r.eps.eps1(),
        eps2: r.eps.eps2(),
        k,
        p: r.p,
        analytic: r.analytic_value,
        oracle: r.oracle_value,
        gap: r.gap,
        pass,
    }
}

pub fn classical(tol: f64, seed: u64) -> SuiteReport {
    let dists = [LambdaDistribution::uniform(), solve_lambda_distribution(LambdaMode::Parametrized { seed })];
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for eps in feasible_grid() {
        for dist in &dists {
            let r = classical_enumeration(eps, dist);
            checks.push(from_report(&r, None, r.gap.abs() <= tol));
            reports.push(r);
        }
    }
    finish(Suite::Classical, tol, checks, reports)
}

pub fn quantum(tol: f64, budget: u64, seed: u64, exec: Exec) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for eps in feasible_grid() {
        for k in 0..8u8 {
            let r = quantum_search(eps, k, SearchMode::Planar, budget, seed, exec)?;
            let pass = r.within(tol) && r.oracle_value <= r.analytic_value + UPPER_SLACK;
            checks.push(from_report(&r, Some(k), pass));
            reports.push(r);
        }
    }
    Ok(finish(Suite::Quantum, tol, checks, reports))
}

/// Banding of the constrained oracle between `G` and `F` at
/// [`TRADEOFF_SAMPLES`] evenly spaced `p`, plus the curve endpoint
/// `H(E_q)` against its closed form.
pub fn tradeoff(tol: f64, budget: u64, seed: u64, exec: Exec) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for eps in feasible_grid() {
        let conv = convexify_f(eps, exec)?;
        for j in 0..TRADEOFF_SAMPLES {
            let p = conv.p_min + (1.0 - conv.p_min) * j as f64 / (TRADEOFF_SAMPLES - 1) as f64;
            let r = constrained_search_against(&conv, p, budget, seed, exec)?;
            checks.push(from_report(&r, None, r.within(tol)));
            reports.push(r);
        }
        let c = curve(eps, 16, exec)?;
        let h_curve = c.min_entropy(c.e_q)?;
        let h_closed = min_entropy_at_max_violation(eps)?;
        let gap = h_closed - h_curve;
        checks.push(Check {
            eps1: eps.eps1(),
            eps2: eps.eps2(),
            k: None,
            p: Some(c.p_min),
            analytic: h_closed,
            oracle: h_curve,
            gap,
            pass: gap.abs() <= ENDPOINT_TOLERANCE && c.min_entropy(c.e_l)? == 0.0,
        });
    }
    Ok(finish(Suite::Tradeoff, tol, checks, reports))
}

pub const CSV_HEADER: &str = "suite,eps1,eps2,k,p,analytic,oracle,gap,pass";

pub fn write_csv(out: &mut dyn Write, report: &VerifyReport) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &report.suites {
        let name = format!("{:?}", s.suite).to_lowercase();
        for c in &s.checks {
            writeln!(
                out,
                "{name},{},{},{},{},{},{},{},{}",
                sig12(c.eps1),
                sig12(c.eps2),
                c.k.map(|k| k.to_string()).unwrap_or_default(),
                c.p.map(sig12).unwrap_or_default(),
                sig12(c.analytic),
                sig12(c.oracle),
                sig12(c.gap),
                c.pass
            )?;
        }
    }
    Ok(())
}
