//! `sdirand`: witness bounds, feasible-region scans, tradeoff curves,
//! protocol simulation and oracle verification from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or out-of-range input,
//! 3 verification failure, 4 domain error.

mod output;
mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use sdirand_core::adversary::{solve_lambda_distribution, solve_lambda_distribution_with, validate_marginals, BalanceConstraints};
use sdirand_core::format::{sig12, sig12_opt};
use sdirand_core::simulator::{self, empirical_min_entropy, LogPolicy, StrategyChoice};
use sdirand_core::tradeoff::curve;
use sdirand_core::witness::{feasibility_region, write_region_csv};
use sdirand_core::{EpsilonPair, Error, Exec, LambdaMode, Strategy, WitnessBounds};

use output::Provenance;
use verify::{Suite, VerifyReport};

#[derive(Parser, Debug)]
#[command(name = "sdirand", version, about = "Randomness certification with biased input sources")]
struct Cli {
    /// Worker threads for the data-parallel loops (default: one per core).
    #[arg(long, env = "SDIRAND_THREADS", global = true)]
    threads: Option<usize>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// Write the result to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Output encoding; each subcommand has its own default.
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct EpsArgs {
    /// Bias bound of Alice's input bits, in [0, 0.5).
    #[arg(long, value_parser = parse_bias)]
    eps1: f64,
    /// Bias bound of Bob's setting, in [0, 0.5).
    #[arg(long, value_parser = parse_bias)]
    eps2: f64,
}

impl EpsArgs {
    fn pair(self) -> EpsilonPair {
        EpsilonPair::new(self.eps1, self.eps2).expect("validated by the argument parser")
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Classical and quantum bounds, guessing probability and min-entropy.
    Bounds {
        #[command(flatten)]
        eps: EpsArgs,
    },
    /// Scan the feasible region on a square grid.
    Region {
        /// Points per axis.
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u32).range(1..))]
        grid: u32,
        /// Grid values are i * eps_max / grid for i < grid.
        #[arg(long, default_value_t = 0.5, value_parser = parse_eps_max)]
        eps_max: f64,
    },
    /// Min-entropy versus witness value curve.
    Tradeoff {
        #[command(flatten)]
        eps: EpsArgs,
        /// Number of curve samples.
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..))]
        points: u32,
    },
    /// Monte Carlo run of the protocol.
    Simulate {
        #[command(flatten)]
        eps: EpsArgs,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Hidden-variable distribution.
        #[arg(long, value_enum, default_value_t = LambdaChoice::Uniform)]
        lambda: LambdaChoice,
        /// Seed for `--lambda random`.
        #[arg(long, default_value_t = 0)]
        lambda_seed: u64,
        /// Also require uniform (a, y) marginals from a random distribution.
        #[arg(long)]
        joint_uniform: bool,
        /// JSON strategy (one local strategy per hidden variable) to run
        /// instead of the optimal one.
        #[arg(long)]
        strategy_file: Option<PathBuf>,
        /// Write the per-trial log to this CSV file.
        #[arg(long)]
        log_csv: Option<PathBuf>,
        /// Leave the hidden variable out of the trial log.
        #[arg(long)]
        observer: bool,
        /// Keep the trial log even above 10^7 trials.
        #[arg(long)]
        full_log: bool,
    },
    /// Compare closed forms against the brute-force oracles.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 1e-4, value_parser = parse_positive)]
        tol: f64,
        /// Oracle evaluation budget per search (default 10^6 for the quantum
        /// suite, 10^5 for the tradeoff suite).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LambdaChoice {
    Uniform,
    Random,
}

fn parse_bias(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..0.5).contains(&v) {
        Ok(v)
    } else {
        Err(format!("bias must lie in [0, 0.5), got {v}"))
    }
}

fn parse_eps_max(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v <= 0.5 {
        Ok(v)
    } else {
        Err(format!("eps-max must lie in (0, 0.5], got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {v}"))
    }
}

#[derive(Debug)]
enum Failure {
    Io(io::Error),
    Usage(String),
    Verification(usize),
    Domain(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Verification(_) => 3,
            Failure::Domain(_) => 4,
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Budget { .. } => Failure::Usage(e.to_string()),
            e => Failure::Domain(e),
        }
    }
}

const BOUNDS_CSV_HEADER: &str = "eps1,eps2,t,delta,sigma,E_c,E_q,branch,p_min,H_at_Eq,feasible";

fn bounds_row(b: &WitnessBounds) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        sig12(b.eps.eps1()),
        sig12(b.eps.eps2()),
        sig12(b.t),
        sig12(b.delta),
        sig12(b.sigma),
        sig12(b.e_c),
        sig12(b.e_q),
        b.branch,
        sig12_opt(b.p_min),
        sig12_opt(b.h_at_eq),
        b.feasible
    )
}

fn run(cli: Cli) -> Result<(), Failure> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let mut out = output::open(cli.output.as_deref())?;
    let command_name = match &cli.command {
        Command::Bounds { .. } => "bounds",
        Command::Region { .. } => "region",
        Command::Tradeoff { .. } => "tradeoff",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
    };
    let seed = match &cli.command {
        Command::Simulate { seed, .. } | Command::Verify { seed, .. } => Some(*seed),
        _ => None,
    };
    let prov = Provenance::new(command_name, seed, &(&cli.command, cli.format));

    match cli.command {
        Command::Bounds { eps } => {
            let b = WitnessBounds::compute(eps.pair());
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &prov, &b)?,
                Format::Csv => output::write_csv(&mut out, &prov, &[], |w| {
                    writeln!(w, "{BOUNDS_CSV_HEADER}")?;
                    writeln!(w, "{}", bounds_row(&b))
                })?,
            }
        }
        Command::Region { grid, eps_max } => {
            let rows = feasibility_region(grid as usize, eps_max, exec)?;
            info!("{} of {} grid points feasible", rows.iter().filter(|r| r.feasible).count(), rows.len());
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => output::write_json(&mut out, &prov, &rows)?,
                Format::Csv => output::write_csv(&mut out, &prov, &[], |w| write_region_csv(w, &rows))?,
            }
        }
        Command::Tradeoff { eps, points } => {
            let c = curve(eps.pair(), points as usize, exec)?;
            if c.skipped > 0 {
                warn!("{} curve nodes skipped after domain errors", c.skipped);
            }
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => output::write_json(&mut out, &prov, &json!({ "header": c.header(), "samples": c.samples }))?,
                Format::Csv => {
                    let header = format!("header: {}", serde_json::to_string(&c.header()).map_err(io::Error::from)?);
                    output::write_csv(&mut out, &prov, &[header], |w| c.write_csv(w))?
                }
            }
        }
        Command::Simulate {
            eps,
            trials,
            seed,
            lambda,
            lambda_seed,
            joint_uniform,
            strategy_file,
            log_csv,
            observer,
            full_log,
        } => {
            let pair = eps.pair();
            let mode = match lambda {
                LambdaChoice::Uniform => LambdaMode::Uniform,
                LambdaChoice::Random => LambdaMode::Parametrized { seed: lambda_seed },
            };
            let dist = if joint_uniform {
                solve_lambda_distribution_with(mode, &BalanceConstraints::joint_uniform(pair))
            } else {
                solve_lambda_distribution(mode)
            };
            let strategy = match &strategy_file {
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    let s: Strategy = serde_json::from_str(&text)
                        .map_err(|e| Failure::Usage(format!("cannot parse strategy file {}: {e}", path.display())))?;
                    StrategyChoice::Explicit { strategy: Box::new(s) }
                }
                None => StrategyChoice::Optimal,
            };
            let wants_log = log_csv.is_some() || cli.format == Some(Format::Csv);
            let policy = match (wants_log, full_log) {
                (false, _) => LogPolicy::Never,
                (true, false) => LogPolicy::Auto,
                (true, true) => LogPolicy::Always,
            };
            if wants_log && policy == LogPolicy::Auto && trials > simulator::STREAMING_THRESHOLD {
                warn!("trial log dropped above {} trials; pass --full-log to keep it", simulator::STREAMING_THRESHOLD);
            }
            let (summary, log) = simulator::run_with_log(pair, &dist, &strategy, trials, seed, exec, policy)?;
            let write_log = |w: &mut dyn Write, log: &[simulator::TrialRecord]| -> io::Result<()> {
                if observer {
                    simulator::write_observer_csv(w, &simulator::observer_view(log))
                } else {
                    simulator::write_trial_csv(w, log)
                }
            };
            if let (Some(path), Some(log)) = (&log_csv, &log) {
                let mut f = output::open(Some(path))?;
                output::write_csv(&mut f, &prov, &[], |w| write_log(w, log))?;
            }
            let bounds = WitnessBounds::compute(pair);
            let (h_hat, h_diag) = match empirical_min_entropy(&summary, &dist) {
                Ok(h) => (Some(h), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let result = json!({
                "eps": pair,
                "trials": trials,
                "lambda_distribution": dist,
                "marginals": validate_marginals(dist.weights(), pair),
                "summary": summary,
                "chi_square": summary.uniformity_chi_square().ok(),
                "empirical_min_entropy": h_hat,
                "min_entropy_diagnostic": h_diag,
                "E_q": bounds.e_q,
                "H_at_Eq": bounds.h_at_eq,
            });
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &prov, &result)?,
                Format::Csv => match &log {
                    Some(log) => output::write_csv(&mut out, &prov, &[], |w| write_log(w, log))?,
                    None => return Err(Failure::Usage("trial log not retained; pass --full-log".into())),
                },
            }
        }
        Command::Verify { suite, tol, budget, seed } => {
            let wants = |s: Suite| suite == Suite::All || suite == s;
            let mut suites = Vec::new();
            if wants(Suite::Classical) {
                suites.push(verify::classical(tol, seed));
            }
            if wants(Suite::Quantum) {
                suites.push(verify::quantum(tol, budget.unwrap_or(verify::DEFAULT_QUANTUM_BUDGET), seed, exec)?);
            }
            if wants(Suite::Tradeoff) {
                suites.push(verify::tradeoff(tol, budget.unwrap_or(verify::DEFAULT_TRADEOFF_BUDGET), seed, exec)?);
            }
            let failures: usize = suites.iter().map(|s| s.failures).sum();
            let report = VerifyReport {
                grid: verify::feasible_grid().iter().map(|e| (e.eps1(), e.eps2())).collect(),
                suites,
                passed: failures == 0,
            };
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &prov, &report)?,
                Format::Csv => output::write_csv(&mut out, &prov, &[], |w| verify::write_csv(w, &report))?,
            }
            if failures > 0 {
                return Err(Failure::Verification(failures));
            }
        }
    }
    Ok(())
}

fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not configure {n} worker threads: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    if threads.is_some() {
        warn!("built without the parallel feature; --threads has no effect");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Io(e) => eprintln!("error: {e}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Verification(n) => eprintln!("verification failed: {n} check(s) outside tolerance"),
                Failure::Domain(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
