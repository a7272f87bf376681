//! Monte Carlo runs of the prepare-and-measure protocol.
//!
//! Trials are split into fixed-size blocks. Block `i` draws from a ChaCha8
//! generator seeded with the run seed on stream `i`, so the trial sequence
//! depends only on the seed and never on the thread count.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::adversary::{EpsilonPair, HiddenVariable, LambdaDistribution};
use crate::bits::Message;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::witness::Strategy;

/// Trials per independently seeded block.
pub const BLOCK_TRIALS: u64 = 65_536;
/// Above this many trials the per-trial log is dropped unless forced.
pub const STREAMING_THRESHOLD: u64 = 10_000_000;

/// One round of the protocol, including the hidden variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub lambda_k: u8,
    pub a: Message,
    pub y: u8,
    pub b: u8,
}

/// What a party without access to `λ` sees of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedTrial {
    pub a: Message,
    pub y: u8,
    pub b: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyChoice {
    Optimal,
    Explicit { strategy: Box<Strategy> },
}

impl StrategyChoice {
    pub fn resolve(&self, eps: EpsilonPair) -> Result<Strategy> {
        match self {
            StrategyChoice::Optimal => Ok(Strategy::optimal(eps)),
            StrategyChoice::Explicit { strategy } => {
                strategy.validate()?;
                Ok((**strategy).clone())
            }
        }
    }
}

/// Whether to keep the per-trial log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogPolicy {
    #[default]
    Never,
    /// Keep it up to [`STREAMING_THRESHOLD`] trials.
    Auto,
    Always,
}

/// Counts for one hidden variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LambdaCounts {
    pub trials: u64,
    pub successes: u64,
    /// `outcomes[2a + y][b]`.
    pub outcomes: [[u64; 2]; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub successes: u64,
    #[serde(rename = "E_hat")]
    pub e_hat: f64,
    /// `sqrt(E_hat (1 - E_hat) / N)`.
    pub std_err: f64,
    /// Histogram of `(a, y)` indexed by `2a + y`.
    pub joint_counts: [u64; 8],
    pub per_lambda: [LambdaCounts; 8],
}

impl Default for SimulationSummary {
    fn default() -> Self {
        SimulationSummary {
            trials: 0,
            successes: 0,
            e_hat: 0.0,
            std_err: 0.0,
            joint_counts: [0; 8],
            per_lambda: [LambdaCounts::default(); 8],
        }
    }
}

/// Pearson test of the `(a, y)` histogram against the uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

impl SimulationSummary {
    fn record(&mut self, t: &TrialRecord) {
        let cell = 2 * t.a.index() + t.y as usize;
        let success = t.b == t.a.bit(t.y as usize);
        self.trials += 1;
        self.joint_counts[cell] += 1;
        let lam = &mut self.per_lambda[t.lambda_k as usize];
        lam.trials += 1;
        lam.outcomes[cell][t.b as usize] += 1;
        if success {
            self.successes += 1;
            lam.successes += 1;
        }
    }

    fn finish(&mut self) {
        if self.trials == 0 {
            self.e_hat = 0.0;
            self.std_err = 0.0;
            return;
        }
        let n = self.trials as f64;
        self.e_hat = self.successes as f64 / n;
        self.std_err = (self.e_hat * (1.0 - self.e_hat) / n).sqrt();
    }

    /// Adds the counts of `other`; the result does not depend on merge order.
    pub fn merge(&mut self, other: &SimulationSummary) {
        self.trials += other.trials;
        self.successes += other.successes;
        for (c, o) in self.joint_counts.iter_mut().zip(other.joint_counts) {
            *c += o;
        }
        for (l, o) in self.per_lambda.iter_mut().zip(&other.per_lambda) {
            l.trials += o.trials;
            l.successes += o.successes;
            for (cell, ocell) in l.outcomes.iter_mut().zip(o.outcomes) {
                cell[0] += ocell[0];
                cell[1] += ocell[1];
            }
        }
        self.finish();
    }

    pub fn uniformity_chi_square(&self) -> Result<ChiSquareTest> {
        if self.trials == 0 {
            return Err(Error::Undefined("chi-square test of an empty histogram".into()));
        }
        let expected = self.trials as f64 / 8.0;
        let statistic: f64 = self
            .joint_counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let dist = ChiSquared::new(7.0).expect("positive degrees of freedom");
        Ok(ChiSquareTest { statistic, dof: 7, p_value: dist.sf(statistic) })
    }

    /// Largest `|count - N/8|` over the `(a, y)` cells in binomial standard
    /// deviations.
    pub fn max_cell_deviation_sigmas(&self) -> f64 {
        let n = self.trials as f64;
        let sd = (n * 0.125 * 0.875).sqrt();
        self.joint_counts
            .iter()
            .map(|&c| (c as f64 - n / 8.0).abs() / sd)
            .fold(0.0, f64::max)
    }
}

fn check_distribution(dist: &LambdaDistribution) -> Result<()> {
    LambdaDistribution::new(*dist.weights()).map(|_| ())
}

/// Runs `trials` rounds and returns the aggregated counts.
pub fn run(
    eps: EpsilonPair,
    dist: &LambdaDistribution,
    strategy: &StrategyChoice,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<SimulationSummary> {
    Ok(run_with_log(eps, dist, strategy, trials, seed, exec, LogPolicy::Never)?.0)
}

/// [`run`], optionally keeping every [`TrialRecord`].
pub fn run_with_log(
    eps: EpsilonPair,
    dist: &LambdaDistribution,
    strategy: &StrategyChoice,
    trials: u64,
    seed: u64,
    exec: Exec,
    policy: LogPolicy,
) -> Result<(SimulationSummary, Option<Vec<TrialRecord>>)> {
    if trials == 0 {
        return Err(Error::InvalidInput("the number of trials must be at least 1".into()));
    }
    check_distribution(dist)?;
    let strategy = strategy.resolve(eps)?;
    let keep = match policy {
        LogPolicy::Never => false,
        LogPolicy::Auto => trials <= STREAMING_THRESHOLD,
        LogPolicy::Always => true,
    };

    let vars = HiddenVariable::all(eps);
    // P(b = 0 | a, y, λ_k), indexed [k][2a + y].
    let p_zero: [[f64; 8]; 8] = std::array::from_fn(|k| {
        std::array::from_fn(|cell| strategy.locals[k].probability(Message::from_index(cell / 2), (cell % 2) as u8, 0))
    });
    let a_zero: [[f64; 2]; 8] = std::array::from_fn(|k| [vars[k].p_alice_bit_zero(0), vars[k].p_alice_bit_zero(1)]);
    let y_zero: [f64; 8] = std::array::from_fn(|k| vars[k].p_bob_zero());

    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let results = exec.map_range(blocks as usize, |block| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let start = block as u64 * BLOCK_TRIALS;
        let n = BLOCK_TRIALS.min(trials - start);
        let mut summary = SimulationSummary::default();
        let mut log = keep.then(|| Vec::with_capacity(n as usize));
        for _ in 0..n {
            let k = dist.sample_index(rng.random::<f64>());
            let a0 = u8::from(rng.random::<f64>() >= a_zero[k][0]);
            let a1 = u8::from(rng.random::<f64>() >= a_zero[k][1]);
            let y = u8::from(rng.random::<f64>() >= y_zero[k]);
            let a = Message::new(a0, a1);
            let b = u8::from(rng.random::<f64>() >= p_zero[k][2 * a.index() + y as usize]);
            let t = TrialRecord { lambda_k: k as u8, a, y, b };
            summary.record(&t);
            if let Some(log) = log.as_mut() {
                log.push(t);
            }
        }
        (summary, log)
    });

    let mut total = SimulationSummary::default();
    let mut full_log = keep.then(|| Vec::with_capacity(trials as usize));
    for (s, log) in results {
        total.merge(&s);
        if let (Some(all), Some(part)) = (full_log.as_mut(), log) {
            all.extend(part);
        }
    }
    Ok((total, full_log))
}

/// `-log2 sum_k P(λ_k) max_{a,y,b} P̂(b | a, y, λ_k)` from the per-λ counts.
pub fn empirical_min_entropy(summary: &SimulationSummary, dist: &LambdaDistribution) -> Result<f64> {
    if summary.trials == 0 {
        return Err(Error::Undefined("no trials recorded; the min-entropy estimate needs data".into()));
    }
    let mut guess = 0.0;
    for (k, lam) in summary.per_lambda.iter().enumerate() {
        let w = dist.weight(k);
        if w <= 0.0 {
            continue;
        }
        let mut best = 0.0f64;
        for (cell, counts) in lam.outcomes.iter().enumerate() {
            let n = counts[0] + counts[1];
            if n == 0 {
                return Err(Error::Undefined(format!(
                    "no trials with λ_{k}, a = {}, y = {}; cannot estimate its guessing probability",
                    Message::from_index(cell / 2),
                    cell % 2
                )));
            }
            best = best.max(counts[0].max(counts[1]) as f64 / n as f64);
        }
        guess += w * best;
    }
    Ok(-guess.log2())
}

/// Drops `λ` from every record.
pub fn observer_view(log: &[TrialRecord]) -> Vec<ObservedTrial> {
    log.iter().map(|t| ObservedTrial { a: t.a, y: t.y, b: t.b }).collect()
}

pub const TRIAL_CSV_HEADER: &str = "lambda,a0,a1,y,b";
pub const OBSERVER_CSV_HEADER: &str = "a0,a1,y,b";

pub fn write_trial_csv<W: Write>(mut out: W, log: &[TrialRecord]) -> io::Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for t in log {
        writeln!(out, "{},{},{},{},{}", t.lambda_k, t.a.bit(0), t.a.bit(1), t.y, t.b)?;
    }
    Ok(())
}

pub fn write_observer_csv<W: Write>(mut out: W, log: &[ObservedTrial]) -> io::Result<()> {
    writeln!(out, "{OBSERVER_CSV_HEADER}")?;
    for t in log {
        writeln!(out, "{},{},{},{}", t.a.bit(0), t.a.bit(1), t.y, t.b)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{solve_lambda_distribution_with, BalanceConstraints, LambdaMode};
    use crate::bloch::{BlochVector, Measurement};
    use crate::witness::{min_entropy_at_max_violation, quantum_bound, LocalStrategy};

    fn eps(a: f64, b: f64) -> EpsilonPair {
        EpsilonPair::new(a, b).unwrap()
    }

    #[test]
    fn unbiased_optimal_run() {
        let s = run(
            EpsilonPair::ZERO,
            &LambdaDistribution::uniform(),
            &StrategyChoice::Optimal,
            1_000_000,
            11,
            Exec::default(),
        )
        .unwrap();
        assert_eq!(s.trials, 1_000_000);
        assert_eq!(s.joint_counts.iter().sum::<u64>(), s.trials);
        assert_eq!(s.per_lambda.iter().map(|l| l.trials).sum::<u64>(), s.trials);
        assert!((s.e_hat - 0.8535533905932737).abs() <= 3.0 * s.std_err, "{}", s.e_hat);
        assert!(s.max_cell_deviation_sigmas() <= 4.0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let dist = LambdaDistribution::uniform();
        let run_once = |exec, policy| {
            run_with_log(eps(0.05, 0.1), &dist, &StrategyChoice::Optimal, 200_000, 5, exec, policy).unwrap()
        };
        let (a, la) = run_once(Exec::Parallel, LogPolicy::Always);
        let (b, lb) = run_once(Exec::Sequential, LogPolicy::Auto);
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(la.unwrap().len(), 200_000);
        assert!(run_once(Exec::Parallel, LogPolicy::Never).1.is_none());
    }

    #[test]
    fn merge_is_order_free() {
        let dist = LambdaDistribution::uniform();
        let parts: Vec<_> = (0..3)
            .map(|seed| run(eps(0.1, 0.0), &dist, &StrategyChoice::Optimal, 10_000 + seed, seed, Exec::Sequential).unwrap())
            .collect();
        let mut forward = SimulationSummary::default();
        parts.iter().for_each(|p| forward.merge(p));
        let mut backward = SimulationSummary::default();
        parts.iter().rev().for_each(|p| backward.merge(p));
        assert_eq!(forward, backward);
        assert_eq!(forward.trials, 30_003);
    }

    #[test]
    fn parallel_axes_at_strong_bias() {
        let e = eps(0.4, 0.4);
        let s = run(e, &LambdaDistribution::uniform(), &StrategyChoice::Optimal, 1_000_000, 3, Exec::default()).unwrap();
        assert!((s.e_hat - 0.982).abs() <= 3.0 * s.std_err, "{}", s.e_hat);
        assert!((s.e_hat - quantum_bound(e).0).abs() <= 3.0 * s.std_err);

        // Identical axes v1 = v0 for every λ score only 0.95 on average: half
        // of the hidden variables need the second axis reversed.
        let v0 = BlochVector::X;
        let locals = std::array::from_fn(|k| {
            let var = HiddenVariable::new(k as u8, e).unwrap();
            LocalStrategy {
                states: std::array::from_fn(|i| {
                    crate::bloch::effective_vector(Message::from_index(i), var.bit(2), e.eps2(), v0, v0)
                        .unwrap()
                        .normalized()
                        .unwrap()
                }),
                measurements: [Measurement::Projective { axis: v0 }; 2],
            }
        });
        let literal = Strategy { locals };
        let s = run(
            e,
            &LambdaDistribution::uniform(),
            &StrategyChoice::Explicit { strategy: Box::new(literal) },
            1_000_000,
            3,
            Exec::default(),
        )
        .unwrap();
        assert!((s.e_hat - 0.95).abs() <= 3.0 * s.std_err, "{}", s.e_hat);
    }

    #[test]
    fn min_entropy_estimates() {
        let dist = LambdaDistribution::uniform();
        let s = run(EpsilonPair::ZERO, &dist, &StrategyChoice::Optimal, 10_000_000, 8, Exec::default()).unwrap();
        let h = empirical_min_entropy(&s, &dist).unwrap();
        let exact = min_entropy_at_max_violation(EpsilonPair::ZERO).unwrap();
        assert!((h - 0.2284).abs() < 0.01 && (h - exact).abs() < 0.01, "{h}");

        let det = LocalStrategy {
            states: [BlochVector::Z; 4],
            measurements: [Measurement::Projective { axis: BlochVector::Z }; 2],
        };
        let s = run(
            EpsilonPair::ZERO,
            &dist,
            &StrategyChoice::Explicit { strategy: Box::new(Strategy::uniform(det)) },
            10_000,
            1,
            Exec::default(),
        )
        .unwrap();
        assert_eq!(empirical_min_entropy(&s, &dist).unwrap(), 0.0);

        assert!(matches!(empirical_min_entropy(&SimulationSummary::default(), &dist), Err(Error::Undefined(_))));
        let tiny = run(EpsilonPair::ZERO, &dist, &StrategyChoice::Optimal, 5, 1, Exec::default()).unwrap();
        assert!(matches!(empirical_min_entropy(&tiny, &dist), Err(Error::Undefined(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let dist = LambdaDistribution::uniform();
        assert!(run(EpsilonPair::ZERO, &dist, &StrategyChoice::Optimal, 0, 0, Exec::default()).is_err());
        let bad = LocalStrategy {
            states: [BlochVector::new(0.5, 0.0, 0.0); 4],
            measurements: [Measurement::AllZero; 2],
        };
        let choice = StrategyChoice::Explicit { strategy: Box::new(Strategy::uniform(bad)) };
        assert!(run(EpsilonPair::ZERO, &dist, &choice, 10, 0, Exec::default()).is_err());
    }

    #[test]
    fn chi_square_uniformity_over_many_runs() {
        // Distributions with uniform (a, y) marginals; at significance 0.001
        // the number of rejections among 100 runs is Binomial(100, 0.001),
        // so more than 2 would have probability below 2e-4.
        let e = eps(0.1, 0.08);
        let mut rejections = 0;
        for seed in 0..100u64 {
            let dist = solve_lambda_distribution_with(
                LambdaMode::Parametrized { seed },
                &BalanceConstraints::joint_uniform(e),
            );
            let s = run(e, &dist, &StrategyChoice::Optimal, 20_000, seed, Exec::default()).unwrap();
            if s.uniformity_chi_square().unwrap().p_value < 1e-3 {
                rejections += 1;
            }
        }
        assert!(rejections <= 2, "{rejections}");
    }

    #[test]
    fn estimates_stay_below_quantum_bound() {
        let dist = LambdaDistribution::uniform();
        for (e1, e2) in [(0.0, 0.0), (0.03, 0.06), (0.06, 0.03), (0.09, 0.12), (0.12, 0.12)] {
            let e = eps(e1, e2);
            let s = run(e, &dist, &StrategyChoice::Optimal, 200_000, 99, Exec::default()).unwrap();
            assert!(s.e_hat <= quantum_bound(e).0 + 5.0 * s.std_err);
        }
    }

    #[test]
    fn trial_log_csv_and_observer_view() {
        let (s, log) = run_with_log(
            eps(0.1, 0.1),
            &LambdaDistribution::uniform(),
            &StrategyChoice::Optimal,
            50,
            4,
            Exec::default(),
            LogPolicy::Auto,
        )
        .unwrap();
        let log = log.unwrap();
        assert_eq!(log.len() as u64, s.trials);
        let mut buf = Vec::new();
        write_trial_csv(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("lambda,a0,a1,y,b"));
        assert_eq!(text.lines().count(), 51);
        let first = text.lines().nth(1).unwrap();
        assert_eq!(first, format!("{},{},{},{},{}", log[0].lambda_k, log[0].a.bit(0), log[0].a.bit(1), log[0].y, log[0].b));
        let obs = observer_view(&log);
        let mut buf = Vec::new();
        write_observer_csv(&mut buf, &obs).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("a0,a1,y,b\n"));
    }
}
