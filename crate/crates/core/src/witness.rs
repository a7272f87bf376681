//! Classical and quantum witness bounds, optimal strategies, and the
//! feasible region of source biases.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::adversary::{EpsilonPair, HiddenVariable, LambdaDistribution};
use crate::bits::Message;
use crate::bloch::{effective_vector, BlochVector, Measurement};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::format::{sig12, sig12_opt};
use crate::optimize::bisect;

/// Slack for the strict inequalities in the feasibility test.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Which closed form of the quantum bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `t <= 1`: the optimal measurement axes meet at angle `arccos t`.
    #[serde(rename = "t<=1")]
    Interior,
    /// `t > 1`: the optimum has parallel measurement axes.
    #[serde(rename = "t>1")]
    Parallel,
}

impl Branch {
    pub fn of(eps: EpsilonPair) -> Branch {
        if eps.t() <= 1.0 {
            Branch::Interior
        } else {
            Branch::Parallel
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Interior => "t<=1",
            Branch::Parallel => "t>1",
        })
    }
}

/// Alice's four states and Bob's two measurements for one hidden variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalStrategy {
    /// `r_a`, indexed by [`Message::index`].
    pub states: [BlochVector; 4],
    /// Measurement for `y = 0` and `y = 1`.
    pub measurements: [Measurement; 2],
}

impl LocalStrategy {
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.states.iter().enumerate() {
            r.require_unit(&format!("state r_{}", Message::from_index(i)))?;
        }
        for m in &self.measurements {
            m.validate()?;
        }
        Ok(())
    }

    /// `P(b | a, y)`; assumes a validated strategy.
    pub fn probability(&self, a: Message, y: u8, b: u8) -> f64 {
        self.measurements[y as usize].prob_unchecked(self.states[a.index()], b)
    }

    /// `E_λ = sum_{a,y} P(a,y|λ) P(b = a_y | a, y, λ)`.
    pub fn success(&self, var: &HiddenVariable) -> f64 {
        let mut e = 0.0;
        for a in Message::ALL {
            for y in 0..2u8 {
                e += var.conditional_input_probs(a, y) * self.probability(a, y, a.bit(y as usize));
            }
        }
        e
    }

    /// `max_{a,y,b} P(b | a, y)` over all sixteen outcome probabilities.
    pub fn max_guess(&self) -> f64 {
        let mut best = 0.0f64;
        for a in Message::ALL {
            for y in 0..2 {
                for b in 0..2 {
                    best = best.max(self.probability(a, y, b));
                }
            }
        }
        best
    }
}

/// One [`LocalStrategy`] per hidden variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub locals: [LocalStrategy; 8],
}

impl Strategy {
    /// The optimal strategy for every hidden variable.
    pub fn optimal(eps: EpsilonPair) -> Strategy {
        Strategy {
            locals: std::array::from_fn(|k| {
                optimal_strategy(eps, k as u8).expect("k < 8 and effective vectors are nonzero")
            }),
        }
    }

    pub fn uniform(local: LocalStrategy) -> Strategy {
        Strategy { locals: [local; 8] }
    }

    pub fn validate(&self) -> Result<()> {
        self.locals.iter().try_for_each(LocalStrategy::validate)
    }

    pub fn per_lambda_success(&self, eps: EpsilonPair) -> [f64; 8] {
        let vars = HiddenVariable::all(eps);
        std::array::from_fn(|k| self.locals[k].success(&vars[k]))
    }

    /// The expected success probability `E = sum_λ P(λ) E_λ`.
    pub fn success(&self, eps: EpsilonPair, dist: &LambdaDistribution) -> f64 {
        combine_over_lambda(dist, &self.per_lambda_success(eps))
    }
}

/// Best success probability of a classical (one-bit) encoding.
pub fn classical_bound(eps: EpsilonPair) -> f64 {
    let (e1, e2) = (eps.eps1(), eps.eps2());
    0.75 + 0.5 * (e1 + e2) - e1 * e2
}

/// Best success probability with a qubit, and the branch of `t` it used.
pub fn quantum_bound(eps: EpsilonPair) -> (f64, Branch) {
    let (e1, e2) = (eps.eps1(), eps.eps2());
    match Branch::of(eps) {
        Branch::Interior => {
            let e1_4 = e1.powi(4);
            let e2_2 = e2 * e2;
            let value = 0.5 + 0.5 * (0.5 + 8.0 * e1_4 + 2.0 * e2_2 + 32.0 * e1_4 * e2_2).sqrt();
            (value, Branch::Interior)
        }
        Branch::Parallel => (0.75 + 0.5 * e2 + e1 * e1 * (1.0 - 2.0 * e2), Branch::Parallel),
    }
}

/// The optimal states and measurements for hidden variable `λ_k`:
/// `v0 = x̂`, `v1` at angle `arccos((-1)^{k0+k1} t)` from it (the angle
/// saturates at `t = 1`, so for `t > 1` the two axes are parallel or
/// antiparallel), and each state along its normalised effective vector.
pub fn optimal_strategy(eps: EpsilonPair, k: u8) -> Result<LocalStrategy> {
    let var = HiddenVariable::new(k, eps)?;
    let v0 = BlochVector::X;
    let sign = if (var.bit(0) + var.bit(1)) % 2 == 0 { 1.0 } else { -1.0 };
    let v1 = match Branch::of(eps) {
        Branch::Interior => {
            let t = eps.t();
            BlochVector::new(sign * t, (1.0 - t * t).max(0.0).sqrt(), 0.0)
        }
        Branch::Parallel => v0 * sign,
    };
    let mut states = [BlochVector::default(); 4];
    for a in Message::ALL {
        let v = effective_vector(a, var.bit(2), eps.eps2(), v0, v1)?;
        states[a.index()] = v.normalized().ok_or_else(|| {
            Error::Domain(format!("effective vector for a={a} vanishes at {eps:?}"))
        })?;
    }
    Ok(LocalStrategy {
        states,
        measurements: [Measurement::Projective { axis: v0 }, Measurement::Projective { axis: v1 }],
    })
}

fn require_interior(eps: EpsilonPair, what: &str) -> Result<()> {
    match Branch::of(eps) {
        Branch::Interior => Ok(()),
        Branch::Parallel => Err(Error::Branch(format!(
            "{what} is only defined for t <= 1 (t = {} at {eps:?})",
            eps.t()
        ))),
    }
}

/// Largest outcome probability of the optimal strategy,
/// `(1 + (t + δ)/sqrt(δ² + 2tδ + 1)) / 2`.
pub fn max_guess_probability(eps: EpsilonPair) -> Result<f64> {
    require_interior(eps, "the maximal guessing probability")?;
    Ok(0.5 * (1.0 + cos_beta_min(eps)))
}

/// `(t + δ)/sqrt(δ² + 2tδ + 1)`, the cosine of the largest admissible
/// pinning angle.
pub(crate) fn cos_beta_min(eps: EpsilonPair) -> f64 {
    let t = eps.t();
    let d = eps.delta();
    (t + d) / (d * d + 2.0 * t * d + 1.0).sqrt()
}

/// Min-entropy (bits) of Bob's outcome at maximal quantum violation.
pub fn min_entropy_at_max_violation(eps: EpsilonPair) -> Result<f64> {
    require_interior(eps, "the min-entropy at maximal violation")?;
    Ok(1.0 - (1.0 + cos_beta_min(eps)).log2())
}

/// `sum_k P(λ_k) E_k`.
pub fn combine_over_lambda(dist: &LambdaDistribution, per_lambda: &[f64; 8]) -> f64 {
    dist.weights().iter().zip(per_lambda).map(|(w, e)| w * e).sum()
}

/// Closed-form summary of a bias pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessBounds {
    pub eps: EpsilonPair,
    pub t: f64,
    pub delta: f64,
    pub sigma: f64,
    #[serde(rename = "E_c")]
    pub e_c: f64,
    #[serde(rename = "E_q")]
    pub e_q: f64,
    pub branch: Branch,
    /// Present only on the `t <= 1` branch.
    pub p_min: Option<f64>,
    #[serde(rename = "H_at_Eq")]
    pub h_at_eq: Option<f64>,
    pub feasible: bool,
}

impl WitnessBounds {
    pub fn compute(eps: EpsilonPair) -> WitnessBounds {
        let e_c = classical_bound(eps);
        let (e_q, branch) = quantum_bound(eps);
        let p_min = max_guess_probability(eps).ok();
        let h_at_eq = min_entropy_at_max_violation(eps).ok();
        let feasible = branch == Branch::Interior
            && e_q - e_c > FEASIBILITY_TOLERANCE
            && h_at_eq.is_some_and(|h| h > FEASIBILITY_TOLERANCE);
        WitnessBounds {
            eps,
            t: eps.t(),
            delta: eps.delta(),
            sigma: eps.sigma(),
            e_c,
            e_q,
            branch,
            p_min,
            h_at_eq,
            feasible,
        }
    }
}

pub fn is_feasible(eps: EpsilonPair) -> bool {
    WitnessBounds::compute(eps).feasible
}

/// Grid coordinates `i * eps_max / resolution` for `i in 0..resolution`; the
/// half-open grid keeps every point strictly below `eps_max`, so
/// `eps_max = 1/2` is accepted.
pub fn region_axis(resolution: usize, eps_max: f64) -> Result<Vec<f64>> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("grid resolution must be at least 2, got {resolution}")));
    }
    if !(eps_max > 0.0 && eps_max <= 0.5) {
        return Err(Error::InvalidInput(format!("eps_max must lie in (0, 1/2], got {eps_max}")));
    }
    Ok((0..resolution).map(|i| i as f64 * eps_max / resolution as f64).collect())
}

/// Evaluates [`WitnessBounds`] on the `resolution x resolution` grid over
/// `[0, eps_max)²`, in row-major order (`eps1` outer, `eps2` inner).
pub fn feasibility_region(resolution: usize, eps_max: f64, exec: Exec) -> Result<Vec<WitnessBounds>> {
    let axis = region_axis(resolution, eps_max)?;
    let n = axis.len();
    Ok(exec.map_range(n * n, |i| {
        let eps = EpsilonPair::new(axis[i / n], axis[i % n]).expect("grid points lie in [0, 1/2)");
        WitnessBounds::compute(eps)
    }))
}

pub const REGION_CSV_HEADER: &str = "eps1,eps2,feasible,E_c,E_q,H_at_Eq";

/// Writes region rows as CSV with [`REGION_CSV_HEADER`].
pub fn write_region_csv<W: Write>(mut out: W, rows: &[WitnessBounds]) -> io::Result<()> {
    writeln!(out, "{REGION_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig12(r.eps.eps1()),
            sig12(r.eps.eps2()),
            r.feasible,
            sig12(r.e_c),
            sig12(r.e_q),
            sig12_opt(r.h_at_eq)
        )?;
    }
    Ok(())
}

/// Distance along the ray `s * (d1, d2)` from the origin at which `E_q - E_c`
/// changes sign, found by a coarse scan followed by 60 bisection steps.
/// `None` if the quantum advantage persists up to the edge of the domain.
pub fn boundary_root(direction: (f64, f64)) -> Option<f64> {
    let (d1, d2) = direction;
    assert!(d1 >= 0.0 && d2 >= 0.0 && d1 + d2 > 0.0, "direction must be nonnegative and nonzero");
    let s_max = 0.5 / d1.max(d2);
    let gap = |s: f64| -> f64 {
        let eps = EpsilonPair::new(s * d1, s * d2).expect("ray stays inside the domain");
        let (eq, _) = quantum_bound(eps);
        eq - classical_bound(eps)
    };
    sign_change_on(gap, s_max)
}

/// Scans `(0, s_max)` for the first sign change of `f` and bisects it.
pub(crate) fn sign_change_on<F: Fn(f64) -> f64>(f: F, s_max: f64) -> Option<f64> {
    const SCAN: usize = 1000;
    let mut prev = 0.0;
    let mut f_prev = f(prev);
    for i in 1..SCAN {
        let s = s_max * i as f64 / SCAN as f64;
        let fs = f(s);
        if fs.signum() != f_prev.signum() {
            return bisect(&f, prev, s, 60);
        }
        prev = s;
        f_prev = fs;
    }
    None
}
