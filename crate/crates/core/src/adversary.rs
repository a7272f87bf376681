//! ε-free sources, the eight hidden variables, and distributions over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::bits::Message;
use crate::error::{Error, Result};

/// Tolerance used when checking marginal balance and normalisation.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// Biases of Alice's (`eps1`) and Bob's (`eps2`) input sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEpsilonPair")]
pub struct EpsilonPair {
    eps1: f64,
    eps2: f64,
}

#[derive(Deserialize)]
struct RawEpsilonPair {
    eps1: f64,
    eps2: f64,
}

impl TryFrom<RawEpsilonPair> for EpsilonPair {
    type Error = Error;
    fn try_from(raw: RawEpsilonPair) -> Result<Self> {
        EpsilonPair::new(raw.eps1, raw.eps2)
    }
}

impl EpsilonPair {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        for (name, e) in [("eps1", eps1), ("eps2", eps2)] {
            if !(e.is_finite() && (0.0..0.5).contains(&e)) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1/2), got {e}")));
            }
        }
        Ok(EpsilonPair { eps1, eps2 })
    }

    pub const ZERO: EpsilonPair = EpsilonPair { eps1: 0.0, eps2: 0.0 };

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    /// Cosine of the optimal angle between the two measurement axes; values
    /// above 1 mean the optimum sits on the boundary with parallel axes.
    pub fn t(&self) -> f64 {
        let e1 = self.eps1 * self.eps1;
        let e2 = self.eps2 * self.eps2;
        let e1_4 = e1 * e1;
        8.0 * e1 * (1.0 + 4.0 * e2) / (1.0 + 16.0 * e1_4 - 4.0 * e2 - 64.0 * e1_4 * e2)
    }

    /// `(1 + 2 eps2) / (1 - 2 eps2)`, the odds of Bob's likelier input.
    pub fn delta(&self) -> f64 {
        (1.0 + 2.0 * self.eps2) / (1.0 - 2.0 * self.eps2)
    }

    /// `(1 + 2 eps1) / (1 - 2 eps1)`, the odds of each of Alice's likelier bits.
    pub fn sigma(&self) -> f64 {
        (1.0 + 2.0 * self.eps1) / (1.0 - 2.0 * self.eps1)
    }
}

/// One of the eight hidden variables `λ_k`. The binary digits `k0 k1 k2` of
/// `k` (`k0` most significant) fix the sign of the bias on `a0`, `a1` and `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenVariable {
    k: u8,
    eps: EpsilonPair,
}

impl HiddenVariable {
    pub fn new(k: u8, eps: EpsilonPair) -> Result<Self> {
        if k > 7 {
            return Err(Error::InvalidInput(format!("hidden variable index must be 0..=7, got {k}")));
        }
        Ok(HiddenVariable { k, eps })
    }

    pub fn all(eps: EpsilonPair) -> [HiddenVariable; 8] {
        std::array::from_fn(|k| HiddenVariable { k: k as u8, eps })
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn eps(&self) -> EpsilonPair {
        self.eps
    }

    /// Digit `k_i` of the binary notation `k0 k1 k2`.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i < 3, "hidden variable bit index out of range");
        (self.k >> (2 - i)) & 1
    }

    fn sign(&self, i: usize) -> f64 {
        if self.bit(i) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `P(a_i = 0 | λ_k)` for `i` in {0, 1}.
    pub fn p_alice_bit_zero(&self, i: usize) -> f64 {
        assert!(i < 2);
        0.5 + self.sign(i) * self.eps.eps1
    }

    /// `P(y = 0 | λ_k)`.
    pub fn p_bob_zero(&self) -> f64 {
        0.5 + self.sign(2) * self.eps.eps2
    }

    pub fn p_message(&self, a: Message) -> f64 {
        (0..2)
            .map(|i| {
                let p0 = self.p_alice_bit_zero(i);
                if a.bit(i) == 0 {
                    p0
                } else {
                    1.0 - p0
                }
            })
            .product()
    }

    pub fn p_setting(&self, y: u8) -> f64 {
        let p0 = self.p_bob_zero();
        if y == 0 {
            p0
        } else {
            1.0 - p0
        }
    }

    /// `P(a, y | λ_k)`, with the three input bits independent given `λ_k`.
    pub fn conditional_input_probs(&self, a: Message, y: u8) -> f64 {
        self.p_message(a) * self.p_setting(y)
    }

    /// All eight `P(a, y | λ_k)`, indexed `2 * a + y`.
    pub fn input_table(&self) -> [f64; 8] {
        std::array::from_fn(|i| self.conditional_input_probs(Message::from_index(i / 2), (i % 2) as u8))
    }

    /// The bit-complementary variable `λ_{7-k}`.
    pub fn complement(&self) -> HiddenVariable {
        HiddenVariable { k: 7 - self.k, eps: self.eps }
    }
}

/// Parity character `chi_S(k) = prod_{i in S} (-1)^{k_i}` over the subset of
/// hidden-variable bits encoded by `mask` (bit 2 of the mask is `k0`).
fn character(mask: u8, k: usize) -> f64 {
    if (mask & k as u8).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Linear balance conditions a distribution over the hidden variables must
/// satisfy, each written as a vanishing parity sum `sum_k P(λ_k) chi_S(k) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BalanceConstraints {
    masks: Vec<u8>,
}

impl BalanceConstraints {
    /// The three single-bit conditions `P(a0=0) = P(a1=0) = P(y=0) = 1/2`.
    pub fn single_bit() -> Self {
        BalanceConstraints { masks: vec![0b100, 0b010, 0b001] }
    }

    /// Every condition needed for `P(a, y) = 1/8` on all eight inputs at the
    /// given biases. When both biases are nonzero this pins the distribution
    /// to uniform; with one bias zero the parities touching that source drop
    /// out and a family of solutions remains.
    pub fn joint_uniform(eps: EpsilonPair) -> Self {
        let masks = (1u8..8)
            .filter(|mask| {
                let alice = mask & 0b110 != 0;
                let bob = mask & 0b001 != 0;
                !(alice && eps.eps1() == 0.0) && !(bob && eps.eps2() == 0.0)
            })
            .collect();
        BalanceConstraints { masks }
    }

    pub fn residuals(&self, weights: &[f64; 8]) -> Vec<f64> {
        self.masks
            .iter()
            .map(|&m| weights.iter().enumerate().map(|(k, w)| w * character(m, k)).sum())
            .collect()
    }

    /// Orthogonal projection onto the constraint subspace. Characters are
    /// mutually orthogonal with squared norm 8 and orthogonal to the all-ones
    /// vector, so the total weight is preserved.
    fn project(&self, weights: &mut [f64; 8]) {
        for (&m, r) in self.masks.iter().zip(self.residuals(weights)) {
            for (k, w) in weights.iter_mut().enumerate() {
                *w -= r * character(m, k) / 8.0;
            }
        }
    }
}

/// How to choose a distribution over the hidden variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Uniform,
    /// A random point of the solution polytope, reproducible from `seed`.
    Parametrized { seed: u64 },
}

/// A probability distribution `P(λ_0) .. P(λ_7)` with balanced single-bit
/// marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaDistribution {
    weights: [f64; 8],
}

impl LambdaDistribution {
    pub fn uniform() -> Self {
        LambdaDistribution { weights: [0.125; 8] }
    }

    pub fn new(weights: [f64; 8]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -BALANCE_TOLERANCE) {
            return Err(Error::InvalidInput(format!("weights must be nonnegative, got {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > BALANCE_TOLERANCE {
            return Err(Error::InvalidInput(format!("weights must sum to 1, got {total}")));
        }
        let worst = BalanceConstraints::single_bit()
            .residuals(&weights)
            .into_iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        if worst > BALANCE_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "weights violate the single-bit balance equations by {worst}"
            )));
        }
        Ok(LambdaDistribution { weights })
    }

    pub fn weights(&self) -> &[f64; 8] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Index of the hidden variable selected by a uniform draw `u` in [0, 1).
    pub(crate) fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(7)
    }
}

impl TryFrom<Vec<f64>> for LambdaDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        let weights: [f64; 8] = v
            .try_into()
            .map_err(|v: Vec<f64>| Error::InvalidInput(format!("expected 8 weights, got {}", v.len())))?;
        LambdaDistribution::new(weights)
    }
}

impl From<LambdaDistribution> for Vec<f64> {
    fn from(d: LambdaDistribution) -> Vec<f64> {
        d.weights.to_vec()
    }
}

/// Returns a distribution satisfying the single-bit balance equations.
pub fn solve_lambda_distribution(mode: LambdaMode) -> LambdaDistribution {
    solve_lambda_distribution_with(mode, &BalanceConstraints::single_bit())
}

/// Returns a distribution satisfying `constraints`.
///
/// `Parametrized` draws flat-Dirichlet weights, projects them onto the
/// constraint subspace and rejects samples with negative entries. After
/// `MAX_DRAWS` rejections the last projection is pulled toward uniform just
/// far enough to become nonnegative, so the call always returns.
pub fn solve_lambda_distribution_with(
    mode: LambdaMode,
    constraints: &BalanceConstraints,
) -> LambdaDistribution {
    const MAX_DRAWS: usize = 1000;
    let seed = match mode {
        LambdaMode::Uniform => return LambdaDistribution::uniform(),
        LambdaMode::Parametrized { seed } => seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = [0.0; 8];
    for _ in 0..MAX_DRAWS {
        draw_projected(&mut rng, constraints, &mut w);
        if w.iter().all(|x| *x >= 0.0) {
            return finish(w);
        }
    }
    let mut shrink: f64 = 1.0;
    for x in &w {
        if *x < 0.0 {
            shrink = shrink.min(0.125 / (0.125 - x));
        }
    }
    finish(w.map(|x| 0.125 + shrink * (x - 0.125)))
}

fn draw_projected(rng: &mut ChaCha8Rng, constraints: &BalanceConstraints, w: &mut [f64; 8]) {
    for x in w.iter_mut() {
        *x = rng.sample::<f64, _>(Exp1);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    constraints.project(w);
}

fn finish(w: [f64; 8]) -> LambdaDistribution {
    let w = w.map(|x| x.max(0.0));
    let total: f64 = w.iter().sum();
    LambdaDistribution { weights: w.map(|x| x / total) }
}

/// Outcome of checking a weight vector against the adversary's marginal
/// requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    /// Largest `| |P(bit = 0 | λ) - 1/2| - eps |` over hidden variables and
    /// input bits.
    pub conditional_deviation: f64,
    /// `P(a0=0)`, `P(a1=0)`, `P(y=0)` under the mixture.
    pub bit_marginals: [f64; 3],
    pub bit_deviation: f64,
    /// `P(a, y)` under the mixture, indexed `2 * a + y`.
    pub joint_marginals: [f64; 8],
    pub joint_deviation: f64,
    pub max_deviation: f64,
    /// Name of the marginal attaining `max_deviation`.
    pub worst: String,
    pub ok: bool,
}

/// Checks per-variable biases, the mixed single-bit marginals, and the joint
/// input marginals against their targets. Never fails; violations are
/// reported.
pub fn validate_marginals(weights: &[f64; 8], eps: EpsilonPair) -> MarginalReport {
    let vars = HiddenVariable::all(eps);
    let mut worst = (0.0f64, String::from("none"));
    let mut note = |dev: f64, name: String| {
        if dev > worst.0 {
            worst = (dev, name);
        }
    };

    let mut conditional_deviation = 0.0f64;
    for v in &vars {
        for (i, e) in [(0, eps.eps1()), (1, eps.eps1())] {
            conditional_deviation = conditional_deviation.max(((v.p_alice_bit_zero(i) - 0.5).abs() - e).abs());
        }
        conditional_deviation = conditional_deviation.max(((v.p_bob_zero() - 0.5).abs() - eps.eps2()).abs());
    }
    note(conditional_deviation, "conditional bias".into());

    let mix = |f: &dyn Fn(&HiddenVariable) -> f64| -> f64 {
        vars.iter().zip(weights).map(|(v, w)| w * f(v)).sum()
    };
    let bit_marginals = [
        mix(&|v| v.p_alice_bit_zero(0)),
        mix(&|v| v.p_alice_bit_zero(1)),
        mix(&|v| v.p_bob_zero()),
    ];
    let mut bit_deviation = 0.0f64;
    for (name, p) in ["P(a0=0)", "P(a1=0)", "P(y=0)"].iter().zip(bit_marginals) {
        let dev = (p - 0.5).abs();
        bit_deviation = bit_deviation.max(dev);
        note(dev, (*name).to_string());
    }

    let joint_marginals: [f64; 8] = std::array::from_fn(|i| {
        let (a, y) = (Message::from_index(i / 2), (i % 2) as u8);
        mix(&|v| v.conditional_input_probs(a, y))
    });
    let mut joint_deviation = 0.0f64;
    for (i, p) in joint_marginals.iter().enumerate() {
        let dev = (p - 0.125).abs();
        joint_deviation = joint_deviation.max(dev);
        note(dev, format!("P(a={},y={})", Message::from_index(i / 2), i % 2));
    }

    let total: f64 = weights.iter().sum();
    note((total - 1.0).abs(), "total weight".into());
    let negative = weights.iter().fold(0.0f64, |m, w| m.max(-w));
    note(negative, "negative weight".into());

    let max_deviation = worst.0;
    MarginalReport {
        conditional_deviation,
        bit_marginals,
        bit_deviation,
        joint_marginals,
        joint_deviation,
        max_deviation,
        worst: worst.1,
        ok: max_deviation <= BALANCE_TOLERANCE,
    }
}
