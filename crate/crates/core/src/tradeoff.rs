//! The analytic tradeoff between the witness value `E` and the guessing
//! probability `p` (equivalently the min-entropy `-log2 p`) for one hidden
//! variable.
//!
//! At fixed `p = (1 + cos β)/2` the best witness value is the envelope
//! `G(p) = max_{α, i} G_i(p, α)` over the two pinning cases. When the
//! classical corner `(p = 1, E_c)` lies above `G(1)`, the tradeoff is the
//! upper concave hull `F` of `G` and that corner instead.

use std::f64::consts::PI;
use std::io::{self, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::adversary::EpsilonPair;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::format::{sig12, sig12_opt};
use crate::optimize::{golden_max, grid_golden_max};
use crate::witness::{self, classical_bound, cos_beta_min, quantum_bound, Branch, WitnessBounds};

const ANGLE_TOLERANCE: f64 = 1e-12;
const PROB_TOLERANCE: f64 = 1e-12;
/// Minimum number of α samples per envelope evaluation.
pub const ALPHA_SCAN_POINTS: usize = 2048;
/// Number of `p` samples in the tangent-point scan.
pub const P0_SCAN_POINTS: usize = 4096;
const GOLDEN_ITERS: usize = 100;

/// The pinning angle `β = arccos(2p - 1)`.
pub fn beta_of(p: f64) -> f64 {
    (2.0 * p - 1.0).clamp(-1.0, 1.0).acos()
}

/// Smallest admissible guessing probability for the bias pair.
pub fn p_min(eps: EpsilonPair) -> Result<f64> {
    witness::max_guess_probability(eps)
}

/// Angles partitioning `α ∈ [0, π - 4β]` into the smooth pieces of the
/// branch functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoints {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    /// `π - 4β`, the end of the α range.
    pub upper: f64,
}

/// Which effective-vector directions are unconstrained on a piece of the α
/// range. `Plus` refers to `sqrt(δ² + 1 + 2δ cos(2β+α))` and `Minus` to
/// `sqrt(δ² + 1 - 2δ cos(2β+α))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    /// `[0, a1) ∪ (b2, π - 4β]`
    Pinned,
    /// `[a1, b1)`
    MinusFree,
    /// `[b1, a2)`
    BothFree,
    /// `[a2, b2]`
    PlusFree,
}

impl Breakpoints {
    pub fn new(delta: f64, beta: f64) -> Result<Breakpoints> {
        let s = delta * beta.sin();
        if s > 1.0 + 1e-15 {
            return Err(Error::Domain(format!(
                "δ sin β = {s} exceeds 1 (δ = {delta}, β = {beta})"
            )));
        }
        let asn = s.min(1.0).asin();
        let upper = PI - 4.0 * beta;
        let bp = Breakpoints {
            a1: (asn - 3.0 * beta).max(0.0),
            a2: PI - 3.0 * beta - asn,
            b1: asn - beta,
            b2: upper.min(PI - asn - beta),
            upper,
        };
        if bp.b1 > bp.a2 + ANGLE_TOLERANCE {
            return Err(Error::Domain(format!(
                "breakpoint order violated: b1 = {} > a2 = {}",
                bp.b1, bp.a2
            )));
        }
        Ok(bp)
    }

    pub fn segment(&self, alpha: f64) -> Segment {
        if alpha < self.a1 || alpha > self.b2 {
            Segment::Pinned
        } else if alpha < self.b1 {
            Segment::MinusFree
        } else if alpha < self.a2 {
            Segment::BothFree
        } else {
            Segment::PlusFree
        }
    }

    /// Sorted, de-duplicated knots of the α range, endpoints included.
    pub fn knots(&self) -> Vec<f64> {
        let mut k: Vec<f64> = [0.0, self.a1, self.b1, self.a2, self.b2, self.upper]
            .into_iter()
            .filter(|x| (0.0..=self.upper).contains(x))
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        k
    }
}

/// Everything needed to evaluate the branch functions at one `(ε, p)`.
#[derive(Debug, Clone, Copy)]
pub struct Pinning {
    delta: f64,
    sigma: f64,
    /// `(1/2 - ε1)² (1/2 - ε2)`, the weight of the least likely input.
    scale: f64,
    pub p: f64,
    pub beta: f64,
    pub breakpoints: Breakpoints,
}

/// Trigonometric terms shared by all branch formulas at one α.
struct Terms {
    cos_b: f64,
    cos_b_a: f64,
    cos_3b_a: f64,
    plus: f64,
    minus: f64,
}

impl Pinning {
    /// Requires `t <= 1` and `p ∈ [p_min, 1]`.
    pub fn new(eps: EpsilonPair, p: f64) -> Result<Pinning> {
        let p_lo = p_min(eps)?;
        if !(p >= p_lo - PROB_TOLERANCE && p <= 1.0 + PROB_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "guessing probability {p} outside [{p_lo}, 1]"
            )));
        }
        let p = p.clamp(p_lo, 1.0);
        let beta = beta_of(p);
        let delta = eps.delta();
        Ok(Pinning {
            delta,
            sigma: eps.sigma(),
            scale: (0.5 - eps.eps1()).powi(2) * (0.5 - eps.eps2()),
            p,
            beta,
            breakpoints: Breakpoints::new(delta, beta)?,
        })
    }

    fn check_alpha(&self, alpha: f64) -> Result<f64> {
        let upper = self.breakpoints.upper;
        if !(alpha >= -ANGLE_TOLERANCE && alpha <= upper + ANGLE_TOLERANCE) {
            return Err(Error::InvalidInput(format!("α = {alpha} outside [0, {upper}]")));
        }
        Ok(alpha.clamp(0.0, upper.max(0.0)))
    }

    fn terms(&self, alpha: f64) -> Terms {
        let (b, d) = (self.beta, self.delta);
        let c2 = (2.0 * b + alpha).cos();
        Terms {
            cos_b: b.cos(),
            cos_b_a: (b + alpha).cos(),
            cos_3b_a: (3.0 * b + alpha).cos(),
            plus: (d * d + 1.0 + 2.0 * d * c2).max(0.0).sqrt(),
            minus: (d * d + 1.0 - 2.0 * d * c2).max(0.0).sqrt(),
        }
    }

    fn f_at(&self, alpha: f64) -> f64 {
        let (d, s) = (self.delta, self.sigma);
        let t = self.terms(alpha);
        match self.breakpoints.segment(alpha) {
            Segment::Pinned => (2.0 * d * s + s * s * d) * t.cos_b + s * s * t.cos_b_a - 2.0 * s * t.cos_3b_a,
            Segment::MinusFree => s * s * d * t.cos_b + s * s * t.cos_b_a + 2.0 * s * t.minus,
            Segment::BothFree => s * s * t.plus + 2.0 * s * t.minus,
            Segment::PlusFree => s * s * t.plus + 2.0 * d * s * t.cos_b - 2.0 * s * t.cos_3b_a,
        }
    }

    fn g_at(&self, alpha: f64) -> f64 {
        let (d, s) = (self.delta, self.sigma);
        let t = self.terms(alpha);
        let s2 = s * s;
        match self.breakpoints.segment(alpha) {
            Segment::Pinned => {
                d * s * t.cos_b + s * t.cos_b_a + (s2 * d + d) * t.cos_b - (s2 + 1.0) * t.cos_3b_a
            }
            Segment::MinusFree => d * s * t.cos_b + s * t.cos_b_a + (s2 + 1.0) * t.minus,
            Segment::BothFree => s * t.plus + (s2 + 1.0) * t.minus,
            Segment::PlusFree => s * t.plus + (s2 * d + d) * t.cos_b - (s2 + 1.0) * t.cos_3b_a,
        }
    }

    fn g1_at(&self, alpha: f64) -> f64 {
        let b = self.beta;
        0.5 + 0.5 * self.scale * (self.delta * b.cos() + (b + alpha).cos() + self.f_at(alpha))
    }

    fn g2_at(&self, alpha: f64) -> f64 {
        let b = self.beta;
        let s = self.sigma;
        0.5 + 0.5 * self.scale * (self.delta * s * b.cos() + s * (b + alpha).cos() + self.g_at(alpha))
    }

    fn g3_at(&self, alpha: f64) -> f64 {
        let bp = &self.breakpoints;
        if alpha < bp.b1 || alpha > bp.b2 {
            return self.g1_at(alpha);
        }
        let (d, s) = (self.delta, self.sigma);
        let t = self.terms(alpha);
        let k = if alpha < bp.a2 {
            2.0 * s * t.minus
        } else {
            2.0 * d * s * t.cos_b - 2.0 * s * t.cos_3b_a
        };
        0.5 + 0.5 * self.scale * (s * s * d * t.cos_b + t.plus + s * s * t.cos_b_a + k)
    }

    pub fn branch_f(&self, alpha: f64) -> Result<f64> {
        Ok(self.f_at(self.check_alpha(alpha)?))
    }

    pub fn branch_g(&self, alpha: f64) -> Result<f64> {
        Ok(self.g_at(self.check_alpha(alpha)?))
    }

    pub fn case_g1(&self, alpha: f64) -> Result<f64> {
        Ok(self.g1_at(self.check_alpha(alpha)?))
    }

    pub fn case_g2(&self, alpha: f64) -> Result<f64> {
        Ok(self.g2_at(self.check_alpha(alpha)?))
    }

    pub fn case_g3(&self, alpha: f64) -> Result<f64> {
        Ok(self.g3_at(self.check_alpha(alpha)?))
    }

    /// Maximises `G_1` and `G_2` over α: each smooth piece between knots gets
    /// a share of [`ALPHA_SCAN_POINTS`] proportional to its length (at least
    /// 16) and golden-section polish around its best sample. Ties go to
    /// case 1.
    pub fn envelope(&self) -> EnvelopePoint {
        let knots = self.breakpoints.knots();
        let upper = self.breakpoints.upper;
        let mut best = EnvelopePoint { value: self.g1_at(0.0), case: 1, alpha: 0.0 };
        if upper <= 0.0 || knots.len() < 2 {
            let v2 = self.g2_at(0.0);
            if v2 > best.value {
                best = EnvelopePoint { value: v2, case: 2, alpha: 0.0 };
            }
            return best;
        }
        for case in [1u8, 2] {
            let eval = |a: f64| if case == 1 { self.g1_at(a) } else { self.g2_at(a) };
            for w in knots.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let n = ((ALPHA_SCAN_POINTS as f64 * (hi - lo) / upper).ceil() as usize).max(16);
                let (alpha, value) = grid_golden_max(eval, lo, hi, n, GOLDEN_ITERS);
                if value > best.value {
                    best = EnvelopePoint { value, case, alpha };
                }
            }
        }
        best
    }
}

pub fn branch_f(eps: EpsilonPair, p: f64, alpha: f64) -> Result<f64> {
    Pinning::new(eps, p)?.branch_f(alpha)
}

pub fn branch_g(eps: EpsilonPair, p: f64, alpha: f64) -> Result<f64> {
    Pinning::new(eps, p)?.branch_g(alpha)
}

/// Witness value when `P(b=1 | 11, y=0)` is pinned to `p`.
pub fn case_g1(eps: EpsilonPair, p: f64, alpha: f64) -> Result<f64> {
    Pinning::new(eps, p)?.case_g1(alpha)
}

/// Witness value when `P(b=0 | 01, y=0)` (or, equivalently,
/// `P(b=1 | 10, y=0)`) is pinned to `p`.
pub fn case_g2(eps: EpsilonPair, p: f64, alpha: f64) -> Result<f64> {
    Pinning::new(eps, p)?.case_g2(alpha)
}

/// Witness value when `P(b=0 | 00, y=0)` is pinned to `p`. Never exceeds
/// [`case_g1`], so the envelope ignores it; kept for verification.
pub fn case_g3(eps: EpsilonPair, p: f64, alpha: f64) -> Result<f64> {
    Pinning::new(eps, p)?.case_g3(alpha)
}

/// Maximum of the pinned witness value at one guessing probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub value: f64,
    /// 1 or 2: which pinning case attains the maximum.
    pub case: u8,
    pub alpha: f64,
}

/// `G(ε, p)`.
pub fn envelope_g(eps: EpsilonPair, p: f64) -> Result<EnvelopePoint> {
    Ok(Pinning::new(eps, p)?.envelope())
}

/// The curve `E = C⁻¹(p)`: `G` itself, or `G` joined to `(1, E_c)` by the
/// tangent chord from `p0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convexification {
    pub eps: EpsilonPair,
    #[serde(rename = "E_c")]
    pub e_c: f64,
    /// `G(ε, 1)`.
    #[serde(rename = "E_threshold")]
    pub e_threshold: f64,
    pub p_min: f64,
    /// Tangent point; present iff the chord is used.
    pub p0: Option<f64>,
    #[serde(rename = "G_p0")]
    pub g_p0: Option<f64>,
}

impl Convexification {
    pub fn is_convexified(&self) -> bool {
        self.p0.is_some()
    }

    /// `C⁻¹(p)`.
    pub fn eval(&self, p: f64) -> Result<f64> {
        match (self.p0, self.g_p0) {
            (Some(p0), Some(g0)) if p >= p0 => {
                if p > 1.0 + PROB_TOLERANCE {
                    return Err(Error::InvalidInput(format!("guessing probability {p} above 1")));
                }
                Ok(self.chord(p0, g0, p.min(1.0)))
            }
            _ => Ok(envelope_g(self.eps, p)?.value),
        }
    }

    fn chord(&self, p0: f64, g0: f64, p: f64) -> f64 {
        if p0 >= 1.0 {
            return self.e_c;
        }
        self.e_c + (g0 - self.e_c) * (1.0 - p) / (1.0 - p0)
    }
}

/// Builds `F`. When `G(1) >= E_c` no chord is needed. Otherwise `p0`
/// minimises `(G(p) - E_c)/(p - 1)` over `[p_min, 1)`, found on a
/// [`P0_SCAN_POINTS`] grid and polished by golden-section search.
pub fn convexify_f(eps: EpsilonPair, exec: Exec) -> Result<Convexification> {
    let p_lo = p_min(eps)?;
    let e_c = classical_bound(eps);
    let e_threshold = envelope_g(eps, 1.0)?.value;
    let mut conv = Convexification { eps, e_c, e_threshold, p_min: p_lo, p0: None, g_p0: None };
    if e_threshold >= e_c {
        return Ok(conv);
    }

    let ratio = |p: f64| -> Result<f64> { Ok((envelope_g(eps, p)?.value - e_c) / (p - 1.0)) };
    let step = (1.0 - p_lo) / P0_SCAN_POINTS as f64;
    let grid = exec.map_range(P0_SCAN_POINTS, |i| ratio(p_lo + step * i as f64));
    let mut best = (0usize, f64::INFINITY);
    for (i, r) in grid.into_iter().enumerate() {
        let r = r?;
        if !r.is_finite() {
            return Err(Error::Bracket(format!("non-finite chord slope at p = {}", p_lo + step * i as f64)));
        }
        if r < best.1 {
            best = (i, r);
        }
    }
    if best.0 + 1 == P0_SCAN_POINTS {
        return Err(Error::Bracket(format!(
            "chord slope keeps decreasing toward p = 1 for {eps:?}; no tangent point bracketed"
        )));
    }
    let lo = p_lo + step * best.0.saturating_sub(1) as f64;
    let hi = p_lo + step * (best.0 + 1) as f64;
    let (p0, neg) = golden_max(|p| -ratio(p).unwrap_or(f64::INFINITY), lo, hi, GOLDEN_ITERS);
    let (p0, _) = if -neg <= best.1 { (p0, -neg) } else { (p_lo + step * best.0 as f64, best.1) };
    conv.p0 = Some(p0);
    conv.g_p0 = Some(envelope_g(eps, p0)?.value);
    Ok(conv)
}

/// One sample of the tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    #[serde(rename = "E")]
    pub e: f64,
    pub p: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub beta: f64,
    /// Maximising case of the envelope; `None` on the chord.
    pub case: Option<u8>,
    pub alpha_star: Option<f64>,
}

/// Summary values written ahead of the curve samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveHeader {
    pub eps: EpsilonPair,
    #[serde(rename = "E_l")]
    pub e_l: f64,
    #[serde(rename = "E_threshold")]
    pub e_threshold: f64,
    #[serde(rename = "E_q")]
    pub e_q: f64,
    pub p0: Option<f64>,
    pub convexified: bool,
}

/// The min-entropy versus witness curve of a feasible bias pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub eps: EpsilonPair,
    /// `max(E_c, E_threshold)`; `H = 0` at and below it.
    #[serde(rename = "E_l")]
    pub e_l: f64,
    #[serde(rename = "E_threshold")]
    pub e_threshold: f64,
    #[serde(rename = "E_q")]
    pub e_q: f64,
    pub p_min: f64,
    pub convexified: bool,
    pub p0: Option<f64>,
    /// Samples ordered by increasing `E` (decreasing `p`).
    pub samples: Vec<TradeoffPoint>,
    /// Number of requested nodes dropped because of domain errors.
    pub skipped: usize,
    conv: Convexification,
}

impl TradeoffCurve {
    pub fn header(&self) -> CurveHeader {
        CurveHeader {
            eps: self.eps,
            e_l: self.e_l,
            e_threshold: self.e_threshold,
            e_q: self.e_q,
            p0: self.p0,
            convexified: self.convexified,
        }
    }

    pub fn convexification(&self) -> &Convexification {
        &self.conv
    }

    /// `C⁻¹(p)`.
    pub fn witness_at(&self, p: f64) -> Result<f64> {
        self.conv.eval(p)
    }

    /// `C(E)`: the guessing probability bound at witness value `e`.
    pub fn guess_probability(&self, e: f64) -> Result<f64> {
        if e <= self.e_l {
            return Ok(1.0);
        }
        if e >= self.e_q {
            if e > self.e_q + PROB_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "witness value {e} exceeds the quantum bound {}",
                    self.e_q
                )));
            }
            return Ok(self.p_min);
        }
        let (mut lo, mut hi) = (self.p_min, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.witness_at(mid)? > e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Min-entropy bound `-log2 C(E)` in bits.
    pub fn min_entropy(&self, e: f64) -> Result<f64> {
        let p = self.guess_probability(e)?;
        Ok(if p >= 1.0 { 0.0 } else { -p.log2() })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRADEOFF_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                sig12(s.e),
                sig12(s.p),
                sig12(s.h),
                s.case.map(|c| c.to_string()).unwrap_or_else(|| "chord".into()),
                sig12_opt(s.alpha_star)
            )?;
        }
        Ok(())
    }
}

pub const TRADEOFF_CSV_HEADER: &str = "E,p,H,case,alpha_star";

/// Samples the tradeoff at `n_points` Chebyshev-Lobatto nodes in
/// `[p_min, 1]`.
pub fn curve(eps: EpsilonPair, n_points: usize, exec: Exec) -> Result<TradeoffCurve> {
    if n_points < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 curve points, got {n_points}")));
    }
    let bounds = WitnessBounds::compute(eps);
    if !bounds.feasible {
        return Err(Error::Infeasible { eps1: eps.eps1(), eps2: eps.eps2() });
    }
    let conv = convexify_f(eps, exec)?;
    let p_lo = conv.p_min;
    let mid = 0.5 * (1.0 + p_lo);
    let half = 0.5 * (1.0 - p_lo);
    let nodes: Vec<f64> = (0..n_points)
        .map(|j| match j {
            0 => 1.0,
            j if j + 1 == n_points => p_lo,
            j => mid + half * (PI * j as f64 / (n_points - 1) as f64).cos(),
        })
        .collect();

    let evaluated = exec.map_slice(&nodes, |&p| -> Result<TradeoffPoint> {
        let on_chord = conv.p0.is_some_and(|p0| p >= p0);
        let (e, case, alpha_star) = if on_chord {
            (conv.eval(p)?, None, None)
        } else {
            let env = envelope_g(eps, p)?;
            (env.value, Some(env.case), Some(env.alpha))
        };
        Ok(TradeoffPoint { e, p, h: if p >= 1.0 { 0.0 } else { -p.log2() }, beta: beta_of(p), case, alpha_star })
    });
    let mut samples = Vec::with_capacity(n_points);
    let mut skipped = 0;
    for (p, r) in nodes.iter().zip(evaluated) {
        match r {
            Ok(s) => samples.push(s),
            Err(err @ Error::Domain(_)) => {
                warn!("skipping p = {p} on the tradeoff curve for {eps:?}: {err}");
                skipped += 1;
            }
            Err(err) => return Err(err),
        }
    }

    Ok(TradeoffCurve {
        eps,
        e_l: conv.e_c.max(conv.e_threshold),
        e_threshold: conv.e_threshold,
        e_q: bounds.e_q,
        p_min: p_lo,
        convexified: conv.is_convexified(),
        p0: conv.p0,
        samples,
        skipped,
        conv,
    })
}

/// Distance along the ray `s * direction` at which `G(ε, 1)` falls below
/// `E_c`, searched inside the feasible part of the ray. `None` if the chord
/// is never needed there.
pub fn convexification_root(direction: (f64, f64)) -> Option<f64> {
    let (d1, d2) = direction;
    let s_edge = 0.5 / d1.max(d2);
    let s_max = witness::boundary_root(direction).unwrap_or(s_edge) * (1.0 - 1e-9);
    let gap = |s: f64| -> f64 {
        let eps = EpsilonPair::new(s * d1, s * d2).expect("ray stays inside the domain");
        match envelope_g(eps, 1.0) {
            Ok(g) => g.value - classical_bound(eps),
            Err(_) => f64::NAN,
        }
    };
    witness::sign_change_on(gap, s_max)
}

/// Consistency of the envelope with the closed-form quantum bound:
/// `G(ε, p_min) - E_q`.
pub fn envelope_gap_at_p_min(eps: EpsilonPair) -> Result<f64> {
    if Branch::of(eps) != Branch::Interior {
        return Err(Error::Branch(format!("t > 1 at {eps:?}")));
    }
    let p = 0.5 * (1.0 + cos_beta_min(eps));
    Ok(envelope_g(eps, p)?.value - quantum_bound(eps).0)
}
