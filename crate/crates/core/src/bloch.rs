//! Qubit pure states and binary measurements on the Bloch sphere.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::bits::Message;
use crate::error::{Error, Result};

/// Tolerance on the norm of state and rank-1 measurement vectors.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// A real 3-vector in (or on) the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const X: BlochVector = BlochVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: BlochVector = BlochVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: BlochVector = BlochVector { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    /// Unit vector in the x-y plane at angle `phi` from the x axis.
    pub fn in_plane(phi: f64) -> Self {
        BlochVector::new(phi.cos(), phi.sin(), 0.0)
    }

    /// Unit vector from polar angle `theta` (from +z) and azimuth `phi`.
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        BlochVector::new(s * phi.cos(), s * phi.sin(), theta.cos())
    }

    pub fn dot(self, other: BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    /// Returns `self / |self|`, or `None` for the zero vector.
    pub fn normalized(self) -> Option<BlochVector> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    pub(crate) fn require_unit(self, what: &str) -> Result<()> {
        if self.is_unit() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{what} must have unit norm, got |v| = {}",
                self.norm()
            )))
        }
    }
}

impl Add for BlochVector {
    type Output = BlochVector;
    fn add(self, o: BlochVector) -> BlochVector {
        BlochVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for BlochVector {
    type Output = BlochVector;
    fn sub(self, o: BlochVector) -> BlochVector {
        BlochVector::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for BlochVector {
    type Output = BlochVector;
    fn mul(self, s: f64) -> BlochVector {
        BlochVector::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A two-outcome qubit measurement.
///
/// Every POVM decomposes into rank-1 projectives plus the two trivial
/// measurements, so these three kinds are all the strategies ever need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    /// `{(I + v.σ)/2, (I - v.σ)/2}`; `axis` is the outcome-0 direction.
    Projective { axis: BlochVector },
    /// Always outputs 0 (`{I, 0}`).
    AllZero,
    /// Always outputs 1 (`{0, I}`).
    AllOne,
}

impl Measurement {
    pub fn projective(axis: BlochVector) -> Result<Self> {
        axis.require_unit("measurement axis")?;
        Ok(Measurement::Projective { axis })
    }

    pub fn is_trivial(&self) -> bool {
        !matches!(self, Measurement::Projective { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Measurement::Projective { axis } => axis.require_unit("measurement axis"),
            _ => Ok(()),
        }
    }

    /// Born probability without input validation, for hot loops over vectors
    /// that are unit by construction.
    #[inline]
    pub(crate) fn prob_unchecked(&self, state: BlochVector, outcome: u8) -> f64 {
        match self {
            Measurement::Projective { axis } => {
                let c = state.dot(*axis);
                if outcome == 0 {
                    0.5 * (1.0 + c)
                } else {
                    0.5 * (1.0 - c)
                }
            }
            Measurement::AllZero => f64::from(u8::from(outcome == 0)),
            Measurement::AllOne => f64::from(u8::from(outcome == 1)),
        }
    }
}

/// `P(b | state, m) = (1 + (-1)^b r.v) / 2` for a rank-1 measurement; the
/// trivial kinds return 0 or 1 regardless of the state.
pub fn born_probability(state: BlochVector, m: &Measurement, outcome: u8) -> Result<f64> {
    state.require_unit("state vector")?;
    m.validate()?;
    if outcome > 1 {
        return Err(Error::InvalidInput(format!("outcome must be 0 or 1, got {outcome}")));
    }
    Ok(m.prob_unchecked(state, outcome))
}

/// The y-weighted signed sum `sum_i (-1)^{a_i} P(y=i|λ) v_i`, with
/// `P(y=0|λ) = 1/2 + (-1)^{k2} eps2`.
pub fn effective_vector(
    a: Message,
    k2: u8,
    eps2: f64,
    v0: BlochVector,
    v1: BlochVector,
) -> Result<BlochVector> {
    v0.require_unit("v0")?;
    v1.require_unit("v1")?;
    if !(0.0..0.5).contains(&eps2) {
        return Err(Error::InvalidInput(format!("eps2 must lie in [0, 1/2), got {eps2}")));
    }
    if k2 > 1 {
        return Err(Error::InvalidInput(format!("k2 must be 0 or 1, got {k2}")));
    }
    Ok(effective_vector_unchecked(a, k2, eps2, v0, v1))
}

pub(crate) fn effective_vector_unchecked(
    a: Message,
    k2: u8,
    eps2: f64,
    v0: BlochVector,
    v1: BlochVector,
) -> BlochVector {
    let s = if k2 == 0 { 1.0 } else { -1.0 };
    let w0 = 0.5 + s * eps2;
    let w1 = 0.5 - s * eps2;
    v0 * (a.sign(0) * w0) + v1 * (a.sign(1) * w1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: BlochVector, b: BlochVector) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn born_examples() {
        let m = Measurement::projective(BlochVector::X).unwrap();
        assert_eq!(born_probability(BlochVector::X, &m, 0).unwrap(), 1.0);
        assert_eq!(born_probability(BlochVector::Y, &m, 0).unwrap(), 0.5);
        assert_eq!(born_probability(BlochVector::X, &m, 1).unwrap(), 0.0);
    }

    #[test]
    fn trivial_measurements_ignore_state() {
        for state in [BlochVector::X, BlochVector::Y, -BlochVector::Z] {
            assert_eq!(born_probability(state, &Measurement::AllZero, 0).unwrap(), 1.0);
            assert_eq!(born_probability(state, &Measurement::AllZero, 1).unwrap(), 0.0);
            assert_eq!(born_probability(state, &Measurement::AllOne, 0).unwrap(), 0.0);
            assert_eq!(born_probability(state, &Measurement::AllOne, 1).unwrap(), 1.0);
        }
    }

    #[test]
    fn non_unit_inputs_rejected() {
        let m = Measurement::projective(BlochVector::X).unwrap();
        let short = BlochVector::new(0.5, 0.0, 0.0);
        assert!(matches!(born_probability(short, &m, 0), Err(Error::InvalidInput(_))));
        assert!(Measurement::projective(short).is_err());
        let almost = BlochVector::new(1.0 + 1e-13, 0.0, 0.0);
        assert!(born_probability(almost, &m, 0).is_ok());
        assert!(born_probability(BlochVector::X, &m, 2).is_err());
    }

    #[test]
    fn effective_vector_examples() {
        let (v0, v1) = (BlochVector::X, BlochVector::Y);
        let v = effective_vector(Message::new(0, 0), 0, 0.0, v0, v1).unwrap();
        assert!(close(v, BlochVector::new(0.5, 0.5, 0.0)));
        let v = effective_vector(Message::new(0, 1), 0, 0.0, v0, v1).unwrap();
        assert!(close(v, BlochVector::new(0.5, -0.5, 0.0)));
        let v = effective_vector(Message::new(0, 0), 0, 0.1, v0, v1).unwrap();
        assert!(close(v, BlochVector::new(0.6, 0.4, 0.0)));
        // k2 = 1 swaps which measurement carries the larger weight.
        let v = effective_vector(Message::new(0, 0), 1, 0.1, v0, v1).unwrap();
        assert!(close(v, BlochVector::new(0.4, 0.6, 0.0)));
        assert!(effective_vector(Message::new(0, 0), 0, 0.5, v0, v1).is_err());
    }

    fn unit() -> impl Strategy<Value = BlochVector> {
        (0.0..std::f64::consts::PI, -std::f64::consts::PI..std::f64::consts::PI)
            .prop_map(|(t, p)| BlochVector::spherical(t, p))
    }

    /// Rodrigues rotation about a unit axis.
    fn rotate(v: BlochVector, axis: BlochVector, angle: f64) -> BlochVector {
        let (s, c) = angle.sin_cos();
        let cross = BlochVector::new(
            axis.y * v.z - axis.z * v.y,
            axis.z * v.x - axis.x * v.z,
            axis.x * v.y - axis.y * v.x,
        );
        v * c + cross * s + axis * (axis.dot(v) * (1.0 - c))
    }

    proptest! {
        #[test]
        fn effective_norm_identity(v0 in unit(), v1 in unit(), k2 in 0u8..2, eps2 in 0.0..0.4999f64) {
            let n = |a0, a1| effective_vector(Message::new(a0, a1), k2, eps2, v0, v1).unwrap().norm().powi(2);
            let expected = 1.0 + 4.0 * eps2 * eps2;
            prop_assert!((n(0, 0) + n(0, 1) - expected).abs() < 1e-12);
            prop_assert!((n(1, 0) + n(1, 1) - expected).abs() < 1e-12);
        }

        #[test]
        fn born_outcomes_sum_to_one(r in unit(), v in unit()) {
            let m = Measurement::projective(v).unwrap();
            let total = born_probability(r, &m, 0).unwrap() + born_probability(r, &m, 1).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-15);
        }

        #[test]
        fn born_rotation_invariant(r in unit(), v in unit(), axis in unit(), angle in -3.2..3.2f64) {
            let m = Measurement::projective(v).unwrap();
            let rr = rotate(r, axis, angle).normalized().unwrap();
            let mr = Measurement::projective(rotate(v, axis, angle).normalized().unwrap()).unwrap();
            for b in 0..2 {
                let p = born_probability(r, &m, b).unwrap();
                let q = born_probability(rr, &mr, b).unwrap();
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
