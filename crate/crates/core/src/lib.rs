//! Randomness certification in a prepare-and-measure setting whose inputs
//! come from biased (ε-free) sources, with the 2→1 quantum random access
//! code as the dimension witness.
//!
//! The crate covers
//!
//! - the Bloch-sphere model of states and two-outcome measurements ([`bloch`]),
//! - the adversary's eight hidden variables and their mixtures ([`adversary`]),
//! - the classical and quantum witness bounds and the feasible bias region
//!   ([`witness`]),
//! - the analytic min-entropy versus witness tradeoff ([`tradeoff`]),
//! - independent numerical oracles for every closed form ([`oracle`]), and
//! - a seeded Monte Carlo run of the protocol ([`simulator`]).
//!
//! Data-parallel loops are driven by [`Exec`]; with the default `parallel`
//! feature they use rayon, otherwise they run sequentially with identical
//! results.

pub mod adversary;
pub mod bits;
pub mod bloch;
pub mod error;
pub mod exec;
pub mod format;
pub mod optimize;
pub mod oracle;
pub mod simulator;
pub mod tradeoff;
pub mod witness;

pub use adversary::{EpsilonPair, HiddenVariable, LambdaDistribution, LambdaMode};
pub use bits::Message;
pub use bloch::{born_probability, effective_vector, BlochVector, Measurement};
pub use error::{Error, Result};
pub use exec::Exec;
pub use witness::{LocalStrategy, Strategy, WitnessBounds};
