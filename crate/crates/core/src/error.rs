use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A formula was requested outside the parameter branch it is valid for.
    #[error("branch error: {0}")]
    Branch(String),

    /// An analytic expression left its domain (e.g. `arcsin` of a value above 1).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("bias pair ({eps1}, {eps2}) is not feasible")]
    Infeasible { eps1: f64, eps2: f64 },

    #[error("search budget {given} is below the minimum of {minimum}")]
    Budget { given: u64, minimum: u64 },

    /// A one-dimensional search could not bracket its optimum.
    #[error("bracketing failed: {0}")]
    Bracket(String),

    /// A statistic is undefined for the supplied data.
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
