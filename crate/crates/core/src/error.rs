use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("error probability {0} is outside the admissible range {1}")]
    InvalidEpsilon(f64, &'static str),

    #[error("block length must be at least 1")]
    InvalidBlockLength,

    #[error("distribution would have {atoms} atoms, above the cap of {cap}")]
    AtomCapExceeded { atoms: u128, cap: u128 },

    #[error("product source would have {types} type classes, above the cap of {cap}")]
    TypeCapExceeded { types: u128, cap: u128 },

    #[error("symbol {0} is not in the support of the source")]
    UnknownSymbol(usize),

    #[error("codeword of rank {rank} exceeds the support size {support}")]
    RankOutOfSupport { rank: u128, support: usize },

    #[error("no (M, eta) pair satisfies the parametric equations at epsilon = {0}")]
    NoValidParameter(f64),

    #[error(
        "iterative solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },

    #[error("distortion level {d} outside the open interval ({d_min}, {d_max})")]
    OutOfRange { d: f64, d_min: f64, d_max: f64 },

    #[error(
        "no reproduction set meets excess probability {epsilon} (minimum achievable {min_excess})"
    )]
    Infeasible { epsilon: f64, min_excess: f64 },

    #[error("ball probability dynamic program needs {states} states, above the cap of {cap}")]
    DpStateCapExceeded { states: usize, cap: usize },

    #[error("instance too large for exhaustive search: {0}")]
    ScaleExceeded(String),

    #[error("invalid distortion measure: {0}")]
    InvalidDistortion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon, "[0, 1]"))
    }
}
