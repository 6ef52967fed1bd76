use thiserror::Error;

use crate::uncertainty::Rectangularity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("kernel row P0(.|s={state}, a={action}) is not a probability vector (sum = {sum})")]
    NonStochasticRow { state: usize, action: usize, sum: f64 },

    #[error("policy row pi(.|s={state}) is not a probability vector (sum = {sum})")]
    NonStochasticPolicy { state: usize, sum: f64 },

    #[error("initial distribution is not a probability vector (sum = {sum})")]
    NonStochasticInitial { sum: f64 },

    #[error("discount factor {0} outside [0, 1)")]
    DiscountOutOfRange(f64),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid norm exponent {0}: must be >= 1 or infinity")]
    InvalidNorm(f64),

    #[error("negative radius in {0}")]
    NegativeRadius(&'static str),

    #[error("non-robust uncertainty must have zero radii")]
    NonZeroRadius,

    #[error("forbidden mask marks s'={next} at s={state} although the nominal kernel is nonzero there")]
    ForbiddenNotZero { state: usize, next: usize },

    #[error("forbidden mask leaves no allowed next state at s={state}")]
    AllForbidden { state: usize },

    #[error("empty vector")]
    EmptyVector,

    #[error("every entry is masked out")]
    AllMasked,

    #[error("operator requires {expected:?} uncertainty, got {got:?}")]
    RectangularityMismatch {
        expected: Rectangularity,
        got: Rectangularity,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T, E = MdpError> = std::result::Result<T, E>;
