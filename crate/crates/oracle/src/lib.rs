//! Brute-force references for the robust operators.
//!
//! Each oracle evaluates a definition directly (grid search, lattice
//! enumeration, sampling, textbook loops) and is sound in a known direction:
//!
//! - [`kappa_grid`] over-estimates the p-variance by at most `len * step`;
//! - [`waterfill_grid`] under-estimates the water level;
//! - [`inner_min_sampled`] over-estimates the adversarial minimum.
//!
//! Nothing here calls the numerical kernels of `robust-mdp`; only its data
//! types are shared.

// Plain index loops keep the references close to their definitions;
// negated comparisons also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod inner;
mod kappa;
mod vi;
mod waterfill;

pub use inner::inner_min_sampled;
pub use kappa::kappa_grid;
pub use vi::{vi_reference, VI_REFERENCE_MAX_ITERS};
pub use waterfill::{waterfill_grid, GridWaterFill, MAX_LATTICE_DIM};

use robust_mdp::MdpError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("lattice oracle supports at most {max} coordinates, got {got}")]
    DimensionTooLarge { max: usize, got: usize },
    #[error("invalid oracle config: {0}")]
    InvalidConfig(&'static str),
    #[error("reference value iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Grid spacing for omega scans and simplex lattices.
    pub grid_step: f64,
    /// Objective evaluations spent by the sampling oracle.
    pub noise_samples: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid_step: 1e-3, noise_samples: 10_000, seed: 0 }
    }
}

impl OracleConfig {
    pub fn with_grid_step(mut self, step: f64) -> Self {
        self.grid_step = step;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.noise_samples = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(OracleError::InvalidConfig("grid_step must be positive"));
        }
        if self.noise_samples == 0 {
            return Err(OracleError::InvalidConfig("noise_samples must be at least 1"));
        }
        Ok(())
    }
}
