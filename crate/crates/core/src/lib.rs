//! Robust value iteration for Lp-constrained robust MDPs.
//!
//! Uncertainty sets are balls of radius `alpha` (reward) and `beta`
//! (kernel) around a nominal model, either per state-action pair (`SA`) or
//! per state (`S`). Their robust Bellman operators reduce to nominal
//! operators with a value-dependent penalty: the q-variance of the value
//! vector for `SA`, and an Lp water-filling problem for `S`.
//!
//! Everything numerical is generic over [`Scalar`] (`f32`, `f64`); the
//! aliases at the crate root fix `f64`.
//!
//! ```
//! use robust_mdp::{random_instance, value_iteration, NormIndex, Rectangularity,
//!                  SolveConfig, Uncertainty, Mdp};
//!
//! let inst: Mdp = random_instance(10, 3, 7, 1.0).unwrap();
//! let unc = Uncertainty::uniform(Rectangularity::S, NormIndex::Two, 10, 3, 0.1, 0.1);
//! let report = value_iteration(&inst, &unc, &SolveConfig::default()).unwrap();
//! assert!(report.converged);
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman;
pub mod error;
pub mod io;
pub mod mdp;
pub mod norm;
pub mod p_variance;
pub mod parallel;
pub mod scalar;
pub mod solver;
pub mod uncertainty;
pub mod water_filling;

pub use bellman::{bellman_opt_nonrobust, BellmanContext, PrepTimings};
pub use error::{MdpError, Result};
pub use mdp::{
    q_from_value, random_instance, validate_mdp, MdpInstance, QFunction, StochasticPolicy,
    ValueFunction,
};
pub use norm::{holder_conjugate, NormIndex};
pub use p_variance::{p_mean, p_variance_masked, PMeanResult};
pub use scalar::Scalar;
pub use solver::{
    bellman_sweep, evaluate_policy, extract_policy, extract_policy_with_chi,
    q_value_iteration_sa, residual_ratio, value_iteration, PhaseTimings, PolicyEvaluation,
    SolveConfig, SolveReport,
};
pub use uncertainty::{Rectangularity, UncertaintySpec};
pub use water_filling::{active_count, water_fill, WaterFillResult};

pub type Mdp = MdpInstance<f64>;
pub type Uncertainty = UncertaintySpec<f64>;
pub type Value = ValueFunction<f64>;
pub type QValues = QFunction<f64>;
pub type Policy = StochasticPolicy<f64>;
pub type Report = SolveReport<f64>;
pub type WaterFill = WaterFillResult<f64>;
pub type PMean = PMeanResult<f64>;

pub type Mdp32 = MdpInstance<f32>;
pub type Uncertainty32 = UncertaintySpec<f32>;
pub type Report32 = SolveReport<f32>;
