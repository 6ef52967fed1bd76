//! Benchmark harness and oracle sweeps behind the `robustmdp` binary.

pub mod bench;
pub mod check;

pub use bench::{run_bench, write_bench_csv, BenchRow, BenchSetting, BenchSpec, BENCH_CSV_HEADER};
pub use check::{oracle_check, write_check_csv, CheckRow, CheckSpec};

use robust_mdp::MdpError;
use robust_mdp_oracle::OracleError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bench spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{failed} oracle check(s) failed")]
    ChecksFailed { failed: usize },
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mdp(MdpError::NoConvergence { .. })
            | CliError::Oracle(OracleError::NoConvergence { .. })
            | CliError::Oracle(OracleError::Mdp(MdpError::NoConvergence { .. })) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Median of a nonempty sample; mean of the middle pair for even lengths.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
