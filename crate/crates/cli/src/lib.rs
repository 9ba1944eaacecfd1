//! Experiment harness for the basis-function EKF: configuration, Monte
//! Carlo runners, RMSE metrics, scaling benchmarks, and result emitters.

pub mod bench;
pub mod config;
pub mod experiments;
pub mod metrics;
pub mod report;
pub mod timing;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Filter(#[from] bfekf_core::FilterError),
    #[error(transparent)]
    Model(#[from] bfekf_core::ModelError),
    #[error(transparent)]
    Basis(#[from] bfekf_core::BasisError),
    #[error(transparent)]
    Sim(#[from] bfekf_core::sim::SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Filter(_) | HarnessError::Model(_) | HarnessError::Basis(_) => 3,
            _ => 1,
        }
    }
}

/// Monte Carlo thread cap: `BFEKF_THREADS`, defaulting to the available
/// parallelism.
pub fn thread_cap() -> usize {
    std::env::var("BFEKF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Rayon pool honoring the thread cap, used for Monte Carlo runs.
pub fn run_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .expect("thread pool")
}
