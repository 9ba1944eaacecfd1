//! Partitioned augmented-state EKF.
//!
//! The filter propagates the physical-state mean, the basis-function
//! weight mean, and the partitioned covariance `[[Pˣ, Pˣθ], [Pθˣ, Pθ]]`.
//! Dense updates use every basis function; sparse updates exploit compact
//! support, restricting weight-side work to the per-step active set. The
//! measurement update uses the Joseph covariance form, which stays
//! positive semi-definite for any gain, including the sparse restricted
//! one.

mod ekf;
mod snapshot;
mod state;

pub use ekf::{ActiveSelection, AugmentedEkf};
pub use state::{FilterState, TrackedCov, WeightCov};

use thiserror::Error;

use crate::basis::{ActiveSet, BasisError};
use crate::ssmodel::ModelError;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("storage mismatch: {0}")]
    StorageMismatch(&'static str),
    #[error("selection mismatch: {0}")]
    SelectionMismatch(&'static str),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("innovation covariance condition number {condition:.3e} exceeds the limit")]
    IllConditioned { condition: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),
    #[error("snapshot format error: {0}")]
    SnapshotFormat(&'static str),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-update accounting: active-set size and a floating-point operation
/// estimate accumulated from the dimensions of the matrix products the
/// update actually performed (dominant terms only).
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    /// Active basis functions `ñ_w^j`.
    pub active_basis: usize,
    /// Active weight columns `J·ñ_w^j`.
    pub active_weights: usize,
    /// Estimated flops of the dominant matrix products.
    pub flops: u64,
}

impl StepStats {
    pub(crate) fn new(active: &ActiveSet, active_weights: usize) -> Self {
        Self {
            active_basis: active.count(),
            active_weights,
            flops: 0,
        }
    }

    /// Account an `m×k · k×n` product.
    pub(crate) fn add_gemm(&mut self, m: usize, k: usize, n: usize) {
        self.flops += 2 * (m as u64) * (k as u64) * (n as u64);
    }
}

/// Storage in bits for a weight posterior with `n_w^j` weights per output
/// and `J` outputs at `d` bits per number: `d·(n_w^j·J)²` for the
/// covariance (symmetry ignored) plus `d·n_w^j·J` for the mean.
pub fn memory_estimate(
    n_w_per_output: usize,
    output_dim: usize,
    bits_per_number: u32,
) -> Result<u64, FilterError> {
    if n_w_per_output == 0 || output_dim == 0 || bits_per_number == 0 {
        return Err(FilterError::Dimension {
            what: "memory estimate arguments",
            expected: 1,
            got: 0,
        });
    }
    let n = (n_w_per_output as u64)
        .checked_mul(output_dim as u64)
        .ok_or(FilterError::Overflow("weight count"))?;
    let d = bits_per_number as u64;
    let cov = n
        .checked_mul(n)
        .and_then(|n2| n2.checked_mul(d))
        .ok_or(FilterError::Overflow("covariance storage"))?;
    let mean = n
        .checked_mul(d)
        .ok_or(FilterError::Overflow("mean storage"))?;
    cov.checked_add(mean)
        .ok_or(FilterError::Overflow("total storage"))
}

#[cfg(test)]
mod memory_tests {
    use super::*;

    #[test]
    fn memory_estimate_formula() {
        // 64 * (100*2)^2 + 64 * 200
        assert_eq!(memory_estimate(100, 2, 64).unwrap(), 2_560_000 + 12_800);
        assert_eq!(memory_estimate(1, 1, 64).unwrap(), 64 + 64);
    }

    #[test]
    fn memory_estimate_quadruples_with_doubled_grid() {
        let one = memory_estimate(500, 2, 64).unwrap();
        let two = memory_estimate(1000, 2, 64).unwrap();
        let cov_one = one - 64 * 1000;
        let cov_two = two - 64 * 2000;
        assert_eq!(cov_two, 4 * cov_one);
    }

    #[test]
    fn memory_estimate_overflow_checked() {
        assert!(memory_estimate(usize::MAX / 2, 2, 64).is_err());
        assert!(memory_estimate(0, 2, 64).is_err());
    }
}
