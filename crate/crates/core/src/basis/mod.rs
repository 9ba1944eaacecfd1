//! Basis-function families, Cartesian center grids, and active-set machinery.
//!
//! A scalar unknown function component is modeled as `f(z) = Σ_i β_i(z) θ_i`
//! with radial basis functions `β_i` centered on a Cartesian grid. For the
//! Wendland family the support is compact, so at any evaluation point only
//! the centers within radius `α` contribute; the [`ActiveSet`] of those
//! centers is what the sparse filter updates.

mod active;
mod eval;
mod family;
mod grid;

pub use active::{active_exact, active_fast, active_upper_bound, ActiveSet};
pub use eval::{
    eval_active, eval_active_with_count, eval_dense, gaussian_factors, kernel_value,
    product_eval_gaussian, product_eval_gaussian_with_count,
};
pub use family::{gaussian_value, wendland_derivative, wendland_value, BasisFamily};
pub use grid::CartesianGrid;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from grid construction, family evaluation, and set selection.
#[derive(Debug, Error)]
pub enum BasisError {
    #[error("scaled radius must be non-negative, got {0}")]
    NegativeRadius(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation requires a compactly supported family; the Gaussian family has global support")]
    UnsupportedFamily,
    #[error("operation requires an equally spaced Cartesian grid")]
    NonUniformGrid,
    #[error("grid spacing must be positive, got {0}")]
    InvalidSpacing(f64),
    #[error("grid bounds inverted in dimension {dim}: lower {lower} >= upper {upper}")]
    InvertedBounds { dim: usize, lower: f64, upper: f64 },
    #[error("per-dimension centers must be non-empty and strictly increasing (dimension {0})")]
    InvalidCenters(usize),
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),
    #[error("active set indices must be strictly increasing and within the grid")]
    InvalidActiveSet,
}

/// Basis family plus the prior weight variance `σ_j²` shared by all weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisConfig {
    pub family: BasisFamily,
    pub prior_weight_variance: f64,
}

impl BasisConfig {
    pub fn new(family: BasisFamily, prior_weight_variance: f64) -> Result<Self, BasisError> {
        match family {
            BasisFamily::Wendland { support } if support <= 0.0 => {
                return Err(BasisError::NonPositiveParameter {
                    name: "support",
                    value: support,
                })
            }
            BasisFamily::Gaussian { length_scale } if length_scale <= 0.0 => {
                return Err(BasisError::NonPositiveParameter {
                    name: "length_scale",
                    value: length_scale,
                })
            }
            _ => {}
        }
        if prior_weight_variance < 0.0 {
            return Err(BasisError::NonPositiveParameter {
                name: "prior_weight_variance",
                value: prior_weight_variance,
            });
        }
        Ok(Self {
            family,
            prior_weight_variance,
        })
    }

    pub fn wendland(support: f64, prior_weight_variance: f64) -> Result<Self, BasisError> {
        Self::new(BasisFamily::Wendland { support }, prior_weight_variance)
    }

    pub fn gaussian(length_scale: f64, prior_weight_variance: f64) -> Result<Self, BasisError> {
        Self::new(
            BasisFamily::Gaussian { length_scale },
            prior_weight_variance,
        )
    }
}
