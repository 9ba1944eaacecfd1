//! Online joint state inference and learning of unknown dynamics.
//!
//! The unknown part of a gray-box state-space model is represented as a
//! weighted basis-function expansion on a Cartesian grid and estimated
//! jointly with the physical state by a partitioned extended Kalman filter.
//! With compactly supported basis functions only the handful of weights
//! that are active near the current state enter each filter step, so the
//! per-step cost is governed by the basis support and grid density rather
//! than the total grid size.
//!
//! Crate layout:
//! - [`basis`]: basis families (Wendland, Gaussian), grids, active-set
//!   selection and evaluation, induced-kernel utilities.
//! - [`ssmodel`]: augmented state-space models, weight orderings,
//!   Jacobians, and the built-in experiment models.
//! - [`filter`]: dense and sparse partitioned EKF updates, function
//!   queries, state snapshots.
//! - [`sim`]: ground-truth generators for the bundled experiments.

pub mod basis;
pub mod filter;
pub mod sim;
pub mod ssmodel;

pub use basis::{
    active_exact, active_fast, active_upper_bound, eval_active, eval_dense, kernel_value,
    product_eval_gaussian, ActiveSet, BasisConfig, BasisError, BasisFamily, CartesianGrid,
};
pub use filter::{AugmentedEkf, FilterError, FilterState, StepStats, WeightCov};
pub use ssmodel::{AugmentedModel, ModelError, WeightOrdering};
