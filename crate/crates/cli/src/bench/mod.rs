//! Scaling benchmarks: single-point evaluation time and one-step
//! prediction time as the total basis count grows at fixed support and
//! grid density. Always single-threaded.

pub mod eval;
pub mod predict;

use bfekf_core::basis::CartesianGrid;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::HarnessError;

/// Square 2-D grid with roughly `total/2` centers per output (J = 2).
pub(crate) fn bench_grid(total_weights: usize, spacing: f64) -> Result<CartesianGrid, HarnessError> {
    let per_output = (total_weights as f64 / 2.0).max(4.0);
    let side = per_output.sqrt().round().max(2.0) as usize;
    let extent = (side - 1) as f64 * spacing;
    Ok(CartesianGrid::make_grid(
        &[0.0, 0.0],
        &[extent, extent],
        spacing,
    )?)
}

/// A generic query point away from grid symmetry lines.
pub(crate) fn query_point(grid: &CartesianGrid, spacing: f64) -> [f64; 2] {
    let (lo, hi) = grid.bounds();
    [
        0.5 * (lo[0] + hi[0]) + 0.37 * spacing,
        0.5 * (lo[1] + hi[1]) - 0.41 * spacing,
    ]
}

pub(crate) fn random_weights(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}
