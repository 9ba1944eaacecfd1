//! Property tests for the basis-function invariants.

use bfekf_core::basis::{
    active_exact, active_fast, active_upper_bound, eval_active, eval_dense,
    product_eval_gaussian, BasisConfig, CartesianGrid,
};
use bfekf_core::ssmodel::{unknown_from_beta, WeightOrdering};
use nalgebra::DVector;
use proptest::prelude::*;

fn grid_1to3d() -> impl Strategy<Value = (CartesianGrid, f64, f64)> {
    (1usize..=3, 0.2f64..3.0, 2usize..=8, -5.0f64..5.0).prop_map(
        |(dims, spacing, count, origin)| {
            let lower = vec![origin; dims];
            let upper: Vec<f64> = lower
                .iter()
                .map(|l| l + spacing * (count - 1) as f64)
                .collect();
            let grid = CartesianGrid::make_grid(&lower, &upper, spacing).unwrap();
            (grid, spacing, origin)
        },
    )
}

proptest! {
    /// The fast box selection always contains the exact ball selection,
    /// and the surplus indices carry exactly zero basis values.
    #[test]
    fn fast_is_superset_of_exact(
        (grid, spacing, origin) in grid_1to3d(),
        support_cells in 0.3f64..4.0,
        offset in proptest::collection::vec(-6.0f64..12.0, 3),
    ) {
        let support = support_cells * spacing;
        let config = BasisConfig::wendland(support, 1.0).unwrap();
        let x: Vec<f64> = (0..grid.dims()).map(|p| origin + offset[p]).collect();
        let fast = active_fast(&x, &grid, &config).unwrap();
        let exact = active_exact(&x, &grid, &config).unwrap();
        for idx in exact.indices() {
            prop_assert!(fast.contains(*idx), "exact index {idx} missing from fast set");
        }
        // surplus indices evaluate to exactly zero
        let values = eval_active(&x, &grid, &config, &fast).unwrap();
        for (k, idx) in fast.indices().iter().enumerate() {
            if !exact.contains(*idx) {
                prop_assert_eq!(values[k], 0.0);
            }
        }
    }

    /// The active count never exceeds (⌊2α/δ⌋+1)^P on equally spaced grids.
    #[test]
    fn fast_count_respects_upper_bound(
        (grid, spacing, origin) in grid_1to3d(),
        support_cells in 0.3f64..4.0,
        offset in proptest::collection::vec(-6.0f64..12.0, 3),
    ) {
        let support = support_cells * spacing;
        let config = BasisConfig::wendland(support, 1.0).unwrap();
        let x: Vec<f64> = (0..grid.dims()).map(|p| origin + offset[p]).collect();
        let fast = active_fast(&x, &grid, &config).unwrap();
        let bound = active_upper_bound(support, spacing, grid.dims() as u32).unwrap();
        prop_assert!(fast.count() <= bound, "{} > {}", fast.count(), bound);
    }

    /// Scattering the active evaluation into a zero vector reproduces the
    /// dense evaluation bitwise.
    #[test]
    fn scattered_active_equals_dense(
        (grid, spacing, origin) in grid_1to3d(),
        support_cells in 0.3f64..4.0,
        offset in proptest::collection::vec(-6.0f64..12.0, 3),
    ) {
        let support = support_cells * spacing;
        let config = BasisConfig::wendland(support, 1.0).unwrap();
        let x: Vec<f64> = (0..grid.dims()).map(|p| origin + offset[p]).collect();
        let fast = active_fast(&x, &grid, &config).unwrap();
        let sparse = eval_active(&x, &grid, &config, &fast).unwrap();
        let dense = eval_dense(&x, &grid, &config).unwrap();
        let mut scattered = DVector::zeros(grid.total_centers());
        for (k, &i) in fast.indices().iter().enumerate() {
            scattered[i] = sparse[k];
        }
        prop_assert_eq!(scattered, dense);
    }

    /// Kronecker-factored Gaussian evaluation matches the joint one.
    #[test]
    fn product_factorization_matches_joint(
        (grid, _, origin) in grid_1to3d(),
        length_scale in 0.3f64..3.0,
        offset in proptest::collection::vec(-4.0f64..10.0, 3),
    ) {
        let config = BasisConfig::gaussian(length_scale, 1.0).unwrap();
        let x: Vec<f64> = (0..grid.dims()).map(|p| origin + offset[p]).collect();
        let joint = eval_dense(&x, &grid, &config).unwrap();
        let product = product_eval_gaussian(&x, &grid, length_scale).unwrap();
        for i in 0..joint.len() {
            let scale = joint[i].abs().max(1e-300);
            prop_assert!((joint[i] - product[i]).abs() <= 1e-12 * scale.max(1e-12));
        }
    }

    /// Stacked and staggered layouts of the same weights produce the same
    /// unknown-input vector, bit for bit.
    #[test]
    fn weight_orderings_agree(
        (grid, spacing, origin) in grid_1to3d(),
        support_cells in 0.5f64..4.0,
        offset in proptest::collection::vec(-2.0f64..8.0, 3),
        j_dim in 1usize..=3,
        weight_seed in any::<u64>(),
    ) {
        let support = support_cells * spacing;
        let config = BasisConfig::wendland(support, 1.0).unwrap();
        let x: Vec<f64> = (0..grid.dims()).map(|p| origin + offset[p]).collect();
        let active = active_fast(&x, &grid, &config).unwrap();
        let beta = eval_active(&x, &grid, &config, &active).unwrap();
        let n_w = grid.total_centers();
        // same underlying weights laid out both ways
        let value = |j: usize, i: usize| {
            let h = weight_seed
                .wrapping_mul(0x9E3779B97F4A7C15)
                .wrapping_add((j * n_w + i) as u64)
                .wrapping_mul(0xD1B54A32D192ED03);
            (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let stacked = DVector::from_fn(j_dim * n_w, |k, _| value(k / n_w, k % n_w));
        let staggered = DVector::from_fn(j_dim * n_w, |k, _| value(k % j_dim, k / j_dim));
        let u_stacked = unknown_from_beta(&beta, &stacked, &active, WeightOrdering::Stacked, n_w, j_dim);
        let u_staggered = unknown_from_beta(&beta, &staggered, &active, WeightOrdering::Staggered, n_w, j_dim);
        prop_assert_eq!(u_stacked, u_staggered);
    }
}
