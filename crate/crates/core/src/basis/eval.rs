use nalgebra::DVector;

use super::family::sq_dist;
use super::{active_fast, ActiveSet, BasisConfig, BasisError, BasisFamily, CartesianGrid};

/// Basis values at the active centers, in active-index order.
///
/// For sets produced by the fast selection, entries belonging to box
/// corners outside the true support come out exactly zero. A stale set
/// (produced for a different point) is not detectable at runtime; callers
/// own that pairing.
pub fn eval_active(
    x: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
    active: &ActiveSet,
) -> Result<DVector<f64>, BasisError> {
    eval_active_with_count(x, grid, config, active).map(|(v, _)| v)
}

/// [`eval_active`] plus the number of scalar basis evaluations performed.
pub fn eval_active_with_count(
    x: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
    active: &ActiveSet,
) -> Result<(DVector<f64>, usize), BasisError> {
    check_point_dim(x, grid)?;
    let mut out = DVector::zeros(active.count());
    let mut center = vec![0.0; grid.dims()];
    for (k, &i) in active.indices().iter().enumerate() {
        grid.center_into(i, &mut center);
        out[k] = config.family.value_at(x, &center);
    }
    Ok((out, active.count()))
}

/// Basis values at every center of the grid.
pub fn eval_dense(
    x: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
) -> Result<DVector<f64>, BasisError> {
    check_point_dim(x, grid)?;
    let n = grid.total_centers();
    let mut out = DVector::zeros(n);
    let mut center = vec![0.0; grid.dims()];
    for i in 0..n {
        grid.center_into(i, &mut center);
        out[i] = config.family.value_at(x, &center);
    }
    Ok(out)
}

/// Per-dimension Gaussian factor vectors; `P·m` scalar evaluations total.
pub fn gaussian_factors(
    x: &[f64],
    grid: &CartesianGrid,
    length_scale: f64,
) -> Result<Vec<Vec<f64>>, BasisError> {
    check_point_dim(x, grid)?;
    if !(length_scale > 0.0) {
        return Err(BasisError::NonPositiveParameter {
            name: "length_scale",
            value: length_scale,
        });
    }
    let denom = 2.0 * length_scale * length_scale;
    Ok(grid
        .per_dim_centers()
        .iter()
        .zip(x)
        .map(|(coords, &xp)| {
            coords
                .iter()
                .map(|&c| {
                    let d = xp - c;
                    (-d * d / denom).exp()
                })
                .collect()
        })
        .collect())
}

/// Full Gaussian regression vector assembled as the Kronecker product of
/// the per-dimension factors, matching the grid's row-major center order.
///
/// Uses `P·m` scalar exponentials instead of the `m^P` a joint evaluation
/// needs; the result equals the joint evaluation up to rounding.
pub fn product_eval_gaussian(
    x: &[f64],
    grid: &CartesianGrid,
    length_scale: f64,
) -> Result<DVector<f64>, BasisError> {
    product_eval_gaussian_with_count(x, grid, length_scale).map(|(v, _)| v)
}

/// [`product_eval_gaussian`] plus the number of scalar exponentials used.
pub fn product_eval_gaussian_with_count(
    x: &[f64],
    grid: &CartesianGrid,
    length_scale: f64,
) -> Result<(DVector<f64>, usize), BasisError> {
    let factors = gaussian_factors(x, grid, length_scale)?;
    let evals = factors.iter().map(Vec::len).sum();
    let mut values = vec![1.0];
    for f in &factors {
        let mut next = Vec::with_capacity(values.len() * f.len());
        for &v in &values {
            for &w in f {
                next.push(v * w);
            }
        }
        values = next;
    }
    Ok((DVector::from_vec(values), evals))
}

/// Kernel induced by a Gaussian prior on the weights:
/// `κ(x, x') = σ_j² Σ_i β_i(x) β_i(x')`.
///
/// For the Wendland family only centers within support of both points
/// contribute, so the sum runs over the intersection of the two fast
/// active sets (falling back to a dense scan on non-uniform grids).
pub fn kernel_value(
    x: &[f64],
    x_other: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
) -> Result<f64, BasisError> {
    check_point_dim(x, grid)?;
    check_point_dim(x_other, grid)?;
    let sigma2 = config.prior_weight_variance;
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let mut center = vec![0.0; grid.dims()];
    let mut acc = 0.0;
    match config.family {
        BasisFamily::Wendland { support } if grid.spacing().is_some() => {
            let a = active_fast(x, grid, config)?;
            let b = active_fast(x_other, grid, config)?;
            let r2 = support * support;
            let (mut i, mut j) = (0, 0);
            while i < a.count() && j < b.count() {
                let (ia, ib) = (a.indices()[i], b.indices()[j]);
                if ia < ib {
                    i += 1;
                } else if ib < ia {
                    j += 1;
                } else {
                    grid.center_into(ia, &mut center);
                    if sq_dist(x, &center) < r2 && sq_dist(x_other, &center) < r2 {
                        acc += config.family.value_at(x, &center)
                            * config.family.value_at(x_other, &center);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        _ => {
            for i in 0..grid.total_centers() {
                grid.center_into(i, &mut center);
                acc +=
                    config.family.value_at(x, &center) * config.family.value_at(x_other, &center);
            }
        }
    }
    Ok(sigma2 * acc)
}

fn check_point_dim(x: &[f64], grid: &CartesianGrid) -> Result<(), BasisError> {
    if x.len() != grid.dims() {
        return Err(BasisError::DimensionMismatch {
            expected: grid.dims(),
            got: x.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{active_exact, active_fast};
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_active_set_gives_empty_vector() {
        let grid = CartesianGrid::make_grid(&[0.0], &[4.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(1.5, 1.0).unwrap();
        let v = eval_active(&[100.0], &grid, &cfg, &ActiveSet::empty()).unwrap();
        assert_eq!(v.len(), 0);
    }

    #[test]
    fn active_values_on_1d_line() {
        let grid = CartesianGrid::make_grid(&[0.0], &[4.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(1.5, 1.0).unwrap();
        let active = active_exact(&[2.0], &grid, &cfg).unwrap();
        let v = eval_active(&[2.0], &grid, &cfg, &active).unwrap();
        // w(2/3) = 275/19683
        let side = 275.0 / 19683.0;
        assert_relative_eq!(v[0], side, max_relative = 1e-15);
        assert_eq!(v[1], 1.0);
        assert_relative_eq!(v[2], side, max_relative = 1e-15);
    }

    #[test]
    fn scattered_active_equals_dense_bitwise() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[5.0, 5.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(1.7, 1.0).unwrap();
        let x = [2.3, 1.1];
        let active = active_fast(&x, &grid, &cfg).unwrap();
        let sparse = eval_active(&x, &grid, &cfg, &active).unwrap();
        let dense = eval_dense(&x, &grid, &cfg).unwrap();
        let mut scattered = DVector::zeros(grid.total_centers());
        for (k, &i) in active.indices().iter().enumerate() {
            scattered[i] = sparse[k];
        }
        assert_eq!(scattered, dense);
    }

    #[test]
    fn product_eval_1d_equals_direct() {
        let grid = CartesianGrid::make_grid(&[0.0], &[4.0], 1.0).unwrap();
        let cfg = BasisConfig::gaussian(0.8, 1.0).unwrap();
        let direct = eval_dense(&[1.3], &grid, &cfg).unwrap();
        let product = product_eval_gaussian(&[1.3], &grid, 0.8).unwrap();
        assert_eq!(direct, product);
    }

    #[test]
    fn product_eval_2d_matches_joint_evaluation() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[2.0, 2.0], 1.0).unwrap();
        let cfg = BasisConfig::gaussian(1.0, 1.0).unwrap();
        let x = [0.3, 1.7];
        let joint = eval_dense(&x, &grid, &cfg).unwrap();
        let product = product_eval_gaussian(&x, &grid, 1.0).unwrap();
        assert_eq!(joint.len(), 9);
        for i in 0..9 {
            assert_relative_eq!(joint[i], product[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn product_eval_counts_pm_not_mp() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[99.0, 99.0], 1.0).unwrap();
        let (v, count) = product_eval_gaussian_with_count(&[17.2, 63.9], &grid, 1.0).unwrap();
        assert_eq!(v.len(), 10_000);
        assert_eq!(count, 200);
    }

    #[test]
    fn kernel_is_symmetric_and_nonneg_on_diagonal() {
        let grid = CartesianGrid::make_grid(&[0.0], &[9.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(2.0, 0.7).unwrap();
        let k_xy = kernel_value(&[1.2], &[3.4], &grid, &cfg).unwrap();
        let k_yx = kernel_value(&[3.4], &[1.2], &grid, &cfg).unwrap();
        assert_relative_eq!(k_xy, k_yx, max_relative = 1e-14);
        assert!(kernel_value(&[2.5], &[2.5], &grid, &cfg).unwrap() >= 0.0);
    }

    #[test]
    fn kernel_zero_prior_variance() {
        let grid = CartesianGrid::make_grid(&[0.0], &[9.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(2.0, 0.0).unwrap();
        assert_eq!(kernel_value(&[1.0], &[2.0], &grid, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn kernel_matches_dense_sum() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[6.0, 6.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(2.3, 1.3).unwrap();
        let x = [1.9, 4.2];
        let y = [2.8, 3.1];
        let bx = eval_dense(&x, &grid, &cfg).unwrap();
        let by = eval_dense(&y, &grid, &cfg).unwrap();
        let dense = 1.3 * bx.dot(&by);
        let fast = kernel_value(&x, &y, &grid, &cfg).unwrap();
        assert_relative_eq!(fast, dense, max_relative = 1e-13);
    }

    #[test]
    fn gram_matrix_is_positive_semidefinite() {
        let grid = CartesianGrid::make_grid(&[0.0], &[9.0], 1.0).unwrap();
        let cfg = BasisConfig::wendland(2.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..9.0)).collect();
        let gram = DMatrix::from_fn(10, 10, |i, j| {
            kernel_value(&[pts[i]], &[pts[j]], &grid, &cfg).unwrap()
        });
        let eigs = gram.symmetric_eigenvalues();
        let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-10 * max.max(1.0), "min eigenvalue {min}");
    }
}
