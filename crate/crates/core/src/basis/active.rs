use super::family::sq_dist;
use super::{BasisConfig, BasisError, BasisFamily, CartesianGrid};

/// Ordered set of global center indices whose basis value may be non-zero
/// at some evaluation point.
///
/// Indices are strictly increasing in the grid's row-major order. Sets from
/// [`active_fast`] may contain corner indices whose true value is exactly
/// zero; everything downstream treats those as harmless zero columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    indices: Vec<usize>,
}

impl ActiveSet {
    pub fn new(indices: Vec<usize>) -> Result<Self, BasisError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BasisError::InvalidActiveSet);
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    /// All centers active; the dense-evaluation view of a grid.
    pub fn full(total_centers: usize) -> Self {
        Self {
            indices: (0..total_centers).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of active centers `ñ_w^j`.
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }
}

/// Exact active set: every center with `‖x - ξ_i‖ / α < 1`, strictly.
///
/// Scans all centers, so the cost is linear in the grid size; this is the
/// reference method and also works for non-uniform center lists.
pub fn active_exact(
    x: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
) -> Result<ActiveSet, BasisError> {
    let BasisFamily::Wendland { support } = config.family else {
        return Err(BasisError::UnsupportedFamily);
    };
    check_point_dim(x, grid)?;
    let r2 = support * support;
    let mut indices = Vec::new();
    let mut center = vec![0.0; grid.dims()];
    for i in 0..grid.total_centers() {
        grid.center_into(i, &mut center);
        if sq_dist(x, &center) < r2 {
            indices.push(i);
        }
    }
    Ok(ActiveSet { indices })
}

/// Fast active set for equally spaced grids: the per-dimension index range
/// with `|[x]_p - [ξ]_p| < α` is found by arithmetic on the grid origin and
/// spacing, and the Cartesian product of the ranges is returned.
///
/// The box encloses the support ball, so the result is always a superset of
/// [`active_exact`]; the extra corner indices have basis value exactly zero.
/// Ties at the floating-point boundary resolve toward inclusion. Cost is
/// `O(P + ñ_w)` independent of the total center count.
pub fn active_fast(
    x: &[f64],
    grid: &CartesianGrid,
    config: &BasisConfig,
) -> Result<ActiveSet, BasisError> {
    let BasisFamily::Wendland { support } = config.family else {
        return Err(BasisError::UnsupportedFamily);
    };
    check_point_dim(x, grid)?;
    let Some(spacing) = grid.spacing() else {
        return Err(BasisError::NonUniformGrid);
    };

    let dims = grid.dims();
    let mut lo = vec![0usize; dims];
    let mut len = vec![0usize; dims];
    for p in 0..dims {
        let coords = &grid.per_dim_centers()[p];
        let origin = coords[0];
        let m = coords.len();
        let delta = spacing[p];
        // ceil/floor keep the strict inequality except at exact boundary
        // hits, which round inward (toward inclusion).
        let first = ((x[p] - support - origin) / delta).ceil();
        let last = ((x[p] + support - origin) / delta).floor();
        let first = first.max(0.0) as isize;
        let last = (last.min((m - 1) as f64)) as isize;
        if last < first {
            return Ok(ActiveSet::empty());
        }
        lo[p] = first as usize;
        len[p] = (last - first + 1) as usize;
    }

    let total: usize = len.iter().product();
    let mut indices = Vec::with_capacity(total);
    let counts = grid.counts();
    // Row-major walk over the index box keeps the output strictly increasing.
    let mut offsets = vec![0usize; dims];
    'outer: loop {
        let mut global = 0;
        for p in 0..dims {
            global = global * counts[p] + lo[p] + offsets[p];
        }
        indices.push(global);
        for p in (0..dims).rev() {
            offsets[p] += 1;
            if offsets[p] < len[p] {
                continue 'outer;
            }
            offsets[p] = 0;
        }
        break;
    }
    Ok(ActiveSet { indices })
}

/// Upper bound `(⌊2α/δ_c⌋ + 1)^P` on the active count of any fast selection
/// on an equally spaced grid.
pub fn active_upper_bound(support: f64, spacing: f64, dims: u32) -> Result<usize, BasisError> {
    if !(support > 0.0) {
        return Err(BasisError::NonPositiveParameter {
            name: "support",
            value: support,
        });
    }
    if !(spacing > 0.0) {
        return Err(BasisError::NonPositiveParameter {
            name: "spacing",
            value: spacing,
        });
    }
    let side = (2.0 * support / spacing).floor() as usize + 1;
    side.checked_pow(dims)
        .ok_or(BasisError::Overflow("active-count bound"))
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
    use super::*;

    fn wendland_cfg(support: f64) -> BasisConfig {
        BasisConfig::wendland(support, 1.0).unwrap()
    }

    #[test]
    fn exact_on_1d_line() {
        let grid = CartesianGrid::make_grid(&[0.0], &[4.0], 1.0).unwrap();
        let set = active_exact(&[2.0], &grid, &wendland_cfg(1.5)).unwrap();
        assert_eq!(set.indices(), &[1, 2, 3]);
    }

    #[test]
    fn exact_with_huge_support_selects_everything() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[3.0, 3.0], 1.0).unwrap();
        // 10x the grid diameter
        let set = active_exact(&[1.0, 1.0], &grid, &wendland_cfg(10.0 * 18.0f64.sqrt())).unwrap();
        assert_eq!(set.count(), grid.total_centers());
    }

    #[test]
    fn exact_far_away_is_empty() {
        let grid = CartesianGrid::make_grid(&[0.0], &[1.0], 1.0).unwrap();
        let set = active_exact(&[5.0], &grid, &wendland_cfg(0.5)).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn exact_rejects_gaussian() {
        let grid = CartesianGrid::make_grid(&[0.0], &[1.0], 1.0).unwrap();
        let cfg = BasisConfig::gaussian(1.0, 1.0).unwrap();
        assert!(matches!(
            active_exact(&[0.0], &grid, &cfg),
            Err(BasisError::UnsupportedFamily)
        ));
        assert!(matches!(
            active_fast(&[0.0], &grid, &cfg),
            Err(BasisError::UnsupportedFamily)
        ));
    }

    #[test]
    fn fast_is_box_superset_of_exact_ball() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[2.0, 2.0], 1.0).unwrap();
        let cfg = wendland_cfg(1.2);
        let fast = active_fast(&[0.0, 0.0], &grid, &cfg).unwrap();
        let exact = active_exact(&[0.0, 0.0], &grid, &cfg).unwrap();
        // centers (0,0),(0,1),(1,0),(1,1) -> global 0,1,3,4
        assert_eq!(fast.indices(), &[0, 1, 3, 4]);
        // (1,1) is at distance sqrt(2) >= 1.2, excluded from the exact set
        assert_eq!(exact.indices(), &[0, 1, 3]);
    }

    #[test]
    fn fast_equals_exact_in_1d() {
        let grid = CartesianGrid::make_grid(&[0.0], &[4.0], 1.0).unwrap();
        let cfg = wendland_cfg(1.5);
        let fast = active_fast(&[2.0], &grid, &cfg).unwrap();
        let exact = active_exact(&[2.0], &grid, &cfg).unwrap();
        assert_eq!(fast, exact);
        assert_eq!(fast.indices(), &[1, 2, 3]);
    }

    #[test]
    fn fast_selection_square_covers_coarse_grid() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[4.0, 4.0], 4.0).unwrap();
        let set = active_fast(&[2.0, 2.0], &grid, &wendland_cfg(5.0)).unwrap();
        assert_eq!(set.count(), 4);
    }

    #[test]
    fn fast_rejects_non_uniform_grid() {
        let grid = CartesianGrid::from_centers(vec![vec![0.0, 1.0, 3.0]]).unwrap();
        assert!(matches!(
            active_fast(&[1.0], &grid, &wendland_cfg(1.0)),
            Err(BasisError::NonUniformGrid)
        ));
    }

    #[test]
    fn bound_formula() {
        assert_eq!(active_upper_bound(5.0, 1.0, 2).unwrap(), 121);
        assert_eq!(active_upper_bound(1.0, 1.0, 1).unwrap(), 3);
        assert!(active_upper_bound(0.0, 1.0, 1).is_err());
        assert!(active_upper_bound(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn bound_holds_on_20x20_grid() {
        let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[19.0, 19.0], 1.0).unwrap();
        let cfg = wendland_cfg(2.5);
        let bound = active_upper_bound(2.5, 1.0, 2).unwrap();
        assert_eq!(bound, 36);
        let mut rng = 0x2545F4914F6CDD1Du64;
        let mut max_seen = 0;
        for _ in 0..1000 {
            // xorshift, plenty for scattering query points
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            let x = (rng >> 11) as f64 / (1u64 << 53) as f64 * 23.0 - 2.0;
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            let y = (rng >> 11) as f64 / (1u64 << 53) as f64 * 23.0 - 2.0;
            let n = active_fast(&[x, y], &grid, &cfg).unwrap().count();
            max_seen = max_seen.max(n);
            assert!(n <= bound);
        }
        assert!(max_seen > 0);
    }
}
