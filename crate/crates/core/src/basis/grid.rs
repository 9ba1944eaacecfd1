use super::BasisError;

/// Cartesian lattice of basis-function centers.
///
/// The full center set is the Cartesian product of the per-dimension
/// coordinate lists, so a grid over P dimensions with `m_p` coordinates per
/// dimension holds `∏ m_p` centers while storing only `Σ m_p` numbers.
///
/// Global indexing is row-major with the **last dimension fastest**:
/// `global = Σ_p i_p · ∏_{q>p} m_q`. All [`ActiveSet`](super::ActiveSet)
/// indices and weight-vector layouts across the crate use this convention.
#[derive(Debug, Clone)]
pub struct CartesianGrid {
    per_dim_centers: Vec<Vec<f64>>,
    /// Per-dimension spacing; `None` when some dimension is not equally
    /// spaced (such grids only support the exact selection path).
    spacing: Option<Vec<f64>>,
}

/// Relative tolerance for treating a grid as equally spaced.
const UNIFORM_REL_TOL: f64 = 1e-12;

impl CartesianGrid {
    /// Equally spaced grid from `lower` to `upper` inclusive per dimension.
    ///
    /// Coordinates are `lower_p + k·spacing` for `k = 0, 1, …`; when the
    /// extent is not an integer multiple of the spacing the last cell is
    /// truncated so that no center exceeds `upper_p`. An extent within
    /// float tolerance of an integer multiple snaps the last center to
    /// `upper_p` exactly.
    pub fn make_grid(lower: &[f64], upper: &[f64], spacing: f64) -> Result<Self, BasisError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(BasisError::DimensionMismatch {
                expected: lower.len().max(1),
                got: upper.len(),
            });
        }
        if !(spacing > 0.0) {
            return Err(BasisError::InvalidSpacing(spacing));
        }
        let mut per_dim = Vec::with_capacity(lower.len());
        for (dim, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
            if !(lo < hi) {
                return Err(BasisError::InvertedBounds {
                    dim,
                    lower: lo,
                    upper: hi,
                });
            }
            let span = hi - lo;
            let steps = (span / spacing * (1.0 + 1e-12) + 1e-9).floor() as usize;
            let mut coords: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * spacing).collect();
            if let Some(last) = coords.last_mut() {
                if *last > hi {
                    *last = hi;
                }
            }
            per_dim.push(coords);
        }
        let spacing_vec = vec![spacing; lower.len()];
        Ok(Self {
            per_dim_centers: per_dim,
            spacing: Some(spacing_vec),
        })
    }

    /// Grid from explicit per-dimension coordinate lists.
    pub fn from_centers(per_dim_centers: Vec<Vec<f64>>) -> Result<Self, BasisError> {
        if per_dim_centers.is_empty() {
            return Err(BasisError::InvalidCenters(0));
        }
        for (dim, coords) in per_dim_centers.iter().enumerate() {
            if coords.is_empty() || coords.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(BasisError::InvalidCenters(dim));
            }
        }
        let spacing = detect_uniform_spacing(&per_dim_centers);
        Ok(Self {
            per_dim_centers,
            spacing,
        })
    }

    /// Number of grid dimensions P.
    pub fn dims(&self) -> usize {
        self.per_dim_centers.len()
    }

    /// Per-dimension center counts `m_p`.
    pub fn counts(&self) -> Vec<usize> {
        self.per_dim_centers.iter().map(Vec::len).collect()
    }

    /// Total number of centers `n_w^j = ∏ m_p`.
    pub fn total_centers(&self) -> usize {
        self.per_dim_centers.iter().map(Vec::len).product()
    }

    /// Per-dimension spacing, when the grid is equally spaced.
    pub fn spacing(&self) -> Option<&[f64]> {
        self.spacing.as_deref()
    }

    pub fn per_dim_centers(&self) -> &[Vec<f64>] {
        &self.per_dim_centers
    }

    /// Coordinates of the center at a global row-major index.
    pub fn center(&self, global: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims()];
        self.center_into(global, &mut out);
        out
    }

    pub(crate) fn center_into(&self, global: usize, out: &mut [f64]) {
        debug_assert!(global < self.total_centers());
        let mut rem = global;
        for (p, coords) in self.per_dim_centers.iter().enumerate().rev() {
            let m = coords.len();
            out[p] = coords[rem % m];
            rem /= m;
        }
    }

    /// Global row-major index from per-dimension indices.
    pub fn global_index(&self, per_dim: &[usize]) -> usize {
        debug_assert_eq!(per_dim.len(), self.dims());
        let mut idx = 0;
        for (i, coords) in per_dim.iter().zip(&self.per_dim_centers) {
            debug_assert!(*i < coords.len());
            idx = idx * coords.len() + i;
        }
        idx
    }

    /// Smallest enclosing `[min, max]` box of the center lattice.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.per_dim_centers.iter().map(|c| c[0]).collect();
        let hi = self
            .per_dim_centers
            .iter()
            .map(|c| *c.last().expect("non-empty"))
            .collect();
        (lo, hi)
    }
}

fn detect_uniform_spacing(per_dim: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut spacing = Vec::with_capacity(per_dim.len());
    for coords in per_dim {
        if coords.len() == 1 {
            // A single center is trivially uniform; spacing is undefined, so
            // fall back to 1.0 which is never used for range arithmetic on
            // that dimension.
            spacing.push(1.0);
            continue;
        }
        let d = coords[1] - coords[0];
        let uniform = coords
            .windows(2)
            .all(|w| ((w[1] - w[0]) - d).abs() <= UNIFORM_REL_TOL * d.abs().max(1.0));
        if !uniform {
            return None;
        }
        spacing.push(d);
    }
    Some(spacing)
}
