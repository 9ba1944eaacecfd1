use nalgebra::{DMatrix, DVector};

/// Augmented filter state: physical-state mean, weight mean, and the
/// partitioned covariance.
///
/// The weight-state cross block `Pˣθ` is stored dense (`n_x × n_w`); the
/// lower-right transpose block is implicit. The weight covariance `Pθ`
/// lives behind [`WeightCov`], which offers a plain dense matrix or a
/// tracked representation that stays proportional to the set of weights
/// ever activated.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub state_mean: DVector<f64>,
    pub weight_mean: DVector<f64>,
    pub cov_state: DMatrix<f64>,
    pub cov_cross: DMatrix<f64>,
    pub cov_weight: WeightCov,
}

impl FilterState {
    /// Fresh state with dense weight covariance `σ² I`, zero weight mean,
    /// and zero state-weight correlation.
    pub fn new_dense(
        state_mean: DVector<f64>,
        cov_state: DMatrix<f64>,
        weight_dim: usize,
        prior_weight_variance: f64,
    ) -> Self {
        let n_x = state_mean.len();
        Self {
            state_mean,
            weight_mean: DVector::zeros(weight_dim),
            cov_state,
            cov_cross: DMatrix::zeros(n_x, weight_dim),
            cov_weight: WeightCov::Dense(
                DMatrix::identity(weight_dim, weight_dim) * prior_weight_variance,
            ),
        }
    }

    /// Fresh state with tracked weight covariance.
    ///
    /// Invariant of the tracked representation: weights outside the tracked
    /// set have variance `base_diag`, no correlation to anything, and zero
    /// `Pˣθ` columns. Sparse updates preserve this.
    pub fn new_tracked(
        state_mean: DVector<f64>,
        cov_state: DMatrix<f64>,
        weight_dim: usize,
        prior_weight_variance: f64,
    ) -> Self {
        let n_x = state_mean.len();
        Self {
            state_mean,
            weight_mean: DVector::zeros(weight_dim),
            cov_state,
            cov_cross: DMatrix::zeros(n_x, weight_dim),
            cov_weight: WeightCov::Tracked(TrackedCov::new(weight_dim, prior_weight_variance)),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_mean.len()
    }

    pub fn weight_dim(&self) -> usize {
        self.weight_mean.len()
    }

    /// Re-seed the physical-state block for a new trajectory while keeping
    /// the learned weight posterior: new mean and covariance for the state,
    /// cleared state-weight correlation.
    pub fn reset_state_block(&mut self, state_mean: DVector<f64>, cov_state: DMatrix<f64>) {
        assert_eq!(state_mean.len(), self.state_dim());
        self.state_mean = state_mean;
        self.cov_state = cov_state;
        self.cov_cross.fill(0.0);
    }

    pub fn means_finite(&self) -> bool {
        self.state_mean.iter().all(|v| v.is_finite())
            && self.weight_mean.iter().all(|v| v.is_finite())
    }

    /// Assembled `(n_x + n_w)²` covariance, for diagnostics and tests.
    pub fn full_covariance(&self) -> DMatrix<f64> {
        let n_x = self.state_dim();
        let n_w = self.weight_dim();
        let n = n_x + n_w;
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((0, 0), (n_x, n_x)).copy_from(&self.cov_state);
        full.view_mut((0, n_x), (n_x, n_w))
            .copy_from(&self.cov_cross);
        full.view_mut((n_x, 0), (n_w, n_x))
            .copy_from(&self.cov_cross.transpose());
        full.view_mut((n_x, n_x), (n_w, n_w))
            .copy_from(&self.cov_weight.to_dense());
        full
    }
}

/// Storage for the weight covariance `Pθ`.
#[derive(Debug, Clone)]
pub enum WeightCov {
    /// Plain `n_w × n_w` matrix.
    Dense(DMatrix<f64>),
    /// Uniform diagonal for never-activated weights plus a dense block over
    /// the tracked (ever-activated) ones.
    Tracked(TrackedCov),
}

impl WeightCov {
    pub fn dim(&self) -> usize {
        match self {
            WeightCov::Dense(m) => m.nrows(),
            WeightCov::Tracked(t) => t.dim,
        }
    }

    pub fn is_tracked(&self) -> bool {
        matches!(self, WeightCov::Tracked(_))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            WeightCov::Dense(m) => m.clone(),
            WeightCov::Tracked(t) => {
                let mut out = DMatrix::identity(t.dim, t.dim) * t.base_diag;
                for (bi, &gi) in t.tracked.iter().enumerate() {
                    for (bj, &gj) in t.tracked.iter().enumerate() {
                        out[(gi, gj)] = t.block[(bi, bj)];
                    }
                }
                out
            }
        }
    }

    /// Single entry, honoring the untracked-diagonal convention.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            WeightCov::Dense(m) => m[(i, j)],
            WeightCov::Tracked(t) => match (t.slot_of(i), t.slot_of(j)) {
                (Some(si), Some(sj)) => t.block[(si, sj)],
                _ => {
                    if i == j {
                        t.base_diag
                    } else {
                        0.0
                    }
                }
            },
        }
    }

    /// `Pθ[idx, idx]` as a dense matrix, read-only (no tracking changes).
    pub fn gather_square(&self, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        DMatrix::from_fn(k, k, |r, c| self.entry(idx[r], idx[c]))
    }

    /// `Pθ += v · I`.
    pub fn diag_add(&mut self, v: f64) {
        match self {
            WeightCov::Dense(m) => {
                let n = m.nrows();
                for i in 0..n {
                    m[(i, i)] += v;
                }
            }
            WeightCov::Tracked(t) => {
                t.base_diag += v;
                let k = t.tracked.len();
                for i in 0..k {
                    t.block[(i, i)] += v;
                }
            }
        }
    }
}

/// Tracked weight covariance: `base_diag · I` outside the tracked index
/// set, dense block over it.
#[derive(Debug, Clone)]
pub struct TrackedCov {
    dim: usize,
    base_diag: f64,
    /// Global indices in block order (insertion order).
    tracked: Vec<usize>,
    /// Global index -> block slot; `u32::MAX` marks untracked.
    slot: Vec<u32>,
    block: DMatrix<f64>,
}

const UNTRACKED: u32 = u32::MAX;

impl TrackedCov {
    pub fn new(dim: usize, prior_variance: f64) -> Self {
        assert!(dim < UNTRACKED as usize);
        Self {
            dim,
            base_diag: prior_variance,
            tracked: Vec::new(),
            slot: vec![UNTRACKED; dim],
            block: DMatrix::zeros(0, 0),
        }
    }

    /// Every index tracked; equivalent to the dense representation.
    pub fn from_dense(m: DMatrix<f64>) -> Self {
        let dim = m.nrows();
        assert_eq!(dim, m.ncols());
        Self {
            dim,
            base_diag: 0.0,
            tracked: (0..dim).collect(),
            slot: (0..dim as u32).collect(),
            block: m,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tracked(&self) -> &[usize] {
        &self.tracked
    }

    pub fn tracked_count(&self) -> usize {
        self.tracked.len()
    }

    pub fn base_diag(&self) -> f64 {
        self.base_diag
    }

    pub fn block(&self) -> &DMatrix<f64> {
        &self.block
    }

    pub fn block_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.block
    }

    pub fn slot_of(&self, global: usize) -> Option<usize> {
        let s = self.slot[global];
        (s != UNTRACKED).then_some(s as usize)
    }

    /// Bring all of `idx` (sorted, unique) into the tracked block. New rows
    /// and columns are zero except for `base_diag` on the diagonal.
    pub fn ensure_tracked(&mut self, idx: &[usize]) {
        let fresh: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.slot[i] == UNTRACKED)
            .collect();
        if fresh.is_empty() {
            return;
        }
        let old = self.tracked.len();
        let new = old + fresh.len();
        self.block.resize_mut(new, new, 0.0);
        for (k, &i) in fresh.iter().enumerate() {
            let s = old + k;
            self.slot[i] = s as u32;
            self.tracked.push(i);
            self.block[(s, s)] = self.base_diag;
        }
    }

    /// Block slots for already tracked indices.
    pub fn slots(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter()
            .map(|&i| {
                debug_assert_ne!(self.slot[i], UNTRACKED, "index {i} not tracked");
                self.slot[i] as usize
            })
            .collect()
    }
}
