use nalgebra::{DMatrix, DVector};

use super::state::{FilterState, WeightCov};
use super::{FilterError, StepStats};
use crate::basis::{
    active_exact, active_fast, eval_active, eval_dense, ActiveSet, BasisConfig, CartesianGrid,
};
use crate::ssmodel::{
    channel_weight_jacobian, unknown_from_beta, unknown_state_jacobian, weight_indices,
    AugmentedModel,
};

/// How the per-step active set is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveSelection {
    /// Every center, every step; the dense (global-support) filter.
    All,
    /// Distance scan over all centers; compact families only.
    Exact,
    /// Per-dimension range arithmetic; compact families on uniform grids.
    Fast,
}

/// Condition-number limit for the innovation covariance factorization.
const MAX_CONDITION: f64 = 1e12;

/// Partitioned extended Kalman filter over an [`AugmentedModel`].
///
/// The dense updates use every basis function and full-matrix recursions;
/// the sparse updates restrict weight-side work to the active set, zero
/// the Kalman gain outside it, and rely on the Joseph covariance form to
/// stay positive semi-definite under that restriction.
///
/// The active set of a step is computed once at the entry mean and reused
/// for the unknown-input value, the Jacobians, and the gain restriction
/// within that step.
pub struct AugmentedEkf {
    model: AugmentedModel,
    grid: CartesianGrid,
    config: BasisConfig,
    selection: ActiveSelection,
}

struct StepContext {
    active: ActiveSet,
    /// Basis values at the active centers (zeroed while learning is paused
    /// in dense mode, where shapes must stay full).
    beta: DVector<f64>,
    /// Weight indices of the active columns (sorted ascending).
    widx: Vec<usize>,
    /// Basis input `z = φ(x, u)`.
    z: DVector<f64>,
    u_f: DVector<f64>,
    /// False while weight learning is paused.
    learning: bool,
}

impl AugmentedEkf {
    pub fn new(
        model: AugmentedModel,
        grid: CartesianGrid,
        config: BasisConfig,
        selection: ActiveSelection,
    ) -> Result<Self, FilterError> {
        if model.has_expansion() && model.transform_dim() != grid.dims() {
            return Err(FilterError::Dimension {
                what: "transform output vs grid dimension",
                expected: grid.dims(),
                got: model.transform_dim(),
            });
        }
        if !matches!(selection, ActiveSelection::All) && !config.family.is_compact() {
            return Err(FilterError::SelectionMismatch(
                "active-set selection requires a compactly supported family",
            ));
        }
        if matches!(selection, ActiveSelection::Fast) && grid.spacing().is_none() {
            return Err(FilterError::SelectionMismatch(
                "fast selection requires an equally spaced grid",
            ));
        }
        Ok(Self {
            model,
            grid,
            config,
            selection,
        })
    }

    pub fn model(&self) -> &AugmentedModel {
        &self.model
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn config(&self) -> &BasisConfig {
        &self.config
    }

    pub fn selection(&self) -> ActiveSelection {
        self.selection
    }

    /// Weights per output dimension (0 without an expansion).
    pub fn weights_per_output(&self) -> usize {
        if self.model.has_expansion() {
            self.grid.total_centers()
        } else {
            0
        }
    }

    /// Total weight dimension `J · n_w^j`.
    pub fn weight_dim(&self) -> usize {
        self.model.output_dim() * self.weights_per_output()
    }

    /// Fresh state with dense weight covariance (zero weight mean, prior
    /// `σ² I`, zero cross-covariance).
    pub fn init_state(&self, state_mean: DVector<f64>, cov_state: DMatrix<f64>) -> FilterState {
        FilterState::new_dense(
            state_mean,
            cov_state,
            self.weight_dim(),
            self.config.prior_weight_variance,
        )
    }

    /// Fresh state with tracked weight covariance; memory stays
    /// proportional to the set of weights ever activated.
    pub fn init_state_tracked(
        &self,
        state_mean: DVector<f64>,
        cov_state: DMatrix<f64>,
    ) -> FilterState {
        FilterState::new_tracked(
            state_mean,
            cov_state,
            self.weight_dim(),
            self.config.prior_weight_variance,
        )
    }

    fn context(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        dense: bool,
    ) -> Result<StepContext, FilterError> {
        let j_dim = self.model.output_dim();
        if !self.model.has_expansion() {
            return Ok(StepContext {
                active: ActiveSet::empty(),
                beta: DVector::zeros(0),
                widx: Vec::new(),
                z: DVector::zeros(0),
                u_f: DVector::zeros(j_dim),
                learning: false,
            });
        }
        let z = self.model.basis_input(x, u);
        let learning = self.model.learning_active(x, u);
        let (active, beta) = if dense {
            let active = ActiveSet::full(self.grid.total_centers());
            let beta = if learning {
                eval_dense(z.as_slice(), &self.grid, &self.config)?
            } else {
                DVector::zeros(self.grid.total_centers())
            };
            (active, beta)
        } else if !learning {
            (ActiveSet::empty(), DVector::zeros(0))
        } else {
            let active = match self.selection {
                ActiveSelection::All => ActiveSet::full(self.grid.total_centers()),
                ActiveSelection::Exact => active_exact(z.as_slice(), &self.grid, &self.config)?,
                ActiveSelection::Fast => active_fast(z.as_slice(), &self.grid, &self.config)?,
            };
            let beta = eval_active(z.as_slice(), &self.grid, &self.config, &active)?;
            (active, beta)
        };
        let widx = weight_indices(
            self.model.ordering(),
            self.grid.total_centers(),
            j_dim,
            &active,
        );
        Ok(StepContext {
            u_f: DVector::zeros(j_dim),
            active,
            beta,
            widx,
            z,
            learning,
        })
    }

    fn fill_unknown(&self, ctx: &mut StepContext, theta: &DVector<f64>) {
        if self.model.has_expansion() {
            ctx.u_f = unknown_from_beta(
                &ctx.beta,
                theta,
                &ctx.active,
                self.model.ordering(),
                self.grid.total_centers(),
                self.model.output_dim(),
            );
        }
    }

    /// `Fˣ` (with the chain term through the basis) and the restricted `Fθ`.
    fn dynamics_jacobians(
        &self,
        ctx: &StepContext,
        x: &DVector<f64>,
        u: &DVector<f64>,
        theta: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut f_x = self.model.dynamics_jac_state(x, u, &ctx.u_f);
        let channel = self.model.dynamics_input_channel(x, u);
        if ctx.learning && !ctx.active.is_empty() {
            let t_jac = self.model.transform_jacobian(x, u);
            let du_dx = unknown_state_jacobian(
                &self.grid,
                &self.config,
                ctx.z.as_slice(),
                &t_jac,
                theta,
                &ctx.active,
                self.model.ordering(),
                self.grid.total_centers(),
                self.model.output_dim(),
            );
            f_x += &channel * du_dx;
        }
        let f_theta = channel_weight_jacobian(&channel, &ctx.beta, self.model.ordering());
        (f_x, f_theta)
    }

    /// `Hˣ` (with the chain term) and, for weight-coupled observations,
    /// the restricted `Hθ`.
    fn observation_jacobians(
        &self,
        ctx: &StepContext,
        x: &DVector<f64>,
        u: &DVector<f64>,
        theta: &DVector<f64>,
    ) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
        let mut h_x = self.model.observation_jac_state(x, u);
        if !self.model.observation_weight_coupling() || !ctx.learning {
            return (h_x, None);
        }
        let channel = self.model.observation_input_channel(x, u);
        if !ctx.active.is_empty() {
            let t_jac = self.model.transform_jacobian(x, u);
            let du_dx = unknown_state_jacobian(
                &self.grid,
                &self.config,
                ctx.z.as_slice(),
                &t_jac,
                theta,
                &ctx.active,
                self.model.ordering(),
                self.grid.total_centers(),
                self.model.output_dim(),
            );
            h_x += &channel * du_dx;
        }
        let h_theta = channel_weight_jacobian(&channel, &ctx.beta, self.model.ordering());
        (h_x, Some(h_theta))
    }

    /// Dispatch on the configured selection: `All` runs the dense update,
    /// compact selections run the sparse one.
    pub fn time_update(
        &self,
        state: &mut FilterState,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        match self.selection {
            ActiveSelection::All => self.time_update_dense(state, u),
            _ => self.time_update_sparse(state, u),
        }
    }

    pub fn measurement_update(
        &self,
        state: &mut FilterState,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        match self.selection {
            ActiveSelection::All => self.measurement_update_dense(state, y, u),
            _ => self.measurement_update_sparse(state, y, u),
        }
    }

    /// Dense prediction: full `Fθ`, full-matrix four-block recursion.
    pub fn time_update_dense(
        &self,
        state: &mut FilterState,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        if !matches!(state.cov_weight, WeightCov::Dense(_)) {
            return Err(FilterError::StorageMismatch(
                "dense time update requires dense weight covariance",
            ));
        }
        let mut ctx = self.context(&state.state_mean, u, true)?;
        self.fill_unknown(&mut ctx, &state.weight_mean);
        let (f_x, f_theta) =
            self.dynamics_jacobians(&ctx, &state.state_mean, u, &state.weight_mean);

        let next = self.model.propagate(&state.state_mean, u, &ctx.u_f);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(FilterError::NonFinite("time-update mean"));
        }
        state.state_mean = next;

        let mut stats = StepStats::new(&ctx.active, ctx.widx.len());
        let n_x = self.model.state_dim();
        let n_w = state.weight_dim();
        let WeightCov::Dense(pw) = &state.cov_weight else {
            unreachable!()
        };

        let fx_px = &f_x * &state.cov_state;
        let t_xx = &fx_px * f_x.transpose();
        let fx_pxw = &f_x * &state.cov_cross;
        let t_cross = &fx_pxw * f_theta.transpose();
        let fw_pw = &f_theta * pw;
        let t_ww = &fw_pw * f_theta.transpose();
        stats.add_gemm(n_x, n_x, n_w); // Fx Pxθ
        stats.add_gemm(n_x, n_w, n_x); // (Fx Pxθ) Fθᵀ
        stats.add_gemm(n_x, n_w, n_w); // Fθ Pθ
        stats.add_gemm(n_x, n_w, n_x); // (Fθ Pθ) Fθᵀ

        state.cov_state =
            &t_xx + &t_cross + t_cross.transpose() + &t_ww + self.model.process_noise();
        symmetrize(&mut state.cov_state);
        state.cov_cross = fx_pxw + fw_pw;
        state
            .cov_weight
            .diag_add(self.model.weight_noise_variance());
        Ok(stats)
    }

    /// Sparse prediction: identical mean to the dense update; covariance
    /// work on the weight side restricted to the active columns (and, for
    /// tracked storage, to the ever-activated block).
    pub fn time_update_sparse(
        &self,
        state: &mut FilterState,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        if matches!(self.selection, ActiveSelection::All) && self.model.has_expansion() {
            return Err(FilterError::SelectionMismatch(
                "sparse time update requires a compact active-set selection",
            ));
        }
        let mut ctx = self.context(&state.state_mean, u, false)?;
        self.fill_unknown(&mut ctx, &state.weight_mean);
        let (f_x, f_theta) =
            self.dynamics_jacobians(&ctx, &state.state_mean, u, &state.weight_mean);

        let next = self.model.propagate(&state.state_mean, u, &ctx.u_f);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(FilterError::NonFinite("time-update mean"));
        }
        state.state_mean = next;

        let mut stats = StepStats::new(&ctx.active, ctx.widx.len());
        let n_x = self.model.state_dim();
        let n_a = ctx.widx.len();

        // Local block coordinates of the active columns.
        let (slots, tracked): (Vec<usize>, Option<Vec<usize>>) = match &mut state.cov_weight {
            WeightCov::Tracked(tr) => {
                tr.ensure_tracked(&ctx.widx);
                (tr.slots(&ctx.widx), Some(tr.tracked().to_vec()))
            }
            WeightCov::Dense(_) => (ctx.widx.clone(), None),
        };
        let n_t = tracked
            .as_ref()
            .map(|t| t.len())
            .unwrap_or(state.weight_dim());

        let fx_px = &f_x * &state.cov_state;
        let t_xx = &fx_px * f_x.transpose();
        let pxw_t = match &tracked {
            Some(t) => select_columns(&state.cov_cross, t),
            None => state.cov_cross.clone(),
        };
        let fx_pxw_t = &f_x * &pxw_t;
        let fx_pxw_a = select_columns(&fx_pxw_t, &slots);
        let t_cross = &fx_pxw_a * f_theta.transpose();
        let b_at = match &state.cov_weight {
            WeightCov::Tracked(tr) => select_rows(tr.block(), &slots),
            WeightCov::Dense(pw) => select_rows(pw, &slots),
        };
        let fw_pw_t = &f_theta * &b_at;
        let fw_pw_a = select_columns(&fw_pw_t, &slots);
        let t_ww = &fw_pw_a * f_theta.transpose();
        stats.add_gemm(n_x, n_x, n_t); // Fx Pxθ (tracked columns)
        stats.add_gemm(n_x, n_a, n_x); // (Fx Pxθ)ₐ Fθᵀ
        stats.add_gemm(n_x, n_a, n_t); // Fθ Pθ[a, tracked]
        stats.add_gemm(n_x, n_a, n_x); // (Fθ Pθ)ₐ Fθᵀ

        state.cov_state =
            &t_xx + &t_cross + t_cross.transpose() + &t_ww + self.model.process_noise();
        symmetrize(&mut state.cov_state);
        let new_cross = fx_pxw_t + fw_pw_t;
        match &tracked {
            Some(t) => scatter_columns(&mut state.cov_cross, t, &new_cross),
            None => state.cov_cross = new_cross,
        }
        state
            .cov_weight
            .diag_add(self.model.weight_noise_variance());
        Ok(stats)
    }

    /// Dense correction with the blockwise Joseph-form covariance update.
    pub fn measurement_update_dense(
        &self,
        state: &mut FilterState,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        self.measurement_update_dense_scaled(state, y, u, 1.0)
    }

    /// Dense correction with the gain multiplied by `gain_scale`; the
    /// Joseph form keeps the covariance PSD for any scale. A scale of 1 is
    /// the optimal filter; other scales are for robustness testing.
    pub fn measurement_update_dense_scaled(
        &self,
        state: &mut FilterState,
        y: &DVector<f64>,
        u: &DVector<f64>,
        gain_scale: f64,
    ) -> Result<StepStats, FilterError> {
        if y.len() != self.model.obs_dim() {
            return Err(FilterError::Dimension {
                what: "observation",
                expected: self.model.obs_dim(),
                got: y.len(),
            });
        }
        if !matches!(state.cov_weight, WeightCov::Dense(_)) {
            return Err(FilterError::StorageMismatch(
                "dense measurement update requires dense weight covariance",
            ));
        }
        let mut ctx = self.context(&state.state_mean, u, true)?;
        self.fill_unknown(&mut ctx, &state.weight_mean);
        let (h_x, h_theta) =
            self.observation_jacobians(&ctx, &state.state_mean, u, &state.weight_mean);

        let z_pred = self
            .model
            .predict_observation(&state.state_mean, u, &ctx.u_f);
        let nu = y - z_pred;

        let mut stats = StepStats::new(&ctx.active, ctx.widx.len());
        let n_x = self.model.state_dim();
        let n_y = self.model.obs_dim();
        let n_w = state.weight_dim();
        let r = self.model.obs_noise();

        let px_hxt = &state.cov_state * h_x.transpose();
        let mut s_mat = r + &h_x * &px_hxt;
        let mut u_gain = px_hxt;
        let mut hw_pw: Option<DMatrix<f64>> = None;
        if let Some(hw) = &h_theta {
            let WeightCov::Dense(pw) = &state.cov_weight else {
                unreachable!()
            };
            let pxw_hwt = &state.cov_cross * hw.transpose();
            let cross = &h_x * &pxw_hwt;
            s_mat += &cross + cross.transpose();
            let hwp = hw * pw;
            s_mat += &hwp * hw.transpose();
            stats.add_gemm(n_y, n_w, n_w);
            u_gain += pxw_hwt;
            hw_pw = Some(hwp);
        }
        let s_inv = invert_innovation(&s_mat)?;

        let l_x = &u_gain * &s_inv * gain_scale;
        let mut v_gain = state.cov_cross.transpose() * h_x.transpose();
        if let Some(hwp) = &hw_pw {
            v_gain += hwp.transpose();
        }
        stats.add_gemm(n_w, n_x, n_y);
        let l_w = if ctx.learning || n_w == 0 {
            &v_gain * &s_inv * gain_scale
        } else {
            DMatrix::zeros(n_w, n_y)
        };

        state.state_mean += &l_x * &nu;
        state.weight_mean += &l_w * &nu;
        if !state.means_finite() {
            return Err(FilterError::NonFinite("measurement-update mean"));
        }

        // Joseph form, (I−KH)P(I−KH)ᵀ + KRKᵀ, expanded block by block.
        let mut hpx_row = &h_x * &state.cov_state;
        let mut hpw_row = &h_x * &state.cov_cross;
        if let Some(hw) = &h_theta {
            hpx_row += hw * state.cov_cross.transpose();
            hpw_row += hw_pw.as_ref().expect("computed with h_theta");
        }
        stats.add_gemm(n_y, n_x, n_w);

        let px1 = &state.cov_state - &l_x * &hpx_row;
        let pxw1 = &state.cov_cross - &l_x * &hpw_row;
        let pwx1 = state.cov_cross.transpose() - &l_w * &hpx_row;
        let pw1 = {
            let WeightCov::Dense(pw) = &state.cov_weight else {
                unreachable!()
            };
            pw - &l_w * &hpw_row
        };
        stats.add_gemm(n_w, n_y, n_w); // Lθ (HP)θ

        let mut phx = &px1 * h_x.transpose();
        let mut phw = &pwx1 * h_x.transpose();
        if let Some(hw) = &h_theta {
            phx += &pxw1 * hw.transpose();
            phw += &pw1 * hw.transpose();
            stats.add_gemm(n_w, n_w, n_y);
        }

        let lx_r = &l_x * r;
        let lw_r = &l_w * r;
        state.cov_state = &px1 - &phx * l_x.transpose() + &lx_r * l_x.transpose();
        symmetrize(&mut state.cov_state);
        state.cov_cross = &pxw1 - &phx * l_w.transpose() + &lx_r * l_w.transpose();
        let pw_new = &pw1 - &phw * l_w.transpose() + &lw_r * l_w.transpose();
        stats.add_gemm(n_w, n_y, n_w); // (P'Hᵀ)θ Lθᵀ
        stats.add_gemm(n_w, n_y, n_w); // (Lθ R) Lθᵀ
        let WeightCov::Dense(pw) = &mut state.cov_weight else {
            unreachable!()
        };
        *pw = pw_new;
        symmetrize(pw);
        Ok(stats)
    }

    /// Sparse correction: the weight gain is zeroed outside the active
    /// rows, so only active weights and their tracked correlations move.
    pub fn measurement_update_sparse(
        &self,
        state: &mut FilterState,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<StepStats, FilterError> {
        self.measurement_update_sparse_scaled(state, y, u, 1.0)
    }

    /// Sparse correction with a scaled gain (robustness-testing hook; the
    /// restricted Joseph form stays PSD for any scale).
    pub fn measurement_update_sparse_scaled(
        &self,
        state: &mut FilterState,
        y: &DVector<f64>,
        u: &DVector<f64>,
        gain_scale: f64,
    ) -> Result<StepStats, FilterError> {
        if y.len() != self.model.obs_dim() {
            return Err(FilterError::Dimension {
                what: "observation",
                expected: self.model.obs_dim(),
                got: y.len(),
            });
        }
        if matches!(self.selection, ActiveSelection::All) && self.model.has_expansion() {
            return Err(FilterError::SelectionMismatch(
                "sparse measurement update requires a compact active-set selection",
            ));
        }
        let mut ctx = self.context(&state.state_mean, u, false)?;
        self.fill_unknown(&mut ctx, &state.weight_mean);
        let (h_x, h_theta) =
            self.observation_jacobians(&ctx, &state.state_mean, u, &state.weight_mean);

        let z_pred = self
            .model
            .predict_observation(&state.state_mean, u, &ctx.u_f);
        let nu = y - z_pred;

        let mut stats = StepStats::new(&ctx.active, ctx.widx.len());
        let n_x = self.model.state_dim();
        let n_y = self.model.obs_dim();
        let n_a = ctx.widx.len();
        let r = self.model.obs_noise();

        // Bring the active weights into the tracked block first; in local
        // coordinates the active columns sit at `slots`.
        let (slots, tracked): (Vec<usize>, Option<Vec<usize>>) = match &mut state.cov_weight {
            WeightCov::Tracked(tr) => {
                tr.ensure_tracked(&ctx.widx);
                (tr.slots(&ctx.widx), Some(tr.tracked().to_vec()))
            }
            WeightCov::Dense(_) => (ctx.widx.clone(), None),
        };
        let n_t = tracked
            .as_ref()
            .map(|t| t.len())
            .unwrap_or(state.weight_dim());

        let pxw_a = select_columns(&state.cov_cross, &ctx.widx);
        let pxw_t = match &tracked {
            Some(t) => select_columns(&state.cov_cross, t),
            None => state.cov_cross.clone(),
        };
        let b_at = match &state.cov_weight {
            WeightCov::Tracked(tr) => select_rows(tr.block(), &slots),
            WeightCov::Dense(pw) => select_rows(pw, &slots),
        };

        let px_hxt = &state.cov_state * h_x.transpose();
        let mut s_mat = r + &h_x * &px_hxt;
        let mut u_gain = px_hxt;
        let mut hw_b_at: Option<DMatrix<f64>> = None;
        if let Some(hw) = &h_theta {
            let pxw_hwt = &pxw_a * hw.transpose();
            let cross = &h_x * &pxw_hwt;
            s_mat += &cross + cross.transpose();
            let hwb = hw * &b_at;
            s_mat += select_columns(&hwb, &slots) * hw.transpose();
            stats.add_gemm(n_y, n_a, n_t);
            u_gain += pxw_hwt;
            hw_b_at = Some(hwb);
        }
        let s_inv = invert_innovation(&s_mat)?;

        let l_x = &u_gain * &s_inv * gain_scale;
        let mut v_a = pxw_a.transpose() * h_x.transpose();
        if let Some(hwb) = &hw_b_at {
            v_a += select_columns(hwb, &slots).transpose();
        }
        stats.add_gemm(n_a, n_x, n_y);
        let l_w_a = &v_a * &s_inv * gain_scale;

        state.state_mean += &l_x * &nu;
        let dw = &l_w_a * &nu;
        for (k, &wi) in ctx.widx.iter().enumerate() {
            state.weight_mean[wi] += dw[k];
        }
        if !state.means_finite() {
            return Err(FilterError::NonFinite("measurement-update mean"));
        }

        // Joseph form restricted to the active rows/columns; the tracked
        // block is the only region that can carry non-zero updates.
        let mut hpx_row = &h_x * &state.cov_state;
        let mut hpw_row_t = &h_x * &pxw_t;
        if let Some(hw) = &h_theta {
            hpx_row += hw * pxw_a.transpose();
            hpw_row_t += hw_b_at.as_ref().expect("computed with h_theta");
        }
        stats.add_gemm(n_y, n_x, n_t);

        let px1 = &state.cov_state - &l_x * &hpx_row;
        let pxw1_t = &pxw_t - &l_x * &hpw_row_t;
        let pwx1_a = pxw_a.transpose() - &l_w_a * &hpx_row;
        let pw1_at = &b_at - &l_w_a * &hpw_row_t;
        stats.add_gemm(n_a, n_y, n_t); // Lθ (HP)θ on active rows

        // Stage-one weight rows assembled over the tracked set: rows at
        // active slots replaced by their updated values.
        let pw1_at_a = select_columns(&pw1_at, &slots);
        let mut pwx1_t = pxw_t.transpose();
        let mut pw1_t_a = match &state.cov_weight {
            WeightCov::Tracked(tr) => select_columns(tr.block(), &slots),
            WeightCov::Dense(pw) => select_columns(pw, &slots),
        };
        for (k, &sk) in slots.iter().enumerate() {
            pwx1_t.row_mut(sk).copy_from(&pwx1_a.row(k));
            pw1_t_a.row_mut(sk).copy_from(&pw1_at_a.row(k));
        }

        let mut phx = &px1 * h_x.transpose();
        let mut phw_t = &pwx1_t * h_x.transpose();
        if let Some(hw) = &h_theta {
            phx += select_columns(&pxw1_t, &slots) * hw.transpose();
            phw_t += &pw1_t_a * hw.transpose();
            stats.add_gemm(n_t, n_a, n_y);
        }

        let lx_r = &l_x * r;
        let lw_r = &l_w_a * r;
        state.cov_state = &px1 - &phx * l_x.transpose() + &lx_r * l_x.transpose();
        symmetrize(&mut state.cov_state);

        // Cross block: stage one everywhere tracked, stage two and the
        // KRKᵀ term only on active columns.
        let mut pxw_final_t = pxw1_t;
        let d1 = &phx * l_w_a.transpose();
        let d2 = &lx_r * l_w_a.transpose();
        for (k, &sk) in slots.iter().enumerate() {
            let col = pxw_final_t.column(sk) - d1.column(k) + d2.column(k);
            pxw_final_t.set_column(sk, &col);
        }
        match &tracked {
            Some(t) => scatter_columns(&mut state.cov_cross, t, &pxw_final_t),
            None => state.cov_cross = pxw_final_t,
        }

        // Weight block: stage-one rows, stage-two columns, KRKᵀ on the
        // active square, then symmetrization of the touched region.
        let stage2 = &phw_t * l_w_a.transpose();
        let krk = &lw_r * l_w_a.transpose();
        stats.add_gemm(n_t, n_y, n_a);
        stats.add_gemm(n_a, n_y, n_a);
        let block = match &mut state.cov_weight {
            WeightCov::Tracked(tr) => tr.block_mut(),
            WeightCov::Dense(pw) => pw,
        };
        for (k, &sk) in slots.iter().enumerate() {
            block.row_mut(sk).copy_from(&pw1_at.row(k));
        }
        for (k, &sk) in slots.iter().enumerate() {
            for t_row in 0..n_t {
                block[(t_row, sk)] -= stage2[(t_row, k)];
            }
        }
        for (ka, &sa) in slots.iter().enumerate() {
            for (kb, &sb) in slots.iter().enumerate() {
                block[(sa, sb)] += krk[(ka, kb)];
            }
        }
        symmetrize_region(block, &slots);
        Ok(stats)
    }

    /// Posterior of the learned function at a query point in basis-input
    /// space: mean `Φ(x_q) θ̂` and covariance `Φ(x_q) Pθ Φ(x_q)ᵀ` over the
    /// active set at `x_q`.
    pub fn query_function(
        &self,
        state: &FilterState,
        x_query: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>), FilterError> {
        let j_dim = self.model.output_dim();
        if !self.model.has_expansion() {
            return Ok((DVector::zeros(j_dim), DMatrix::zeros(j_dim, j_dim)));
        }
        let active = match self.selection {
            ActiveSelection::All => ActiveSet::full(self.grid.total_centers()),
            ActiveSelection::Exact => active_exact(x_query, &self.grid, &self.config)?,
            ActiveSelection::Fast => active_fast(x_query, &self.grid, &self.config)?,
        };
        let beta = eval_active(x_query, &self.grid, &self.config, &active)?;
        let mean = unknown_from_beta(
            &beta,
            &state.weight_mean,
            &active,
            self.model.ordering(),
            self.grid.total_centers(),
            j_dim,
        );
        let widx = weight_indices(
            self.model.ordering(),
            self.grid.total_centers(),
            j_dim,
            &active,
        );
        let regressors = channel_weight_jacobian(
            &DMatrix::identity(j_dim, j_dim),
            &beta,
            self.model.ordering(),
        );
        let b_aa = state.cov_weight.gather_square(&widx);
        let cov = &regressors * b_aa * regressors.transpose();
        Ok((mean, cov))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Symmetrize every pair with at least one index in `slots`.
fn symmetrize_region(m: &mut DMatrix<f64>, slots: &[usize]) {
    let n = m.nrows();
    let mut in_slots = vec![false; n];
    for &s in slots {
        in_slots[s] = true;
    }
    for &s in slots {
        for i in 0..n {
            if in_slots[i] {
                continue;
            }
            let v = 0.5 * (m[(i, s)] + m[(s, i)]);
            m[(i, s)] = v;
            m[(s, i)] = v;
        }
    }
    for (a, &sa) in slots.iter().enumerate() {
        for &sb in slots.iter().skip(a + 1) {
            let v = 0.5 * (m[(sa, sb)] + m[(sb, sa)]);
            m[(sa, sb)] = v;
            m[(sb, sa)] = v;
        }
    }
}

fn invert_innovation(s: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
    let eigs = s.symmetric_eigenvalues();
    let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
    let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        return Err(FilterError::SingularInnovation);
    }
    let condition = max / min;
    if condition > MAX_CONDITION {
        return Err(FilterError::IllConditioned { condition });
    }
    nalgebra::Cholesky::new(s.clone())
        .map(|c| c.inverse())
        .ok_or(FilterError::SingularInnovation)
}

fn select_columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_columns(idx.iter())
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_rows(idx.iter())
}

fn scatter_columns(m: &mut DMatrix<f64>, idx: &[usize], vals: &DMatrix<f64>) {
    for (k, &i) in idx.iter().enumerate() {
        m.set_column(i, &vals.column(k));
    }
}
