//! Augmented state-space models: known dynamics plus a basis-function
//! expansion for the unknown part.
//!
//! A model bundles the known dynamics `f(x, u, w, u_f)`, the observation
//! `h(x, u, e)`, the transformation `φ` that maps the state to the basis
//! input, the noise covariances, and the weight-vector layout. The unknown
//! input is `u_f = Φ(φ(x)) θ` where `Φ` arranges the active basis values
//! according to the configured [`WeightOrdering`].

mod builders;

pub use builders::{
    build_1d_models, build_cv_model, build_tire_model, ExampleOneModels, TireParams,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{eval_active, ActiveSet, BasisConfig, BasisError, CartesianGrid};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{name} must be symmetric positive semi-definite")]
    NotPositiveSemiDefinite { name: &'static str },
    #[error("{name} must be symmetric positive definite")]
    NotPositiveDefinite { name: &'static str },
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLengthMismatch { expected: usize, got: usize },
    #[error("model requires the shared-basis layout")]
    SharedBasisRequired,
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Layout of a multi-output weight vector.
///
/// `Stacked` keeps each output's weights contiguous, `u_f = (I ⊗ βᵀ) θ`.
/// `Staggered` keeps the J weights of one basis function contiguous,
/// `u_f = (βᵀ ⊗ I) θ`. The two are algebraically equivalent; they differ
/// in memory-access pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightOrdering {
    Stacked,
    Staggered,
}

/// Known part of the dynamics, `x⁺ = f(x, u, w, u_f)` evaluated at `w = 0`.
pub trait KnownDynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    /// Noise-free propagation.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, u_f: &DVector<f64>) -> DVector<f64>;
    /// `∂f/∂x` holding `u_f` fixed.
    fn jac_state(&self, x: &DVector<f64>, u: &DVector<f64>, u_f: &DVector<f64>) -> DMatrix<f64>;
    /// `∂f/∂u_f`, the channel through which the unknown input enters.
    fn input_channel(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
}

/// Dynamics affine in both the state and the unknown input:
/// `x⁺ = A x + B u_f`.
pub struct LinearDynamics {
    state_matrix: DMatrix<f64>,
    input_matrix: DMatrix<f64>,
}

impl LinearDynamics {
    pub fn new(state_matrix: DMatrix<f64>, input_matrix: DMatrix<f64>) -> Self {
        assert_eq!(state_matrix.nrows(), state_matrix.ncols());
        assert_eq!(state_matrix.nrows(), input_matrix.nrows());
        Self {
            state_matrix,
            input_matrix,
        }
    }
}

impl KnownDynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.state_matrix.nrows()
    }

    fn step(&self, x: &DVector<f64>, _u: &DVector<f64>, u_f: &DVector<f64>) -> DVector<f64> {
        &self.state_matrix * x + &self.input_matrix * u_f
    }

    fn jac_state(&self, _x: &DVector<f64>, _u: &DVector<f64>, _uf: &DVector<f64>) -> DMatrix<f64> {
        self.state_matrix.clone()
    }

    fn input_channel(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.input_matrix.clone()
    }
}

/// Observation model `y = h(x, u, e)` evaluated at `e = 0`, with an
/// optional direct dependence on the unknown input.
pub trait Observation: Send + Sync {
    fn obs_dim(&self) -> usize;
    fn predict(&self, x: &DVector<f64>, u: &DVector<f64>, u_f: &DVector<f64>) -> DVector<f64>;
    /// Direct `∂h/∂x` (excluding any dependence through `u_f`).
    fn jac_state(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    /// `∂h/∂u_f`; the zero matrix for observation models that do not see
    /// the unknown input.
    fn input_channel(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    fn depends_on_unknown(&self) -> bool {
        false
    }
}

/// `y = H x + e`.
pub struct LinearObservation {
    matrix: DMatrix<f64>,
    output_dim: usize,
}

impl LinearObservation {
    /// `output_dim` is the dimension J of the unknown input, needed only to
    /// shape the (zero) input channel.
    pub fn new(matrix: DMatrix<f64>, output_dim: usize) -> Self {
        Self { matrix, output_dim }
    }
}

impl Observation for LinearObservation {
    fn obs_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn predict(&self, x: &DVector<f64>, _u: &DVector<f64>, _uf: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn jac_state(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn input_channel(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.matrix.nrows(), self.output_dim)
    }
}

/// Transformation `z = φ(x, u)` feeding the basis expansion.
pub trait StateTransform: Send + Sync {
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    /// `∂φ/∂x`, `P × n_x`.
    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    /// True when the input had to be clamped at this state; weight learning
    /// is paused for such steps.
    fn clamped(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        false
    }
}

/// Linear transformation `φ(x) = D x`.
pub struct LinearTransform {
    matrix: DMatrix<f64>,
}

impl LinearTransform {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }
}

impl StateTransform for LinearTransform {
    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    fn jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Wheel slip `s = (r_w ω_f - v) / v` with the speed clamped from below.
///
/// The state is the scalar longitudinal velocity and the known input is
/// the front-wheel angular velocity. Below `speed_floor` the slip is
/// evaluated at the floor and reported as clamped, which pauses weight
/// learning during standstill starts.
pub struct SlipTransform {
    wheel_radius: f64,
    speed_floor: f64,
}

impl SlipTransform {
    pub fn new(wheel_radius: f64, speed_floor: f64) -> Self {
        assert!(speed_floor > 0.0, "speed floor must be positive");
        Self {
            wheel_radius,
            speed_floor,
        }
    }
}

impl StateTransform for SlipTransform {
    fn output_dim(&self) -> usize {
        1
    }

    fn apply(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let v = x[0].max(self.speed_floor);
        let wheel_speed = self.wheel_radius * u[0];
        DVector::from_element(1, (wheel_speed - v) / v)
    }

    fn jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        if x[0] < self.speed_floor {
            return DMatrix::zeros(1, 1);
        }
        let v = x[0];
        // d/dv [(r ω - v)/v] = -r ω / v²
        DMatrix::from_element(1, 1, -self.wheel_radius * u[0] / (v * v))
    }

    fn clamped(&self, x: &DVector<f64>, _u: &DVector<f64>) -> bool {
        x[0] < self.speed_floor
    }
}

/// Gray-box model with a shared-basis expansion on the unknown input.
pub struct AugmentedModel {
    dynamics: Box<dyn KnownDynamics>,
    observation: Box<dyn Observation>,
    transform: Box<dyn StateTransform>,
    process_noise: DMatrix<f64>,
    obs_noise: DMatrix<f64>,
    weight_noise_variance: f64,
    sample_time: f64,
    output_dim: usize,
    ordering: WeightOrdering,
    shared_basis: bool,
    has_expansion: bool,
    observation_weight_coupling: bool,
}

/// Eigenvalue tolerance for the PSD checks at construction.
const PSD_TOL: f64 = -1e-10;

impl AugmentedModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dynamics: Box<dyn KnownDynamics>,
        observation: Box<dyn Observation>,
        transform: Box<dyn StateTransform>,
        process_noise: DMatrix<f64>,
        obs_noise: DMatrix<f64>,
        weight_noise_variance: f64,
        sample_time: f64,
        output_dim: usize,
    ) -> Result<Self, ModelError> {
        let n_x = dynamics.state_dim();
        if process_noise.nrows() != n_x || process_noise.ncols() != n_x {
            return Err(ModelError::DimensionMismatch {
                what: "process noise covariance",
                expected: n_x,
                got: process_noise.nrows(),
            });
        }
        let n_y = observation.obs_dim();
        if obs_noise.nrows() != n_y || obs_noise.ncols() != n_y {
            return Err(ModelError::DimensionMismatch {
                what: "observation noise covariance",
                expected: n_y,
                got: obs_noise.nrows(),
            });
        }
        check_psd(&process_noise, "process noise covariance")?;
        check_pd(&obs_noise, "observation noise covariance")?;
        if weight_noise_variance < 0.0 {
            return Err(ModelError::NotPositiveSemiDefinite {
                name: "weight noise covariance",
            });
        }
        let coupling = observation.depends_on_unknown();
        Ok(Self {
            dynamics,
            observation,
            transform,
            process_noise,
            obs_noise,
            weight_noise_variance,
            sample_time,
            output_dim,
            ordering: WeightOrdering::Staggered,
            shared_basis: true,
            has_expansion: true,
            observation_weight_coupling: coupling,
        })
    }

    pub fn with_ordering(mut self, ordering: WeightOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    /// Drop the expansion: the model becomes the plain known dynamics with
    /// `u_f ≡ 0` and an empty weight vector.
    pub fn without_expansion(mut self) -> Self {
        self.has_expansion = false;
        self
    }

    /// Select whether observation gains account for the dependence of the
    /// observation on the weights (only meaningful for observation models
    /// that see `u_f`). Defaults to exact.
    pub fn with_observation_weight_coupling(mut self, coupling: bool) -> Self {
        self.observation_weight_coupling = coupling && self.observation.depends_on_unknown();
        self
    }

    /// Replace the isotropic weight random-walk variance.
    pub fn with_weight_noise(mut self, variance: f64) -> Result<Self, ModelError> {
        if variance < 0.0 {
            return Err(ModelError::NotPositiveSemiDefinite {
                name: "weight noise covariance",
            });
        }
        self.weight_noise_variance = variance;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn obs_dim(&self) -> usize {
        self.observation.obs_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn ordering(&self) -> WeightOrdering {
        self.ordering
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn obs_noise(&self) -> &DMatrix<f64> {
        &self.obs_noise
    }

    /// Isotropic weight-noise variance; `Σ = σ² I`.
    pub fn weight_noise_variance(&self) -> f64 {
        self.weight_noise_variance
    }

    pub fn shared_basis(&self) -> bool {
        self.shared_basis
    }

    pub fn has_expansion(&self) -> bool {
        self.has_expansion
    }

    pub fn observation_weight_coupling(&self) -> bool {
        self.observation_weight_coupling
    }

    pub fn transform_dim(&self) -> usize {
        self.transform.output_dim()
    }

    pub fn basis_input(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.transform.apply(x, u)
    }

    pub fn transform_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.transform.jacobian(x, u)
    }

    /// False while the transform clamps its input; the filter pauses
    /// weight learning for such steps.
    pub fn learning_active(&self, x: &DVector<f64>, u: &DVector<f64>) -> bool {
        self.has_expansion && !self.transform.clamped(x, u)
    }

    pub fn propagate(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        u_f: &DVector<f64>,
    ) -> DVector<f64> {
        self.dynamics.step(x, u, u_f)
    }

    pub fn dynamics_jac_state(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        u_f: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.dynamics.jac_state(x, u, u_f)
    }

    pub fn dynamics_input_channel(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.dynamics.input_channel(x, u)
    }

    pub fn predict_observation(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        u_f: &DVector<f64>,
    ) -> DVector<f64> {
        self.observation.predict(x, u, u_f)
    }

    pub fn observation_jac_state(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.observation.jac_state(x, u)
    }

    pub fn observation_input_channel(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        self.observation.input_channel(x, u)
    }
}

fn check_psd(m: &DMatrix<f64>, name: &'static str) -> Result<(), ModelError> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(ModelError::NotPositiveSemiDefinite { name });
    }
    let min = m.symmetric_eigenvalues().min();
    if min < PSD_TOL * scale {
        return Err(ModelError::NotPositiveSemiDefinite { name });
    }
    Ok(())
}

fn check_pd(m: &DMatrix<f64>, name: &'static str) -> Result<(), ModelError> {
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-9 * scale {
        return Err(ModelError::NotPositiveDefinite { name });
    }
    if m.symmetric_eigenvalues().min() <= 0.0 {
        return Err(ModelError::NotPositiveDefinite { name });
    }
    Ok(())
}

/// Global weight indices of the active columns, in the column order of the
/// restricted regression matrix `Φ_active` for the given ordering.
///
/// Stacked: `[j·n_w + i]` for `j = 0..J`, then active `i` ascending.
/// Staggered: `[i·J + j]` for active `i` ascending, then `j = 0..J`.
/// Both orders are strictly increasing overall.
pub fn weight_indices(
    ordering: WeightOrdering,
    n_w_per_output: usize,
    output_dim: usize,
    active: &ActiveSet,
) -> Vec<usize> {
    let mut out = Vec::with_capacity(output_dim * active.count());
    match ordering {
        WeightOrdering::Stacked => {
            for j in 0..output_dim {
                for &i in active.indices() {
                    out.push(j * n_w_per_output + i);
                }
            }
        }
        WeightOrdering::Staggered => {
            for &i in active.indices() {
                for j in 0..output_dim {
                    out.push(i * output_dim + j);
                }
            }
        }
    }
    out
}

/// `u_f` from precomputed active basis values and the full weight vector.
///
/// Summation runs over active positions in ascending order for every
/// ordering, so the two layouts produce bitwise-identical results for the
/// same underlying weights.
pub fn unknown_from_beta(
    beta: &DVector<f64>,
    theta: &DVector<f64>,
    active: &ActiveSet,
    ordering: WeightOrdering,
    n_w_per_output: usize,
    output_dim: usize,
) -> DVector<f64> {
    let mut u_f = DVector::zeros(output_dim);
    match ordering {
        WeightOrdering::Stacked => {
            for j in 0..output_dim {
                let base = j * n_w_per_output;
                let mut acc = 0.0;
                for (k, &i) in active.indices().iter().enumerate() {
                    acc += beta[k] * theta[base + i];
                }
                u_f[j] = acc;
            }
        }
        WeightOrdering::Staggered => {
            for j in 0..output_dim {
                let mut acc = 0.0;
                for (k, &i) in active.indices().iter().enumerate() {
                    acc += beta[k] * theta[i * output_dim + j];
                }
                u_f[j] = acc;
            }
        }
    }
    u_f
}

/// `u_f` over every basis function: the dense evaluation `Φ θ` given the
/// full basis-value vector, without materializing an index set.
pub fn unknown_from_beta_full(
    beta: &DVector<f64>,
    theta: &DVector<f64>,
    ordering: WeightOrdering,
    output_dim: usize,
) -> DVector<f64> {
    let n_w = beta.len();
    debug_assert_eq!(theta.len(), n_w * output_dim);
    let mut u_f = DVector::zeros(output_dim);
    match ordering {
        WeightOrdering::Stacked => {
            for j in 0..output_dim {
                let base = j * n_w;
                let mut acc = 0.0;
                for i in 0..n_w {
                    acc += beta[i] * theta[base + i];
                }
                u_f[j] = acc;
            }
        }
        WeightOrdering::Staggered => {
            for j in 0..output_dim {
                let mut acc = 0.0;
                for i in 0..n_w {
                    acc += beta[i] * theta[i * output_dim + j];
                }
                u_f[j] = acc;
            }
        }
    }
    u_f
}

/// `C · Φ_active` for a channel matrix `C` (`rows × J`): the Jacobian of
/// `C u_f` with respect to the active weights, columns ordered as
/// [`weight_indices`].
pub fn channel_weight_jacobian(
    channel: &DMatrix<f64>,
    beta: &DVector<f64>,
    ordering: WeightOrdering,
) -> DMatrix<f64> {
    let rows = channel.nrows();
    let j_dim = channel.ncols();
    let n_active = beta.len();
    let mut out = DMatrix::zeros(rows, j_dim * n_active);
    match ordering {
        WeightOrdering::Stacked => {
            for j in 0..j_dim {
                for k in 0..n_active {
                    let col = j * n_active + k;
                    for r in 0..rows {
                        out[(r, col)] = channel[(r, j)] * beta[k];
                    }
                }
            }
        }
        WeightOrdering::Staggered => {
            for k in 0..n_active {
                for j in 0..j_dim {
                    let col = k * j_dim + j;
                    for r in 0..rows {
                        out[(r, col)] = channel[(r, j)] * beta[k];
                    }
                }
            }
        }
    }
    out
}

/// `∂u_f/∂x = M T`, where `M[j][p] = Σ_i θ_i^j ∂β_i/∂z_p` and `T = ∂φ/∂x`.
#[allow(clippy::too_many_arguments)]
pub fn unknown_state_jacobian(
    grid: &CartesianGrid,
    config: &BasisConfig,
    z: &[f64],
    transform_jac: &DMatrix<f64>,
    theta: &DVector<f64>,
    active: &ActiveSet,
    ordering: WeightOrdering,
    n_w_per_output: usize,
    output_dim: usize,
) -> DMatrix<f64> {
    let p_dim = grid.dims();
    let mut m = DMatrix::zeros(output_dim, p_dim);
    let mut center = vec![0.0; p_dim];
    let mut grad = vec![0.0; p_dim];
    for &i in active.indices() {
        grid.center_into(i, &mut center);
        config.family.gradient_at(z, &center, &mut grad);
        for j in 0..output_dim {
            let w = match ordering {
                WeightOrdering::Stacked => theta[j * n_w_per_output + i],
                WeightOrdering::Staggered => theta[i * output_dim + j],
            };
            for (p, &g) in grad.iter().enumerate() {
                m[(j, p)] += w * g;
            }
        }
    }
    m * transform_jac
}

/// Evaluate the unknown input `u_f` at a state.
///
/// Requires the shared-basis layout: one basis evaluation serves all J
/// outputs. The active set must have been produced for `φ(x, u)`.
pub fn eval_unknown(
    model: &AugmentedModel,
    grid: &CartesianGrid,
    config: &BasisConfig,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    active: &ActiveSet,
) -> Result<DVector<f64>, ModelError> {
    eval_unknown_with_count(model, grid, config, x, u, theta, active).map(|(v, _)| v)
}

/// [`eval_unknown`] plus the number of scalar basis evaluations performed.
#[allow(clippy::too_many_arguments)]
pub fn eval_unknown_with_count(
    model: &AugmentedModel,
    grid: &CartesianGrid,
    config: &BasisConfig,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    active: &ActiveSet,
) -> Result<(DVector<f64>, usize), ModelError> {
    if !model.shared_basis() {
        return Err(ModelError::SharedBasisRequired);
    }
    let n_w = grid.total_centers();
    let expected = model.output_dim() * n_w;
    if theta.len() != expected {
        return Err(ModelError::WeightLengthMismatch {
            expected,
            got: theta.len(),
        });
    }
    let z = model.basis_input(x, u);
    let beta = eval_active(z.as_slice(), grid, config, active)?;
    let u_f = unknown_from_beta(
        &beta,
        theta,
        active,
        model.ordering(),
        n_w,
        model.output_dim(),
    );
    Ok((u_f, active.count()))
}

/// Dynamics Jacobians at `(x, θ)`: the state block `Fˣ` including the
/// chain term through `β(φ(x))`, and the weight block `Fθ` restricted to
/// the active columns.
#[allow(clippy::too_many_arguments)]
pub fn jacobians(
    model: &AugmentedModel,
    grid: &CartesianGrid,
    config: &BasisConfig,
    x: &DVector<f64>,
    u: &DVector<f64>,
    theta: &DVector<f64>,
    active: &ActiveSet,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ModelError> {
    let n_w = grid.total_centers();
    let j_dim = model.output_dim();
    let expected = j_dim * n_w;
    if theta.len() != expected {
        return Err(ModelError::WeightLengthMismatch {
            expected,
            got: theta.len(),
        });
    }
    let z = model.basis_input(x, u);
    let beta = eval_active(z.as_slice(), grid, config, active)?;
    let u_f = unknown_from_beta(&beta, theta, active, model.ordering(), n_w, j_dim);
    let channel = model.dynamics_input_channel(x, u);
    let t_jac = model.transform_jacobian(x, u);
    let du_dx = unknown_state_jacobian(
        grid,
        config,
        z.as_slice(),
        &t_jac,
        theta,
        active,
        model.ordering(),
        n_w,
        j_dim,
    );
    let f_x = model.dynamics_jac_state(x, u, &u_f) + &channel * du_dx;
    let f_theta = channel_weight_jacobian(&channel, &beta, model.ordering());
    Ok((f_x, f_theta))
}
