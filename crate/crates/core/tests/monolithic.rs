//! Equivalence of the partitioned blockwise EKF against a monolithic EKF
//! on the full augmented state, on grids small enough to run both.

use bfekf_core::basis::{eval_dense, ActiveSet, BasisConfig, CartesianGrid};
use bfekf_core::filter::{ActiveSelection, AugmentedEkf, FilterState};
use bfekf_core::ssmodel::{
    build_cv_model, build_tire_model, channel_weight_jacobian, jacobians, unknown_from_beta,
    unknown_state_jacobian, AugmentedModel, TireParams,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straightforward EKF on the stacked state (x, θ) with full matrices.
struct MonolithicEkf {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl MonolithicEkf {
    fn new(x0: &DVector<f64>, p0: &DMatrix<f64>, n_w: usize, prior_var: f64) -> Self {
        let n_x = x0.len();
        let n = n_x + n_w;
        let mut mean = DVector::zeros(n);
        mean.rows_mut(0, n_x).copy_from(x0);
        let mut cov = DMatrix::zeros(n, n);
        cov.view_mut((0, 0), (n_x, n_x)).copy_from(p0);
        for i in n_x..n {
            cov[(i, i)] = prior_var;
        }
        Self { mean, cov }
    }

    fn unknown_input(
        &self,
        model: &AugmentedModel,
        grid: &CartesianGrid,
        config: &BasisConfig,
        u: &DVector<f64>,
    ) -> DVector<f64> {
        let n_x = model.state_dim();
        let x = DVector::from(self.mean.rows(0, n_x).clone_owned());
        let theta = DVector::from(self.mean.rows(n_x, self.mean.len() - n_x).clone_owned());
        let z = model.basis_input(&x, u);
        let beta = eval_dense(z.as_slice(), grid, config).unwrap();
        unknown_from_beta(
            &beta,
            &theta,
            &ActiveSet::full(grid.total_centers()),
            model.ordering(),
            grid.total_centers(),
            model.output_dim(),
        )
    }

    fn predict(
        &mut self,
        model: &AugmentedModel,
        grid: &CartesianGrid,
        config: &BasisConfig,
        u: &DVector<f64>,
    ) {
        let n_x = model.state_dim();
        let n_w = self.mean.len() - n_x;
        let x = DVector::from(self.mean.rows(0, n_x).clone_owned());
        let theta = DVector::from(self.mean.rows(n_x, n_w).clone_owned());
        let active = ActiveSet::full(grid.total_centers());
        let (f_x, f_theta) = jacobians(model, grid, config, &x, u, &theta, &active).unwrap();
        let u_f = self.unknown_input(model, grid, config, u);
        let next = model.propagate(&x, u, &u_f);

        let n = n_x + n_w;
        let mut f_full = DMatrix::identity(n, n);
        f_full.view_mut((0, 0), (n_x, n_x)).copy_from(&f_x);
        f_full.view_mut((0, n_x), (n_x, n_w)).copy_from(&f_theta);
        let mut q_full = DMatrix::zeros(n, n);
        q_full
            .view_mut((0, 0), (n_x, n_x))
            .copy_from(model.process_noise());
        let sigma = model.weight_noise_variance();
        for i in n_x..n {
            q_full[(i, i)] = sigma;
        }
        self.mean.rows_mut(0, n_x).copy_from(&next);
        self.cov = &f_full * &self.cov * f_full.transpose() + q_full;
    }

    fn update(
        &mut self,
        model: &AugmentedModel,
        grid: &CartesianGrid,
        config: &BasisConfig,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) {
        let n_x = model.state_dim();
        let n_w = self.mean.len() - n_x;
        let n = n_x + n_w;
        let n_y = model.obs_dim();
        let x = DVector::from(self.mean.rows(0, n_x).clone_owned());
        let theta = DVector::from(self.mean.rows(n_x, n_w).clone_owned());
        let u_f = self.unknown_input(model, grid, config, u);

        let mut h_full = DMatrix::zeros(n_y, n);
        let mut h_x = model.observation_jac_state(&x, u);
        if model.observation_weight_coupling() {
            let z = model.basis_input(&x, u);
            let beta = eval_dense(z.as_slice(), grid, config).unwrap();
            let channel = model.observation_input_channel(&x, u);
            // chain term of the observation through u_f(φ(x))
            let du_dx = unknown_state_jacobian(
                grid,
                config,
                z.as_slice(),
                &model.transform_jacobian(&x, u),
                &theta,
                &ActiveSet::full(grid.total_centers()),
                model.ordering(),
                grid.total_centers(),
                model.output_dim(),
            );
            h_x += &channel * du_dx;
            let h_theta = channel_weight_jacobian(&channel, &beta, model.ordering());
            h_full.view_mut((0, n_x), (n_y, n_w)).copy_from(&h_theta);
        }
        h_full.view_mut((0, 0), (n_y, n_x)).copy_from(&h_x);
        let z_pred = model.predict_observation(&x, u, &u_f);
        let nu = y - z_pred;
        let r = model.obs_noise();
        let s = r + &h_full * &self.cov * h_full.transpose();
        let s_inv = s.try_inverse().unwrap();
        let k = &self.cov * h_full.transpose() * s_inv;
        self.mean += &k * nu;
        let ikh = DMatrix::identity(n, n) - &k * &h_full;
        self.cov = &ikh * &self.cov * ikh.transpose() + &k * r * k.transpose();
    }

    fn blocks(&self, n_x: usize) -> (DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n_w = self.mean.len() - n_x;
        (
            DVector::from(self.mean.rows(0, n_x).clone_owned()),
            DVector::from(self.mean.rows(n_x, n_w).clone_owned()),
            self.cov.view((0, 0), (n_x, n_x)).clone_owned(),
            self.cov.view((0, n_x), (n_x, n_w)).clone_owned(),
            self.cov.view((n_x, n_x), (n_w, n_w)).clone_owned(),
        )
    }
}

fn max_rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let scale = x.abs().max(y.abs()).max(1.0);
        worst = worst.max((x - y).abs() / scale);
    }
    worst
}

fn vec_rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let scale = x.abs().max(y.abs()).max(1.0);
        worst = worst.max((x - y).abs() / scale);
    }
    worst
}

fn compare(state: &FilterState, oracle: &MonolithicEkf, n_x: usize, tol: f64, step: usize) {
    let (xm, tm, px, pxw, pw) = oracle.blocks(n_x);
    assert!(
        vec_rel_err(&state.state_mean, &xm) < tol,
        "state mean diverged at step {step}"
    );
    assert!(
        vec_rel_err(&state.weight_mean, &tm) < tol,
        "weight mean diverged at step {step}"
    );
    assert!(
        max_rel_err(&state.cov_state, &px) < tol,
        "state covariance diverged at step {step}: {}",
        max_rel_err(&state.cov_state, &px)
    );
    assert!(
        max_rel_err(&state.cov_cross, &pxw) < tol,
        "cross covariance diverged at step {step}"
    );
    assert!(
        max_rel_err(&state.cov_weight.to_dense(), &pw) < tol,
        "weight covariance diverged at step {step}: {}",
        max_rel_err(&state.cov_weight.to_dense(), &pw)
    );
}

#[test]
fn partitioned_dense_matches_monolithic_on_cv_model() {
    // 5x5 grid per output, J=2: 50 weights total.
    let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[4.0, 4.0], 1.0).unwrap();
    let config = BasisConfig::wendland(2.5, 0.01).unwrap();
    let model = build_cv_model(
        0.2,
        &(DMatrix::identity(2, 2) * 0.1),
        &(DMatrix::identity(2, 2) * 0.2),
        &grid,
        &config,
    )
    .unwrap();
    let filter = AugmentedEkf::new(model, grid.clone(), config.clone(), ActiveSelection::All).unwrap();

    let x0 = DVector::from_vec(vec![2.0, 2.0, 0.2, -0.1]);
    let p0 = DMatrix::identity(4, 4) * 0.1;
    let mut state = filter.init_state(x0.clone(), p0.clone());
    let mut oracle = MonolithicEkf::new(&x0, &p0, filter.weight_dim(), 0.01);

    let u = DVector::zeros(0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for step in 0..100 {
        filter.time_update_dense(&mut state, &u).unwrap();
        oracle.predict(filter.model(), &grid, &config, &u);
        compare(&state, &oracle, 4, 1e-12, step);
        let y = DVector::from_fn(2, |_, _| rng.random_range(0.0..4.0));
        filter.measurement_update_dense(&mut state, &y, &u).unwrap();
        oracle.update(filter.model(), &grid, &config, &y, &u);
        compare(&state, &oracle, 4, 1e-12, step);
    }
}

#[test]
fn partitioned_dense_matches_monolithic_with_gaussian_basis() {
    let grid = CartesianGrid::make_grid(&[0.0, 0.0], &[3.0, 3.0], 1.0).unwrap();
    let config = BasisConfig::gaussian(1.0, 0.05).unwrap();
    let model = build_cv_model(
        0.2,
        &(DMatrix::identity(2, 2) * 0.1),
        &(DMatrix::identity(2, 2) * 0.2),
        &grid,
        &config,
    )
    .unwrap();
    let filter = AugmentedEkf::new(model, grid.clone(), config.clone(), ActiveSelection::All).unwrap();
    let x0 = DVector::from_vec(vec![1.5, 1.5, 0.1, 0.1]);
    let p0 = DMatrix::identity(4, 4) * 0.2;
    let mut state = filter.init_state(x0.clone(), p0.clone());
    let mut oracle = MonolithicEkf::new(&x0, &p0, filter.weight_dim(), 0.05);
    let u = DVector::zeros(0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for step in 0..50 {
        filter.time_update_dense(&mut state, &u).unwrap();
        oracle.predict(filter.model(), &grid, &config, &u);
        let y = DVector::from_fn(2, |_, _| rng.random_range(0.0..3.0));
        filter.measurement_update_dense(&mut state, &y, &u).unwrap();
        oracle.update(filter.model(), &grid, &config, &y, &u);
        compare(&state, &oracle, 4, 1e-12, step);
    }
}

/// The tire observation sees the weights directly; the monolithic oracle
/// carries the full H = [Hx Hθ] with the slip chain term, validating the
/// coupled blockwise update.
#[test]
fn partitioned_dense_matches_monolithic_on_coupled_tire_model() {
    let params = TireParams::default();
    let grid = CartesianGrid::make_grid(&[-0.5], &[0.5], 0.05).unwrap();
    let config = BasisConfig::wendland(0.15, 1e-5).unwrap();
    let model = build_tire_model(&params, &grid, &config).unwrap();
    let filter = AugmentedEkf::new(model, grid.clone(), config.clone(), ActiveSelection::All).unwrap();

    let x0 = DVector::from_element(1, 10.0);
    let p0 = DMatrix::from_element(1, 1, 1e-2);
    let mut state = filter.init_state(x0.clone(), p0.clone());
    let mut oracle = MonolithicEkf::new(&x0, &p0, filter.weight_dim(), 1e-5);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for step in 0..100 {
        let v = state.state_mean[0].max(1.0);
        // wheel speed with a few percent slip
        let slip = 0.08 * (step as f64 * 0.2).sin();
        let u = DVector::from_element(1, (1.0 + slip) * v / params.wheel_radius);
        filter.time_update_dense(&mut state, &u).unwrap();
        oracle.predict(filter.model(), &grid, &config, &u);
        compare(&state, &oracle, 1, 1e-11, step);
        let y = DVector::from_vec(vec![
            rng.random_range(-1.0..5.0),
            v + rng.random_range(-0.05..0.05),
        ]);
        filter.measurement_update_dense(&mut state, &y, &u).unwrap();
        oracle.update(filter.model(), &grid, &config, &y, &u);
        compare(&state, &oracle, 1, 1e-11, step);
    }
}
