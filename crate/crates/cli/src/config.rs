//! Experiment configuration: TOML files with every model parameter as a
//! named key; the shipped defaults are baked into the `Default` impls.

use std::path::Path;

use serde::{Deserialize, Serialize};

use bfekf_core::sim::{IntersectionGeometry, PacejkaParams, TireSimParams};
use bfekf_core::ssmodel::{TireParams, WeightOrdering};

use crate::HarnessError;

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("cannot parse {}: {e}", path.display())))
}

/// First experiment: prior-motion-model influence on two scalar-track
/// scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Config {
    pub runs: usize,
    pub seed: u64,
    pub steps: usize,
    /// Simulator noise variances (the models are tuned identically to
    /// these values by construction).
    pub process_noise: f64,
    pub obs_noise: f64,
    /// Basis support and grid spacing shared by models (b) and (c).
    pub support: f64,
    pub spacing: f64,
    pub prior_weight_variance: f64,
    /// Initial state covariance scale, `Pˣ₀ = scale · I`.
    pub state_prior: f64,
    /// Expansion domain: position span for (b), position x velocity for (c).
    pub position_domain: [f64; 2],
    pub velocity_domain: [f64; 2],
    pub ordering: WeightOrdering,
}

impl Default for Example1Config {
    fn default() -> Self {
        Self {
            runs: 50,
            seed: 1,
            steps: 100,
            process_noise: 0.01,
            obs_noise: 0.01,
            support: 10.0,
            spacing: 1.0,
            prior_weight_variance: 0.1,
            state_prior: 1.0,
            position_domain: [-160.0, 570.0],
            velocity_domain: [-6.0, 10.0],
            ordering: WeightOrdering::Staggered,
        }
    }
}

/// Longitudinal tire-friction estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TireConfig {
    pub runs: usize,
    pub seed: u64,
    /// Pre-simulated acceleration pool size and how many are sampled per
    /// repetition.
    pub accel_pool: usize,
    pub accels_per_run: usize,
    pub tire: TireParams,
    pub pacejka: PacejkaParams,
    pub sim: TireSimParams,
    pub slip_domain: [f64; 2],
    pub spacing: f64,
    pub support: f64,
    pub length_scale: f64,
    pub prior_weight_variance: f64,
    pub state_prior: f64,
    /// Whether gains account for the observation's dependence on the
    /// weights (exact) or ignore it.
    pub observation_weight_coupling: bool,
    /// Slip step of the learned-curve dump.
    pub curve_step: f64,
    pub ordering: WeightOrdering,
}

impl Default for TireConfig {
    fn default() -> Self {
        Self {
            runs: 50,
            seed: 1,
            accel_pool: 100,
            accels_per_run: 5,
            tire: TireParams::default(),
            pacejka: PacejkaParams::default(),
            sim: TireSimParams::default(),
            slip_domain: [-0.5, 0.5],
            spacing: 0.025,
            support: 0.15,
            length_scale: 0.01,
            prior_weight_variance: 1e-5,
            state_prior: 1e-6,
            observation_weight_coupling: true,
            curve_step: 0.005,
            ordering: WeightOrdering::Staggered,
        }
    }
}

/// Three-way intersection study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectionConfig {
    pub runs: usize,
    pub vehicles: usize,
    pub seed: u64,
    pub geometry: IntersectionGeometry,
    pub spacing: f64,
    pub support: f64,
    pub length_scale: f64,
    pub prior_weight_variance: f64,
    pub state_prior: f64,
    /// Driving-noise variance; `Q = value · I` enters through the
    /// acceleration channel.
    pub drive_noise: f64,
    pub weight_noise: f64,
    /// Margin added around the geometry bounds when sizing the grid.
    pub grid_margin: f64,
    /// Dense baseline skipped (with a report) above this total weight
    /// count.
    pub dense_weight_cap: usize,
    /// Vehicles of the timing pass (single-threaded).
    pub timing_vehicles: usize,
    pub ordering: WeightOrdering,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        Self {
            runs: 3,
            vehicles: 50,
            seed: 1,
            geometry: IntersectionGeometry::default(),
            spacing: 1.0,
            support: 5.0,
            length_scale: 1.0,
            prior_weight_variance: 0.01,
            state_prior: 0.1,
            drive_noise: 0.1,
            weight_noise: 0.0,
            grid_margin: 2.0,
            dense_weight_cap: 12_000,
            timing_vehicles: 10,
            ordering: WeightOrdering::Staggered,
        }
    }
}

/// Scaling benchmarks (single-point evaluation and one-step prediction).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seed: u64,
    /// Total weight counts of the sweep (J = 2 outputs on a square grid).
    pub sweep: Vec<usize>,
    pub spacing: f64,
    pub support: f64,
    pub length_scale: f64,
    pub prior_weight_variance: f64,
    pub sample_time: f64,
    pub drive_noise: f64,
    pub obs_noise: f64,
    pub warmup: usize,
    pub reps: usize,
    /// Dense method skipped above this total weight count.
    pub dense_weight_cap: usize,
    pub ordering: WeightOrdering,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            sweep: vec![1_000, 3_162, 10_000, 31_623, 100_000],
            spacing: 1.0,
            support: 5.0,
            length_scale: 1.0,
            prior_weight_variance: 0.01,
            sample_time: 0.2,
            drive_noise: 0.1,
            obs_noise: 0.2,
            warmup: 5,
            reps: 25,
            dense_weight_cap: 12_000,
            ordering: WeightOrdering::Staggered,
        }
    }
}
