use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::trajectory::Trajectory;

/// True acceleration of the second scenario:
/// `½ sin(π p / 25) + 0.01` as a function of the position.
pub fn scenario2_acceleration(position: f64) -> f64 {
    0.5 * (std::f64::consts::PI * position / 25.0).sin() + 0.01
}

/// Scenario 1: the true system is the plain constant-velocity model with
/// process noise variance `q` and position-measurement variance `r`.
pub fn simulate_scenario1(steps: usize, q: f64, r: f64, seed: u64) -> Trajectory {
    simulate_scalar_track(steps, q, r, seed, "scenario1", |_| 0.0)
}

/// Scenario 2: constant velocity driven by the known sinusoidal
/// acceleration, same noise levels.
pub fn simulate_scenario2(steps: usize, q: f64, r: f64, seed: u64) -> Trajectory {
    simulate_scalar_track(steps, q, r, seed, "scenario2", scenario2_acceleration)
}

fn simulate_scalar_track(
    steps: usize,
    q: f64,
    r: f64,
    seed: u64,
    label: &str,
    accel: impl Fn(f64) -> f64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w_dist = Normal::new(0.0, q.sqrt()).expect("valid std");
    let e_dist = Normal::new(0.0, r.sqrt()).expect("valid std");
    let mut pos = 0.0f64;
    let mut vel = 1.0f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut observations = Vec::with_capacity(steps + 1);
    let mut truth_aux = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        let a = accel(pos);
        states.push(DVector::from_vec(vec![pos, vel]));
        observations.push(DVector::from_element(1, pos + e_dist.sample(&mut rng)));
        truth_aux.push(DVector::from_element(1, a));
        // x+ = F x + G (a + w), F = [[1,1],[0,1]], G = [1/2, 1]
        let w = w_dist.sample(&mut rng);
        let drive = a + w;
        pos += vel + 0.5 * drive;
        vel += drive;
    }
    Trajectory {
        label: label.to_string(),
        seed,
        sample_time: 1.0,
        states,
        observations,
        inputs: vec![DVector::zeros(0); steps + 1],
        truth_aux,
        aux_labels: vec!["true_accel".to_string()],
    }
}
