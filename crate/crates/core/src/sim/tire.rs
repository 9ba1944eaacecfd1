use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::pacejka::{pacejka_mu, PacejkaParams};
use super::trajectory::Trajectory;
use crate::ssmodel::TireParams;

/// Drive-profile parameters for the synthetic acceleration runs.
///
/// The front-wheel speed is commanded so that the slip ramps up to a peak
/// near the friction optimum and settles back as the vehicle approaches
/// the target speed; only the visited slip range matters for learning.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TireSimParams {
    /// Target terminal speed, m/s.
    pub target_speed: f64,
    /// Time over which the commanded slip ramps to its peak, s.
    pub ramp_time: f64,
    /// Commanded peak slip (randomized per run within ±`peak_slip_spread`).
    pub peak_slip: f64,
    pub peak_slip_spread: f64,
    /// Slip command once the run settles.
    pub settle_slip: f64,
    /// Speed fraction of the target at which the slip command starts
    /// blending down.
    pub settle_fraction: f64,
    /// Measurement noise standard deviations: longitudinal acceleration
    /// and wheel angular velocity.
    pub accel_noise_std: f64,
    pub wheel_speed_noise_std: f64,
    /// Hard cap on the step count of one run.
    pub max_steps: usize,
}

impl Default for TireSimParams {
    fn default() -> Self {
        Self {
            target_speed: 20.0,
            ramp_time: 1.5,
            peak_slip: 0.16,
            peak_slip_spread: 0.06,
            settle_slip: 0.02,
            settle_fraction: 0.85,
            accel_noise_std: 0.1,
            wheel_speed_noise_std: 0.01,
            max_steps: 1500,
        }
    }
}

/// Simulate `n_runs` accelerations from standstill to roughly the target
/// speed.
///
/// Per step the trajectory records the true velocity state, the noisy
/// observations `[longitudinal acceleration, velocity]`, the noisy
/// front-wheel angular velocity as the known input, and the truth
/// channels `[G·μ(s), s]` (true friction acceleration and true slip).
pub fn simulate_tire_runs(
    pacejka: &PacejkaParams,
    tire: &TireParams,
    sim: &TireSimParams,
    n_runs: usize,
    seed: u64,
) -> Vec<Trajectory> {
    (0..n_runs)
        .map(|run| simulate_one(pacejka, tire, sim, seed, run as u64))
        .collect()
}

fn simulate_one(
    pacejka: &PacejkaParams,
    tire: &TireParams,
    sim: &TireSimParams,
    seed: u64,
    run: u64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(run + 1)));
    let accel_noise = Normal::new(0.0, sim.accel_noise_std).expect("valid std");
    let wheel_noise = Normal::new(0.0, sim.wheel_speed_noise_std).expect("valid std");
    let peak_slip =
        sim.peak_slip + rng.random_range(-sim.peak_slip_spread..=sim.peak_slip_spread);
    let gain = tire.force_gain();
    let t_s = tire.sample_time;

    let mut v = 0.0f64;
    let mut states = Vec::new();
    let mut observations = Vec::new();
    let mut inputs = Vec::new();
    let mut truth_aux = Vec::new();
    for k in 0..sim.max_steps {
        let time = k as f64 * t_s;
        // slip command: ramp to the peak, blend down near target speed
        let ramp = (time / sim.ramp_time).min(1.0);
        let settle_start = sim.settle_fraction * sim.target_speed;
        let blend = if v <= settle_start {
            1.0
        } else {
            ((sim.target_speed - v) / (sim.target_speed - settle_start)).max(0.0)
        };
        let s_cmd = sim.settle_slip + (peak_slip - sim.settle_slip) * ramp * blend;

        // Command the wheel speed that realizes the scheduled slip under
        // the same clamped denominator the estimator uses, so the visited
        // slips stay on the schedule even during the standstill phase.
        let v_eff = v.max(tire.speed_floor);
        let omega_true = (v + s_cmd * v_eff) / tire.wheel_radius;
        let omega_meas = omega_true + wheel_noise.sample(&mut rng);
        let slip_true = (tire.wheel_radius * omega_true - v) / v_eff;
        let mu = pacejka_mu(slip_true, pacejka);
        let accel_true = gain * mu;

        states.push(DVector::from_element(1, v));
        observations.push(DVector::from_vec(vec![
            accel_true + accel_noise.sample(&mut rng),
            v + tire.wheel_radius * wheel_noise.sample(&mut rng),
        ]));
        inputs.push(DVector::from_element(1, omega_meas));
        truth_aux.push(DVector::from_vec(vec![accel_true, slip_true]));

        v += t_s * accel_true;
        if v >= sim.target_speed {
            break;
        }
    }
    Trajectory {
        label: format!("acceleration_{run}"),
        seed,
        sample_time: t_s,
        states,
        observations,
        inputs,
        truth_aux,
        aux_labels: vec!["true_friction_accel".to_string(), "true_slip".to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_rolling_stays_still() {
        let pacejka = PacejkaParams::default();
        let tire = TireParams::default();
        let sim = TireSimParams {
            peak_slip: 0.0,
            peak_slip_spread: 0.0,
            settle_slip: 0.0,
            ..TireSimParams::default()
        };
        let runs = simulate_tire_runs(&pacejka, &tire, &sim, 1, 7);
        let t = &runs[0];
        assert_eq!(t.len(), sim.max_steps);
        for k in 0..t.len() {
            assert_eq!(t.truth_aux[k][1], 0.0, "slip at step {k}");
            assert_eq!(t.truth_aux[k][0], 0.0, "accel at step {k}");
            assert_eq!(t.states[k][0], 0.0);
        }
    }

    #[test]
    fn default_profile_reaches_target_band() {
        let pacejka = PacejkaParams::default();
        let tire = TireParams::default();
        let sim = TireSimParams::default();
        for (i, t) in simulate_tire_runs(&pacejka, &tire, &sim, 10, 99)
            .iter()
            .enumerate()
        {
            let v_end = t.states.last().unwrap()[0];
            let v_final = v_end + tire.sample_time * t.truth_aux.last().unwrap()[0];
            assert!(
                (15.0..=25.0).contains(&v_final),
                "run {i} terminal speed {v_final}"
            );
        }
    }

    #[test]
    fn friction_truth_is_consistent_with_pacejka() {
        let pacejka = PacejkaParams::default();
        let tire = TireParams::default();
        let sim = TireSimParams::default();
        let runs = simulate_tire_runs(&pacejka, &tire, &sim, 3, 3);
        for t in &runs {
            for k in 0..t.len() {
                let s = t.truth_aux[k][1];
                let expected = tire.force_gain() * pacejka_mu(s, &pacejka);
                assert_eq!(t.truth_aux[k][0], expected);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let pacejka = PacejkaParams::default();
        let tire = TireParams::default();
        let sim = TireSimParams::default();
        let a = simulate_tire_runs(&pacejka, &tire, &sim, 2, 5);
        let b = simulate_tire_runs(&pacejka, &tire, &sim, 2, 5);
        assert_eq!(a[1].observations, b[1].observations);
        assert_eq!(a[1].inputs, b[1].inputs);
    }

    #[test]
    fn slip_visits_the_nonlinear_region() {
        let pacejka = PacejkaParams::default();
        let tire = TireParams::default();
        let sim = TireSimParams::default();
        let runs = simulate_tire_runs(&pacejka, &tire, &sim, 5, 11);
        for t in &runs {
            let max_slip = t
                .truth_aux
                .iter()
                .map(|a| a[1])
                .fold(f64::MIN, f64::max);
            assert!(max_slip > 0.08, "max slip {max_slip} stayed linear");
            assert!(max_slip < 0.5, "max slip {max_slip} outside the grid domain");
        }
    }
}
