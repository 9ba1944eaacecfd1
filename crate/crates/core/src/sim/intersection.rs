use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
}

/// Geometry and sampling parameters of the synthetic three-way
/// intersection: a straight approach along +y, a quarter-circle turn left
/// or right, and a straight exit along ±x.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntersectionGeometry {
    /// Straight approach length before the turn begins, m.
    pub approach_length: f64,
    /// Turn radius, m.
    pub turn_radius: f64,
    /// Straight exit length after the turn, m.
    pub exit_length: f64,
    /// Mean vehicle speed, m/s.
    pub speed_mean: f64,
    /// Relative speed deviation (1σ).
    pub speed_deviation: f64,
    /// Position measurement noise variance per axis, m².
    pub obs_noise_variance: f64,
    /// Sampling interval, s.
    pub sample_time: f64,
}

impl Default for IntersectionGeometry {
    fn default() -> Self {
        Self {
            approach_length: 12.0,
            turn_radius: 6.0,
            exit_length: 12.0,
            speed_mean: 10.0,
            speed_deviation: 0.05,
            obs_noise_variance: 0.2,
            sample_time: 0.2,
        }
    }
}

impl IntersectionGeometry {
    pub fn path_length(&self) -> f64 {
        self.approach_length + std::f64::consts::FRAC_PI_2 * self.turn_radius + self.exit_length
    }

    /// Axis-aligned bounding box of both paths, for grid sizing.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let x_max = self.turn_radius + self.exit_length;
        let y_max = self.approach_length + self.turn_radius;
        ([-x_max, 0.0], [x_max, y_max])
    }

    /// Position, velocity, and acceleration at arc length `s` along the
    /// chosen path, at speed `v`.
    fn kinematics(&self, s: f64, v: f64, turn: TurnDirection) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let sign = match turn {
            TurnDirection::Right => 1.0,
            TurnDirection::Left => -1.0,
        };
        let l_a = self.approach_length;
        let rho = self.turn_radius;
        let arc = std::f64::consts::FRAC_PI_2 * rho;
        if s < l_a {
            ([0.0, s], [0.0, v], [0.0, 0.0])
        } else if s < l_a + arc {
            // quarter circle with center (±rho, l_a)
            let phi = (s - l_a) / rho;
            let cx = sign * rho;
            let pos = [cx - sign * phi.cos() * rho, l_a + phi.sin() * rho];
            let vel = [sign * phi.sin() * v, phi.cos() * v];
            let a_mag = v * v / rho;
            // centripetal: toward the center
            let acc = [
                (cx - pos[0]) / rho * a_mag,
                (l_a - pos[1]) / rho * a_mag,
            ];
            (pos, vel, acc)
        } else {
            let tail = s - l_a - arc;
            (
                [sign * (rho + tail), l_a + rho],
                [sign * v, 0.0],
                [0.0, 0.0],
            )
        }
    }
}

/// Simulate `n_vehicles` independent traversals; turn direction is an
/// even coin flip, speed is drawn per vehicle around the mean.
pub fn simulate_intersection(
    geometry: &IntersectionGeometry,
    n_vehicles: usize,
    seed: u64,
) -> Vec<Trajectory> {
    (0..n_vehicles)
        .map(|i| simulate_vehicle(geometry, seed, i as u64))
        .collect()
}

fn simulate_vehicle(geometry: &IntersectionGeometry, seed: u64, vehicle: u64) -> Trajectory {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (0xD1B5_4A32_D192_ED03u64.wrapping_mul(vehicle + 1)));
    let obs_noise = Normal::new(0.0, geometry.obs_noise_variance.sqrt()).expect("valid std");
    let speed_dist = Normal::new(
        geometry.speed_mean,
        geometry.speed_mean * geometry.speed_deviation,
    )
    .expect("valid std");
    let turn = if rng.random_bool(0.5) {
        TurnDirection::Left
    } else {
        TurnDirection::Right
    };
    let v = speed_dist
        .sample(&mut rng)
        .clamp(0.5 * geometry.speed_mean, 1.5 * geometry.speed_mean);

    let length = geometry.path_length();
    let mut states = Vec::new();
    let mut observations = Vec::new();
    let mut truth_aux = Vec::new();
    let mut k = 0usize;
    loop {
        let s = v * k as f64 * geometry.sample_time;
        if s > length {
            break;
        }
        let (pos, vel, acc) = geometry.kinematics(s, v, turn);
        states.push(DVector::from_vec(vec![pos[0], pos[1], vel[0], vel[1]]));
        observations.push(DVector::from_vec(vec![
            pos[0] + obs_noise.sample(&mut rng),
            pos[1] + obs_noise.sample(&mut rng),
        ]));
        truth_aux.push(DVector::from_vec(vec![acc[0], acc[1]]));
        k += 1;
    }
    let inputs = vec![DVector::zeros(0); states.len()];
    Trajectory {
        label: match turn {
            TurnDirection::Left => "left".to_string(),
            TurnDirection::Right => "right".to_string(),
        },
        seed,
        sample_time: geometry.sample_time,
        states,
        observations,
        inputs,
        truth_aux,
        aux_labels: vec!["true_accel_x".to_string(), "true_accel_y".to_string()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_segments_have_zero_acceleration() {
        let geom = IntersectionGeometry::default();
        let trajs = simulate_intersection(&geom, 5, 1);
        for t in &trajs {
            for k in 0..t.len() {
                let y = t.states[k][1];
                let on_approach = y < geom.approach_length - 0.5;
                if on_approach {
                    assert_eq!(t.truth_aux[k][0], 0.0);
                    assert_eq!(t.truth_aux[k][1], 0.0);
                }
            }
        }
    }

    #[test]
    fn arc_acceleration_is_centripetal() {
        let geom = IntersectionGeometry::default();
        // mid-arc sample for a known speed
        let v = 10.0;
        let s = geom.approach_length + std::f64::consts::FRAC_PI_4 * geom.turn_radius;
        let (_, vel, acc) = geom.kinematics(s, v, TurnDirection::Right);
        let a_mag = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
        assert!((a_mag - v * v / geom.turn_radius).abs() < 1e-12);
        // acceleration orthogonal to velocity
        assert!((acc[0] * vel[0] + acc[1] * vel[1]).abs() < 1e-9);
    }

    #[test]
    fn path_is_continuous_across_segments() {
        let geom = IntersectionGeometry::default();
        for turn in [TurnDirection::Left, TurnDirection::Right] {
            let mut prev: Option<[f64; 2]> = None;
            let v = 10.0;
            let mut s = 0.0;
            while s < geom.path_length() {
                let (pos, _, _) = geom.kinematics(s, v, turn);
                if let Some(p) = prev {
                    let d = ((pos[0] - p[0]).powi(2) + (pos[1] - p[1]).powi(2)).sqrt();
                    assert!(d < 0.12, "jump of {d} at arc length {s}");
                }
                prev = Some(pos);
                s += 0.1;
            }
        }
    }

    #[test]
    fn equal_probability_branching() {
        let geom = IntersectionGeometry::default();
        let trajs = simulate_intersection(&geom, 1000, 77);
        let left = trajs.iter().filter(|t| t.label == "left").count() as f64 / 1000.0;
        assert!((0.46..=0.54).contains(&left), "left fraction {left}");
    }

    #[test]
    fn speeds_spread_around_the_mean() {
        let geom = IntersectionGeometry::default();
        let trajs = simulate_intersection(&geom, 200, 5);
        let speeds: Vec<f64> = trajs
            .iter()
            .map(|t| {
                let s = &t.states[0];
                (s[2] * s[2] + s[3] * s[3]).sqrt()
            })
            .collect();
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!((mean - 10.0).abs() < 0.2, "mean speed {mean}");
        assert!(speeds.iter().any(|&v| v < 9.9));
        assert!(speeds.iter().any(|&v| v > 10.1));
    }

    #[test]
    fn observation_noise_matches_configured_variance() {
        let geom = IntersectionGeometry::default();
        let trajs = simulate_intersection(&geom, 300, 13);
        let mut sq = 0.0;
        let mut n = 0usize;
        for t in &trajs {
            for k in 0..t.len() {
                for axis in 0..2 {
                    let e = t.observations[k][axis] - t.states[k][axis];
                    sq += e * e;
                    n += 1;
                }
            }
        }
        let var = sq / n as f64;
        let band = 3.0 * geom.obs_noise_variance * (2.0 / n as f64).sqrt();
        assert!((var - geom.obs_noise_variance).abs() <= band, "variance {var}");
    }

    #[test]
    fn deterministic_per_seed() {
        let geom = IntersectionGeometry::default();
        let a = simulate_intersection(&geom, 3, 9);
        let b = simulate_intersection(&geom, 3, 9);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.label, y.label);
            assert_eq!(x.observations, y.observations);
        }
    }
}
