//! Ground-truth generators for the bundled experiments: scalar-track
//! scenarios, a longitudinal Pacejka vehicle, and a synthetic three-way
//! intersection.
//!
//! All generators are pure functions of their seed: identical seeds give
//! bitwise-identical trajectories.

mod example1;
mod intersection;
mod pacejka;
mod tire;
mod trajectory;

pub use example1::{simulate_scenario1, simulate_scenario2, scenario2_acceleration};
pub use intersection::{simulate_intersection, IntersectionGeometry, TurnDirection};
pub use pacejka::{pacejka_mu, PacejkaParams};
pub use tire::{simulate_tire_runs, TireSimParams};
pub use trajectory::Trajectory;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
