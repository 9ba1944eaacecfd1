//! Monte Carlo experiment runners.

pub mod example1;
pub mod intersection;
pub mod tire;

use bfekf_core::sim::Trajectory;
use bfekf_core::{AugmentedEkf, FilterState};
use nalgebra::DVector;

use crate::timing::StepTimer;
use crate::HarnessError;

/// Which filter variants an invocation runs.
#[derive(Debug, Clone, Copy)]
pub struct MethodSet {
    pub dense: bool,
    pub exact: bool,
    pub fast: bool,
}

impl MethodSet {
    pub fn all() -> Self {
        Self {
            dense: true,
            exact: true,
            fast: true,
        }
    }

    pub fn sparse(&self) -> bool {
        self.exact || self.fast
    }
}

/// Result of filtering one trajectory.
pub struct DriveOutcome {
    /// Post-update state means for steps `1..len`.
    pub estimates: Vec<DVector<f64>>,
    pub max_active: usize,
}

/// Run predict/update over a trajectory: predict from step `k` to `k+1`
/// with the held input, then correct with the observation at `k+1`.
pub fn drive(
    filter: &AugmentedEkf,
    state: &mut FilterState,
    traj: &Trajectory,
    mut timers: Option<(&mut StepTimer, &mut StepTimer)>,
) -> Result<DriveOutcome, HarnessError> {
    let mut estimates = Vec::with_capacity(traj.len().saturating_sub(1));
    let mut max_active = 0usize;
    for k in 1..traj.len() {
        let u_prev = &traj.inputs[k - 1];
        let u_now = &traj.inputs[k];
        let y = &traj.observations[k];
        let stats = match timers.as_mut() {
            Some((t, _)) => t.time(|| filter.time_update(state, u_prev))?,
            None => filter.time_update(state, u_prev)?,
        };
        max_active = max_active.max(stats.active_weights);
        let stats = match timers.as_mut() {
            Some((_, m)) => m.time(|| filter.measurement_update(state, y, u_now))?,
            None => filter.measurement_update(state, y, u_now)?,
        };
        max_active = max_active.max(stats.active_weights);
        estimates.push(state.state_mean.clone());
    }
    Ok(DriveOutcome {
        estimates,
        max_active,
    })
}

/// Deterministic per-run seed derivation.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}
