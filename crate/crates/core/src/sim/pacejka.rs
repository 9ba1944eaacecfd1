use serde::{Deserialize, Serialize};

/// Magic-formula tire parameters; defaults correspond to an asphalt
/// surface.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PacejkaParams {
    pub stiffness: f64,
    pub shape: f64,
    pub peak: f64,
    pub curvature: f64,
}

impl Default for PacejkaParams {
    fn default() -> Self {
        Self {
            stiffness: 11.7,
            shape: 1.69,
            peak: 1.2,
            curvature: 0.377,
        }
    }
}

/// Friction coefficient `μ(s) = D sin(C arctan(Bs − E(Bs − arctan Bs)))`.
pub fn pacejka_mu(slip: f64, p: &PacejkaParams) -> f64 {
    let bs = p.stiffness * slip;
    p.peak * (p.shape * (bs - p.curvature * (bs - bs.atan())).atan()).sin()
}
