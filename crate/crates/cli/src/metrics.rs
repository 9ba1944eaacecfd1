//! RMSE metrics and the serializable experiment report.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;

use crate::timing::TimingStats;
use crate::HarnessError;

/// Root mean squared error over the selected state components.
pub fn compute_rmse(
    estimates: &[DVector<f64>],
    truth: &[DVector<f64>],
    fields: &[usize],
) -> Result<f64, HarnessError> {
    if estimates.is_empty() || estimates.len() != truth.len() {
        return Err(HarnessError::Config(format!(
            "rmse needs equal non-empty sequences, got {} and {}",
            estimates.len(),
            truth.len()
        )));
    }
    let mut acc = 0.0;
    let mut n = 0usize;
    for (e, t) in estimates.iter().zip(truth) {
        for &f in fields {
            let d = e[f] - t[f];
            acc += d * d;
            n += 1;
        }
    }
    Ok((acc / n as f64).sqrt())
}

/// Scalar RMSE between two equal-length series.
pub fn compute_rmse_scalar(a: &[f64], b: &[f64]) -> Result<f64, HarnessError> {
    if a.is_empty() || a.len() != b.len() {
        return Err(HarnessError::Config(
            "rmse needs equal non-empty sequences".to_string(),
        ));
    }
    let acc: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((acc / a.len() as f64).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingEntry {
    pub name: String,
    pub reps: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

impl TimingEntry {
    pub fn new(name: impl Into<String>, stats: &TimingStats) -> Self {
        Self {
            name: name.into(),
            reps: stats.reps,
            mean_s: stats.mean_s,
            std_s: stats.std_s,
            median_s: stats.median_s,
            min_s: stats.min_s,
            max_s: stats.max_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ActiveStats {
    pub mean: f64,
    pub max: usize,
    pub bound: usize,
}

/// Aggregated result of one experiment invocation. Timings are excluded
/// from reproducibility comparisons; everything else is deterministic for
/// a fixed configuration and seed.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub seed: u64,
    pub runs: usize,
    /// Named scalar results (mean RMSEs, ratios, counts).
    pub summary: BTreeMap<String, f64>,
    /// Per-run series keyed by name.
    pub per_run: BTreeMap<String, Vec<f64>>,
    pub timings: Vec<TimingEntry>,
    pub active_stats: Option<ActiveStats>,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    pub fn new(experiment: impl Into<String>, seed: u64, runs: usize) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            runs,
            summary: BTreeMap::new(),
            per_run: BTreeMap::new(),
            timings: Vec::new(),
            active_stats: None,
            warnings: Vec::new(),
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}
