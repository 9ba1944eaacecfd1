use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde_json::json;

use super::SimError;

/// A simulated ground-truth trajectory with its noisy observations.
///
/// `states[k]`, `observations[k]`, `inputs[k]`, and `truth_aux[k]` all
/// refer to time step `k`; `truth_aux` carries generator-specific truth
/// channels (labeled by `aux_labels`), such as the true acceleration or
/// the true slip.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub label: String,
    pub seed: u64,
    pub sample_time: f64,
    pub states: Vec<DVector<f64>>,
    pub observations: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub truth_aux: Vec<DVector<f64>>,
    pub aux_labels: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// One row per step: time, true state, observation, truth channels.
    /// Decimal point, comma separator, header row.
    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut w = BufWriter::new(File::create(path)?);
        let n_x = self.states.first().map(|s| s.len()).unwrap_or(0);
        let n_y = self.observations.first().map(|s| s.len()).unwrap_or(0);
        let mut header = vec!["time".to_string()];
        header.extend((0..n_x).map(|i| format!("state_{i}")));
        header.extend((0..n_y).map(|i| format!("obs_{i}")));
        header.extend(self.aux_labels.iter().cloned());
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", k as f64 * self.sample_time)];
            row.extend(self.states[k].iter().map(|v| format!("{v}")));
            row.extend(self.observations[k].iter().map(|v| format!("{v}")));
            if k < self.truth_aux.len() {
                row.extend(self.truth_aux[k].iter().map(|v| format!("{v}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar with reproducibility metadata.
    pub fn write_sidecar(&self, path: &Path, params: serde_json::Value) -> Result<(), SimError> {
        let doc = json!({
            "label": self.label,
            "seed": self.seed,
            "sample_time": self.sample_time,
            "steps": self.len(),
            "params": params,
        });
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}
