//! Result emitters: output directory layout, `metrics.json`, and CSV
//! tables ('.' decimal, comma separated, header row).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::metrics::MetricsReport;
use crate::HarnessError;

/// `results/<experiment>/<timestamp>/`, or `<base>/` when an explicit
/// output directory is given.
pub fn prepare_out_dir(base: Option<&Path>, experiment: &str) -> Result<PathBuf, HarnessError> {
    let dir = match base {
        Some(p) => p.to_path_buf(),
        None => {
            let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
            PathBuf::from("results").join(experiment).join(stamp.to_string())
        }
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn write_metrics(dir: &Path, report: &MetricsReport) -> Result<PathBuf, HarnessError> {
    let path = dir.join("metrics.json");
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    Ok(path)
}

pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn fmt(value: f64) -> String {
    format!("{value}")
}
