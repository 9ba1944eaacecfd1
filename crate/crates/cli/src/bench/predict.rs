//! One-step-ahead prediction benchmark: wall time of a single time update
//! from the shipped prior, per method, as the total basis count grows.
//! The dense baseline is skipped above the memory-guard cap.

use std::hint::black_box;

use bfekf_core::basis::{active_upper_bound, BasisConfig};
use bfekf_core::filter::{memory_estimate, ActiveSelection};
use bfekf_core::ssmodel::build_cv_model;
use bfekf_core::AugmentedEkf;
use nalgebra::{DMatrix, DVector};

use super::{bench_grid, query_point};
use crate::config::BenchConfig;
use crate::experiments::MethodSet;
use crate::metrics::{MetricsReport, TimingEntry};
use crate::timing::measure_with_setup;
use crate::HarnessError;

pub struct BenchPredictOutput {
    pub report: MetricsReport,
    pub rows: Vec<Vec<String>>,
    pub header: Vec<String>,
}

pub fn run_bench_predict(
    cfg: &BenchConfig,
    methods: MethodSet,
) -> Result<BenchPredictOutput, HarnessError> {
    if cfg.sweep.is_empty() {
        return Err(HarnessError::Config("empty benchmark sweep".into()));
    }
    let mut report = MetricsReport::new("bench-predict", cfg.seed, cfg.reps);
    let header = vec![
        "n_w_total".to_string(),
        "n_w_per_output".to_string(),
        "active_count".to_string(),
        "memory_estimate_bits".to_string(),
        "dense_median_s".to_string(),
        "exact_median_s".to_string(),
        "fast_median_s".to_string(),
    ];
    let mut rows = Vec::new();
    let mut medians: std::collections::BTreeMap<&str, Vec<(usize, f64)>> = Default::default();
    let mut dense_skipped = 0usize;

    for &target in &cfg.sweep {
        let grid = bench_grid(target, cfg.spacing)?;
        let n_w = grid.total_centers();
        let total = 2 * n_w;
        let xq = query_point(&grid, cfg.spacing);
        let x0 = DVector::from_vec(vec![xq[0], xq[1], 1.0, 0.5]);
        let p0 = DMatrix::identity(4, 4) * 0.1;
        let u = DVector::zeros(0);
        let drive_noise = DMatrix::identity(2, 2) * cfg.drive_noise;
        let obs_noise = DMatrix::identity(2, 2) * cfg.obs_noise;
        let mem_bits = memory_estimate(n_w, 2, 64)?;

        let mut row = vec![
            format!("{total}"),
            format!("{n_w}"),
            String::new(),
            format!("{mem_bits}"),
            String::new(),
            String::new(),
            String::new(),
        ];

        let variants: [(&str, bool, usize); 3] = [
            ("dense", methods.dense, 4),
            ("exact", methods.exact, 5),
            ("fast", methods.fast, 6),
        ];
        for (label, enabled, col) in variants {
            if !enabled {
                continue;
            }
            if label == "dense" && total > cfg.dense_weight_cap {
                dense_skipped += 1;
                report.warnings.push(format!(
                    "dense prediction skipped at {total} weights (memory guard cap {})",
                    cfg.dense_weight_cap
                ));
                continue;
            }
            let basis = match label {
                "dense" => BasisConfig::gaussian(cfg.length_scale, cfg.prior_weight_variance)?,
                _ => BasisConfig::wendland(cfg.support, cfg.prior_weight_variance)?,
            };
            let selection = match label {
                "dense" => ActiveSelection::All,
                "exact" => ActiveSelection::Exact,
                _ => ActiveSelection::Fast,
            };
            let model = build_cv_model(cfg.sample_time, &drive_noise, &obs_noise, &grid, &basis)?
                .with_ordering(cfg.ordering);
            let filter = AugmentedEkf::new(model, grid.clone(), basis, selection)?;
            let mut last_active = 0usize;
            let stats = measure_with_setup(
                cfg.warmup,
                cfg.reps,
                || {
                    if label == "dense" {
                        filter.init_state(x0.clone(), p0.clone())
                    } else {
                        filter.init_state_tracked(x0.clone(), p0.clone())
                    }
                },
                |mut state| {
                    let st = match label {
                        "dense" => filter.time_update_dense(&mut state, &u).unwrap(),
                        _ => filter.time_update_sparse(&mut state, &u).unwrap(),
                    };
                    last_active = st.active_weights;
                    black_box(&state);
                },
            );
            if label != "dense" {
                row[2] = format!("{last_active}");
            }
            row[col] = format!("{}", stats.median_s);
            report
                .timings
                .push(TimingEntry::new(format!("predict_{label}_nw{total}"), &stats));
            medians.entry(label).or_default().push((total, stats.median_s));
        }
        rows.push(row);
    }

    for label in ["exact", "fast"] {
        if let Some(series) = medians.get(label) {
            if series.len() >= 2 {
                let min = series.iter().map(|(_, v)| *v).fold(f64::MAX, f64::min);
                let max = series.iter().map(|(_, v)| *v).fold(f64::MIN, f64::max);
                report
                    .summary
                    .insert(format!("{label}_predict_flatness_ratio"), max / min);
            }
        }
    }
    if let Some(series) = medians.get("dense") {
        if series.len() >= 2 {
            let (n0, t0) = series[0];
            let (n1, t1) = *series.last().unwrap();
            report
                .summary
                .insert("dense_predict_growth_ratio".into(), t1 / t0);
            report
                .summary
                .insert("dense_predict_size_ratio".into(), n1 as f64 / n0 as f64);
        }
    }
    report
        .summary
        .insert("dense_skipped_points".into(), dense_skipped as f64);
    report.summary.insert(
        "active_upper_bound_per_output".into(),
        active_upper_bound(cfg.support, cfg.spacing, 2)? as f64,
    );
    Ok(BenchPredictOutput {
        report,
        rows,
        header,
    })
}
