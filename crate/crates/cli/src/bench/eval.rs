//! Evaluation-time benchmark: computing the unknown input `u_f` at a
//! single point under the dense, exact-compact, and fast-compact methods.

use std::hint::black_box;

use bfekf_core::basis::{
    active_fast, active_upper_bound, eval_active, eval_dense, BasisConfig,
};
use bfekf_core::ssmodel::{unknown_from_beta, unknown_from_beta_full, WeightOrdering};
use nalgebra::DVector;

use super::{bench_grid, query_point, random_weights};
use crate::config::BenchConfig;
use crate::experiments::MethodSet;
use crate::metrics::{MetricsReport, TimingEntry};
use crate::timing::measure;
use crate::HarnessError;

pub struct BenchEvalOutput {
    pub report: MetricsReport,
    pub rows: Vec<Vec<String>>,
    pub header: Vec<String>,
}

pub fn run_bench_eval(cfg: &BenchConfig, methods: MethodSet) -> Result<BenchEvalOutput, HarnessError> {
    if cfg.sweep.is_empty() {
        return Err(HarnessError::Config("empty benchmark sweep".into()));
    }
    let mut report = MetricsReport::new("bench-eval", cfg.seed, cfg.reps);
    let j_dim = 2usize;
    let header = vec![
        "n_w_total".to_string(),
        "n_w_per_output".to_string(),
        "active_count".to_string(),
        "dense_median_s".to_string(),
        "exact_median_s".to_string(),
        "fast_median_s".to_string(),
    ];
    let mut rows = Vec::new();
    let mut fast_medians = Vec::new();
    let mut dense_medians = Vec::new();
    let mut exact_medians = Vec::new();

    for &target in &cfg.sweep {
        let grid = bench_grid(target, cfg.spacing)?;
        let n_w = grid.total_centers();
        let total = j_dim * n_w;
        let x = query_point(&grid, cfg.spacing);
        let theta = random_weights(total, cfg.seed ^ target as u64);
        let wendland = BasisConfig::wendland(cfg.support, cfg.prior_weight_variance)?;
        let gaussian = BasisConfig::gaussian(cfg.length_scale, cfg.prior_weight_variance)?;
        let ordering = cfg.ordering;

        let active = active_fast(&x, &grid, &wendland)?;
        let active_count = active.count();

        let dense_stats = methods.dense.then(|| {
            measure(cfg.warmup, cfg.reps, || {
                let beta = eval_dense(&x, &grid, &gaussian).unwrap();
                let u = unknown_from_beta_full(&beta, &theta, ordering, j_dim);
                black_box(u);
            })
        });
        // the naive compact method: evaluate every basis value, keep the
        // non-zero ones, then combine
        let exact_stats = methods.exact.then(|| {
            measure(cfg.warmup, cfg.reps, || {
                let beta = eval_dense(&x, &grid, &wendland).unwrap();
                let mut u = DVector::<f64>::zeros(j_dim);
                for (i, &b) in beta.iter().enumerate() {
                    if b != 0.0 {
                        for j in 0..j_dim {
                            let w = match ordering {
                                WeightOrdering::Stacked => theta[j * n_w + i],
                                WeightOrdering::Staggered => theta[i * j_dim + j],
                            };
                            u[j] += b * w;
                        }
                    }
                }
                black_box(u);
            })
        });
        let fast_stats = methods.fast.then(|| {
            measure(cfg.warmup, cfg.reps, || {
                let a = active_fast(&x, &grid, &wendland).unwrap();
                let beta = eval_active(&x, &grid, &wendland, &a).unwrap();
                let u = unknown_from_beta(&beta, &theta, &a, ordering, n_w, j_dim);
                black_box(u);
            })
        });

        let fmt_opt = |s: &Option<crate::timing::TimingStats>| {
            s.map(|v| format!("{}", v.median_s)).unwrap_or_default()
        };
        rows.push(vec![
            format!("{total}"),
            format!("{n_w}"),
            format!("{active_count}"),
            fmt_opt(&dense_stats),
            fmt_opt(&exact_stats),
            fmt_opt(&fast_stats),
        ]);
        for (label, stats) in [
            ("dense", &dense_stats),
            ("exact", &exact_stats),
            ("fast", &fast_stats),
        ] {
            if let Some(s) = stats {
                report
                    .timings
                    .push(TimingEntry::new(format!("eval_{label}_nw{total}"), s));
            }
        }
        if let Some(s) = dense_stats {
            dense_medians.push((total, s.median_s));
        }
        if let Some(s) = exact_stats {
            exact_medians.push((total, s.median_s));
        }
        if let Some(s) = fast_stats {
            fast_medians.push((total, s.median_s));
        }
    }

    if fast_medians.len() >= 2 {
        let first = fast_medians.first().unwrap().1;
        let last = fast_medians.last().unwrap().1;
        report
            .summary
            .insert("fast_eval_sweep_ratio".into(), last / first);
    }
    // dense/fast at the sweep entry closest to 1e4 total weights
    let closest = |series: &[(usize, f64)], target: usize| {
        series
            .iter()
            .min_by_key(|(n, _)| n.abs_diff(target))
            .map(|&(n, v)| (n, v))
    };
    if let (Some((n_d, d)), Some((_, f))) = (
        closest(&dense_medians, 10_000),
        closest(&fast_medians, 10_000),
    ) {
        report
            .summary
            .insert("dense_over_fast_at_1e4".into(), d / f);
        report.summary.insert("dense_at_1e4_nw".into(), n_d as f64);
    }
    // dense vs exact spread across the sweep (they do the same amount of
    // per-center work)
    let mut worst = 0.0f64;
    for ((_, d), (_, e)) in dense_medians.iter().zip(&exact_medians) {
        worst = worst.max(d / e).max(e / d);
    }
    if !dense_medians.is_empty() && !exact_medians.is_empty() {
        report
            .summary
            .insert("dense_exact_max_ratio".into(), worst);
    }

    // Weight-ordering timing ratio (informational): full dense combination
    // under both layouts at the largest sweep entry.
    if let Some(&target) = cfg.sweep.iter().min_by_key(|&&n| n.abs_diff(10_000)) {
        let grid = bench_grid(target, cfg.spacing)?;
        let n_w = grid.total_centers();
        let theta = random_weights(j_dim * n_w, cfg.seed ^ 0xABCD);
        let x = query_point(&grid, cfg.spacing);
        let gaussian = BasisConfig::gaussian(cfg.length_scale, cfg.prior_weight_variance)?;
        let beta = eval_dense(&x, &grid, &gaussian)?;
        let stacked = measure(cfg.warmup, cfg.reps, || {
            black_box(unknown_from_beta_full(
                &beta,
                &theta,
                WeightOrdering::Stacked,
                j_dim,
            ));
        });
        let staggered = measure(cfg.warmup, cfg.reps, || {
            black_box(unknown_from_beta_full(
                &beta,
                &theta,
                WeightOrdering::Staggered,
                j_dim,
            ));
        });
        report.summary.insert(
            "ordering_time_ratio_staggered_over_stacked".into(),
            staggered.median_s / stacked.median_s,
        );
        report
            .timings
            .push(TimingEntry::new("eval_ordering_stacked", &stacked));
        report
            .timings
            .push(TimingEntry::new("eval_ordering_staggered", &staggered));
    }

    let bound = active_upper_bound(cfg.support, cfg.spacing, 2)?;
    report
        .summary
        .insert("active_upper_bound_per_output".into(), bound as f64);

    Ok(BenchEvalOutput {
        report,
        rows,
        header,
    })
}
