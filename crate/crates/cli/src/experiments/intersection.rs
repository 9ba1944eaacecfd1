//! Three-way intersection study: sequential vehicles sharing one weight
//! posterior, RMSE as a function of vehicles processed, and per-step
//! update timing for the sparse and dense filters.

use std::collections::BTreeMap;

use bfekf_core::basis::{active_upper_bound, BasisConfig, CartesianGrid};
use bfekf_core::filter::ActiveSelection;
use bfekf_core::sim::{simulate_intersection, Trajectory};
use bfekf_core::ssmodel::build_cv_model;
use bfekf_core::{AugmentedEkf, FilterState};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{derive_seed, drive, MethodSet};
use crate::config::IntersectionConfig;
use crate::metrics::{compute_rmse, mean, ActiveStats, MetricsReport, TimingEntry};
use crate::timing::StepTimer;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Variant {
    FastCsrbf,
    DenseRbf,
    PlainCv,
}

impl Variant {
    fn label(self) -> &'static str {
        match self {
            Variant::FastCsrbf => "csrbf",
            Variant::DenseRbf => "dense_rbf",
            Variant::PlainCv => "plain_cv",
        }
    }
}

pub struct IntersectionOutput {
    pub report: MetricsReport,
    /// Overall-ordinal RMSE curves: vehicle, then per method position and
    /// velocity RMSE (mean over runs).
    pub rmse_rows: Vec<Vec<String>>,
    pub rmse_header: Vec<String>,
    /// Per-path curves: path, ordinal-within-path, per-method columns.
    pub path_rows: Vec<Vec<String>>,
    pub path_header: Vec<String>,
}

fn build_filter(cfg: &IntersectionConfig, variant: Variant) -> Result<AugmentedEkf, HarnessError> {
    let ([gx0, gy0], [gx1, gy1]) = cfg.geometry.bounds();
    let m = cfg.grid_margin;
    let grid = CartesianGrid::make_grid(&[gx0 - m, gy0 - m], &[gx1 + m, gy1 + m], cfg.spacing)?;
    let basis = match variant {
        Variant::DenseRbf => BasisConfig::gaussian(cfg.length_scale, cfg.prior_weight_variance)?,
        _ => BasisConfig::wendland(cfg.support, cfg.prior_weight_variance)?,
    };
    let drive_noise = DMatrix::identity(2, 2) * cfg.drive_noise;
    let obs_noise = DMatrix::identity(2, 2) * cfg.geometry.obs_noise_variance;
    let mut model = build_cv_model(
        cfg.geometry.sample_time,
        &drive_noise,
        &obs_noise,
        &grid,
        &basis,
    )?
    .with_ordering(cfg.ordering)
    .with_weight_noise(cfg.weight_noise)?;
    if matches!(variant, Variant::PlainCv) {
        model = model.without_expansion();
    }
    let selection = match variant {
        Variant::FastCsrbf => ActiveSelection::Fast,
        _ => ActiveSelection::All,
    };
    Ok(AugmentedEkf::new(model, grid, basis, selection)?)
}

struct VehicleScore {
    label: String,
    pos_rmse: f64,
    vel_rmse: f64,
}

/// Process all vehicles of one run sequentially, sharing the weight
/// posterior; the physical-state block is re-seeded from truth per
/// vehicle.
fn run_vehicles(
    filter: &AugmentedEkf,
    cfg: &IntersectionConfig,
    vehicles: &[Trajectory],
    tracked: bool,
    mut timers: Option<(&mut StepTimer, &mut StepTimer)>,
    max_active: &mut usize,
) -> Result<Vec<VehicleScore>, HarnessError> {
    let p0 = DMatrix::identity(4, 4) * cfg.state_prior;
    let mut state: FilterState = if tracked {
        filter.init_state_tracked(DVector::zeros(4), p0.clone())
    } else {
        filter.init_state(DVector::zeros(4), p0.clone())
    };
    let mut scores = Vec::with_capacity(vehicles.len());
    for traj in vehicles {
        state.reset_state_block(traj.states[0].clone(), p0.clone());
        let outcome = drive(
            filter,
            &mut state,
            traj,
            timers.as_mut().map(|(t, m)| (&mut **t, &mut **m)),
        )?;
        *max_active = (*max_active).max(outcome.max_active);
        let truth = &traj.states[1..];
        scores.push(VehicleScore {
            label: traj.label.clone(),
            pos_rmse: compute_rmse(&outcome.estimates, truth, &[0, 1])?,
            vel_rmse: compute_rmse(&outcome.estimates, truth, &[2, 3])?,
        });
    }
    Ok(scores)
}

pub fn run_intersection(
    cfg: &IntersectionConfig,
    methods: MethodSet,
) -> Result<IntersectionOutput, HarnessError> {
    if cfg.runs == 0 || cfg.vehicles == 0 {
        return Err(HarnessError::Config("runs and vehicles must be positive".into()));
    }
    let mut report = MetricsReport::new("intersection", cfg.seed, cfg.runs);

    let mut variants = vec![Variant::PlainCv];
    if methods.sparse() {
        variants.insert(0, Variant::FastCsrbf);
    }
    let probe = build_filter(cfg, Variant::FastCsrbf)?;
    let total_weights = probe.weight_dim();
    report
        .summary
        .insert("total_weights".into(), total_weights as f64);
    if methods.dense {
        if total_weights <= cfg.dense_weight_cap {
            variants.insert(if methods.sparse() { 1 } else { 0 }, Variant::DenseRbf);
        } else {
            report.warnings.push(format!(
                "dense baseline skipped: {total_weights} weights exceed the memory guard cap {}",
                cfg.dense_weight_cap
            ));
            report.summary.insert("dense_skipped".into(), 1.0);
        }
    }

    let filters: Vec<(Variant, AugmentedEkf)> = variants
        .iter()
        .map(|&v| build_filter(cfg, v).map(|f| (v, f)))
        .collect::<Result<_, _>>()?;

    // RMSE passes, parallel over runs.
    let pool = crate::run_pool();
    type RunScores = BTreeMap<Variant, Vec<VehicleScore>>;
    let results: Vec<Result<RunScores, HarnessError>> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run| {
                let vehicles = simulate_intersection(
                    &cfg.geometry,
                    cfg.vehicles,
                    derive_seed(cfg.seed, 11, run as u64),
                );
                let mut per_variant = BTreeMap::new();
                for (variant, filter) in &filters {
                    let tracked = matches!(variant, Variant::FastCsrbf);
                    let mut max_active = 0usize;
                    let scores =
                        run_vehicles(filter, cfg, &vehicles, tracked, None, &mut max_active)?;
                    per_variant.insert(*variant, scores);
                }
                Ok(per_variant)
            })
            .collect()
    });

    let mut all_runs: Vec<RunScores> = Vec::with_capacity(cfg.runs);
    for r in results {
        all_runs.push(r?);
    }

    // Aggregate overall-ordinal curves (mean over runs).
    let mut rmse_header = vec!["vehicle".to_string()];
    for (variant, _) in &filters {
        rmse_header.push(format!("{}_pos_rmse", variant.label()));
        rmse_header.push(format!("{}_vel_rmse", variant.label()));
    }
    let mut rmse_rows = Vec::with_capacity(cfg.vehicles);
    let mut curves: BTreeMap<Variant, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (variant, _) in &filters {
        let mut pos_curve = Vec::with_capacity(cfg.vehicles);
        let mut vel_curve = Vec::with_capacity(cfg.vehicles);
        for v in 0..cfg.vehicles {
            let pos: Vec<f64> = all_runs.iter().map(|r| r[variant][v].pos_rmse).collect();
            let vel: Vec<f64> = all_runs.iter().map(|r| r[variant][v].vel_rmse).collect();
            pos_curve.push(mean(&pos));
            vel_curve.push(mean(&vel));
        }
        curves.insert(*variant, (pos_curve, vel_curve));
    }
    for v in 0..cfg.vehicles {
        let mut row = vec![format!("{v}")];
        for (variant, _) in &filters {
            let (p, w) = &curves[variant];
            row.push(format!("{}", p[v]));
            row.push(format!("{}", w[v]));
        }
        rmse_rows.push(row);
    }

    // Per-path curves, truncated to the shortest per-path count.
    let mut path_header = vec!["path".to_string(), "ordinal".to_string()];
    for (variant, _) in &filters {
        path_header.push(format!("{}_pos_rmse", variant.label()));
        path_header.push(format!("{}_vel_rmse", variant.label()));
    }
    let mut path_rows = Vec::new();
    for path in ["left", "right"] {
        let min_count = all_runs
            .iter()
            .map(|r| {
                r.values()
                    .next()
                    .map(|scores| scores.iter().filter(|s| s.label == path).count())
                    .unwrap_or(0)
            })
            .min()
            .unwrap_or(0);
        for ord in 0..min_count {
            let mut row = vec![path.to_string(), format!("{ord}")];
            for (variant, _) in &filters {
                let pos: Vec<f64> = all_runs
                    .iter()
                    .map(|r| {
                        r[variant]
                            .iter()
                            .filter(|s| s.label == path)
                            .nth(ord)
                            .map(|s| s.pos_rmse)
                            .unwrap_or(f64::NAN)
                    })
                    .collect();
                let vel: Vec<f64> = all_runs
                    .iter()
                    .map(|r| {
                        r[variant]
                            .iter()
                            .filter(|s| s.label == path)
                            .nth(ord)
                            .map(|s| s.vel_rmse)
                            .unwrap_or(f64::NAN)
                    })
                    .collect();
                row.push(format!("{}", mean(&pos)));
                row.push(format!("{}", mean(&vel)));
            }
            path_rows.push(row);
        }
    }

    // Summary: early/final RMSE and the gap fraction to the dense baseline.
    let window = (cfg.vehicles / 5).clamp(1, 10);
    for (variant, _) in &filters {
        let (pos_curve, vel_curve) = &curves[variant];
        let early_pos = mean(&pos_curve[..window]);
        let final_pos = mean(&pos_curve[cfg.vehicles - window..]);
        let final_vel = mean(&vel_curve[cfg.vehicles - window..]);
        let label = variant.label();
        report
            .summary
            .insert(format!("{label}_early_pos_rmse"), early_pos);
        report
            .summary
            .insert(format!("{label}_final_pos_rmse"), final_pos);
        report
            .summary
            .insert(format!("{label}_final_vel_rmse"), final_vel);
        for (run, scores) in all_runs.iter().enumerate() {
            let _ = run;
            let series: Vec<f64> = scores[variant].iter().map(|s| s.pos_rmse).collect();
            report
                .per_run
                .entry(format!("{label}_pos_rmse_mean"))
                .or_default()
                .push(mean(&series));
        }
    }
    if let (Some((sp, sv)), Some((dp, dv))) = (
        curves.get(&Variant::FastCsrbf),
        curves.get(&Variant::DenseRbf),
    ) {
        let gap = |a: &[f64], b: &[f64]| {
            let a = mean(a);
            let b = mean(b);
            (a - b) / b
        };
        report.summary.insert(
            "final_pos_gap_fraction".into(),
            gap(&sp[cfg.vehicles - window..], &dp[cfg.vehicles - window..]),
        );
        report.summary.insert(
            "final_vel_gap_fraction".into(),
            gap(&sv[cfg.vehicles - window..], &dv[cfg.vehicles - window..]),
        );
        report.summary.insert(
            "early_pos_gap_fraction".into(),
            gap(&sp[..window], &dp[..window]),
        );
        report.summary.insert(
            "early_vel_gap_fraction".into(),
            gap(&sv[..window], &dv[..window]),
        );
    }

    // Timing pass: single-threaded, a fixed subset of vehicles.
    let timing_vehicles = simulate_intersection(
        &cfg.geometry,
        cfg.timing_vehicles.min(cfg.vehicles),
        derive_seed(cfg.seed, 13, 0),
    );
    let mut max_active = 0usize;
    for (variant, filter) in &filters {
        let mut time_timer = StepTimer::new();
        let mut meas_timer = StepTimer::new();
        let tracked = matches!(variant, Variant::FastCsrbf);
        run_vehicles(
            filter,
            cfg,
            &timing_vehicles,
            tracked,
            Some((&mut time_timer, &mut meas_timer)),
            &mut max_active,
        )?;
        if let Some(stats) = time_timer.stats() {
            report.timings.push(TimingEntry::new(
                format!("{}_time_update", variant.label()),
                &stats,
            ));
            report.summary.insert(
                format!("{}_time_update_mean_s", variant.label()),
                stats.mean_s,
            );
        }
        if let Some(stats) = meas_timer.stats() {
            report.timings.push(TimingEntry::new(
                format!("{}_measurement_update", variant.label()),
                &stats,
            ));
            report.summary.insert(
                format!("{}_measurement_update_mean_s", variant.label()),
                stats.mean_s,
            );
        }
    }
    let speedup = |a: &str, b: &str, report: &MetricsReport| -> Option<f64> {
        let d = report.summary.get(a)?;
        let s = report.summary.get(b)?;
        Some(d / s)
    };
    if let Some(v) = speedup(
        "dense_rbf_time_update_mean_s",
        "csrbf_time_update_mean_s",
        &report,
    ) {
        report.summary.insert("time_update_speedup".into(), v);
    }
    if let Some(v) = speedup(
        "dense_rbf_measurement_update_mean_s",
        "csrbf_measurement_update_mean_s",
        &report,
    ) {
        report
            .summary
            .insert("measurement_update_speedup".into(), v);
    }

    let bound = active_upper_bound(cfg.support, cfg.spacing, 2)? * 2;
    report.active_stats = Some(ActiveStats {
        mean: f64::NAN,
        max: max_active,
        bound,
    });
    report.summary.insert("max_active_weights".into(), max_active as f64);

    Ok(IntersectionOutput {
        report,
        rmse_rows,
        rmse_header,
        path_rows,
        path_header,
    })
}
