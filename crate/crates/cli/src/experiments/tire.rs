//! Longitudinal tire-friction estimation: learn the friction curve from
//! sampled acceleration runs and score it against the true friction force
//! over the visited slips.

use bfekf_core::basis::{BasisConfig, CartesianGrid};
use bfekf_core::filter::ActiveSelection;
use bfekf_core::sim::{pacejka_mu, simulate_tire_runs, Trajectory};
use bfekf_core::ssmodel::build_tire_model;
use bfekf_core::{AugmentedEkf, FilterState};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{derive_seed, drive, MethodSet};
use crate::config::TireConfig;
use crate::metrics::{mean, std_dev, MetricsReport};
use crate::HarnessError;

pub struct TireOutput {
    pub report: MetricsReport,
    /// Learned-curve rows: slip, true force, then per method mean and
    /// ±3σ band over the Monte Carlo repetitions.
    pub curve: Vec<Vec<String>>,
    pub curve_header: Vec<String>,
    /// Visited-slip histogram rows: bin center, count.
    pub histogram: Vec<Vec<String>>,
}

fn build_filter(cfg: &TireConfig, sparse: bool) -> Result<AugmentedEkf, HarnessError> {
    let grid = CartesianGrid::make_grid(&[cfg.slip_domain[0]], &[cfg.slip_domain[1]], cfg.spacing)?;
    let basis = if sparse {
        BasisConfig::wendland(cfg.support, cfg.prior_weight_variance)?
    } else {
        BasisConfig::gaussian(cfg.length_scale, cfg.prior_weight_variance)?
    };
    let model = build_tire_model(&cfg.tire, &grid, &basis)?
        .with_ordering(cfg.ordering)
        .with_observation_weight_coupling(cfg.observation_weight_coupling);
    let selection = if sparse {
        ActiveSelection::Fast
    } else {
        ActiveSelection::All
    };
    Ok(AugmentedEkf::new(model, grid, basis, selection)?)
}

/// One repetition: learn from the chosen accelerations, then return the
/// RMSE of the learned force curve over the visited true slips, plus the
/// learned curve on the dump grid. `None` when the run diverged.
#[allow(clippy::type_complexity)]
fn one_repetition(
    filter: &AugmentedEkf,
    cfg: &TireConfig,
    pool: &[Trajectory],
    chosen: &[usize],
    sweep: &[f64],
    tracked: bool,
) -> Result<Option<(f64, Vec<f64>)>, HarnessError> {
    let p0 = DMatrix::from_element(1, 1, cfg.state_prior);
    let mut state: FilterState = if tracked {
        filter.init_state_tracked(DVector::zeros(1), p0.clone())
    } else {
        filter.init_state(DVector::zeros(1), p0.clone())
    };
    for &idx in chosen {
        state.reset_state_block(DVector::zeros(1), p0.clone());
        match drive(filter, &mut state, &pool[idx], None) {
            Ok(_) => {}
            Err(HarnessError::Filter(bfekf_core::FilterError::NonFinite(_))) => {
                return Ok(None);
            }
            Err(e) => return Err(e),
        }
    }
    let gain = cfg.tire.force_gain();
    // error where there is data: at the true slips of the chosen runs
    let mut sq = 0.0;
    let mut n = 0usize;
    for &idx in chosen {
        for aux in &pool[idx].truth_aux {
            let slip = aux[1];
            let (est, _) = filter.query_function(&state, &[slip])?;
            let err = gain * (est[0] - pacejka_mu(slip, &cfg.pacejka));
            sq += err * err;
            n += 1;
        }
    }
    let rmse = (sq / n as f64).sqrt();
    let curve: Vec<f64> = sweep
        .iter()
        .map(|&s| {
            filter
                .query_function(&state, &[s])
                .map(|(est, _)| gain * est[0])
        })
        .collect::<Result<_, _>>()?;
    Ok(Some((rmse, curve)))
}

pub fn run_tire(cfg: &TireConfig, methods: MethodSet) -> Result<TireOutput, HarnessError> {
    if cfg.runs == 0 || cfg.accels_per_run == 0 {
        return Err(HarnessError::Config("runs and accelerations must be positive".into()));
    }
    if cfg.accels_per_run > cfg.accel_pool {
        return Err(HarnessError::Config(
            "accels_per_run cannot exceed accel_pool".into(),
        ));
    }
    let mut report = MetricsReport::new("tire", cfg.seed, cfg.runs);
    let pool_trajs = simulate_tire_runs(&cfg.pacejka, &cfg.tire, &cfg.sim, cfg.accel_pool, cfg.seed);
    let sweep: Vec<f64> = {
        let mut v = Vec::new();
        let mut s = cfg.slip_domain[0];
        while s <= cfg.slip_domain[1] + 1e-12 {
            v.push(s);
            s += cfg.curve_step;
        }
        v
    };
    let gain = cfg.tire.force_gain();

    // Which accelerations each repetition samples (shared across methods).
    let selections: Vec<Vec<usize>> = (0..cfg.runs)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 7, rep as u64));
            let mut pool_idx: Vec<usize> = (0..cfg.accel_pool).collect();
            // partial Fisher-Yates
            for i in 0..cfg.accels_per_run {
                let j = rng.random_range(i..pool_idx.len());
                pool_idx.swap(i, j);
            }
            pool_idx.truncate(cfg.accels_per_run);
            pool_idx
        })
        .collect();

    let run_method = |sparse: bool| -> Result<(Vec<f64>, Vec<Vec<f64>>, usize), HarnessError> {
        let filter = build_filter(cfg, sparse)?;
        let rayon_pool = crate::run_pool();
        let results: Vec<Result<Option<(f64, Vec<f64>)>, HarnessError>> = rayon_pool.install(|| {
            selections
                .par_iter()
                .map(|chosen| one_repetition(&filter, cfg, &pool_trajs, chosen, &sweep, sparse))
                .collect()
        });
        let mut rmses = Vec::new();
        let mut curves = Vec::new();
        let mut diverged = 0usize;
        for r in results {
            match r? {
                Some((rmse, curve)) => {
                    rmses.push(rmse);
                    curves.push(curve);
                }
                None => diverged += 1,
            }
        }
        Ok((rmses, curves, diverged))
    };

    let mut curve_columns: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (label, sparse, enabled) in [
        ("csrbf", true, methods.sparse()),
        ("dense_rbf", false, methods.dense),
    ] {
        if !enabled {
            continue;
        }
        let (rmses, curves, diverged) = run_method(sparse)?;
        report
            .summary
            .insert(format!("function_rmse_{label}_mean"), mean(&rmses));
        report
            .summary
            .insert(format!("function_rmse_{label}_std"), std_dev(&rmses));
        report.per_run.insert(format!("function_rmse_{label}"), rmses);
        if diverged > 0 {
            report.warnings.push(format!(
                "{label}: {diverged} of {} repetitions diverged and were excluded",
                cfg.runs
            ));
        }
        // aggregate the learned curve over repetitions
        let mut mean_curve = vec![0.0; sweep.len()];
        let mut std_curve = vec![0.0; sweep.len()];
        if !curves.is_empty() {
            for i in 0..sweep.len() {
                let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
                mean_curve[i] = mean(&col);
                std_curve[i] = std_dev(&col);
            }
        }
        curve_columns.push((label.to_string(), mean_curve, std_curve));
    }

    // Informational baseline: the prior (zero) function scored the same way.
    let mut zero_sq = 0.0;
    let mut zero_n = 0usize;
    for chosen in &selections {
        for &idx in chosen {
            for aux in &pool_trajs[idx].truth_aux {
                let f = gain * pacejka_mu(aux[1], &cfg.pacejka);
                zero_sq += f * f;
                zero_n += 1;
            }
        }
    }
    report
        .summary
        .insert("zero_function_rmse".into(), (zero_sq / zero_n as f64).sqrt());

    // Learned-curve dump.
    let mut curve_header = vec!["slip".to_string(), "true_force".to_string()];
    for (label, _, _) in &curve_columns {
        curve_header.push(format!("{label}_mean"));
        curve_header.push(format!("{label}_lo3"));
        curve_header.push(format!("{label}_hi3"));
    }
    let mut curve_rows = Vec::with_capacity(sweep.len());
    for (i, &s) in sweep.iter().enumerate() {
        let mut row = vec![
            format!("{s}"),
            format!("{}", gain * pacejka_mu(s, &cfg.pacejka)),
        ];
        for (_, mean_curve, std_curve) in &curve_columns {
            row.push(format!("{}", mean_curve[i]));
            row.push(format!("{}", mean_curve[i] - 3.0 * std_curve[i]));
            row.push(format!("{}", mean_curve[i] + 3.0 * std_curve[i]));
        }
        curve_rows.push(row);
    }

    // Visited-slip histogram over all sampled repetitions.
    let bins = sweep.len().saturating_sub(1).max(1);
    let lo = cfg.slip_domain[0];
    let width = cfg.curve_step;
    let mut counts = vec![0u64; bins];
    for chosen in &selections {
        for &idx in chosen {
            for aux in &pool_trajs[idx].truth_aux {
                let b = (((aux[1] - lo) / width).floor() as isize).clamp(0, bins as isize - 1);
                counts[b as usize] += 1;
            }
        }
    }
    let histogram: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| vec![format!("{}", lo + (i as f64 + 0.5) * width), format!("{c}")])
        .collect();

    Ok(TireOutput {
        report,
        curve: curve_rows,
        curve_header,
        histogram,
    })
}
