//! Prior-motion-model influence: three identically tuned models on two
//! scalar-track scenarios, mean positional RMSE over Monte Carlo runs.

use bfekf_core::basis::{BasisConfig, CartesianGrid};
use bfekf_core::filter::ActiveSelection;
use bfekf_core::sim::{simulate_scenario1, simulate_scenario2, Trajectory};
use bfekf_core::ssmodel::build_1d_models;
use bfekf_core::AugmentedEkf;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{derive_seed, drive};
use crate::config::Example1Config;
use crate::metrics::{compute_rmse, mean, MetricsReport};
use crate::HarnessError;

pub struct Example1Output {
    pub report: MetricsReport,
    /// Rows of the 3x2 mean-RMSE table: model, scenario 1, scenario 2.
    pub table: Vec<(String, f64, f64)>,
}

struct Filters {
    plain_cv: AugmentedEkf,
    cv_expansion: AugmentedEkf,
    pure_expansion: AugmentedEkf,
}

fn build_filters(cfg: &Example1Config) -> Result<Filters, HarnessError> {
    let position_grid = CartesianGrid::make_grid(
        &[cfg.position_domain[0]],
        &[cfg.position_domain[1]],
        cfg.spacing,
    )?;
    let state_grid = CartesianGrid::make_grid(
        &[cfg.position_domain[0], cfg.velocity_domain[0]],
        &[cfg.position_domain[1], cfg.velocity_domain[1]],
        cfg.spacing,
    )?;
    let basis = BasisConfig::wendland(cfg.support, cfg.prior_weight_variance)?;
    let models = build_1d_models(&position_grid, &state_grid, &basis)?;
    Ok(Filters {
        plain_cv: AugmentedEkf::new(
            models.plain_cv.with_ordering(cfg.ordering),
            position_grid.clone(),
            basis.clone(),
            ActiveSelection::All,
        )?,
        cv_expansion: AugmentedEkf::new(
            models.cv_expansion.with_ordering(cfg.ordering),
            position_grid,
            basis.clone(),
            ActiveSelection::Fast,
        )?,
        pure_expansion: AugmentedEkf::new(
            models.pure_expansion.with_ordering(cfg.ordering),
            state_grid,
            basis,
            ActiveSelection::Fast,
        )?,
    })
}

fn run_one(
    filters: &Filters,
    cfg: &Example1Config,
    traj: &Trajectory,
) -> Result<[Option<f64>; 3], HarnessError> {
    let x0 = traj.states[0].clone();
    let p0 = DMatrix::identity(2, 2) * cfg.state_prior;
    let truth: Vec<DVector<f64>> = traj.states[1..].to_vec();
    let mut out = [None, None, None];
    let runs = [
        (&filters.plain_cv, false),
        (&filters.cv_expansion, true),
        (&filters.pure_expansion, true),
    ];
    for (slot, (filter, tracked)) in out.iter_mut().zip(runs) {
        let mut state = if tracked {
            filter.init_state_tracked(x0.clone(), p0.clone())
        } else {
            filter.init_state(x0.clone(), p0.clone())
        };
        match drive(filter, &mut state, traj, None) {
            Ok(res) => *slot = Some(compute_rmse(&res.estimates, &truth, &[0])?),
            Err(HarnessError::Filter(bfekf_core::FilterError::NonFinite(_))) => *slot = None,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn run_example1(cfg: &Example1Config) -> Result<Example1Output, HarnessError> {
    if cfg.runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    let filters = build_filters(cfg)?;
    let mut report = MetricsReport::new("example1", cfg.seed, cfg.runs);
    let mut table = Vec::new();
    let pool = crate::run_pool();

    let mut scenario_means = [[f64::NAN; 3]; 2];
    for (scenario_idx, scenario) in [1u64, 2u64].iter().enumerate() {
        let results: Vec<Result<[Option<f64>; 3], HarnessError>> = pool.install(|| {
            (0..cfg.runs)
                .into_par_iter()
                .map(|run| {
                    let seed = derive_seed(cfg.seed, *scenario, run as u64);
                    let traj = if *scenario == 1 {
                        simulate_scenario1(cfg.steps, cfg.process_noise, cfg.obs_noise, seed)
                    } else {
                        simulate_scenario2(cfg.steps, cfg.process_noise, cfg.obs_noise, seed)
                    };
                    run_one(&filters, cfg, &traj)
                })
                .collect()
        });
        let mut per_model: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let mut diverged = [0usize; 3];
        for res in results {
            let rmses = res?;
            for m in 0..3 {
                match rmses[m] {
                    Some(v) => per_model[m].push(v),
                    None => diverged[m] += 1,
                }
            }
        }
        let labels = ["model_a", "model_b", "model_c"];
        for m in 0..3 {
            let key = format!("scenario{scenario}_{}", labels[m]);
            let mu = mean(&per_model[m]);
            scenario_means[scenario_idx][m] = mu;
            report.summary.insert(format!("{key}_mean_rmse"), mu);
            report.per_run.insert(format!("{key}_rmse"), per_model[m].clone());
            if diverged[m] > 0 {
                report.warnings.push(format!(
                    "{key}: {} of {} runs diverged and were excluded",
                    diverged[m], cfg.runs
                ));
                report
                    .summary
                    .insert(format!("{key}_diverged_runs"), diverged[m] as f64);
            }
        }
    }
    for (m, label) in ["model_a", "model_b", "model_c"].iter().enumerate() {
        table.push((
            label.to_string(),
            scenario_means[0][m],
            scenario_means[1][m],
        ));
    }
    Ok(Example1Output { report, table })
}
