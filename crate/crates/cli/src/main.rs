use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use bfekf_cli::bench::eval::run_bench_eval;
use bfekf_cli::bench::predict::run_bench_predict;
use bfekf_cli::config::{
    load_toml, BenchConfig, Example1Config, IntersectionConfig, TireConfig,
};
use bfekf_cli::experiments::example1::run_example1;
use bfekf_cli::experiments::intersection::run_intersection;
use bfekf_cli::experiments::tire::run_tire;
use bfekf_cli::experiments::MethodSet;
use bfekf_cli::report::{prepare_out_dir, write_csv, write_metrics};
use bfekf_cli::HarnessError;

/// Joint state estimation and online learning of unknown dynamics with
/// compactly supported basis functions: experiment runner.
#[derive(Parser)]
#[command(name = "bfekf", version, about)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: ExperimentId,
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo run count override.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory (default: results/<experiment>/<timestamp>/).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Filter variants to run, where the experiment supports a choice.
    #[arg(long, value_enum, default_value_t = MethodArg::All)]
    method: MethodArg,
    /// Total-weight sweep override for the benchmarks, comma separated.
    #[arg(long, value_delimiter = ',')]
    nw_sweep: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentId {
    Example1,
    Tire,
    Intersection,
    BenchEval,
    BenchPredict,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dense,
    Csrbf,
    FastCsrbf,
    All,
}

impl MethodArg {
    fn set(self) -> MethodSet {
        match self {
            MethodArg::Dense => MethodSet {
                dense: true,
                exact: false,
                fast: false,
            },
            MethodArg::Csrbf => MethodSet {
                dense: false,
                exact: true,
                fast: false,
            },
            MethodArg::FastCsrbf => MethodSet {
                dense: false,
                exact: false,
                fast: true,
            },
            MethodArg::All => MethodSet::all(),
        }
    }
}

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, HarnessError> {
    match path {
        Some(p) => load_toml(p),
        None => Ok(T::default()),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let methods = cli.method.set();
    match cli.experiment {
        ExperimentId::Example1 => {
            let mut cfg: Example1Config = load_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(r) = cli.runs {
                cfg.runs = r;
            }
            let out = run_example1(&cfg)?;
            let dir = prepare_out_dir(cli.out.as_deref(), "example1")?;
            write_metrics(&dir, &out.report)?;
            let rows: Vec<Vec<String>> = out
                .table
                .iter()
                .map(|(m, s1, s2)| vec![m.clone(), format!("{s1}"), format!("{s2}")])
                .collect();
            write_csv(
                &dir.join("table.csv"),
                &["model", "scenario1_mean_rmse", "scenario2_mean_rmse"],
                &rows,
            )?;
            println!("mean positional RMSE:");
            for (m, s1, s2) in &out.table {
                println!("  {m}: scenario 1 = {s1:.4}, scenario 2 = {s2:.4}");
            }
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            println!("results written to {}", dir.display());
        }
        ExperimentId::Tire => {
            let mut cfg: TireConfig = load_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(r) = cli.runs {
                cfg.runs = r;
            }
            let out = run_tire(&cfg, methods)?;
            let dir = prepare_out_dir(cli.out.as_deref(), "tire")?;
            write_metrics(&dir, &out.report)?;
            let header: Vec<&str> = out.curve_header.iter().map(String::as_str).collect();
            write_csv(&dir.join("learned_curve.csv"), &header, &out.curve)?;
            write_csv(
                &dir.join("slip_histogram.csv"),
                &["slip_bin_center", "count"],
                &out.histogram,
            )?;
            for (k, v) in &out.report.summary {
                println!("  {k} = {v:.4}");
            }
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            println!("results written to {}", dir.display());
        }
        ExperimentId::Intersection => {
            let mut cfg: IntersectionConfig = load_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(r) = cli.runs {
                cfg.runs = r;
            }
            let out = run_intersection(&cfg, methods)?;
            let dir = prepare_out_dir(cli.out.as_deref(), "intersection")?;
            write_metrics(&dir, &out.report)?;
            let header: Vec<&str> = out.rmse_header.iter().map(String::as_str).collect();
            write_csv(&dir.join("rmse_vs_vehicle.csv"), &header, &out.rmse_rows)?;
            let header: Vec<&str> = out.path_header.iter().map(String::as_str).collect();
            write_csv(&dir.join("rmse_by_path.csv"), &header, &out.path_rows)?;
            for (k, v) in &out.report.summary {
                println!("  {k} = {v:.4}");
            }
            for t in &out.report.timings {
                println!(
                    "  {}: mean {:.6} s (std {:.6}, median {:.6})",
                    t.name, t.mean_s, t.std_s, t.median_s
                );
            }
            for w in &out.report.warnings {
                eprintln!("warning: {w}");
            }
            println!("results written to {}", dir.display());
        }
        ExperimentId::BenchEval | ExperimentId::BenchPredict => {
            let mut cfg: BenchConfig = load_config(&cli.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(sweep) = &cli.nw_sweep {
                cfg.sweep = sweep.clone();
            }
            if matches!(cli.experiment, ExperimentId::BenchEval) {
                let out = run_bench_eval(&cfg, methods)?;
                let dir = prepare_out_dir(cli.out.as_deref(), "bench-eval")?;
                write_metrics(&dir, &out.report)?;
                let header: Vec<&str> = out.header.iter().map(String::as_str).collect();
                write_csv(&dir.join("eval_times.csv"), &header, &out.rows)?;
                for (k, v) in &out.report.summary {
                    println!("  {k} = {v:.4}");
                }
                println!("results written to {}", dir.display());
            } else {
                let out = run_bench_predict(&cfg, methods)?;
                let dir = prepare_out_dir(cli.out.as_deref(), "bench-predict")?;
                write_metrics(&dir, &out.report)?;
                let header: Vec<&str> = out.header.iter().map(String::as_str).collect();
                write_csv(&dir.join("predict_times.csv"), &header, &out.rows)?;
                for (k, v) in &out.report.summary {
                    println!("  {k} = {v:.4}");
                }
                for w in &out.report.warnings {
                    eprintln!("warning: {w}");
                }
                println!("results written to {}", dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
