use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lgvi::harness::{
    compare_integrators, fit_records, pose_report, read_trajectory_csv, run_problem, run_sweep,
    seeded_synthetic_scene, split_override, write_features, ExperimentConfig, Problem, RateSeries,
    SweepSpec,
};
use lgvi::Error;

/// Accelerated optimization on Lie groups: experiment runner.
///
/// Every config field can be overridden with `--key=value` (`--p=4`, `--integrator.h0=0.01`)
/// after the named options.
#[derive(Parser)]
#[command(name = "lgvi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file; defaults are used when absent.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Field overrides, `--key=value`.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "--KEY=VALUE"
    )]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write its trajectory CSV.
    Run {
        /// Trajectory CSV; overrides `output.path`. Without either, the CSV goes to stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run a grid over p, h0 and seeds, one CSV per run plus summary.csv.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        h0: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run several integrators on one problem and report them side by side.
    Compare {
        /// Methods applied to the base config (lgvi, elgvi, splt, rk4, rk45).
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Aligned f-gap / orthogonality table.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-method summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit a power-law exponent to a trajectory CSV.
    Rates {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Series::GapT)]
        series: Series,
        /// Abscissa window `lo,hi`; the final decade when absent.
        #[arg(long, value_delimiter = ',')]
        window: Option<Vec<f64>>,
    },
    /// Estimate a camera pose from a feature file or a synthetic scene.
    Pose {
        #[arg(short, long)]
        features: Option<PathBuf>,
        /// Trajectory CSV.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic feature file with its ground truth.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Series {
    /// f - f* against t.
    GapT,
    /// f - f* against k.
    GapK,
    /// h against t.
    #[value(name = "h-t")]
    HT,
}

/// Defaults of the `pose` subcommand when no config file is given.
const POSE_DEFAULTS: &[(&str, &str)] = &[
    ("objective", "pose"),
    ("method", "elgvi"),
    ("p", "2"),
    ("c", "1e-6"),
    ("h0", "0.01"),
    ("steps", "20000"),
    ("gradient", "analytic"),
];

fn overrides(cfg: &ConfigArgs) -> Result<Vec<(String, String)>, Error> {
    cfg.overrides
        .iter()
        .map(|a| {
            if !a.contains('=') && a.starts_with('-') {
                return Err(Error::InvalidInput(format!(
                    "`{a}` after the overrides: named options go before any `--key=value`"
                )));
            }
            split_override(a)
        })
        .collect()
}

fn pairs(list: &[(&str, &str)]) -> Vec<(String, String)> {
    list.iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn load(cfg: &ConfigArgs, defaults: &[(&str, &str)]) -> Result<ExperimentConfig, Error> {
    let mut all = if cfg.config.is_none() {
        pairs(defaults)
    } else {
        Vec::new()
    };
    all.extend(overrides(cfg)?);
    ExperimentConfig::load(cfg.config.as_deref(), &all)
}

enum Outcome {
    Ok,
    SolverFailure,
}

fn run(
    out: Option<PathBuf>,
    cfg: &ConfigArgs,
    defaults: &[(&str, &str)],
    pose: bool,
) -> Result<Outcome, Error> {
    let mut config = load(cfg, defaults)?;
    if let Some(o) = out {
        config.output.path = Some(o);
    }
    let problem = Problem::from_config(&config)?;
    let outcome = run_problem(&config, &problem)?;
    match &config.output.path {
        Some(path) => outcome.write_csv(path, config.output.stride)?,
        None if !pose => print!("{}", outcome.to_csv(config.output.stride)),
        None => {}
    }
    let last = outcome.last();
    eprintln!(
        "{}: {} steps, t = {:.6}, f = {:.6e}, f - f* = {:.6e}, mean h = {:.4e}",
        config.label(),
        last.k,
        last.t,
        last.f,
        last.f_gap,
        outcome.mean_step()
    );
    if pose {
        println!("{}", pose_report(&problem, &outcome)?);
    }
    Ok(match &outcome.failure {
        Some(e) => {
            eprintln!("run stopped early: {e}");
            Outcome::SolverFailure
        }
        None => Outcome::Ok,
    })
}

fn execute(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Run { out, cfg } => run(out, &cfg, &[], false),
        Command::Pose { features, out, cfg } => {
            let mut cfg = cfg;
            if let Some(f) = features {
                cfg.overrides
                    .push(format!("--features={}", toml_string(&f)));
                cfg.overrides.push("--objective=pose".into());
            }
            run(out, &cfg, POSE_DEFAULTS, true)
        }
        Command::Sweep {
            p,
            h0,
            seeds,
            out_dir,
            workers,
            cfg,
        } => {
            let base = load(&cfg, &[])?;
            let spec = SweepSpec {
                ps: p,
                h0s: h0,
                seeds,
                out_dir,
                workers,
            };
            let rows = run_sweep(&base, &spec)?;
            print!("{}", lgvi::harness::sweep::summary_csv(&rows));
            Ok(if rows.iter().any(|r| r.failure.is_some()) {
                Outcome::SolverFailure
            } else {
                Outcome::Ok
            })
        }
        Command::Compare {
            methods,
            repetitions,
            samples,
            out,
            summary,
            cfg,
        } => {
            let configs = methods
                .iter()
                .map(|m| {
                    let mut c = cfg.overrides.clone();
                    c.push(format!("--method={m}"));
                    load(
                        &ConfigArgs {
                            config: cfg.config.clone(),
                            overrides: c,
                        },
                        &[],
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = compare_integrators(&configs, repetitions, samples)?;
            print!("{}", report.summary_table());
            if let Some(path) = out {
                std::fs::write(path, report.aligned_csv())?;
            }
            if let Some(path) = summary {
                std::fs::write(path, report.summary_csv())?;
            }
            Ok(if report.summaries.iter().any(|s| s.failure.is_some()) {
                Outcome::SolverFailure
            } else {
                Outcome::Ok
            })
        }
        Command::Rates {
            csv,
            series,
            window,
        } => {
            let records = read_trajectory_csv(&csv)?;
            let which = match series {
                Series::GapT => RateSeries::GapVsTime,
                Series::GapK => RateSeries::GapVsStep,
                Series::HT => RateSeries::StepVsTime,
            };
            let window = match window.as_deref() {
                None => None,
                Some([lo, hi]) => Some((*lo, *hi)),
                Some(_) => {
                    return Err(Error::InvalidInput("--window takes `lo,hi`".into()));
                }
            };
            println!("{:.6}", fit_records(&records, which, window)?);
            Ok(Outcome::Ok)
        }
        Command::Synth { out, cfg } => {
            let mut all = vec![("objective".to_string(), "pose".to_string())];
            if cfg.config.is_none() {
                all.push(("steps".into(), "1".into()));
            }
            all.extend(overrides(&cfg)?);
            let config = ExperimentConfig::load(cfg.config.as_deref(), &all)?;
            let scene = seeded_synthetic_scene(&config)?;
            write_features(&scene, &out)?;
            eprintln!(
                "{} features written to {}",
                scene.features.len(),
                out.display()
            );
            Ok(Outcome::Ok)
        }
    }
}

/// Quotes a path as a TOML string so it survives override parsing.
fn toml_string(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SolverFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
