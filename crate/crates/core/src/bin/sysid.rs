//! `sysid`: simulate systems, identify them from data, and run experiments.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hankel_sysid::estimators::{
    build_multi_design, build_single_design, lse_multi, lse_single, threshold_multi, threshold_single,
    ThresholdParams,
};
use hankel_sysid::harness::{run_experiment, summarize, ExperimentConfig};
use hankel_sysid::hokalman::thresholded_ho_kalman;
use hankel_sysid::lti::{simulate_trajectory, DEFAULT_HINF_GRID};
use hankel_sysid::{bounds, io, NoiseSpec, RandomSeed, Result, StateSpaceSystem, SysIdError};

#[derive(Parser, Debug)]
#[command(name = "sysid", version, about = "Order-adaptive LTI system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw (or load) a system and simulate trajectories to CSV files.
    Simulate {
        /// Load the system from this JSON file instead of drawing one.
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long = "d-u", default_value_t = 3)]
        d_u: usize,
        #[arg(long = "d-y", default_value_t = 2)]
        d_y: usize,
        /// Samples per trajectory.
        #[arg(long)]
        length: usize,
        /// Number of independent trajectories.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long = "sigma-u", default_value_t = 1.0)]
        sigma_u: f64,
        #[arg(long = "sigma-z", default_value_t = 0.1)]
        sigma_z: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the system JSON.
        #[arg(long = "system-out")]
        system_out: Option<PathBuf>,
        /// Trajectory CSV path; with --count > 1 files get a `_NNNN` suffix.
        #[arg(long = "trajectory-out")]
        trajectory_out: PathBuf,
    },
    /// Identify a system from trajectory files and print the result as JSON.
    Identify {
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        tau: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long = "sigma-u", default_value_t = 1.0)]
        sigma_u: f64,
        #[arg(long = "sigma-z", default_value_t = 0.1)]
        sigma_z: f64,
        /// H∞ bound for the single-trajectory threshold.
        #[arg(long)]
        beta: Option<f64>,
        /// Ground-truth system; single mode takes β from its H∞ norm when --beta is absent.
        #[arg(long)]
        system: Option<PathBuf>,
        /// Use this threshold instead of the closed-form one.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Run a Monte-Carlo sweep described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output_path.
        #[arg(long)]
        output: Option<String>,
    },
    /// Run the randomized thresholding checks and print pass counts.
    CheckBounds {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Print a line to stdout; a closed pipe (`sysid ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn indexed_path(base: &Path, index: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{index:04}.{ext}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            system,
            n,
            d_u,
            d_y,
            length,
            count,
            sigma_u,
            sigma_z,
            seed,
            system_out,
            trajectory_out,
        } => {
            let seed = RandomSeed(seed);
            let sys = match system {
                Some(path) => io::read_system(&path)?,
                None => StateSpaceSystem::random(n, d_u, d_y, seed.derive(u64::MAX))?,
            };
            if let Some(path) = system_out {
                io::write_system(&path, &sys)?;
            }
            let noise = NoiseSpec::new(sigma_u, sigma_z)?;
            if count == 0 {
                return Err(SysIdError::InvalidArgument("count must be positive".into()));
            }
            for i in 0..count {
                let traj = simulate_trajectory(&sys, noise, length, seed.derive(i as u64))?;
                let path = if count == 1 { trajectory_out.clone() } else { indexed_path(&trajectory_out, i) };
                io::write_trajectory(&path, &traj)?;
            }
            Ok(())
        }
        Command::Identify {
            mode,
            tau,
            delta,
            sigma_u,
            sigma_z,
            beta,
            system,
            xi,
            trajectories,
        } => {
            let trajs = trajectories
                .iter()
                .map(|p| io::read_trajectory(p))
                .collect::<Result<Vec<_>>>()?;
            let first = &trajs[0];
            let beta = match (beta, &system) {
                (Some(b), _) => Some(b),
                (None, Some(path)) if mode == ModeArg::Single => {
                    Some(io::read_system(path)?.hinf_norm(DEFAULT_HINF_GRID)?)
                }
                _ => None,
            };
            let (h_hat, samples) = match mode {
                ModeArg::Single => {
                    if trajs.len() != 1 {
                        return Err(SysIdError::InvalidArgument(
                            "single mode takes exactly one trajectory".into(),
                        ));
                    }
                    (lse_single(&build_single_design(first, tau)?)?, first.len())
                }
                ModeArg::Multi => (
                    lse_multi(&build_multi_design(&trajs, tau)?)?,
                    trajs.len() * (2 * tau - 1),
                ),
            };
            let params = ThresholdParams {
                sigma_u,
                sigma_z,
                tau,
                d_u: first.input_dim(),
                d_y: first.output_dim(),
                delta,
                samples,
                beta,
            };
            let xi = match (xi, mode) {
                (Some(x), _) => x,
                (None, ModeArg::Single) => threshold_single(&params)?,
                (None, ModeArg::Multi) => threshold_multi(&params)?,
            };
            let result = thresholded_ho_kalman(&h_hat, xi)?;
            emit(&serde_json::to_string_pretty(&result)?)?;
            Ok(())
        }
        Command::Experiment { config, output } => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            if let Some(out) = output {
                cfg.output_path = out;
            }
            let records = run_experiment(&cfg)?;
            for s in summarize(&records) {
                emit(&format!(
                    "T={:>7}  mean_order={}  median_cab={}  median_oracle_cab={}",
                    s.samples,
                    fmt_opt(s.mean_order),
                    fmt_opt(s.median_markov_cab_error),
                    fmt_opt(s.median_oracle_cab_error)
                ))?;
            }
            eprintln!("wrote {} and {}", cfg.output_path, cfg.summary_path().display());
            Ok(())
        }
        Command::CheckBounds { instances, seed } => {
            let report = bounds::run_bound_suite(instances, RandomSeed(seed))?;
            emit(&report.to_string())?;
            if report.prop1_passed != instances || report.lemma1_passed != instances {
                return Err(SysIdError::NumericalFailure("bound check failed on some instances".into()));
            }
            Ok(())
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
