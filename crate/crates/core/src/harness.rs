//! Seeded Monte-Carlo experiments over a grid of sample budgets.
//!
//! One ground-truth system is drawn from the master seed and shared by every
//! trial. Each trial draws fresh data from a seed derived from
//! `(master_seed, T, trial_index)`, estimates `Ĥ_τ`, then runs both the
//! thresholded algorithm and a known-order baseline on that same estimate.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::estimators::{
    build_multi_design, build_single_design, lse_multi, lse_single, threshold_multi, threshold_single,
    ThresholdParams,
};
use crate::hankel::{true_hankel, HankelMatrix};
use crate::hokalman::{ho_kalman, thresholded_ho_kalman};
use crate::lowrank;
use crate::lti::{simulate_trajectory, NoiseSpec, StateSpaceSystem, Trajectory, DEFAULT_HINF_GRID};
use crate::metrics::{self, markov_error, prop1_bound, realization_markov_error, TrialRecord};
use crate::seed::RandomSeed;

/// Tag for deriving the ground-truth system seed from the master seed.
const SYSTEM_SEED_TAG: u64 = 0x5359_5354_454d;

/// Environment variable capping trial concurrency.
pub const THREADS_ENV: &str = "SYSID_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Multi,
}

fn default_delta() -> f64 {
    0.05
}

fn default_grid() -> Vec<usize> {
    vec![500, 1000, 2000, 5000, 10000, 20000]
}

fn default_trials() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    pub d_u: usize,
    pub d_y: usize,
    pub tau: usize,
    pub sigma_u: f64,
    pub sigma_z: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(rename = "T_grid", default = "default_grid")]
    pub t_grid: Vec<usize>,
    #[serde(rename = "trials_per_T", default = "default_trials")]
    pub trials_per_t: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub beta_override: Option<f64>,
    pub output_path: String,
    /// Accept `tau < n + 1` with a warning instead of rejecting the config.
    #[serde(default)]
    pub allow_short_tau: bool,
}

impl ExperimentConfig {
    /// `n = 5, d_y = 2, d_u = 3, σ_u = 1, σ_z = 0.1, τ = 6`, multi mode.
    pub fn reference_setup(master_seed: u64, output_path: impl Into<String>) -> Self {
        Self {
            mode: Mode::Multi,
            n: 5,
            d_u: 3,
            d_y: 2,
            tau: 6,
            sigma_u: 1.0,
            sigma_z: 0.1,
            delta: default_delta(),
            t_grid: default_grid(),
            trials_per_t: default_trials(),
            master_seed,
            beta_override: None,
            output_path: output_path.into(),
            allow_short_tau: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d_u == 0 || self.d_y == 0 {
            return Err(SysIdError::invalid("n, d_u and d_y must be positive"));
        }
        if self.tau < 2 {
            return Err(SysIdError::invalid("tau must be at least 2"));
        }
        if self.tau < self.n + 1 {
            if !self.allow_short_tau {
                return Err(SysIdError::invalid(format!(
                    "tau = {} < n + 1 = {}; set allow_short_tau to override",
                    self.tau,
                    self.n + 1
                )));
            }
            log::warn!("tau = {} < n + 1 = {}: the Hankel matrix may not reveal the order", self.tau, self.n + 1);
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(SysIdError::invalid("sigma_u must be positive"));
        }
        if !(self.sigma_z >= 0.0 && self.sigma_z.is_finite()) {
            return Err(SysIdError::invalid("sigma_z must be nonnegative"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SysIdError::invalid("delta must lie in (0, 1)"));
        }
        if self.t_grid.is_empty() || self.t_grid[0] == 0 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SysIdError::invalid("T_grid must be a nonempty ascending list of positive integers"));
        }
        if self.trials_per_t == 0 {
            return Err(SysIdError::invalid("trials_per_T must be positive"));
        }
        if let Some(b) = self.beta_override {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(SysIdError::invalid("beta_override must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Path of the JSON summary written next to the CSV.
    pub fn summary_path(&self) -> PathBuf {
        Path::new(&self.output_path).with_extension("summary.json")
    }
}

/// Prepared experiment: ground truth plus everything trials share.
#[derive(Clone, Debug)]
pub struct Experiment {
    cfg: ExperimentConfig,
    system: StateSpaceSystem,
    hankel: HankelMatrix,
    hankel_singular_values: Vec<f64>,
    noise: NoiseSpec,
    beta: Option<f64>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let system = StateSpaceSystem::random(cfg.n, cfg.d_u, cfg.d_y, RandomSeed(cfg.master_seed).derive(SYSTEM_SEED_TAG))?;
        Self::with_system(cfg, system)
    }

    /// Use a given ground-truth system instead of drawing one.
    pub fn with_system(cfg: ExperimentConfig, system: StateSpaceSystem) -> Result<Self> {
        cfg.validate()?;
        if system.order() != cfg.n || system.input_dim() != cfg.d_u || system.output_dim() != cfg.d_y {
            return Err(SysIdError::invalid("system dimensions do not match the config"));
        }
        let hankel = true_hankel(&system, cfg.tau)?;
        let hankel_singular_values = lowrank::singular_values(hankel.data())?.iter().copied().collect();
        let noise = NoiseSpec::new(cfg.sigma_u, cfg.sigma_z)?;
        let beta = match (cfg.mode, cfg.beta_override) {
            (Mode::Multi, _) => None,
            (Mode::Single, Some(b)) => Some(b),
            (Mode::Single, None) => Some(system.hinf_norm(DEFAULT_HINF_GRID)?),
        };
        Ok(Self {
            cfg,
            system,
            hankel,
            hankel_singular_values,
            noise,
            beta,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn system(&self) -> &StateSpaceSystem {
        &self.system
    }

    pub fn true_hankel(&self) -> &HankelMatrix {
        &self.hankel
    }

    pub fn hankel_singular_values(&self) -> &[f64] {
        &self.hankel_singular_values
    }

    pub fn threshold_params(&self, samples: usize) -> ThresholdParams {
        ThresholdParams {
            sigma_u: self.cfg.sigma_u,
            sigma_z: self.cfg.sigma_z,
            tau: self.cfg.tau,
            d_u: self.cfg.d_u,
            d_y: self.cfg.d_y,
            delta: self.cfg.delta,
            samples,
            beta: self.beta,
        }
    }

    /// Number of independent trajectories a budget of `samples` buys in
    /// multi mode, `⌊T/(2τ−1)⌋`.
    pub fn trajectory_count(&self, samples: usize) -> usize {
        samples / (2 * self.cfg.tau - 1)
    }

    /// Simulate one trial's data and return `(Ĥ_τ, ξ)`.
    pub fn estimate(&self, samples: usize, trial_index: usize) -> Result<(HankelMatrix, f64)> {
        let seed = RandomSeed(self.cfg.master_seed).for_trial(samples as u64, trial_index as u64);
        let params = self.threshold_params(samples);
        match self.cfg.mode {
            Mode::Multi => {
                let count = self.trajectory_count(samples);
                let trajectories = (0..count)
                    .map(|i| simulate_trajectory(&self.system, self.noise, 2 * self.cfg.tau, seed.derive(i as u64)))
                    .collect::<Result<Vec<Trajectory>>>()?;
                let h_hat = lse_multi(&build_multi_design(&trajectories, self.cfg.tau)?)?;
                Ok((h_hat, threshold_multi(&params)?))
            }
            Mode::Single => {
                let traj = simulate_trajectory(&self.system, self.noise, samples, seed)?;
                let h_hat = lse_single(&build_single_design(&traj, self.cfg.tau)?)?;
                Ok((h_hat, threshold_single(&params)?))
            }
        }
    }

    fn try_trial(&self, samples: usize, trial_index: usize) -> Result<TrialRecord> {
        let (h_hat, xi) = self.estimate(samples, trial_index)?;
        let n = self.cfg.n;

        let result = thresholded_ho_kalman(&h_hat, xi)?;
        let h_xi = lowrank::hard_threshold(h_hat.data(), xi)?.matrix;
        let cab = markov_error(&result, &self.system, 2)?[1];

        // known-order baseline on the same estimate
        let projected = h_hat.with_data(lowrank::rank_k_approx(h_hat.data(), n)?)?;
        let oracle = ho_kalman(&projected, n)?;
        let oracle_cab = realization_markov_error(&oracle, &self.system, 2)?[1];

        Ok(TrialRecord {
            status: "ok".into(),
            samples,
            trial: trial_index,
            xi: Some(xi),
            order_estimate: Some(result.order),
            hankel_op_error: Some(metrics::operator_error(h_hat.data(), self.hankel.data())?),
            hankel_fro_error_thresholded: Some(metrics::frobenius_error(&h_xi, self.hankel.data())?),
            markov_cab_error: Some(cab),
            oracle_cab_error: Some(oracle_cab),
            bound_rhs_prop1: Some(prop1_bound(&self.hankel_singular_values, n.min(self.hankel_singular_values.len()), xi)?),
        })
    }

    /// One trial. Estimator failures become a `failed:<reason>` record.
    pub fn run_trial(&self, samples: usize, trial_index: usize) -> TrialRecord {
        self.try_trial(samples, trial_index)
            .unwrap_or_else(|e| TrialRecord::failed(samples, trial_index, &e.to_string()))
    }

    /// All trials of the grid, sorted by `(T, trial)`.
    pub fn run_all(&self) -> Result<Vec<TrialRecord>> {
        let jobs: Vec<(usize, usize)> = self
            .cfg
            .t_grid
            .iter()
            .flat_map(|&t| (0..self.cfg.trials_per_t).map(move |i| (t, i)))
            .collect();
        let work = || -> Vec<TrialRecord> { jobs.par_iter().map(|&(t, i)| self.run_trial(t, i)).collect() };
        let mut records = match thread_cap()? {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| SysIdError::invalid(format!("cannot build thread pool: {e}")))?
                .install(work),
            None => work(),
        };
        records.sort_by_key(|r| (r.samples, r.trial));
        Ok(records)
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SysIdError::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

/// Per-grid-point aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    #[serde(rename = "T")]
    pub samples: usize,
    /// Mean order estimate over successful trials.
    pub mean_order: Option<f64>,
    pub median_markov_cab_error: Option<f64>,
    pub median_oracle_cab_error: Option<f64>,
    pub median_hankel_fro_error: Option<f64>,
}

pub fn summarize(records: &[TrialRecord]) -> Vec<GridSummary> {
    let mut grid: Vec<usize> = records.iter().map(|r| r.samples).collect();
    grid.sort_unstable();
    grid.dedup();
    grid.into_iter()
        .map(|t| {
            let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.samples == t && r.is_ok()).collect();
            let orders: Vec<f64> = ok.iter().filter_map(|r| r.order_estimate).map(|k| k as f64).collect();
            GridSummary {
                samples: t,
                mean_order: (!orders.is_empty()).then(|| orders.iter().sum::<f64>() / orders.len() as f64),
                median_markov_cab_error: metrics::median(ok.iter().filter_map(|r| r.markov_cab_error)),
                median_oracle_cab_error: metrics::median(ok.iter().filter_map(|r| r.oracle_cab_error)),
                median_hankel_fro_error: metrics::median(ok.iter().filter_map(|r| r.hankel_fro_error_thresholded)),
            }
        })
        .collect()
}

/// Run the sweep and write the trial CSV to `output_path` and the summary
/// JSON to [`ExperimentConfig::summary_path`]. Both files are opened before
/// any trial runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let csv_file = File::create(&cfg.output_path)?;
    let summary_file = File::create(cfg.summary_path())?;
    let records = Experiment::new(cfg.clone())?.run_all()?;
    metrics::write_records(BufWriter::new(csv_file), &records)?;
    serde_json::to_writer_pretty(BufWriter::new(summary_file), &summarize(&records))?;
    Ok(records)
}
