//! Scenario files and the three commands built on them.
//!
//! - `simulate`: per-step trajectories (CSV) and a summary (JSON).
//! - `verify`: Monte Carlo check of one of the two guarantees (JSON).
//! - `spectral`: expected matrix, σ₂, connectivity and mixing-deviation sums.
//!
//! Every output is a deterministic function of the effective configuration,
//! so reruns with the same arguments produce byte-identical files.

mod config;

pub use config::{ConfigError, ModelSpec, NetworkSpec, ScenarioConfig, SupportEntry};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    kl_cost, monte_carlo_verify, parallel_map, run_trial, trial_seed, AnalysisError, Guarantee,
    TrajectoryRecord, VerificationOutcome,
};
use crate::network::{
    expected_matrix, is_connected, mixing_deviation_profile, sigma2, MixingMatrix, NetworkProcess,
};
use crate::scenario::LearningRate;

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SPECTRAL_FILE: &str = "spectral.json";
pub const DEFAULT_SPECTRAL_T: [usize; 4] = [1, 10, 100, 1000];

pub const CSV_HEADER: [&str; 7] = [
    "trial",
    "t",
    "agent",
    "tv_error",
    "log_tv_error",
    "kl_increment",
    "centralized_tv_error",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    /// 2 for invalid input, 3 for I/O or internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Analysis(
                AnalysisError::InvalidScenario(_) | AnalysisError::DegenerateInputs(_),
            ) => 2,
            _ => 3,
        }
    }
}

/// Command-line overrides. All but `threads` become part of the effective
/// configuration; the thread count never changes results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = Some(dir.clone());
        }
        cfg
    }
}

/// Digest of the effective configuration. The output location is excluded so
/// that the same experiment written to two places carries the same digest.
pub fn effective_digest(cfg: &ScenarioConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = None;
    c.digest()
}

fn output_dir(cfg: &ScenarioConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io(e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub final_tv_errors: Vec<f64>,
    pub final_centralized_tv_error: f64,
    /// `Σ_t D_KL(μ_{i,t} ‖ μ_t)` over the whole horizon, per agent.
    pub total_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRate {
    pub state: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub name: String,
    pub config_digest: String,
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub eta: f64,
    pub log_bound: f64,
    pub true_state: usize,
    /// `I(θ_true, θ_k)` for every false state.
    pub rates: Vec<StateRate>,
    pub second_state: usize,
    pub rate: f64,
    pub sigma2: f64,
    pub spectral_gap: f64,
    pub per_trial: Vec<TrialSummary>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub summary: SimulationSummary,
    pub trajectories: Vec<TrajectoryRecord>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs `trials` seeded trajectories (η defaults to 1) and writes the
/// per-step CSV and the summary.
pub fn run_simulate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<SimulateOutput, CliError> {
    let cfg = opts.apply(cfg);
    let scenario = cfg.to_scenario()?;
    let digest = effective_digest(&cfg);
    let eta = scenario.eta(LearningRate::Unit)?;

    let trajectories = parallel_map(scenario.trials, opts.threads, |r| {
        run_trial(
            &scenario.model,
            &scenario.network,
            eta,
            scenario.horizon,
            trial_seed(scenario.seed, r as u64),
            &digest,
        )
    })?;

    let dir = output_dir(&cfg)?;
    let csv_path = dir.join(TRAJECTORY_FILE);
    write_trajectories(&csv_path, &trajectories)?;

    let n = scenario.num_agents();
    let per_trial = trajectories
        .iter()
        .enumerate()
        .map(|(r, traj)| {
            let last = traj.at(traj.len());
            Ok(TrialSummary {
                trial: r,
                seed: traj.seed,
                final_tv_errors: last.agents.iter().map(|a| a.tv_error).collect(),
                final_centralized_tv_error: last.centralized_tv_error,
                total_costs: (0..n)
                    .map(|i| kl_cost(traj, i, traj.len()))
                    .collect::<Result<_, _>>()?,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;

    let truth = scenario.model.true_index();
    let (second_state, rate) = scenario.model.second_state();
    let summary = SimulationSummary {
        name: cfg.name.clone(),
        config_digest: digest,
        seed: scenario.seed,
        trials: scenario.trials,
        horizon: scenario.horizon,
        eta,
        log_bound: scenario.model.log_bound(),
        true_state: truth,
        rates: (0..scenario.model.num_states())
            .filter(|&k| k != truth)
            .map(|k| StateRate {
                state: k,
                rate: scenario.model.pairwise_rate(k),
            })
            .collect(),
        second_state,
        rate,
        sigma2: scenario.summary.sigma2,
        spectral_gap: scenario.summary.spectral_gap,
        per_trial,
    };
    let summary_path = dir.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;

    Ok(SimulateOutput {
        summary,
        trajectories,
        csv_path,
        summary_path,
    })
}

fn write_trajectories(path: &Path, trajectories: &[TrajectoryRecord]) -> Result<(), CliError> {
    let err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(CSV_HEADER).map_err(err)?;
    for (r, traj) in trajectories.iter().enumerate() {
        for step in &traj.steps {
            let central = format_float(step.centralized_tv_error);
            for (i, a) in step.agents.iter().enumerate() {
                w.write_record([
                    r.to_string(),
                    step.t.to_string(),
                    i.to_string(),
                    format_float(a.tv_error),
                    format_float(a.log_tv_error),
                    format_float(a.kl_increment),
                    central.clone(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub config_digest: String,
    #[serde(flatten)]
    pub outcome: VerificationOutcome,
}

#[derive(Debug, Clone)]
pub struct VerifyOutput {
    pub report: VerifyReport,
    pub path: PathBuf,
}

/// Monte Carlo check of `which`; writes `verify_<which>.json`.
pub fn run_verify(
    cfg: &ScenarioConfig,
    which: Guarantee,
    opts: &RunOptions,
) -> Result<VerifyOutput, CliError> {
    let cfg = opts.apply(cfg);
    let scenario = cfg.to_scenario()?;
    let outcome = monte_carlo_verify(&scenario, which, scenario.trials, scenario.seed, opts.threads)?;
    let report = VerifyReport {
        name: cfg.name.clone(),
        config_digest: effective_digest(&cfg),
        outcome,
    };
    let path = output_dir(&cfg)?.join(format!("verify_{which}.json"));
    write_json(&path, &report)?;
    Ok(VerifyOutput { report, path })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub t: usize,
    /// `Σ_{τ=1}^{t} Σ_j |[W^{t−τ}]_{ij} − 1/n|` for each agent `i`.
    pub per_agent: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub name: String,
    pub num_agents: usize,
    pub expected_matrix: MixingMatrix,
    pub connected: bool,
    /// `None` when the expected matrix is disconnected (σ₂ = 1).
    pub sigma2: Option<f64>,
    pub spectral_gap: Option<f64>,
    /// `4 ln n / (1 − σ₂)`.
    pub deviation_bound: Option<f64>,
    pub deviation: Vec<DeviationRow>,
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SpectralOutput {
    pub report: SpectralReport,
    pub path: PathBuf,
}

/// Spectral summary of the expected network. Only the network section has
/// to be valid; a disconnected expectation is reported, not rejected.
pub fn spectral_report(
    cfg: &ScenarioConfig,
    t_values: &[usize],
) -> Result<SpectralReport, ConfigError> {
    let process = NetworkProcess::without_connectivity_check(cfg.network.process_kind()?)?;
    let expected = expected_matrix(&process);
    let n = expected.dim();
    let connected = is_connected(expected.matrix());
    let s2 = if connected {
        Some(sigma2(&expected)?)
    } else {
        None
    };
    let deviation_bound = s2.map(|s| 4.0 * (n as f64).ln() / (1.0 - s));

    let t_max = t_values.iter().copied().max().unwrap_or(0);
    let profiles: Vec<Vec<f64>> = (0..n)
        .map(|i| mixing_deviation_profile(&expected, i, t_max))
        .collect();
    let deviation: Vec<DeviationRow> = t_values
        .iter()
        .filter(|&&t| t >= 1)
        .map(|&t| {
            let per_agent: Vec<f64> = profiles.iter().map(|p| p[t - 1]).collect();
            let max = per_agent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            DeviationRow { t, per_agent, max }
        })
        .collect();
    let within_bound = deviation_bound.map(|b| deviation.iter().all(|row| row.max <= b));

    Ok(SpectralReport {
        name: cfg.name.clone(),
        num_agents: n,
        expected_matrix: expected,
        connected,
        sigma2: s2,
        spectral_gap: s2.map(|s| 1.0 - s),
        deviation_bound,
        deviation,
        within_bound,
    })
}

/// Writes [`spectral_report`] to `spectral.json`. `t_values` falls back to
/// the config's `spectral_t`, then to [`DEFAULT_SPECTRAL_T`].
pub fn run_spectral(
    cfg: &ScenarioConfig,
    t_values: Option<&[usize]>,
    opts: &RunOptions,
) -> Result<SpectralOutput, CliError> {
    let cfg = opts.apply(cfg);
    let ts: Vec<usize> = match (t_values, &cfg.spectral_t) {
        (Some(ts), _) => ts.to_vec(),
        (None, Some(ts)) => ts.clone(),
        (None, None) => DEFAULT_SPECTRAL_T.to_vec(),
    };
    let report = spectral_report(&cfg, &ts)?;
    let path = output_dir(&cfg)?.join(SPECTRAL_FILE);
    write_json(&path, &report)?;
    Ok(SpectralOutput { report, path })
}
