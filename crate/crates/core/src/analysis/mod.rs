//! Decentralization cost, theoretical bounds, and their Monte Carlo checks.

mod bounds;
mod monte_carlo;
mod trajectory;

pub use bounds::{
    prop1_log_tv_bound, theorem1_bound, BoundInputs, BoundReport, BoundTerm, SPECTRAL_GAP_NOTE,
};
pub use monte_carlo::{
    bound_inputs, monte_carlo_verify, trial_seed, Guarantee, MonteCarloReport, VerificationOutcome,
    Verdict, MIN_TRIALS,
};
pub use trajectory::{
    empirical_rate_slope, kl_cost, run_trial, AgentStep, Simulation, StepRecord, TrajectoryRecord,
};

use rayon::prelude::*;
use thiserror::Error;

use crate::detection::DetectionError;
use crate::network::NetworkError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("degenerate inputs: {0}")]
    DegenerateInputs(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("TV error underflowed at t = {t} inside the fitting window")]
    UnderflowWindow { t: usize },
    #[error("requested step {requested} but the trajectory has {available}")]
    WindowOutOfRange { requested: usize, available: usize },
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("failed to build worker pool: {0}")]
    ThreadPool(String),
}

/// Maps `f` over `0..count` on a worker pool and returns results in index
/// order. `threads = None` uses the global pool.
pub fn parallel_map<T, F>(count: usize, threads: Option<usize>, f: F) -> Result<Vec<T>, AnalysisError>
where
    T: Send,
    F: Fn(usize) -> Result<T, AnalysisError> + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&f).collect::<Result<Vec<T>, _>>();
    match threads {
        None => run(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| AnalysisError::ThreadPool(e.to_string()))?
            .install(run),
    }
}
