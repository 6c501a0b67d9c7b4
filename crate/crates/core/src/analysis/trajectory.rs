//! Paired centralized/decentralized runs driven by one signal stream, and the
//! per-step diagnostics recorded along them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::AnalysisError;
use crate::detection::{CentralizedState, DecentralizedState};
use crate::network::NetworkProcess;
use crate::prob::{kl_from_log_probs, log_sum_exp};
use crate::signal::SignalModel;

/// Per-agent quantities at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentStep {
    /// `‖μ_{i,t} − e_true‖_TV`, i.e. the belief mass on false states.
    pub tv_error: f64,
    /// Natural log of `tv_error`, evaluated in the log domain so it stays
    /// finite long after `tv_error` itself underflows.
    pub log_tv_error: f64,
    /// `D_KL(μ_{i,t} ‖ μ_t)`.
    pub kl_increment: f64,
    /// `ln Σ_{k≠true} exp{η(φ_{i,t}(k) − φ_{i,t}(true))}`, the log of the
    /// exponential potential-gap sum that upper-bounds the TV error.
    pub log_exp_gap_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub agents: Vec<AgentStep>,
    pub centralized_tv_error: f64,
    /// `max_k |(1/n) Σ_i φ_{i,t}(k) − φ_t(k)|`.
    pub connection_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub config_digest: String,
    pub eta: f64,
    pub steps: Vec<StepRecord>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn num_agents(&self) -> usize {
        self.steps.first().map_or(0, |s| s.agents.len())
    }

    /// Record at step `t` (1-based).
    pub fn at(&self, t: usize) -> &StepRecord {
        &self.steps[t - 1]
    }

    /// First step whose log TV error is no longer finite, if any.
    pub fn underflow_step(&self, agent: usize) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| !s.agents[agent].log_tv_error.is_finite())
            .map(|s| s.t)
    }
}

/// Log-domain TV error and exponential gap sum for one potential vector.
fn error_terms(phi: &[f64], eta: f64, truth: usize, log_belief: &[f64]) -> (f64, f64) {
    let false_log: Vec<f64> = log_belief
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != truth)
        .map(|(_, &l)| l)
        .collect();
    let log_tv = log_sum_exp(&false_log).min(0.0);
    let gaps: Vec<f64> = phi
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != truth)
        .map(|(_, &p)| eta * (p - phi[truth]))
        .collect();
    (log_tv, log_sum_exp(&gaps))
}

/// Both detectors stepping in lockstep on common random numbers.
///
/// Each step draws `W(t)` from the network process first, then one signal per
/// agent, all from the same generator.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    model: &'a SignalModel,
    network: &'a NetworkProcess,
    central: CentralizedState,
    agents: DecentralizedState,
    rng: ChaCha8Rng,
}

impl<'a> Simulation<'a> {
    pub fn new(
        model: &'a SignalModel,
        network: &'a NetworkProcess,
        eta: f64,
        seed: u64,
    ) -> Result<Self, AnalysisError> {
        let (n, m) = (model.num_agents(), model.num_states());
        if network.num_agents() != n {
            return Err(AnalysisError::InvalidScenario(format!(
                "signal model has {n} agents but network has {}",
                network.num_agents()
            )));
        }
        Ok(Self {
            model,
            network,
            central: CentralizedState::new(m, eta)?,
            agents: DecentralizedState::new(n, m, eta)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn centralized(&self) -> &CentralizedState {
        &self.central
    }

    pub fn decentralized(&self) -> &DecentralizedState {
        &self.agents
    }

    /// Advances both engines by one step without computing diagnostics.
    pub fn advance(&mut self) -> Result<(), AnalysisError> {
        let w = self.network.draw(&mut self.rng);
        let sample = self.model.sample_step(&mut self.rng);
        self.agents.step(&w, &sample, self.model)?;
        self.central.step(&sample, self.model)?;
        Ok(())
    }

    /// Advances one step and records the per-agent diagnostics.
    pub fn step(&mut self) -> Result<StepRecord, AnalysisError> {
        self.advance()?;
        Ok(self.record())
    }

    /// Diagnostics for the current state.
    pub fn record(&self) -> StepRecord {
        let truth = self.model.true_index();
        let eta = self.agents.eta();
        let central_log = self.central.log_belief();
        let (central_log_tv, _) = error_terms(self.central.phi(), eta, truth, &central_log);
        let agents = (0..self.agents.num_agents())
            .map(|i| {
                let log_b = self.agents.log_belief(i);
                let (log_tv, log_gap) = error_terms(self.agents.phi(i), eta, truth, &log_b);
                AgentStep {
                    tv_error: log_tv.exp(),
                    log_tv_error: log_tv,
                    kl_increment: kl_from_log_probs(&log_b, &central_log),
                    log_exp_gap_sum: log_gap,
                }
            })
            .collect();
        let connection_gap = self
            .agents
            .mean_phi()
            .iter()
            .zip(self.central.phi())
            .fold(0.0, |acc, (a, c)| f64::max(acc, (a - c).abs()));
        StepRecord {
            t: self.agents.t(),
            agents,
            centralized_tv_error: central_log_tv.exp(),
            connection_gap,
        }
    }
}

/// Runs one seeded trial for `horizon` steps and keeps every record.
pub fn run_trial(
    model: &SignalModel,
    network: &NetworkProcess,
    eta: f64,
    horizon: usize,
    seed: u64,
    config_digest: &str,
) -> Result<TrajectoryRecord, AnalysisError> {
    let mut sim = Simulation::new(model, network, eta, seed)?;
    let steps = (0..horizon)
        .map(|_| sim.step())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectoryRecord {
        seed,
        config_digest: config_digest.to_string(),
        eta,
        steps,
    })
}

/// `Cost_{i,T} = Σ_{t=1}^{T} D_KL(μ_{i,t} ‖ μ_t)`.
pub fn kl_cost(trajectory: &TrajectoryRecord, agent: usize, horizon: usize) -> Result<f64, AnalysisError> {
    if horizon > trajectory.len() {
        return Err(AnalysisError::WindowOutOfRange {
            requested: horizon,
            available: trajectory.len(),
        });
    }
    Ok(trajectory.steps[..horizon]
        .iter()
        .map(|s| s.agents[agent].kl_increment)
        .sum())
}

/// Least-squares slope of `ln TV` against `t` over the inclusive window
/// `[t1, t2]`.
pub fn empirical_rate_slope(
    trajectory: &TrajectoryRecord,
    agent: usize,
    (t1, t2): (usize, usize),
) -> Result<f64, AnalysisError> {
    if t1 < 1 || t2 <= t1 {
        return Err(AnalysisError::DegenerateInputs(format!(
            "window ({t1}, {t2}) must satisfy 1 <= t1 < t2"
        )));
    }
    if t2 > trajectory.len() {
        return Err(AnalysisError::WindowOutOfRange {
            requested: t2,
            available: trajectory.len(),
        });
    }
    let mut points = Vec::with_capacity(t2 - t1 + 1);
    for t in t1..=t2 {
        let y = trajectory.at(t).agents[agent].log_tv_error;
        if !y.is_finite() {
            return Err(AnalysisError::UnderflowWindow { t });
        }
        points.push((t as f64, y));
    }
    Ok(least_squares_slope(&points))
}

pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let len = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / len;
    let my = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}
