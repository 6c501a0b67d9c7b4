//! Finite-alphabet observation model.
//!
//! Each agent owns a likelihood table with one row per state and one column
//! per alphabet symbol. Signals at each step are drawn independently per agent
//! from the true state's row.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::prob::{kl_divergence, BeliefVector};

/// Absolute per-entry tolerance for observational equivalence of two rows.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("need at least 2 states, got {0}")]
    TooFewStates(usize),
    #[error("true state index {index} out of range for {m} states")]
    InvalidTrueState { index: usize, m: usize },
    #[error("agent {agent} has {rows} rows, expected {m}")]
    RowCountMismatch { agent: usize, rows: usize, m: usize },
    #[error("agent {agent} has an empty alphabet or ragged rows")]
    BadAlphabet { agent: usize },
    #[error("zero or negative likelihood at agent {agent}, state {state}, symbol {symbol}: log-marginals are unbounded")]
    ZeroLikelihoodEntry {
        agent: usize,
        state: usize,
        symbol: usize,
    },
    #[error("agent {agent}, state {state}: row sums to {sum}, expected 1")]
    BadRowSum { agent: usize, state: usize, sum: f64 },
    #[error("true state is not globally identifiable: states {states:?} are observationally equivalent for every agent")]
    NotIdentifiable { states: Vec<usize> },
}

/// Number of states and the index of the state generating the signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StateSpace {
    pub m: usize,
    pub true_index: usize,
}

/// One agent's likelihood table `ℓ_i(s | θ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLikelihood {
    rows: Vec<BeliefVector>,
    // log_columns[s][k] = ln ℓ_i(s | θ_k)
    log_columns: Vec<Vec<f64>>,
}

impl AgentLikelihood {
    fn build(agent: usize, table: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let alphabet = table.first().map_or(0, Vec::len);
        if alphabet == 0 || table.iter().any(|r| r.len() != alphabet) {
            return Err(ModelError::BadAlphabet { agent });
        }
        let mut rows = Vec::with_capacity(table.len());
        for (state, row) in table.into_iter().enumerate() {
            if let Some(symbol) = row.iter().position(|&p| !(p.is_finite() && p > 0.0)) {
                return Err(ModelError::ZeroLikelihoodEntry {
                    agent,
                    state,
                    symbol,
                });
            }
            let sum: f64 = row.iter().sum();
            let row =
                BeliefVector::new(row).map_err(|_| ModelError::BadRowSum { agent, state, sum })?;
            rows.push(row);
        }
        let log_columns = (0..alphabet)
            .map(|s| rows.iter().map(|r| r[s].ln()).collect())
            .collect();
        Ok(Self { rows, log_columns })
    }

    pub fn alphabet_size(&self) -> usize {
        self.log_columns.len()
    }

    pub fn row(&self, state: usize) -> &BeliefVector {
        &self.rows[state]
    }

    pub fn rows(&self) -> &[BeliefVector] {
        &self.rows
    }

    fn max_abs_log(&self) -> f64 {
        self.log_columns
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    fn equivalent_to(&self, a: usize, b: usize) -> bool {
        self.rows[a]
            .as_slice()
            .iter()
            .zip(self.rows[b].as_slice())
            .all(|(x, y)| (x - y).abs() <= EQUIVALENCE_TOL)
    }

    fn sample(&self, state: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let row = self.rows[state].as_slice();
        let mut cum = 0.0;
        for (s, p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                return s;
            }
        }
        row.len() - 1
    }
}

/// One step of private signals, one symbol per agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalSample {
    pub symbols: Vec<usize>,
}

/// Summary of the checks performed when a model is accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Tightest bound on `|ln ℓ_i(s | θ_k)|`.
    pub log_bound: f64,
    /// Per agent, the states it cannot tell apart from the true state.
    pub equivalence_sets: Vec<BTreeSet<usize>>,
    /// Intersection of the per-agent sets; `{true_index}` for a valid model.
    pub network_equivalence_set: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    states: StateSpace,
    agents: Vec<AgentLikelihood>,
    log_bound: f64,
}

impl SignalModel {
    /// Builds and fully validates a model from raw tables
    /// (`tables[agent][state][symbol]`).
    pub fn new(true_index: usize, tables: Vec<Vec<Vec<f64>>>) -> Result<Self, ModelError> {
        let model = Self::assemble(true_index, tables)?;
        let report = model.report();
        if report.network_equivalence_set.len() > 1 {
            return Err(ModelError::NotIdentifiable {
                states: report
                    .network_equivalence_set
                    .into_iter()
                    .filter(|&k| k != true_index)
                    .collect(),
            });
        }
        Ok(model)
    }

    /// Structural checks only; global identifiability is not enforced.
    pub(crate) fn assemble(true_index: usize, tables: Vec<Vec<Vec<f64>>>) -> Result<Self, ModelError> {
        let n = tables.len();
        if n < 2 {
            return Err(ModelError::TooFewAgents(n));
        }
        let m = tables[0].len();
        if m < 2 {
            return Err(ModelError::TooFewStates(m));
        }
        if true_index >= m {
            return Err(ModelError::InvalidTrueState { index: true_index, m });
        }
        let mut agents = Vec::with_capacity(n);
        for (agent, table) in tables.into_iter().enumerate() {
            if table.len() != m {
                return Err(ModelError::RowCountMismatch {
                    agent,
                    rows: table.len(),
                    m,
                });
            }
            agents.push(AgentLikelihood::build(agent, table)?);
        }
        let log_bound = agents
            .iter()
            .map(AgentLikelihood::max_abs_log)
            .fold(0.0, f64::max);
        Ok(Self {
            states: StateSpace { m, true_index },
            agents,
            log_bound,
        })
    }

    pub fn states(&self) -> StateSpace {
        self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.m
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn true_index(&self) -> usize {
        self.states.true_index
    }

    pub fn agent(&self, i: usize) -> &AgentLikelihood {
        &self.agents[i]
    }

    pub fn report(&self) -> ValidationReport {
        let equivalence_sets: Vec<BTreeSet<usize>> =
            (0..self.num_agents()).map(|i| self.equivalent_states(i)).collect();
        let network_equivalence_set = equivalence_sets
            .iter()
            .skip(1)
            .fold(equivalence_sets[0].clone(), |acc, s| {
                acc.intersection(s).copied().collect()
            });
        ValidationReport {
            log_bound: self.log_bound,
            equivalence_sets,
            network_equivalence_set,
        }
    }

    /// `B = max_{i,k,s} |ln ℓ_i(s | θ_k)|`.
    pub fn log_bound(&self) -> f64 {
        self.log_bound
    }

    /// States agent `i` cannot distinguish from the true state.
    pub fn equivalent_states(&self, i: usize) -> BTreeSet<usize> {
        let truth = self.true_index();
        (0..self.num_states())
            .filter(|&k| self.agents[i].equivalent_to(k, truth))
            .collect()
    }

    /// Network-average KL divergence `(1/n) Σ_i D_KL(ℓ_i(·|θ_true) ‖ ℓ_i(·|θ_k))`.
    pub fn pairwise_rate(&self, k: usize) -> f64 {
        let truth = self.true_index();
        let total: f64 = self
            .agents
            .iter()
            .map(|a| kl_divergence(a.row(truth), a.row(k)).expect("rows have full support"))
            .sum();
        total / self.num_agents() as f64
    }

    /// The false state with the slowest detection rate and that rate.
    /// Ties go to the smallest index.
    pub fn second_state(&self) -> (usize, f64) {
        let truth = self.true_index();
        let mut best: Option<(usize, f64)> = None;
        for k in (0..self.num_states()).filter(|&k| k != truth) {
            let rate = self.pairwise_rate(k);
            if best.is_none_or(|(_, r)| rate < r) {
                best = Some((k, rate));
            }
        }
        best.expect("at least two states")
    }

    /// Draws one symbol per agent from the true state's row.
    pub fn sample_step(&self, rng: &mut impl Rng) -> SignalSample {
        let truth = self.true_index();
        SignalSample {
            symbols: self.agents.iter().map(|a| a.sample(truth, rng)).collect(),
        }
    }

    /// `(ln ℓ_i(symbol | θ_k))_k`.
    pub fn log_marginal_vector(&self, agent: usize, symbol: usize) -> &[f64] {
        &self.agents[agent].log_columns[symbol]
    }
}
