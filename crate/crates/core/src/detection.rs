//! Centralized and decentralized exponential-weights detectors.
//!
//! Both engines keep unnormalized log-likelihood potentials and only turn them
//! into beliefs on demand. With the same signal stream and any sequence of
//! doubly stochastic mixing matrices, the agent-average of the decentralized
//! potentials equals the centralized potential at every step.

use thiserror::Error;

use crate::network::MixingMatrix;
use crate::prob::{gibbs_belief, log_gibbs, BeliefVector};
use crate::signal::{SignalModel, SignalSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
}

fn check_eta(eta: f64) -> Result<(), DetectionError> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(DetectionError::InvalidLearningRate(eta))
    }
}

fn check_sample(model: &SignalModel, sample: &SignalSample) -> Result<(), DetectionError> {
    if sample.symbols.len() != model.num_agents() {
        return Err(DetectionError::DimensionMismatch {
            what: "signal sample",
            expected: model.num_agents(),
            got: sample.symbols.len(),
        });
    }
    for (i, &s) in sample.symbols.iter().enumerate() {
        let size = model.agent(i).alphabet_size();
        if s >= size {
            return Err(DetectionError::DimensionMismatch {
                what: "symbol alphabet",
                expected: size,
                got: s,
            });
        }
    }
    Ok(())
}

/// A single agent seeing every private signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedState {
    phi: Vec<f64>,
    t: usize,
    eta: f64,
}

impl CentralizedState {
    /// Uniform prior: zero potential.
    pub fn new(m: usize, eta: f64) -> Result<Self, DetectionError> {
        check_eta(eta)?;
        Ok(Self {
            phi: vec![0.0; m],
            t: 0,
            eta,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `φ ← φ + (1/n) Σ_i ψ_i`.
    pub fn step(&mut self, sample: &SignalSample, model: &SignalModel) -> Result<(), DetectionError> {
        check_sample(model, sample)?;
        if self.phi.len() != model.num_states() {
            return Err(DetectionError::DimensionMismatch {
                what: "potential length",
                expected: model.num_states(),
                got: self.phi.len(),
            });
        }
        let inv_n = 1.0 / model.num_agents() as f64;
        let mut increment = vec![0.0; self.phi.len()];
        for (i, &s) in sample.symbols.iter().enumerate() {
            for (acc, l) in increment.iter_mut().zip(model.log_marginal_vector(i, s)) {
                *acc += l;
            }
        }
        for (p, inc) in self.phi.iter_mut().zip(increment) {
            *p += inv_n * inc;
        }
        self.t += 1;
        Ok(())
    }

    pub fn belief(&self) -> BeliefVector {
        gibbs_belief(&self.phi, self.eta).expect("potentials stay finite")
    }

    pub fn log_belief(&self) -> Vec<f64> {
        log_gibbs(&self.phi, self.eta).expect("potentials stay finite")
    }
}

/// Functional form of [`CentralizedState::step`].
pub fn centralized_step(
    state: &CentralizedState,
    sample: &SignalSample,
    model: &SignalModel,
) -> Result<CentralizedState, DetectionError> {
    let mut next = state.clone();
    next.step(sample, model)?;
    Ok(next)
}

/// Per-agent potentials, row-major `n × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedState {
    phi: Vec<f64>,
    n: usize,
    m: usize,
    t: usize,
    eta: f64,
}

impl DecentralizedState {
    pub fn new(n: usize, m: usize, eta: f64) -> Result<Self, DetectionError> {
        check_eta(eta)?;
        Ok(Self {
            phi: vec![0.0; n * m],
            n,
            m,
            t: 0,
            eta,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn phi(&self, i: usize) -> &[f64] {
        &self.phi[i * self.m..(i + 1) * self.m]
    }

    /// `φ_t = W(t) φ_{t−1} + Ψ_t`, where row `i` of `Ψ_t` is agent `i`'s
    /// log-marginal vector.
    pub fn step(
        &mut self,
        w: &MixingMatrix,
        sample: &SignalSample,
        model: &SignalModel,
    ) -> Result<(), DetectionError> {
        if w.dim() != self.n {
            return Err(DetectionError::DimensionMismatch {
                what: "mixing matrix",
                expected: self.n,
                got: w.dim(),
            });
        }
        if model.num_agents() != self.n || model.num_states() != self.m {
            return Err(DetectionError::DimensionMismatch {
                what: "signal model",
                expected: self.n,
                got: model.num_agents(),
            });
        }
        check_sample(model, sample)?;
        let mut next = w.matrix().mul_dense(&self.phi, self.m);
        for (i, &s) in sample.symbols.iter().enumerate() {
            let row = &mut next[i * self.m..(i + 1) * self.m];
            for (p, l) in row.iter_mut().zip(model.log_marginal_vector(i, s)) {
                *p += l;
            }
        }
        self.phi = next;
        self.t += 1;
        Ok(())
    }

    /// `(1/n) Σ_i φ_i`.
    pub fn mean_phi(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for i in 0..self.n {
            for (o, p) in out.iter_mut().zip(self.phi(i)) {
                *o += p;
            }
        }
        let inv_n = 1.0 / self.n as f64;
        out.iter_mut().for_each(|o| *o *= inv_n);
        out
    }

    pub fn belief(&self, i: usize) -> BeliefVector {
        gibbs_belief(self.phi(i), self.eta).expect("potentials stay finite")
    }

    pub fn log_belief(&self, i: usize) -> Vec<f64> {
        log_gibbs(self.phi(i), self.eta).expect("potentials stay finite")
    }

    pub fn beliefs(&self) -> Vec<BeliefVector> {
        (0..self.n).map(|i| self.belief(i)).collect()
    }
}

/// Functional form of [`DecentralizedState::step`].
pub fn decentralized_step(
    state: &DecentralizedState,
    w: &MixingMatrix,
    sample: &SignalSample,
    model: &SignalModel,
) -> Result<DecentralizedState, DetectionError> {
    let mut next = state.clone();
    next.step(w, sample, model)?;
    Ok(next)
}

pub fn beliefs(state: &DecentralizedState) -> Vec<BeliefVector> {
    state.beliefs()
}

/// Direct evaluation of
/// `φ_{i,t} = Σ_τ Σ_j [W(t) W(t−1) ⋯ W(τ+1)]_{ij} ψ_{j,τ}`
/// by explicit matrix products (empty product at `τ = t` is the identity).
///
/// `psis[τ][j]` is agent `j`'s log-marginal vector at step `τ + 1`.
pub fn closed_form_phi(
    matrices: &[MixingMatrix],
    psis: &[Vec<Vec<f64>>],
    i: usize,
) -> Result<Vec<f64>, DetectionError> {
    let t = matrices.len();
    if psis.len() != t {
        return Err(DetectionError::DimensionMismatch {
            what: "number of log-marginal steps",
            expected: t,
            got: psis.len(),
        });
    }
    let Some(first) = psis.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    let m = first.first().map_or(0, Vec::len);
    for w in matrices {
        if w.dim() != n {
            return Err(DetectionError::DimensionMismatch {
                what: "mixing matrix",
                expected: n,
                got: w.dim(),
            });
        }
    }
    for step in psis {
        if step.len() != n || step.iter().any(|v| v.len() != m) {
            return Err(DetectionError::DimensionMismatch {
                what: "log-marginal tensor",
                expected: n,
                got: step.len(),
            });
        }
    }
    if i >= n {
        return Err(DetectionError::DimensionMismatch {
            what: "agent index",
            expected: n,
            got: i,
        });
    }

    let mut out = vec![0.0; m];
    let mut product = crate::linalg::SquareMatrix::identity(n);
    for tau in (1..=t).rev() {
        for (j, psi) in psis[tau - 1].iter().enumerate() {
            let weight = product[(i, j)];
            for (o, v) in out.iter_mut().zip(psi) {
                *o += weight * v;
            }
        }
        product = product.matmul(matrices[tau - 1].matrix());
    }
    Ok(out)
}

/// `η = (1 − σ₂) / (16 B ln n)`.
pub fn theorem1_learning_rate(b: f64, n: usize, sigma2_w: f64) -> Result<f64, DetectionError> {
    if n < 2 {
        return Err(DetectionError::DegenerateNetwork(format!(
            "need at least 2 agents, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&sigma2_w) {
        return Err(DetectionError::DegenerateNetwork(format!(
            "second singular value {sigma2_w} must lie in [0, 1)"
        )));
    }
    if !(b.is_finite() && b > 0.0) {
        return Err(DetectionError::DegenerateNetwork(format!(
            "log bound B must be positive, got {b}"
        )));
    }
    Ok((1.0 - sigma2_w) / (16.0 * b * (n as f64).ln()))
}
