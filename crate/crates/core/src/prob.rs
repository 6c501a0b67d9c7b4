//! Probability-simplex primitives: validated belief vectors, KL divergence,
//! total variation, and overflow-safe exponential-weights normalization.
//!
//! All logarithms are natural.

use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|Σ p − 1|` for a vector to count as a point of the simplex.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("probability vector is empty")]
    Empty,
    #[error("entry {index} is not a finite nonnegative number ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, expected 1 within {SIMPLEX_TOL}")]
    NotNormalized { sum: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("absolute continuity violated at index {index}: mu > 0 while pi = 0")]
    AbsoluteContinuityViolation { index: usize },
    #[error("non-finite input at index {index} ({value})")]
    NonFiniteInput { index: usize, value: f64 },
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    /// Validates without renormalizing.
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.is_empty() {
            return Err(ProbError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(ProbError::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform belief needs at least one state");
        Self(vec![1.0 / m as f64; m])
    }

    /// Delta distribution on state `k`.
    pub fn delta(m: usize, k: usize) -> Self {
        assert!(k < m, "delta index {k} out of range for {m} states");
        let mut probs = vec![0.0; m];
        probs[k] = 1.0;
        Self(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for BeliefVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl<'de> Deserialize<'de> for BeliefVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(d)?;
        BeliefVector::new(probs).map_err(serde::de::Error::custom)
    }
}

fn same_len(mu: &BeliefVector, pi: &BeliefVector) -> Result<(), ProbError> {
    if mu.len() != pi.len() {
        return Err(ProbError::LengthMismatch {
            left: mu.len(),
            right: pi.len(),
        });
    }
    Ok(())
}

/// `D_KL(mu ‖ pi)` in nats, with `0 · ln(0/q) = 0`.
pub fn kl_divergence(mu: &BeliefVector, pi: &BeliefVector) -> Result<f64, ProbError> {
    same_len(mu, pi)?;
    let mut acc = 0.0;
    for (index, (&p, &q)) in mu.0.iter().zip(&pi.0).enumerate() {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(ProbError::AbsoluteContinuityViolation { index });
        }
        acc += p * (p / q).ln();
    }
    // Rounding can leave a tiny negative residue for near-identical inputs.
    Ok(acc.max(0.0))
}

/// `(1/2) Σ |mu(k) − pi(k)|`.
pub fn tv_distance(mu: &BeliefVector, pi: &BeliefVector) -> Result<f64, ProbError> {
    same_len(mu, pi)?;
    let sum: f64 = mu.0.iter().zip(&pi.0).map(|(p, q)| (p - q).abs()).sum();
    Ok((0.5 * sum).min(1.0))
}

/// Overflow-safe `ln Σ exp(x_k)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_potential(phi: &[f64], eta: f64) -> Result<(), ProbError> {
    if phi.is_empty() {
        return Err(ProbError::Empty);
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(ProbError::InvalidLearningRate(eta));
    }
    for (index, &value) in phi.iter().enumerate() {
        if !value.is_finite() {
            return Err(ProbError::NonFiniteInput { index, value });
        }
    }
    Ok(())
}

/// Log-probabilities `η φ(k) − ln Σ_z exp(η φ(z))` of the exponential-weights
/// distribution.
pub fn log_gibbs(phi: &[f64], eta: f64) -> Result<Vec<f64>, ProbError> {
    check_potential(phi, eta)?;
    let scaled: Vec<f64> = phi.iter().map(|p| eta * p).collect();
    let norm = log_sum_exp(&scaled);
    Ok(scaled.into_iter().map(|s| s - norm).collect())
}

/// Exponential-weights belief `exp(η φ(k)) / Σ_z exp(η φ(z))`, normalized
/// after shifting by the maximum so large potentials never overflow.
pub fn gibbs_belief(phi: &[f64], eta: f64) -> Result<BeliefVector, ProbError> {
    check_potential(phi, eta)?;
    let max = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = phi.iter().map(|p| (eta * (p - max)).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(BeliefVector(weights.into_iter().map(|w| w / total).collect()))
}

/// KL divergence between two distributions given by log-probabilities.
///
/// Terms whose probability underflows contribute nothing, and no term can hit
/// a zero denominator, so this is the form used along long trajectories.
pub fn kl_from_log_probs(log_mu: &[f64], log_pi: &[f64]) -> f64 {
    debug_assert_eq!(log_mu.len(), log_pi.len());
    let acc: f64 = log_mu
        .iter()
        .zip(log_pi)
        .map(|(&a, &b)| {
            let p = a.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (a - b)
            }
        })
        .sum();
    acc.max(0.0)
}
