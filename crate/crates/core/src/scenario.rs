//! A validated, runnable experiment: signal model, network process, horizon,
//! and the verification parameters.

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisError;
use crate::detection::theorem1_learning_rate;
use crate::network::{expected_matrix, sigma2, MixingMatrix, NetworkProcess};
use crate::signal::SignalModel;

/// How the learning rate η is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    /// η = 1.
    Unit,
    /// η = (1 − σ₂(W)) / (16 B ln n).
    Theorem1,
    Explicit(f64),
}

/// Spectral facts about the expected network, computed once per scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub expected: MixingMatrix,
    pub sigma2: f64,
    pub spectral_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SignalModel,
    pub network: NetworkProcess,
    pub horizon: usize,
    /// `None` means each experiment uses its own default.
    pub learning_rate: Option<LearningRate>,
    pub delta: f64,
    pub checkpoints: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub summary: NetworkSummary,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: SignalModel,
        network: NetworkProcess,
        horizon: usize,
        learning_rate: Option<LearningRate>,
        delta: f64,
        checkpoints: Vec<usize>,
        trials: usize,
        seed: u64,
    ) -> Result<Self, AnalysisError> {
        let invalid = |msg: String| Err(AnalysisError::InvalidScenario(msg));
        if model.num_agents() != network.num_agents() {
            return invalid(format!(
                "signal model has {} agents but network has {}",
                model.num_agents(),
                network.num_agents()
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        if horizon < 1 {
            return invalid("horizon must be at least 1".into());
        }
        if trials < 1 {
            return invalid("trials must be at least 1".into());
        }
        if let Some(&t) = checkpoints.iter().find(|&&t| t < 1 || t > horizon) {
            return invalid(format!("checkpoint {t} outside 1..={horizon}"));
        }
        if let Some(LearningRate::Explicit(eta)) = learning_rate {
            if !(eta.is_finite() && eta > 0.0) {
                return invalid(format!("explicit learning rate must be positive, got {eta}"));
            }
        }
        let expected = expected_matrix(&network);
        let s2 = sigma2(&expected)?;
        Ok(Self {
            model,
            network,
            horizon,
            learning_rate,
            delta,
            checkpoints,
            trials,
            seed,
            summary: NetworkSummary {
                expected,
                sigma2: s2,
                spectral_gap: 1.0 - s2,
            },
        })
    }

    pub fn num_agents(&self) -> usize {
        self.model.num_agents()
    }

    /// The configured learning rate, or `default` when none was configured.
    pub fn eta(&self, default: LearningRate) -> Result<f64, AnalysisError> {
        match self.learning_rate.unwrap_or(default) {
            LearningRate::Unit => Ok(1.0),
            LearningRate::Explicit(eta) => Ok(eta),
            LearningRate::Theorem1 => Ok(theorem1_learning_rate(
                self.model.log_bound(),
                self.num_agents(),
                self.summary.sigma2,
            )?),
        }
    }
}
