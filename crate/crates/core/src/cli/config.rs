//! Scenario files.
//!
//! A scenario is a single JSON document:
//!
//! ```json
//! {
//!   "name": "reference",
//!   "model": { "true_state": 0, "agents": [[[0.8, 0.2], [0.2, 0.8]], [[0.5, 0.5], [0.5, 0.5]]] },
//!   "network": { "kind": "gossip", "n": 2, "edges": [[0, 1]] },
//!   "horizon": 300,
//!   "learning_rate": "unit",
//!   "delta": 0.1,
//!   "checkpoints": [300],
//!   "trials": 500,
//!   "seed": 1
//! }
//! ```
//!
//! `network.kind` is one of `fixed` (`matrix`), `metropolis` (`n`, `edges`),
//! `gossip` (`n`, `edges`) or `finite_support` (`support`: list of
//! `{matrix, probability}`). `learning_rate` is `"unit"`, `"theorem1"`,
//! `{"explicit": η}`, or absent. Optional: `output_dir`, `spectral_t`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::network::{
    metropolis_matrix, Graph, MixingMatrix, NetworkError, NetworkProcess, ProcessKind,
};
use crate::scenario::{LearningRate, Scenario};
use crate::signal::{ModelError, SignalModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config invalid ({a}): {0}", a = model_assumption(.0))]
    Model(#[from] ModelError),
    #[error("config invalid ({a}): {0}", a = network_assumption(.0))]
    Network(#[from] NetworkError),
    #[error("config invalid: {0}")]
    Scenario(#[from] AnalysisError),
}

fn model_assumption(e: &ModelError) -> &'static str {
    match e {
        ModelError::ZeroLikelihoodEntry { .. } => "bounded log-marginals",
        ModelError::NotIdentifiable { .. } => "global identifiability",
        _ => "signal model",
    }
}

fn network_assumption(e: &NetworkError) -> &'static str {
    match e {
        NetworkError::NotConnected => "connectivity in expectation",
        _ => "network",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub true_state: usize,
    /// `agents[i][k][s] = ℓ_i(s | θ_k)`.
    pub agents: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportEntry {
    pub matrix: Vec<Vec<f64>>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Fixed { matrix: Vec<Vec<f64>> },
    Metropolis { n: usize, edges: Vec<(usize, usize)> },
    Gossip { n: usize, edges: Vec<(usize, usize)> },
    FiniteSupport { support: Vec<SupportEntry> },
}

impl NetworkSpec {
    pub fn process_kind(&self) -> Result<ProcessKind, NetworkError> {
        Ok(match self {
            NetworkSpec::Fixed { matrix } => ProcessKind::Fixed {
                matrix: MixingMatrix::from_rows(matrix)?,
            },
            NetworkSpec::Metropolis { n, edges } => ProcessKind::Fixed {
                matrix: metropolis_matrix(&Graph::new(*n, edges.iter().copied())?),
            },
            NetworkSpec::Gossip { n, edges } => ProcessKind::Gossip {
                graph: Graph::new(*n, edges.iter().copied())?,
            },
            NetworkSpec::FiniteSupport { support } => ProcessKind::FiniteSupport {
                support: support
                    .iter()
                    .map(|e| Ok((MixingMatrix::from_rows(&e.matrix)?, e.probability)))
                    .collect::<Result<_, NetworkError>>()?,
            },
        })
    }

    /// Validated process satisfying connectivity in expectation.
    pub fn build(&self) -> Result<NetworkProcess, NetworkError> {
        NetworkProcess::new(self.process_kind()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    pub network: NetworkSpec,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<LearningRate>,
    pub delta: f64,
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Steps at which `spectral` tabulates the mixing-deviation sums.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_t: Option<Vec<usize>>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON serialization (after overrides).
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Checks bounded log-marginals, identifiability and connectivity, then
    /// assembles the runnable scenario.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let model = SignalModel::new(self.model.true_state, self.model.agents.clone())?;
        let network = self.network.build()?;
        Ok(Scenario::new(
            model,
            network,
            self.horizon,
            self.learning_rate,
            self.delta,
            self.checkpoints.clone(),
            self.trials,
            self.seed,
        )?)
    }
}
