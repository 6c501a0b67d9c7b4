//! Finite-time distributed detection.
//!
//! A network of agents receives private signals about an unknown state drawn
//! from a finite set. Each agent accumulates log-likelihood potentials, mixes
//! them with its neighbors through a symmetric doubly stochastic matrix
//! (fixed, gossip, or drawn from a finite support), and forms an
//! exponential-weights belief. The crate simulates these agents next to a
//! centralized detector fed the same signals, measures detection error and
//! decentralization cost, and checks high-probability bounds on both by
//! Monte Carlo.
//!
//! Module map:
//! - [`prob`]: simplex primitives (KL, TV, exponential weights).
//! - [`signal`]: finite-alphabet likelihood tables and sampling.
//! - [`network`]: mixing matrices, network processes, spectral quantities.
//! - [`detection`]: centralized and decentralized engines.
//! - [`analysis`]: costs, bounds, Monte Carlo verification.
//! - [`cli`]: scenario files and the `simulate` / `verify` / `spectral` runners.

pub mod analysis;
pub mod cli;
pub mod detection;
pub mod linalg;
pub mod network;
pub mod prob;
pub mod scenario;
pub mod signal;

pub use scenario::{LearningRate, Scenario};
