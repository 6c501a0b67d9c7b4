//! Empirical checks of the high-probability guarantees: run many seeded
//! trials, count how often the bound is exceeded, and compare the violation
//! frequency with δ plus a three-standard-error allowance.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::bounds::{prop1_log_tv_bound, theorem1_bound, BoundInputs, BoundReport};
use super::trajectory::Simulation;
use super::{parallel_map, AnalysisError};
use crate::scenario::{LearningRate, Scenario};

pub const MIN_TRIALS: usize = 100;

/// Which guarantee a verification run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    /// Time-independent bound on the decentralization cost (fixed network).
    Theorem1,
    /// Anytime bound on the log TV error (switching network).
    Prop1,
}

impl Guarantee {
    /// Learning rate used when the scenario does not set one.
    pub fn default_learning_rate(self) -> LearningRate {
        match self {
            Guarantee::Theorem1 => LearningRate::Theorem1,
            Guarantee::Prop1 => LearningRate::Unit,
        }
    }
}

impl fmt::Display for Guarantee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Guarantee::Theorem1 => "theorem1",
            Guarantee::Prop1 => "prop1",
        })
    }
}

impl FromStr for Guarantee {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theorem1" => Ok(Guarantee::Theorem1),
            "prop1" => Ok(Guarantee::Prop1),
            other => Err(format!("unknown guarantee {other:?} (expected theorem1 or prop1)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Violation statistics for one bound evaluated over `trials` runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub guarantee: Guarantee,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<usize>,
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    pub delta: f64,
    /// `3 √(δ(1−δ)/R)`.
    pub slack: f64,
    /// `δ + slack`; the verdict is pass iff `violation_rate <= threshold`.
    pub threshold: f64,
    pub verdict: Verdict,
    pub bound: BoundReport,
    /// Per trial, the statistic compared against the bound: the largest agent
    /// log TV error at the checkpoint, or the largest agent cost at the horizon.
    pub trial_statistics: Vec<f64>,
}

impl MonteCarloReport {
    fn from_statistics(
        guarantee: Guarantee,
        checkpoint: Option<usize>,
        delta: f64,
        bound: BoundReport,
        trial_statistics: Vec<f64>,
    ) -> Self {
        let trials = trial_statistics.len();
        let violations = trial_statistics.iter().filter(|&&s| s > bound.value).count();
        let violation_rate = violations as f64 / trials as f64;
        let slack = 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
        let threshold = delta + slack;
        Self {
            guarantee,
            checkpoint,
            trials,
            violations,
            violation_rate,
            delta,
            slack,
            threshold,
            verdict: if violation_rate <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            bound,
            trial_statistics,
        }
    }
}

/// Everything a verification run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationOutcome {
    pub guarantee: Guarantee,
    pub base_seed: u64,
    pub trials: usize,
    pub eta: f64,
    pub log_bound: f64,
    pub second_state: usize,
    pub rate: f64,
    pub sigma2: f64,
    pub spectral_gap: f64,
    /// One report per gated check (one per checkpoint for prop1).
    pub reports: Vec<MonteCarloReport>,
    /// Fraction of trials exceeding the prop1 bound at some step up to the
    /// last checkpoint. Reported only; not gated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simultaneous_violation_rate: Option<f64>,
    pub passed: bool,
}

/// Seed of trial `index`: the splitmix64 finalizer applied to
/// `base + (index + 1) · 0x9E3779B97F4A7C15` (wrapping).
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn bound_inputs(scenario: &Scenario) -> BoundInputs {
    BoundInputs {
        b: scenario.model.log_bound(),
        rate: scenario.model.second_state().1,
        m: scenario.model.num_states(),
        n: scenario.num_agents(),
        delta: scenario.delta,
        sigma2: scenario.summary.sigma2,
    }
}

struct Prop1Trial {
    at_checkpoints: Vec<f64>,
    violated_somewhere: bool,
}

fn prop1_trial(
    scenario: &Scenario,
    eta: f64,
    seed: u64,
    checkpoints: &[usize],
    bounds_by_t: &[f64],
) -> Result<Prop1Trial, AnalysisError> {
    let last = *checkpoints.iter().max().expect("at least one checkpoint");
    let mut sim = Simulation::new(&scenario.model, &scenario.network, eta, seed)?;
    let mut worst_by_t = Vec::with_capacity(last);
    let mut violated_somewhere = false;
    for t in 1..=last {
        let rec = sim.step()?;
        let worst = rec
            .agents
            .iter()
            .map(|a| a.log_tv_error)
            .fold(f64::NEG_INFINITY, f64::max);
        violated_somewhere |= worst > bounds_by_t[t - 1];
        worst_by_t.push(worst);
    }
    Ok(Prop1Trial {
        at_checkpoints: checkpoints.iter().map(|&t| worst_by_t[t - 1]).collect(),
        violated_somewhere,
    })
}

fn theorem1_trial(
    scenario: &Scenario,
    eta: f64,
    seed: u64,
) -> Result<f64, AnalysisError> {
    let mut sim = Simulation::new(&scenario.model, &scenario.network, eta, seed)?;
    let mut costs = vec![0.0; scenario.num_agents()];
    for _ in 0..scenario.horizon {
        let rec = sim.step()?;
        for (c, a) in costs.iter_mut().zip(&rec.agents) {
            *c += a.kl_increment;
        }
    }
    Ok(costs.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Runs `trials` independent seeded trials and checks the chosen guarantee.
///
/// Trial `r` is seeded with [`trial_seed`]`(seed, r)`, so the outcomes of a
/// smaller run are a prefix of a larger one with the same base seed.
pub fn monte_carlo_verify(
    scenario: &Scenario,
    which: Guarantee,
    trials: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<VerificationOutcome, AnalysisError> {
    if trials < MIN_TRIALS {
        return Err(AnalysisError::InvalidScenario(format!(
            "verification needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    let eta = scenario.eta(which.default_learning_rate())?;
    let inputs = bound_inputs(scenario);
    let (second_state, rate) = scenario.model.second_state();

    let (reports, simultaneous_violation_rate) = match which {
        Guarantee::Prop1 => {
            let checkpoints = if scenario.checkpoints.is_empty() {
                vec![scenario.horizon]
            } else {
                scenario.checkpoints.clone()
            };
            let last = *checkpoints.iter().max().expect("nonempty");
            let bounds_by_t = (1..=last)
                .map(|t| prop1_log_tv_bound(&inputs, t).map(|r| r.value))
                .collect::<Result<Vec<_>, _>>()?;
            let outcomes = parallel_map(trials, threads, |r| {
                prop1_trial(scenario, eta, trial_seed(seed, r as u64), &checkpoints, &bounds_by_t)
            })?;
            let reports = checkpoints
                .iter()
                .enumerate()
                .map(|(c, &t)| {
                    let stats = outcomes.iter().map(|o| o.at_checkpoints[c]).collect();
                    Ok(MonteCarloReport::from_statistics(
                        which,
                        Some(t),
                        scenario.delta,
                        prop1_log_tv_bound(&inputs, t)?,
                        stats,
                    ))
                })
                .collect::<Result<Vec<_>, AnalysisError>>()?;
            let anywhere = outcomes.iter().filter(|o| o.violated_somewhere).count();
            (reports, Some(anywhere as f64 / trials as f64))
        }
        Guarantee::Theorem1 => {
            if !scenario.network.is_fixed() {
                return Err(AnalysisError::InvalidScenario(
                    "the cost bound applies to fixed networks only".into(),
                ));
            }
            let bound = theorem1_bound(&inputs)?;
            let stats = parallel_map(trials, threads, |r| {
                theorem1_trial(scenario, eta, trial_seed(seed, r as u64))
            })?;
            (
                vec![MonteCarloReport::from_statistics(
                    which,
                    None,
                    scenario.delta,
                    bound,
                    stats,
                )],
                None,
            )
        }
    };

    let passed = reports.iter().all(|r| r.verdict == Verdict::Pass);
    Ok(VerificationOutcome {
        guarantee: which,
        base_seed: seed,
        trials,
        eta,
        log_bound: inputs.b,
        second_state,
        rate,
        sigma2: scenario.summary.sigma2,
        spectral_gap: scenario.summary.spectral_gap,
        reports,
        simultaneous_violation_rate,
        passed,
    })
}
