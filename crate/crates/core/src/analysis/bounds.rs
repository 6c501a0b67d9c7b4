//! Closed-form high-probability bounds on the decentralization cost and on
//! the log total-variation error.

use serde::Serialize;

use super::AnalysisError;

/// Everything the bounds depend on besides time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Uniform bound on `|ln ℓ_i|`.
    pub b: f64,
    /// Detection rate of the second state, `I(θ₁, θ₂)`.
    pub rate: f64,
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    pub sigma2: f64,
}

impl BoundInputs {
    fn check(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::DegenerateInputs(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if !(0.0..1.0).contains(&self.sigma2) {
            return bad(format!("sigma2 must lie in [0, 1), got {}", self.sigma2));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad(format!("B must be positive, got {}", self.b));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound: &'static str,
    /// Sum of `terms`.
    pub value: f64,
    pub terms: Vec<BoundTerm>,
    pub inputs: BoundInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    fn from_terms(
        bound: &'static str,
        terms: Vec<BoundTerm>,
        inputs: BoundInputs,
        t: Option<usize>,
        notes: Vec<String>,
    ) -> Self {
        let value = terms.iter().map(|t| t.value).sum();
        Self {
            bound,
            value,
            terms,
            inputs,
            t,
            notes,
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

pub const SPECTRAL_GAP_NOTE: &str =
    "network term printed with 1 - lambda_max(W); evaluated with the spectral gap 1 - sigma_2(W)";

/// Time-independent bound on `Cost_{i,T}`, valid with probability at least
/// `1 − δ` when η is the matching learning rate.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<BoundReport, AnalysisError> {
    inputs.check()?;
    let BoundInputs {
        b,
        rate,
        m,
        n,
        delta,
        sigma2,
    } = *inputs;
    let m = m as f64;
    let n = n as f64;
    let confidence = (6.0 * m / delta).ln();
    let curvature = 3.0 * b * std::f64::consts::SQRT_2 / rate;
    let signal = 18.0 * b * b / (rate * rate) * confidence.max(curvature);
    let network = 48.0 * b * n.ln() / rate * (m.ln() + 2.0) / (1.0 - sigma2);
    Ok(BoundReport::from_terms(
        "theorem1_cost",
        vec![
            BoundTerm {
                name: "signal",
                value: signal,
            },
            BoundTerm {
                name: "network",
                value: network,
            },
        ],
        *inputs,
        None,
        vec![SPECTRAL_GAP_NOTE.to_string()],
    ))
}

/// Anytime bound on `ln ‖μ_{i,t} − e_true‖_TV` at a fixed `t`, valid with
/// probability at least `1 − δ` for η = 1.
pub fn prop1_log_tv_bound(inputs: &BoundInputs, t: usize) -> Result<BoundReport, AnalysisError> {
    inputs.check()?;
    if t < 1 {
        return Err(AnalysisError::DegenerateInputs("t must be at least 1".into()));
    }
    let BoundInputs {
        b,
        rate,
        m,
        n,
        delta,
        sigma2,
    } = *inputs;
    let tf = t as f64;
    let m = m as f64;
    let terms = vec![
        BoundTerm {
            name: "drift",
            value: -rate * tf,
        },
        BoundTerm {
            name: "concentration",
            value: (2.0 * b * b * tf * (m / delta).ln()).sqrt(),
        },
        BoundTerm {
            name: "network",
            value: 8.0 * b * (n as f64).ln() / (1.0 - sigma2),
        },
        BoundTerm {
            name: "states",
            value: m.ln(),
        },
    ];
    Ok(BoundReport::from_terms(
        "prop1_log_tv",
        terms,
        *inputs,
        Some(t),
        Vec::new(),
    ))
}
