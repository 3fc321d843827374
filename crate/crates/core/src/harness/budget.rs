//! Literal evaluation of the sufficient per-player budgets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::BanditInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    /// `(24 c / sqrt(k)) * sum 1/gap^2 * ln(n / gap)`, best-arm identification.
    Eq3,
    /// `(400 c / sqrt(k)) * sum 1/gap_eps^2 * ln(24 n / gap_eps)`, 2eps-best arm.
    Eq4,
    /// The hardness `H_eps`.
    Hardness,
}

impl FromStr for BudgetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq3" => Ok(BudgetMode::Eq3),
            "eq4" => Ok(BudgetMode::Eq4),
            "hardness" => Ok(BudgetMode::Hardness),
            _ => Err(Error::arg(format!(
                "unknown budget mode {s:?}; expected eq3, eq4 or hardness"
            ))),
        }
    }
}

impl fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetMode::Eq3 => "eq3",
            BudgetMode::Eq4 => "eq4",
            BudgetMode::Hardness => "hardness",
        })
    }
}

/// Evaluates the selected budget formula with natural logarithms. `eq3`
/// ignores `epsilon`.
pub fn budget_calculator(instance: &BanditInstance, k: usize, epsilon: f64, mode: BudgetMode, c_a: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let n = instance.n() as f64;
    let root_k = (k as f64).sqrt();
    let (scale, log_factor, eps) = match mode {
        BudgetMode::Hardness => return instance.hardness(epsilon),
        BudgetMode::Eq3 => (24.0, 1.0, 0.0),
        BudgetMode::Eq4 => (400.0, 24.0, epsilon),
    };
    instance.validate_for(eps)?;
    let best = instance.first_best_arm();
    let sum: f64 = instance
        .gaps()
        .truncated(eps)
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &d)| (log_factor * n / d).ln() / (d * d))
        .sum();
    Ok(scale * c_a / root_k * sum)
}
