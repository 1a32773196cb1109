//! Exact and baseline solvers, product-distribution expectations and the
//! falsifiability oracle used by the Min-CSP preprocessing.

mod baseline;
mod brute;
mod expectation;
mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{Assignment, CspError};

pub use baseline::{greedy_baseline, random_baseline};
pub use brute::{brute_force_opt, brute_force_opt_with_budget, enumeration_cost, DEFAULT_BUDGET};
pub use expectation::{
    conditional_expectation_round, conditional_expectation_round_traced, expected_value,
    rounding_audit, Marginals, RoundingAudit, RoundingTrace,
};
pub use oracle::{largest_falsifiable_prefix, BruteForceOracle, FalsifiabilityOracle, Prefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    Max,
    Min,
}

impl Goal {
    /// Whether `candidate` is strictly better than `incumbent`.
    #[inline]
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Goal::Max => candidate > incumbent,
            Goal::Min => candidate < incumbent,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Goal::Max => f64::NEG_INFINITY,
            Goal::Min => f64::INFINITY,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Goal::Max => "max",
            Goal::Min => "min",
        })
    }
}

impl FromStr for Goal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Goal::Max),
            "min" => Ok(Goal::Min),
            other => Err(format!("unknown goal `{other}` (expected max or min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BruteForce,
    Random,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub value: f64,
    pub assignment: Assignment,
    pub method: Method,
    pub exact: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("enumeration needs {needed} assignment evaluations, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),
    #[error("marginals describe {got} variables over domain {got_q}, instance has {expected} over {expected_q}")]
    MarginalsMismatch {
        expected: usize,
        expected_q: u32,
        got: usize,
        got_q: u32,
    },
    #[error("invalid marginals: {0}")]
    InvalidMarginals(String),
    #[error(transparent)]
    Csp(#[from] CspError),
}
