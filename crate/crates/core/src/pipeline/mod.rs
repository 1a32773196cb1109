//! End-to-end compositions: weighted instance → unweighted → regular → solver →
//! pull-back, plus verification of individual reductions.

mod run;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::csp::{degrees, Assignment, CspError, Instance};
use crate::formats::serialize_instance;
use crate::regularity::{Profile, RegularityError};
use crate::solvers::{
    brute_force_opt_with_budget, enumeration_cost, greedy_baseline, random_baseline, Goal, SolveError,
    DEFAULT_BUDGET,
};
use crate::weights::WeightError;

pub use run::{pipeline_max, pipeline_min};
pub use verify::{lifted_lower_bound, verify, Check, CheckStatus, ReductionMap, VerifyReport};

pub const REPORT_VERSION: u32 = 1;

/// Algorithm for regular unweighted instances plugged into the pipelines.
pub trait RegularSolver {
    fn name(&self) -> &str;

    /// Declared approximation ratio, if any.
    fn alpha(&self) -> Option<f64>;

    /// Cheap check that `solve` can handle an instance of this shape.
    fn admits(&self, instance: &Instance) -> Result<(), SolveError> {
        let _ = instance;
        Ok(())
    }

    fn solve(&self, instance: &Instance, goal: Goal) -> Result<Assignment, SolveError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceSolver {
    pub budget: u64,
}

impl Default for BruteForceSolver {
    fn default() -> Self {
        BruteForceSolver { budget: DEFAULT_BUDGET }
    }
}

impl RegularSolver for BruteForceSolver {
    fn name(&self) -> &str {
        "brute"
    }

    fn alpha(&self) -> Option<f64> {
        Some(1.0)
    }

    fn admits(&self, instance: &Instance) -> Result<(), SolveError> {
        let needed = enumeration_cost(instance);
        if needed > self.budget as u128 {
            return Err(SolveError::BudgetExceeded {
                needed,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn solve(&self, instance: &Instance, goal: Goal) -> Result<Assignment, SolveError> {
        brute_force_opt_with_budget(instance, goal, self.budget).map(|r| r.assignment)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RandomSolver;

impl RegularSolver for RandomSolver {
    fn name(&self) -> &str {
        "random"
    }

    fn alpha(&self) -> Option<f64> {
        None
    }

    fn solve(&self, instance: &Instance, goal: Goal) -> Result<Assignment, SolveError> {
        random_baseline(instance, goal).map(|r| r.assignment)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GreedySolver;

impl RegularSolver for GreedySolver {
    fn name(&self) -> &str {
        "greedy"
    }

    fn alpha(&self) -> Option<f64> {
        None
    }

    fn solve(&self, instance: &Instance, goal: Goal) -> Result<Assignment, SolveError> {
        greedy_baseline(instance, goal).map(|r| r.assignment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Mode {
    Det,
    Rand { seed: u64, profile: Profile },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Det => f.write_str("det"),
            Mode::Rand { .. } => f.write_str("rand"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Det,
    Rand,
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "det" => Ok(ModeKind::Det),
            "rand" => Ok(ModeKind::Rand),
            other => Err(format!("unknown mode `{other}` (expected det or rand)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver contract violated: {0}")]
    SolverContract(String),
    #[error("guarantee void: {0}")]
    GuaranteeVoid(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Regularity(#[from] RegularityError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Csp(#[from] CspError),
}

impl PipelineError {
    pub fn is_reduction_failure(&self) -> bool {
        matches!(self, PipelineError::Regularity(RegularityError::Failure { .. }))
    }

    pub fn is_oracle_inconclusive(&self) -> bool {
        matches!(
            self,
            PipelineError::Solve(SolveError::OracleInconclusive(_))
                | PipelineError::Weight(WeightError::Solve(SolveError::OracleInconclusive(_)))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    pub variables: usize,
    pub constraints: usize,
}

impl Size {
    pub fn of(instance: &Instance) -> Self {
        Size {
            variables: instance.num_variables(),
            constraints: instance.num_constraints(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub operation: String,
    pub parameters: serde_json::Value,
    pub input: Size,
    pub output: Size,
    pub certificate: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub version: u32,
    pub input_digest: String,
    pub goal: Goal,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub solver: String,
    pub mode: Mode,
    pub stages: Vec<Stage>,
    pub assignment: Assignment,
    pub value: f64,
    pub opt: Option<f64>,
    pub achieved_ratio: Option<f64>,
    /// `α − δ` for Max, `α + δ` for Min.
    pub claimed_bound: Option<f64>,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// SHA-256 of the canonical serialization.
pub fn digest(instance: &Instance) -> String {
    hex::encode(Sha256::digest(serialize_instance(instance).as_bytes()))
}

/// Brute-force optimum when it fits the budget.
pub fn optimum_if_small(instance: &Instance, goal: Goal, budget: u64) -> Option<f64> {
    brute_force_opt_with_budget(instance, goal, budget).ok().map(|r| r.value)
}

/// `value / opt`, with `0/0` read as 1.
pub fn ratio(value: f64, opt: f64) -> Option<f64> {
    if opt > 0.0 {
        Some(value / opt)
    } else if value == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

/// Rejects anything the regular solver must never see.
pub(crate) fn check_solver_input(instance: &Instance) -> Result<(), PipelineError> {
    if instance.is_weighted() {
        return Err(PipelineError::SolverContract("solver input is weighted".into()));
    }
    if !degrees(instance).is_regular {
        return Err(PipelineError::SolverContract("solver input is not regular".into()));
    }
    Ok(())
}

pub(crate) fn run_solver(
    solver: &dyn RegularSolver,
    instance: &Instance,
    goal: Goal,
) -> Result<Assignment, PipelineError> {
    check_solver_input(instance)?;
    solver.admits(instance)?;
    let zeta = solver.solve(instance, goal)?;
    if zeta.len() != instance.num_variables() {
        return Err(PipelineError::SolverContract(format!(
            "solver `{}` returned {} values for {} variables",
            solver.name(),
            zeta.len(),
            instance.num_variables()
        )));
    }
    if let Some(&bad) = zeta.iter().find(|&&a| a >= instance.domain_size()) {
        return Err(PipelineError::SolverContract(format!(
            "solver `{}` returned value {bad} outside the domain",
            solver.name()
        )));
    }
    Ok(zeta)
}
