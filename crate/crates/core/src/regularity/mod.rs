//! Regularization: reductions producing instances in which every variable has
//! the same degree, with pull-backs of assignments to the original instance.

mod deterministic;
mod params;
mod randomized;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::CspError;

pub use deterministic::{pullback_deterministic, regularize_deterministic, BlockEntry, BlockMap};
pub use params::{degree_params, target_degree_params, Constants, DegreeParams, Profile};
pub use randomized::{
    pullback_randomized, regularize_randomized, ConstraintOrigin, CopyMap, RandomizedCertificate,
    TrialFailure, VarOrigin,
};

/// Largest block construction we build: `N·m` constraints.
pub const MAX_OUTPUT_CONSTRAINTS: u64 = 1 << 23;

/// Largest number of sampled constraints per randomized trial.
pub const MAX_SAMPLES: u64 = 1 << 25;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("epsilon out of range: {0}")]
    InvalidEpsilon(f64),
    #[error("regularization expects an unweighted instance")]
    Weighted,
    #[error("instance has no constraints")]
    NoConstraints,
    #[error("{what} would produce {size} items, limit is {limit}")]
    TooLarge {
        what: &'static str,
        size: u128,
        limit: u128,
    },
    #[error("language has no predicate of arity {0} for padding")]
    NoPaddingPredicate(usize),
    #[error("no good blocks")]
    NoGoodBlocks,
    #[error("map mismatch: {0}")]
    MapMismatch(String),
    #[error("randomized construction failed in all {trials} trials: {}", reasons.join("; "))]
    Failure { trials: u64, reasons: Vec<String> },
    #[error(transparent)]
    Csp(#[from] CspError),
}

/// Summary of a deterministic reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicCertificate {
    pub epsilon: f64,
    pub n_blocks: usize,
    pub d_max: usize,
    pub good_blocks: usize,
    pub good_block_bound: usize,
    pub variables: usize,
    pub constraints: usize,
}

impl DeterministicCertificate {
    pub fn new(map: &BlockMap) -> Self {
        DeterministicCertificate {
            epsilon: map.epsilon,
            n_blocks: map.n_blocks,
            d_max: map.d_max,
            good_blocks: map.good_blocks.len(),
            good_block_bound: map.n_blocks.saturating_sub(map.d_max),
            variables: map.num_copies(),
            constraints: map.n_blocks * map.original_constraints,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReductionCertificate {
    Deterministic(DeterministicCertificate),
    Randomized(RandomizedCertificate),
}
