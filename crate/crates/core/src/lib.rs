//! Approximation-preserving reductions from weighted, irregular CSP instances to
//! regular unweighted ones, together with assignment pull-backs, baseline
//! approximators and exact brute-force oracles.

pub mod csp;
pub mod formats;
pub mod pipeline;
pub mod regularity;
pub mod solvers;
pub mod weights;

pub use csp::{
    close_under_shifts, degrees, evaluate, gamma_lower_bound, validate_instance, Assignment,
    Constraint, CspError, CspLanguage, DegreeReport, Instance, Predicate, PredicateId, Value,
    Weights,
};
pub use solvers::Goal;
