use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::brute::{components, Enumeration, DEFAULT_BUDGET};
use super::SolveError;
use crate::csp::{Assignment, Instance, Value};

/// Decides whether a set of constraints can be violated simultaneously.
pub trait FalsifiabilityOracle {
    /// A full assignment violating every listed constraint, or `None` if none exists.
    fn falsify(&self, instance: &Instance, constraints: &[usize]) -> Result<Option<Assignment>, SolveError>;
}

/// Exhaustive search over the variables touched by the listed constraints,
/// component by component, stopping at the first witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceOracle {
    pub budget: u64,
}

impl Default for BruteForceOracle {
    fn default() -> Self {
        BruteForceOracle { budget: DEFAULT_BUDGET }
    }
}

impl FalsifiabilityOracle for BruteForceOracle {
    fn falsify(&self, instance: &Instance, constraints: &[usize]) -> Result<Option<Assignment>, SolveError> {
        let parts = components(instance, constraints);
        super::brute::check_budget(instance, &parts, self.budget).map_err(|e| match e {
            SolveError::BudgetExceeded { needed, budget } => SolveError::OracleInconclusive(format!(
                "falsifiability check needs {needed} evaluations, budget is {budget}"
            )),
            other => other,
        })?;
        let mut values = vec![0 as Value; instance.num_variables()];
        for (vars, cs) in &parts {
            let mut e = Enumeration::new(instance, vars, cs);
            let mut witness: Option<Vec<Value>> = None;
            let _ = e.run(|e| {
                if e.satisfied_total() == 0 {
                    witness = Some(e.values.clone());
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            let Some(local) = witness else {
                return Ok(None);
            };
            for (&v, &a) in vars.iter().zip(&local) {
                values[v] = a;
            }
        }
        Ok(Some(Assignment(values)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prefix {
    /// `order[..k-1]` is falsifiable; `order[..k]` is not, unless `k = len + 1`.
    pub k: usize,
    /// Violates every constraint of `order[..k-1]`.
    pub witness: Assignment,
}

/// Binary search for the largest falsifiable prefix of `order`.
pub fn largest_falsifiable_prefix(
    instance: &Instance,
    order: &[usize],
    oracle: &dyn FalsifiabilityOracle,
) -> Result<Prefix, SolveError> {
    if let Some(witness) = oracle.falsify(instance, order)? {
        return Ok(Prefix {
            k: order.len() + 1,
            witness,
        });
    }
    let mut lo = 0;
    let mut hi = order.len();
    let mut witness = Assignment::zeros(instance.num_variables());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match oracle.falsify(instance, &order[..mid])? {
            Some(w) => {
                lo = mid;
                witness = w;
            }
            None => hi = mid,
        }
    }
    Ok(Prefix { k: lo + 1, witness })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{Constraint, CspLanguage, Predicate};

    #[test]
    fn neq_then_eq() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2), Predicate::eq(2, 2)]).unwrap());
        let cs = vec![
            Constraint::new(l.id("NEQ").unwrap(), [0, 1]),
            Constraint::new(l.id("EQ2").unwrap(), [0, 1]),
        ];
        let f = Instance::unweighted(l, 2, cs).unwrap();
        let p = largest_falsifiable_prefix(&f, &[0, 1], &BruteForceOracle::default()).unwrap();
        assert_eq!(p.k, 2);
        assert!(!f.satisfied(0, &p.witness));
    }

    #[test]
    fn tautology_first() {
        let t = Predicate::from_fn("TRUE2", 2, 2, |_| true).unwrap();
        let l = Arc::new(CspLanguage::new(2, vec![t, Predicate::neq(2)]).unwrap());
        let cs = vec![
            Constraint::new(l.id("TRUE2").unwrap(), [0, 1]),
            Constraint::new(l.id("NEQ").unwrap(), [0, 1]),
        ];
        let f = Instance::unweighted(l, 2, cs).unwrap();
        let p = largest_falsifiable_prefix(&f, &[0, 1], &BruteForceOracle::default()).unwrap();
        assert_eq!(p.k, 1);
    }

    #[test]
    fn all_falsifiable_gives_m_plus_one() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let id = l.id("NEQ").unwrap();
        let cs = vec![Constraint::new(id, [0, 1]), Constraint::new(id, [1, 2])];
        let f = Instance::unweighted(l, 3, cs).unwrap();
        let p = largest_falsifiable_prefix(&f, &[0, 1], &BruteForceOracle::default()).unwrap();
        assert_eq!(p.k, 3);
        assert_eq!(f.satisfied_count(&p.witness), 0);
    }

    #[test]
    fn budget_makes_oracle_inconclusive() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let id = l.id("NEQ").unwrap();
        let cs = vec![Constraint::new(id, [0, 1]), Constraint::new(id, [1, 2])];
        let f = Instance::unweighted(l, 3, cs).unwrap();
        let oracle = BruteForceOracle { budget: 4 };
        assert!(matches!(
            largest_falsifiable_prefix(&f, &[0, 1], &oracle),
            Err(SolveError::OracleInconclusive(_))
        ));
    }
}
