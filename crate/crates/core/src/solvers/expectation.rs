use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{Goal, SolveError};
use crate::csp::{Assignment, Instance, Value, Weights};

const ROW_TOLERANCE: f64 = 1e-12;
const STEP_TOLERANCE: f64 = 1e-12;

/// Independent per-variable distributions over the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    domain_size: u32,
    rows: Vec<Vec<f64>>,
}

impl Marginals {
    pub fn new(domain_size: u32, rows: Vec<Vec<f64>>) -> Result<Self, SolveError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != domain_size as usize {
                return Err(SolveError::InvalidMarginals(format!(
                    "row {i} has {} entries, expected {domain_size}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(SolveError::InvalidMarginals(format!("row {i} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(SolveError::InvalidMarginals(format!("row {i} sums to {total}")));
            }
        }
        Ok(Marginals { domain_size, rows })
    }

    pub fn uniform(n: usize, domain_size: u32) -> Self {
        let p = 1.0 / domain_size as f64;
        Marginals {
            domain_size,
            rows: vec![vec![p; domain_size as usize]; n],
        }
    }

    pub fn point_mass(assignment: &[Value], domain_size: u32) -> Self {
        let rows = assignment
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; domain_size as usize];
                row[a as usize] = 1.0;
                row
            })
            .collect();
        Marginals { domain_size, rows }
    }

    pub fn domain_size(&self) -> u32 {
        self.domain_size
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, variable: usize) -> &[f64] {
        &self.rows[variable]
    }

    fn check(&self, instance: &Instance) -> Result<(), SolveError> {
        if self.rows.len() != instance.num_variables() || self.domain_size != instance.domain_size() {
            return Err(SolveError::MarginalsMismatch {
                expected: instance.num_variables(),
                expected_q: instance.domain_size(),
                got: self.rows.len(),
                got_q: self.domain_size,
            });
        }
        Ok(())
    }
}

fn constraint_expectation(instance: &Instance, r: usize, rows: &[Vec<f64>]) -> f64 {
    let scope = &instance.constraints()[r].scope;
    instance
        .predicate_of(r)
        .satisfying()
        .iter()
        .map(|t| {
            scope
                .iter()
                .zip(t)
                .map(|(&v, &a)| rows[v][a as usize])
                .product::<f64>()
        })
        .sum()
}

/// Summed in the same order and form as the instance value, so that point-mass
/// marginals reproduce it bit for bit.
fn total_expectation(instance: &Instance, rows: &[Vec<f64>]) -> f64 {
    let m = instance.num_constraints();
    match instance.weights() {
        Weights::Uniform => {
            (0..m).fold(0.0, |acc, r| acc + constraint_expectation(instance, r, rows)) / m as f64
        }
        Weights::Explicit(w) => (0..m).fold(0.0, |acc, r| acc + w[r] * constraint_expectation(instance, r, rows)),
    }
}

/// Expected value of the instance when each variable is drawn independently
/// from its marginal.
pub fn expected_value(instance: &Instance, marginals: &Marginals) -> Result<f64, SolveError> {
    marginals.check(instance)?;
    Ok(total_expectation(instance, &marginals.rows))
}

/// Conditional expectations recorded while rounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrace {
    pub assignment: Assignment,
    pub initial: f64,
    /// Conditional expectation after each variable is fixed, in index order.
    pub steps: Vec<f64>,
    pub final_value: f64,
}

/// Process-wide count of rounding calls and of dominance violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundingAudit {
    pub calls: u64,
    /// Steps or final values that regressed by more than the float tolerance.
    pub violations: u64,
    /// Final values below (Max) or above (Min) the initial expectation at all.
    pub strict_violations: u64,
}

static AUDIT_CALLS: AtomicU64 = AtomicU64::new(0);
static AUDIT_VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static AUDIT_STRICT: AtomicU64 = AtomicU64::new(0);

pub fn rounding_audit() -> RoundingAudit {
    RoundingAudit {
        calls: AUDIT_CALLS.load(Ordering::SeqCst),
        violations: AUDIT_VIOLATIONS.load(Ordering::SeqCst),
        strict_violations: AUDIT_STRICT.load(Ordering::SeqCst),
    }
}

pub fn conditional_expectation_round(
    instance: &Instance,
    marginals: &Marginals,
    goal: Goal,
) -> Result<Assignment, SolveError> {
    conditional_expectation_round_traced(instance, marginals, goal).map(|t| t.assignment)
}

/// Method of conditional expectations. Each variable, in index order, is fixed to
/// the value in the support of its marginal that optimizes the conditional
/// expectation; ties go to the smaller value.
pub fn conditional_expectation_round_traced(
    instance: &Instance,
    marginals: &Marginals,
    goal: Goal,
) -> Result<RoundingTrace, SolveError> {
    marginals.check(instance)?;
    let n = instance.num_variables();
    let q = instance.domain_size() as usize;
    let mut occurrences: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c) in instance.constraints().iter().enumerate() {
        for &v in c.scope.iter() {
            occurrences[v].push(r);
        }
    }

    let mut rows = marginals.rows.clone();
    let initial = total_expectation(instance, &rows);
    let mut steps = Vec::with_capacity(n);
    let mut values = vec![0 as Value; n];
    let mut running = initial;
    let mut violated = false;

    for v in 0..n {
        let local = |rows: &[Vec<f64>]| -> f64 {
            occurrences[v]
                .iter()
                .map(|&r| instance.weight(r) * constraint_expectation(instance, r, rows))
                .sum()
        };
        let before = local(&rows);
        let original = rows[v].clone();
        let mut best: Option<(usize, f64)> = None;
        for a in (0..q).filter(|&a| original[a] > 0.0) {
            set_point(&mut rows[v], a);
            let candidate = local(&rows);
            if best.is_none_or(|(_, b)| goal.improves(candidate, b)) {
                best = Some((a, candidate));
            }
        }
        let (a, after) = best.expect("marginal rows are distributions");
        set_point(&mut rows[v], a);
        values[v] = a as Value;
        // only constraints touching `v` change, so the step moves by `after - before`
        let regress = match goal {
            Goal::Max => after < before - STEP_TOLERANCE,
            Goal::Min => after > before + STEP_TOLERANCE,
        };
        violated |= regress;
        running += after - before;
        steps.push(running);
    }

    let final_value = instance.value_unchecked(&values);
    let regress = match goal {
        Goal::Max => final_value < initial - STEP_TOLERANCE,
        Goal::Min => final_value > initial + STEP_TOLERANCE,
    };
    let strict = match goal {
        Goal::Max => final_value < initial,
        Goal::Min => final_value > initial,
    };
    AUDIT_CALLS.fetch_add(1, Ordering::SeqCst);
    if violated || regress {
        AUDIT_VIOLATIONS.fetch_add(1, Ordering::SeqCst);
    }
    if strict {
        AUDIT_STRICT.fetch_add(1, Ordering::SeqCst);
    }
    Ok(RoundingTrace {
        assignment: Assignment(values),
        initial,
        steps,
        final_value,
    })
}

fn set_point(row: &mut [f64], a: usize) {
    row.iter_mut().for_each(|p| *p = 0.0);
    row[a] = 1.0;
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{evaluate, Constraint, CspLanguage, Predicate};

    fn or3_instance() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::or(3)]).unwrap());
        let id = l.id("OR3").unwrap();
        let cs = vec![
            Constraint::new(id, [0, 1, 2]),
            Constraint::new(id, [1, 2, 3]),
            Constraint::new(id, [0, 2, 3]),
        ];
        Instance::unweighted(l, 4, cs).unwrap()
    }

    #[test]
    fn uniform_or3_is_seven_eighths() {
        let f = or3_instance();
        let e = expected_value(&f, &Marginals::uniform(4, 2)).unwrap();
        assert!((e - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_reproduces_assignment() {
        let f = or3_instance();
        let chi = [0, 0, 0, 1];
        let m = Marginals::point_mass(&chi, 2);
        assert_eq!(expected_value(&f, &m).unwrap(), evaluate(&f, &chi).unwrap());
        assert_eq!(conditional_expectation_round(&f, &m, Goal::Max).unwrap().0, chi);
        assert_eq!(conditional_expectation_round(&f, &m, Goal::Min).unwrap().0, chi);
    }

    #[test]
    fn exhaustive_expectation_agrees() {
        let l = Arc::new(
            CspLanguage::new(3, vec![Predicate::neq(3), Predicate::eq(3, 3)]).unwrap(),
        );
        let (neq, eq) = (l.id("NEQ3").unwrap(), l.id("EQ3").unwrap());
        let f = Instance::weighted(
            l,
            4,
            vec![Constraint::new(neq, [0, 1]), Constraint::new(eq, [1, 2, 3])],
            vec![0.3, 0.7],
        )
        .unwrap();
        let rows = vec![
            vec![0.2, 0.3, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![0.25, 0.25, 0.5],
            vec![0.6, 0.1, 0.3],
        ];
        let m = Marginals::new(3, rows.clone()).unwrap();
        let mut oracle = 0.0;
        for idx in 0..81usize {
            let chi: Vec<Value> = (0..4).map(|i| ((idx / 3usize.pow(i)) % 3) as Value).collect();
            let p: f64 = chi.iter().enumerate().map(|(v, &a)| rows[v][a as usize]).product();
            oracle += p * evaluate(&f, &chi).unwrap();
        }
        assert!((expected_value(&f, &m).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn rounding_steps_are_monotone() {
        let f = or3_instance();
        let t = conditional_expectation_round_traced(&f, &Marginals::uniform(4, 2), Goal::Max).unwrap();
        let mut prev = t.initial;
        for &s in &t.steps {
            assert!(s >= prev - 1e-12);
            prev = s;
        }
        assert_eq!(t.final_value, 1.0);
        let t = conditional_expectation_round_traced(&f, &Marginals::uniform(4, 2), Goal::Min).unwrap();
        assert!(t.final_value <= t.initial);
    }

    #[test]
    fn invalid_marginals_rejected() {
        assert!(Marginals::new(2, vec![vec![0.5, 0.6]]).is_err());
        assert!(Marginals::new(2, vec![vec![1.5, -0.5]]).is_err());
        assert!(Marginals::new(2, vec![vec![1.0]]).is_err());
        let f = or3_instance();
        assert!(expected_value(&f, &Marginals::uniform(3, 2)).is_err());
    }
}
