use super::{conditional_expectation_round, Goal, Marginals, Method, SolveError, SolveResult};
use crate::csp::{Assignment, Instance, Value};

/// Derandomized uniform assignment.
pub fn random_baseline(instance: &Instance, goal: Goal) -> Result<SolveResult, SolveError> {
    let marginals = Marginals::uniform(instance.num_variables(), instance.domain_size());
    let assignment = conditional_expectation_round(instance, &marginals, goal)?;
    Ok(SolveResult {
        value: instance.value_unchecked(&assignment),
        assignment,
        method: Method::Random,
        exact: false,
    })
}

/// One pass in index order. Each variable takes the value that maximizes (Max)
/// or minimizes (Min) satisfied minus falsified weight among the constraints it
/// touches whose truth value becomes fixed; ties go to the smaller value.
pub fn greedy_baseline(instance: &Instance, goal: Goal) -> Result<SolveResult, SolveError> {
    let n = instance.num_variables();
    let q = instance.domain_size();
    let mut occurrences: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c) in instance.constraints().iter().enumerate() {
        for &v in c.scope.iter() {
            occurrences[v].push(r);
        }
    }
    let mut values: Vec<Option<Value>> = vec![None; n];
    for v in 0..n {
        let mut best: Option<(Value, f64)> = None;
        for a in 0..q {
            values[v] = Some(a);
            let score: f64 = occurrences[v]
                .iter()
                .map(|&r| match decided(instance, r, &values) {
                    Some(true) => instance.weight(r),
                    Some(false) => -instance.weight(r),
                    None => 0.0,
                })
                .sum();
            if best.is_none_or(|(_, b)| goal.improves(score, b)) {
                best = Some((a, score));
            }
        }
        values[v] = best.map(|(a, _)| a);
    }
    let assignment = Assignment(values.into_iter().map(|v| v.unwrap_or(0)).collect());
    Ok(SolveResult {
        value: instance.value_unchecked(&assignment),
        assignment,
        method: Method::Greedy,
        exact: false,
    })
}

/// Truth value of constraint `r` if every completion of the unset variables agrees.
fn decided(instance: &Instance, r: usize, values: &[Option<Value>]) -> Option<bool> {
    let scope = &instance.constraints()[r].scope;
    let free = scope.iter().filter(|&&v| values[v].is_none()).count();
    let completions = (instance.domain_size() as usize).pow(free as u32);
    let consistent = instance
        .predicate_of(r)
        .satisfying()
        .iter()
        .filter(|t| scope.iter().zip(t.iter()).all(|(&v, &a)| values[v].is_none_or(|x| x == a)))
        .count();
    if consistent == completions {
        Some(true)
    } else if consistent == 0 {
        Some(false)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{Constraint, CspLanguage, Predicate};

    fn single(p: Predicate) -> Instance {
        let name = p.name().to_string();
        let l = Arc::new(CspLanguage::new(2, vec![p]).unwrap());
        let id = l.id(&name).unwrap();
        Instance::unweighted(l, 2, vec![Constraint::new(id, [0, 1])]).unwrap()
    }

    fn triangle() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let neq = l.id("NEQ").unwrap();
        let cs = vec![
            Constraint::new(neq, [0, 1]),
            Constraint::new(neq, [1, 2]),
            Constraint::new(neq, [0, 2]),
        ];
        Instance::unweighted(l, 3, cs).unwrap()
    }

    #[test]
    fn greedy_and2() {
        let r = greedy_baseline(&single(Predicate::and(2)), Goal::Max).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.assignment.0, vec![1, 1]);
    }

    #[test]
    fn greedy_triangle_golden() {
        let r = greedy_baseline(&triangle(), Goal::Max).unwrap();
        assert_eq!(r.assignment.0, vec![0, 1, 0]);
        assert_eq!(r.value, 2.0 / 3.0);
        let r = greedy_baseline(&triangle(), Goal::Min).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn random_baseline_meets_density() {
        let r = random_baseline(&triangle(), Goal::Max).unwrap();
        assert!(r.value >= 0.5);
        let r = random_baseline(&single(Predicate::or(2)), Goal::Max).unwrap();
        assert!(r.value >= 0.75);
    }
}
