//! Exhaustive enumeration.
//!
//! Variables are split into connected components of the constraint hypergraph and
//! each component is enumerated separately in lexicographic order (lowest variable
//! index most significant). Per-component lexicographic minima combine into the
//! global lexicographic minimum among optimal assignments, so tie-breaking is the
//! same as a single flat enumeration. Constraint satisfaction is tracked
//! incrementally along the odometer.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use super::{Goal, Method, SolveError, SolveResult};
use crate::csp::{Assignment, Instance, Predicate, Value};

/// Assignment evaluations allowed by default: `2^24`.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

pub fn brute_force_opt(instance: &Instance, goal: Goal) -> Result<SolveResult, SolveError> {
    brute_force_opt_with_budget(instance, goal, DEFAULT_BUDGET)
}

pub fn brute_force_opt_with_budget(
    instance: &Instance,
    goal: Goal,
    budget: u64,
) -> Result<SolveResult, SolveError> {
    let all: Vec<usize> = (0..instance.num_constraints()).collect();
    let parts = components(instance, &all);
    check_budget(instance, &parts, budget)?;

    let mut values = vec![0 as Value; instance.num_variables()];
    for (vars, constraints) in &parts {
        let mut e = Enumeration::new(instance, vars, constraints);
        let mut best = goal.worst();
        let mut best_local: Vec<Value> = Vec::new();
        let _ = e.run(|e| {
            let v = e.value();
            if goal.improves(v, best) {
                best = v;
                best_local.clear();
                best_local.extend_from_slice(&e.values);
            }
            ControlFlow::Continue(())
        });
        for (&var, &val) in vars.iter().zip(&best_local) {
            values[var] = val;
        }
    }
    let value = instance.value_unchecked(&values);
    Ok(SolveResult {
        value,
        assignment: Assignment(values),
        method: Method::BruteForce,
        exact: true,
    })
}

/// Number of assignment evaluations the component-wise enumeration would take.
pub fn enumeration_cost(instance: &Instance) -> u128 {
    let all: Vec<usize> = (0..instance.num_constraints()).collect();
    cost(instance.domain_size(), &components(instance, &all))
}

fn cost(q: u32, parts: &[(Vec<usize>, Vec<usize>)]) -> u128 {
    parts
        .iter()
        .map(|(vars, _)| {
            u32::try_from(vars.len())
                .ok()
                .and_then(|e| (q as u128).checked_pow(e))
                .unwrap_or(u128::MAX)
        })
        .fold(0u128, u128::saturating_add)
}

pub(super) fn check_budget(
    instance: &Instance,
    parts: &[(Vec<usize>, Vec<usize>)],
    budget: u64,
) -> Result<(), SolveError> {
    let needed = cost(instance.domain_size(), parts);
    if needed > budget as u128 {
        return Err(SolveError::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// Connected components induced by `constraints`, as (sorted variables, constraints).
/// Variables outside every listed scope are omitted.
pub(super) fn components(instance: &Instance, constraints: &[usize]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = instance.num_variables();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut used = vec![false; n];
    for &r in constraints {
        let scope = &instance.constraints()[r].scope;
        for &v in scope.iter() {
            used[v] = true;
        }
        for w in scope.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for v in (0..n).filter(|&v| used[v]) {
        let root = find(&mut parent, v);
        groups.entry(root).or_default().0.push(v);
    }
    for &r in constraints {
        let root = find(&mut parent, instance.constraints()[r].scope[0]);
        groups.get_mut(&root).expect("root registered").1.push(r);
    }
    groups.into_values().collect()
}

/// Odometer over the assignments of one component with incremental bookkeeping.
pub(super) struct Enumeration<'a> {
    q: Value,
    /// Current values of the component's variables (local order).
    pub values: Vec<Value>,
    occurrences: Vec<Vec<(usize, usize)>>,
    predicates: Vec<&'a Predicate>,
    index: Vec<usize>,
    satisfied: Vec<bool>,
    group_of: Vec<usize>,
    group_weight: Vec<f64>,
    counts: Vec<i64>,
}

impl<'a> Enumeration<'a> {
    pub fn new(instance: &'a Instance, vars: &[usize], constraints: &[usize]) -> Self {
        let q = instance.domain_size();
        let local: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut occurrences = vec![Vec::new(); vars.len()];
        let mut predicates = Vec::with_capacity(constraints.len());
        let mut group_of = Vec::with_capacity(constraints.len());
        let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
        let mut group_weight = Vec::new();
        for (lc, &r) in constraints.iter().enumerate() {
            let c = &instance.constraints()[r];
            let k = c.scope.len();
            for (p, &v) in c.scope.iter().enumerate() {
                let mult = (q as usize).pow((k - 1 - p) as u32);
                occurrences[local[&v]].push((lc, mult));
            }
            predicates.push(instance.language().predicate(c.predicate));
            let w = instance.weight(r);
            let g = *groups.entry(w.to_bits()).or_insert_with(|| {
                group_weight.push(w);
                group_weight.len() - 1
            });
            group_of.push(g);
        }
        let mut counts = vec![0i64; group_weight.len()];
        let satisfied: Vec<bool> = predicates.iter().map(|p| p.holds_index(0)).collect();
        for (lc, &s) in satisfied.iter().enumerate() {
            if s {
                counts[group_of[lc]] += 1;
            }
        }
        Enumeration {
            q,
            values: vec![0; vars.len()],
            occurrences,
            predicates,
            index: vec![0; constraints.len()],
            satisfied,
            group_of,
            group_weight,
            counts,
        }
    }

    /// Weighted satisfied mass of the component's constraints.
    #[inline]
    pub fn value(&self) -> f64 {
        self.group_weight
            .iter()
            .zip(&self.counts)
            .map(|(w, &c)| w * c as f64)
            .sum()
    }

    #[inline]
    pub fn satisfied_total(&self) -> i64 {
        self.counts.iter().sum()
    }

    #[inline]
    fn set(&mut self, var: usize, new: Value) {
        let old = self.values[var];
        self.values[var] = new;
        for &(lc, mult) in &self.occurrences[var] {
            let idx = self.index[lc] - old as usize * mult + new as usize * mult;
            self.index[lc] = idx;
            let now = self.predicates[lc].holds_index(idx);
            if now != self.satisfied[lc] {
                self.satisfied[lc] = now;
                self.counts[self.group_of[lc]] += if now { 1 } else { -1 };
            }
        }
    }

    /// Visits every assignment in lexicographic order until `visit` breaks.
    pub fn run(&mut self, mut visit: impl FnMut(&Self) -> ControlFlow<()>) -> ControlFlow<()> {
        let n = self.values.len();
        loop {
            visit(self)?;
            let mut p = n;
            loop {
                if p == 0 {
                    return ControlFlow::Continue(());
                }
                p -= 1;
                let next = self.values[p] + 1;
                if next < self.q {
                    self.set(p, next);
                    break;
                }
                self.set(p, 0);
            }
        }
    }
}
