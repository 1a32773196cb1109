//! Sampling construction. Each trial draws `mD` constraints of `F` with every
//! scope variable replaced by a uniformly chosen copy, repairs copies whose
//! degree exceeds `Δ` with dummy variables, pads deficient copies with
//! constraints on a maximal-arity predicate and finally closes the dummies so
//! that every variable has degree exactly `Δ`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use super::params::{target_degree_params, DegreeParams, Profile};
use super::{RegularityError, MAX_SAMPLES};
use crate::csp::{degrees, Assignment, Constraint, Instance, PredicateId, Value};
use crate::solvers::{conditional_expectation_round, Goal, Marginals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarOrigin {
    Copy { original: usize, copy: usize },
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintOrigin {
    Sampled { source: usize, changed: bool },
    Padding,
    Closure,
}

const PADDING: u32 = u32::MAX;
const CLOSURE: u32 = u32::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopyMap {
    pub delta: u64,
    pub original_variables: usize,
    /// Copy count of each original variable (its degree in `F`).
    pub copies: Vec<usize>,
    pub first_copy: Vec<usize>,
    pub dummies: usize,
    /// Source constraint of each constraint of `G`, with sentinels for padding
    /// (`u32::MAX`) and closure (`u32::MAX - 1`).
    sources: Vec<u32>,
    /// Sampled constraints whose scope had a variable replaced by a dummy.
    changed: Vec<usize>,
}

impl CopyMap {
    pub fn num_copies(&self) -> usize {
        self.copies.iter().sum()
    }

    pub fn num_variables(&self) -> usize {
        self.num_copies() + self.dummies
    }

    pub fn num_constraints(&self) -> usize {
        self.sources.len()
    }

    pub fn origin(&self, v: usize) -> VarOrigin {
        if v >= self.num_copies() {
            return VarOrigin::Dummy;
        }
        // the last variable starting at or before `v` owns it; it has at least one copy
        let i = self.first_copy.partition_point(|&f| f <= v) - 1;
        VarOrigin::Copy {
            original: i,
            copy: v - self.first_copy[i],
        }
    }

    pub fn constraint_origin(&self, r: usize) -> ConstraintOrigin {
        match self.sources[r] {
            PADDING => ConstraintOrigin::Padding,
            CLOSURE => ConstraintOrigin::Closure,
            s => ConstraintOrigin::Sampled {
                source: s as usize,
                changed: self.changed.binary_search(&r).is_ok(),
            },
        }
    }

    pub fn changed(&self) -> &[usize] {
        &self.changed
    }

    /// Copies of `χ`: every copy of `i` takes `chi[i]`, dummies take `dummy`.
    pub fn lift(&self, chi: &[Value], dummy: Value) -> Assignment {
        let mut out = Vec::with_capacity(self.num_variables());
        for (i, &d) in self.copies.iter().enumerate() {
            out.extend(std::iter::repeat_n(chi[i], d));
        }
        out.extend(std::iter::repeat_n(dummy, self.dummies));
        Assignment(out)
    }

    /// Empirical distribution of `ζ` over the copies of each variable; isolated
    /// variables get a point mass at 0.
    pub fn marginals(&self, zeta: &[Value], domain_size: u32) -> Marginals {
        let q = domain_size as usize;
        let rows = self
            .copies
            .iter()
            .zip(&self.first_copy)
            .map(|(&d, &f)| {
                let mut row = vec![0.0; q];
                if d == 0 {
                    row[0] = 1.0;
                } else {
                    for &a in &zeta[f..f + d] {
                        row[a as usize] += 1.0;
                    }
                    row.iter_mut().for_each(|p| *p /= d as f64);
                }
                row
            })
            .collect();
        Marginals::new(domain_size, rows).expect("empirical rows are distributions")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedCertificate {
    pub seed: u64,
    pub profile: Profile,
    pub caveat: Option<String>,
    pub params: DegreeParams,
    pub trials: u64,
    pub max_trials: u64,
    pub failures: Vec<TrialFailure>,
    pub samples: u64,
    pub replacements: u64,
    pub changed: u64,
    pub padding: u64,
    pub closure: u64,
    pub closure_dummies: u64,
    pub dummies: u64,
    pub change_bound: f64,
    pub replacement_bound: f64,
}

impl RandomizedCertificate {
    pub fn changed_or_added(&self) -> u64 {
        self.changed + self.padding + self.closure
    }
}

pub fn regularize_randomized(
    instance: &Instance,
    epsilon: f64,
    seed: u64,
    profile: Profile,
) -> Result<(Instance, CopyMap, RandomizedCertificate), RegularityError> {
    if instance.is_weighted() {
        return Err(RegularityError::Weighted);
    }
    let params = target_degree_params(instance, epsilon, profile.constants())?;
    let m = instance.num_constraints() as u64;
    let samples = m
        .checked_mul(params.d)
        .filter(|&s| s <= MAX_SAMPLES)
        .ok_or(RegularityError::TooLarge {
            what: "sampling",
            size: m as u128 * params.d as u128,
            limit: MAX_SAMPLES as u128,
        })?;
    let padding = instance
        .language()
        .first_of_arity(params.w_max)
        .ok_or(RegularityError::NoPaddingPredicate(params.w_max))?;

    let max_trials = instance.num_variables().max(1) as u64;
    let mut failures = Vec::new();
    for trial in 0..max_trials {
        match run_trial(instance, &params, samples, padding, seed, trial) {
            Ok(out) => {
                let g = Instance::unweighted(instance.language_arc().clone(), out.map.num_variables(), out.constraints)?;
                let report = degrees(&g);
                assert!(
                    report.common_degree == Some(params.delta as usize),
                    "repair left degrees in {}..={}",
                    report.min,
                    report.max
                );
                let cert = RandomizedCertificate {
                    seed,
                    profile,
                    caveat: profile.caveat().map(str::to_string),
                    trials: trial + 1,
                    max_trials,
                    failures,
                    samples,
                    replacements: out.replacements,
                    changed: out.map.changed.len() as u64,
                    padding: out.padding,
                    closure: out.closure,
                    closure_dummies: out.closure_dummies,
                    dummies: out.map.dummies as u64,
                    change_bound: params.change_bound(),
                    replacement_bound: params.replacement_bound(),
                    params,
                };
                return Ok((g, out.map, cert));
            }
            Err(reason) => failures.push(TrialFailure { trial, reason }),
        }
    }
    Err(RegularityError::Failure {
        trials: max_trials,
        reasons: failures.into_iter().map(|f| f.reason).collect(),
    })
}

struct TrialOutput {
    constraints: Vec<Constraint>,
    map: CopyMap,
    replacements: u64,
    padding: u64,
    closure: u64,
    closure_dummies: u64,
}

/// Degree bookkeeping for dummies that have not reached `Δ` yet.
struct Dummies {
    degree: Vec<u64>,
    open: Vec<usize>,
    base: usize,
    delta: u64,
}

impl Dummies {
    /// Most-used open dummy outside `scope`, or a fresh one.
    fn pick(&mut self, scope: &[usize]) -> usize {
        let choice = self
            .open
            .iter()
            .copied()
            .filter(|d| !scope.contains(d))
            .max_by_key(|&d| (self.degree[d - self.base], Reverse(d)));
        let d = choice.unwrap_or_else(|| {
            let d = self.base + self.degree.len();
            self.degree.push(0);
            self.open.push(d);
            d
        });
        let k = d - self.base;
        self.degree[k] += 1;
        if self.degree[k] == self.delta {
            self.open.retain(|&o| o != d);
        }
        d
    }

    fn fresh(&mut self) -> usize {
        let d = self.base + self.degree.len();
        self.degree.push(0);
        self.open.push(d);
        d
    }
}

fn run_trial(
    instance: &Instance,
    params: &DegreeParams,
    samples: u64,
    padding: PredicateId,
    seed: u64,
    trial: u64,
) -> Result<TrialOutput, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);

    let copies = degrees(instance).degrees;
    let mut first_copy = Vec::with_capacity(copies.len());
    let mut total = 0usize;
    for &d in &copies {
        first_copy.push(total);
        total += d;
    }
    let delta = params.delta;
    let m = instance.num_constraints();

    let mut constraints: Vec<Constraint> = Vec::with_capacity(samples as usize);
    let mut sources: Vec<u32> = Vec::with_capacity(samples as usize);
    let mut degree = vec![0u64; total];
    let mut arity_sum = 0u64;
    for _ in 0..samples {
        let r = rng.random_range(0..m);
        let c = &instance.constraints()[r];
        let scope: SmallVec<[usize; 4]> = c
            .scope
            .iter()
            .map(|&i| first_copy[i] + rng.random_range(0..copies[i]))
            .collect();
        for &v in &scope {
            degree[v] += 1;
        }
        arity_sum += scope.len() as u64;
        constraints.push(Constraint {
            predicate: c.predicate,
            scope,
        });
        sources.push(r as u32);
    }

    if (arity_sum as f64) < (1.0 - params.beta) * params.w_avg * samples as f64 {
        return Err(format!(
            "sampled average arity {:.4} below (1-β)W = {:.4}",
            arity_sum as f64 / samples as f64,
            (1.0 - params.beta) * params.w_avg
        ));
    }

    let mut dummies = Dummies {
        degree: Vec::new(),
        open: Vec::new(),
        base: total,
        delta,
    };

    let mut surplus: Vec<u64> = degree.iter().map(|&d| d.saturating_sub(delta)).collect();
    let mut remaining: u64 = surplus.iter().sum();
    let limit = params.replacement_bound();
    if remaining as f64 > limit {
        return Err(format!("surplus repair needs {remaining} replacements, limit {limit}"));
    }
    let replacements = remaining;
    let mut changed = Vec::new();
    for r in (0..constraints.len()).rev() {
        if remaining == 0 {
            break;
        }
        let mut touched = false;
        for p in 0..constraints[r].scope.len() {
            let v = constraints[r].scope[p];
            if surplus[v] > 0 {
                surplus[v] -= 1;
                remaining -= 1;
                degree[v] -= 1;
                let d = dummies.pick(&constraints[r].scope);
                constraints[r].scope[p] = d;
                touched = true;
            }
        }
        if touched {
            changed.push(r);
        }
    }
    changed.reverse();

    let w_max = params.w_max;
    let mut deficient: BTreeSet<(u64, usize)> = (0..total)
        .filter(|&v| degree[v] < delta)
        .map(|v| (degree[v], v))
        .collect();
    let mut padding_count = 0u64;
    while !deficient.is_empty() {
        let mut scope: SmallVec<[usize; 4]> = SmallVec::new();
        let mut taken: SmallVec<[(u64, usize); 4]> = SmallVec::new();
        while scope.len() < w_max {
            let Some((d, v)) = deficient.pop_first() else { break };
            scope.push(v);
            taken.push((d, v));
        }
        for (d, v) in taken {
            degree[v] += 1;
            if d + 1 < delta {
                deficient.insert((d + 1, v));
            }
        }
        while scope.len() < w_max {
            let d = dummies.pick(&scope);
            scope.push(d);
        }
        constraints.push(Constraint {
            predicate: padding,
            scope,
        });
        sources.push(PADDING);
        padding_count += 1;
    }

    let t: u64 = dummies
        .open
        .iter()
        .map(|&d| delta - dummies.degree[d - dummies.base])
        .sum();
    let mut closure = 0u64;
    let mut closure_dummies = 0u64;
    if t > 0 {
        let wm = w_max as u64;
        let k = (wm..2 * wm)
            .find(|k| (k * delta + t) % wm == 0)
            .expect("Δ is coprime to W_max");
        for _ in 0..k {
            dummies.fresh();
        }
        closure_dummies = k;
        let mut heap: BinaryHeap<(u64, Reverse<usize>)> = dummies
            .open
            .iter()
            .map(|&d| (delta - dummies.degree[d - dummies.base], Reverse(d)))
            .collect();
        let rounds = (k * delta + t) / wm;
        for _ in 0..rounds {
            let mut picked: SmallVec<[(u64, usize); 4]> = SmallVec::new();
            for _ in 0..w_max {
                let (need, Reverse(d)) = heap.pop().ok_or("dummy closure ran out of variables")?;
                picked.push((need, d));
            }
            let scope: SmallVec<[usize; 4]> = picked.iter().map(|&(_, d)| d).collect();
            for &(need, d) in &picked {
                dummies.degree[d - dummies.base] += 1;
                if need > 1 {
                    heap.push((need - 1, Reverse(d)));
                }
            }
            constraints.push(Constraint {
                predicate: padding,
                scope,
            });
            sources.push(CLOSURE);
            closure += 1;
        }
        if !heap.is_empty() {
            return Err("dummy closure left unmatched degree".into());
        }
    }

    let map = CopyMap {
        delta,
        original_variables: instance.num_variables(),
        copies,
        first_copy,
        dummies: dummies.degree.len(),
        sources,
        changed,
    };
    Ok(TrialOutput {
        constraints,
        map,
        replacements,
        padding: padding_count,
        closure,
        closure_dummies,
    })
}

/// Empirical marginals of `ζ` over copies, rounded by conditional expectations.
pub fn pullback_randomized(f: &Instance, map: &CopyMap, zeta: &[Value]) -> Result<Assignment, RegularityError> {
    if f.num_variables() != map.original_variables {
        return Err(RegularityError::MapMismatch(format!(
            "map describes {} original variables, instance has {}",
            map.original_variables,
            f.num_variables()
        )));
    }
    if zeta.len() != map.num_variables() {
        return Err(RegularityError::MapMismatch(format!(
            "assignment has {} values, map describes {} variables",
            zeta.len(),
            map.num_variables()
        )));
    }
    if let Some(&bad) = zeta.iter().find(|&&a| a >= f.domain_size()) {
        return Err(RegularityError::MapMismatch(format!("value {bad} outside the domain")));
    }
    let marginals = map.marginals(zeta, f.domain_size());
    conditional_expectation_round(f, &marginals, Goal::Max).map_err(|e| RegularityError::MapMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{evaluate, CspLanguage, Predicate};
    use crate::solvers::expected_value;

    fn or2_instance() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::or(2), Predicate::or(3)]).unwrap());
        let (or2, or3) = (l.id("OR2").unwrap(), l.id("OR3").unwrap());
        Instance::unweighted(
            l,
            4,
            vec![
                Constraint::new(or2, [0, 1]),
                Constraint::new(or3, [1, 2, 3]),
                Constraint::new(or2, [0, 3]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn output_is_regular_with_bounded_changes() {
        let f = or2_instance();
        for seed in 0..3 {
            let (g, map, cert) = regularize_randomized(&f, 0.5, seed, Profile::Test).unwrap();
            let report = degrees(&g);
            assert_eq!(report.common_degree, Some(cert.params.delta as usize));
            assert!(cert.changed_or_added() as f64 <= cert.change_bound);
            assert!(cert.replacements as f64 <= cert.replacement_bound);
            assert_eq!(map.num_constraints(), g.num_constraints());
            assert_ne!(cert.params.delta % 3, 0);
            assert!(cert.caveat.is_some());
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let f = or2_instance();
        let (g1, _, _) = regularize_randomized(&f, 0.5, 7, Profile::Test).unwrap();
        let (g2, _, _) = regularize_randomized(&f, 0.5, 7, Profile::Test).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn origins_are_consistent() {
        let f = or2_instance();
        let (g, map, cert) = regularize_randomized(&f, 0.5, 1, Profile::Test).unwrap();
        for (r, c) in g.constraints().iter().enumerate() {
            match map.constraint_origin(r) {
                ConstraintOrigin::Sampled { source, changed } => {
                    assert_eq!(c.predicate, f.constraints()[source].predicate);
                    let dummy = c.scope.iter().any(|&v| map.origin(v) == VarOrigin::Dummy);
                    assert_eq!(dummy, changed);
                    if !changed {
                        for (&v, &i) in c.scope.iter().zip(&f.constraints()[source].scope) {
                            assert!(matches!(map.origin(v), VarOrigin::Copy { original, .. } if original == i));
                        }
                    }
                }
                ConstraintOrigin::Padding | ConstraintOrigin::Closure => {}
            }
        }
        assert_eq!(map.changed().len() as u64, cert.changed);
    }

    #[test]
    fn single_constraint_instance() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let f = Instance::unweighted(l.clone(), 2, vec![Constraint::new(l.id("NEQ").unwrap(), [0, 1])]).unwrap();
        let (g, map, cert) = regularize_randomized(&f, 0.5, 0, Profile::Test).unwrap();
        assert_eq!(map.num_copies(), 2);
        assert_eq!(cert.replacements, 0);
        assert!(degrees(&g).is_regular);
    }

    #[test]
    fn consistent_zeta_pulls_back_to_itself() {
        let f = or2_instance();
        let (_, map, _) = regularize_randomized(&f, 0.5, 2, Profile::Test).unwrap();
        let chi = [0, 1, 0, 0];
        let back = pullback_randomized(&f, &map, &map.lift(&chi, 1)).unwrap();
        assert_eq!(back.0, chi);
    }

    #[test]
    fn pullback_dominates_empirical_expectation() {
        let f = or2_instance();
        let (g, map, _) = regularize_randomized(&f, 0.5, 3, Profile::Test).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let zeta: Vec<Value> = (0..g.num_variables()).map(|_| rng.random_range(0..2)).collect();
            let chi = pullback_randomized(&f, &map, &zeta).unwrap();
            let mean = expected_value(&f, &map.marginals(&zeta, 2)).unwrap();
            assert!(evaluate(&f, &chi).unwrap() >= mean);
        }
    }

    #[test]
    fn variable_origins() {
        let f = or2_instance();
        let (_, map, _) = regularize_randomized(&f, 0.5, 0, Profile::Test).unwrap();
        assert_eq!(map.origin(0), VarOrigin::Copy { original: 0, copy: 0 });
        assert_eq!(map.origin(2), VarOrigin::Copy { original: 1, copy: 0 });
        assert_eq!(map.origin(map.num_copies() - 1), VarOrigin::Copy { original: 3, copy: 1 });
    }
}
