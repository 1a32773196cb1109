//! Constraint languages, instances and their evaluation.
//!
//! Predicates are stored extensionally: a sorted list of satisfying tuples plus a
//! dense truth table indexed by the mixed-radix encoding of a tuple (first
//! position most significant). Weighted instances carry explicit weights that sum
//! to one; unweighted instances never store weights and every constraint counts
//! `1/m`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// A domain value, always in `[0, q)`.
pub type Value = u32;

/// Tolerance on `Σ w_r = 1` for weighted instances.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Largest truth table a single predicate may allocate.
const MAX_TABLE_SIZE: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CspError {
    #[error("domain size must be at least 2, got {0}")]
    DomainTooSmall(u32),
    #[error("predicate `{name}`: {reason}")]
    BadPredicate { name: String, reason: String },
    #[error("duplicate predicate `{0}`")]
    DuplicatePredicate(String),
    #[error("predicate `{0}` has an empty satisfying set")]
    EmptyPredicate(String),
    #[error("shift closure is only defined over a Boolean domain, got q = {0}")]
    NonBooleanDomain(u32),
    #[error("assignment has length {got}, instance has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("assignment value {value} of variable {variable} is outside the domain")]
    ValueOutOfDomain { variable: usize, value: Value },
    #[error("invalid instance: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A named Boolean predicate over `[q]^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    name: String,
    arity: usize,
    domain_size: u32,
    satisfying: Vec<Vec<Value>>,
    table: Vec<bool>,
}

impl Predicate {
    /// Builds a predicate from its satisfying tuples. Duplicate tuples are merged.
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        domain_size: u32,
        tuples: impl IntoIterator<Item = Vec<Value>>,
    ) -> Result<Self, CspError> {
        let name = name.into();
        let bad = |reason: String| CspError::BadPredicate {
            name: name.clone(),
            reason,
        };
        if domain_size < 2 {
            return Err(CspError::DomainTooSmall(domain_size));
        }
        if arity == 0 {
            return Err(bad("arity must be at least 1".into()));
        }
        let size = table_size(domain_size, arity)
            .ok_or_else(|| bad(format!("truth table of {domain_size}^{arity} entries is too large")))?;
        let mut set = BTreeSet::new();
        for tuple in tuples {
            if tuple.len() != arity {
                return Err(bad(format!(
                    "tuple {tuple:?} has length {}, expected {arity}",
                    tuple.len()
                )));
            }
            if let Some(v) = tuple.iter().find(|&&v| v >= domain_size) {
                return Err(bad(format!("tuple {tuple:?} has value {v} outside [0, {domain_size})")));
            }
            set.insert(tuple);
        }
        let mut table = vec![false; size];
        for tuple in &set {
            table[encode(domain_size, tuple)] = true;
        }
        Ok(Predicate {
            name,
            arity,
            domain_size,
            satisfying: set.into_iter().collect(),
            table,
        })
    }

    /// Builds a predicate by evaluating `f` on every tuple of `[q]^k`.
    pub fn from_fn(
        name: impl Into<String>,
        arity: usize,
        domain_size: u32,
        f: impl Fn(&[Value]) -> bool,
    ) -> Result<Self, CspError> {
        let name = name.into();
        let size = table_size(domain_size, arity).ok_or_else(|| CspError::BadPredicate {
            name: name.clone(),
            reason: "truth table too large".into(),
        })?;
        let tuples = (0..size)
            .map(|idx| decode(domain_size, arity, idx))
            .filter(|t| f(t))
            .collect::<Vec<_>>();
        Predicate::new(name, arity, domain_size, tuples)
    }

    /// Boolean disjunction of `k` positive literals, named `OR{k}`.
    pub fn or(arity: usize) -> Self {
        Predicate::from_fn(format!("OR{arity}"), arity, 2, |t| t.iter().any(|&v| v == 1))
            .expect("small Boolean predicate")
    }

    /// Boolean conjunction, named `AND{k}`.
    pub fn and(arity: usize) -> Self {
        Predicate::from_fn(format!("AND{arity}"), arity, 2, |t| t.iter().all(|&v| v == 1))
            .expect("small Boolean predicate")
    }

    /// Binary disequality over `[q]`, named `NEQ` (or `NEQ{q}` for q > 2).
    pub fn neq(domain_size: u32) -> Self {
        let name = if domain_size == 2 {
            "NEQ".to_string()
        } else {
            format!("NEQ{domain_size}")
        };
        Predicate::from_fn(name, 2, domain_size, |t| t[0] != t[1]).expect("binary predicate")
    }

    /// All-equal predicate of arity `k` over `[q]`, named `EQ{k}`.
    pub fn eq(arity: usize, domain_size: u32) -> Self {
        Predicate::from_fn(format!("EQ{arity}"), arity, domain_size, |t| {
            t.windows(2).all(|w| w[0] == w[1])
        })
        .expect("small predicate")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> u32 {
        self.domain_size
    }

    /// Satisfying tuples in lexicographic order.
    pub fn satisfying(&self) -> &[Vec<Value>] {
        &self.satisfying
    }

    /// Fraction of `[q]^k` that satisfies the predicate.
    pub fn density(&self) -> f64 {
        self.satisfying.len() as f64 / self.table.len() as f64
    }

    pub fn holds(&self, tuple: &[Value]) -> bool {
        self.table[encode(self.domain_size, tuple)]
    }

    #[inline]
    pub(crate) fn holds_index(&self, index: usize) -> bool {
        self.table[index]
    }
}

fn table_size(domain_size: u32, arity: usize) -> Option<usize> {
    let exp = u32::try_from(arity).ok()?;
    (domain_size as usize)
        .checked_pow(exp)
        .filter(|&s| s <= MAX_TABLE_SIZE)
}

#[inline]
pub(crate) fn encode(domain_size: u32, tuple: &[Value]) -> usize {
    tuple
        .iter()
        .fold(0usize, |acc, &v| acc * domain_size as usize + v as usize)
}

pub(crate) fn decode(domain_size: u32, arity: usize, mut index: usize) -> Vec<Value> {
    let q = domain_size as usize;
    let mut tuple = vec![0; arity];
    for slot in tuple.iter_mut().rev() {
        *slot = (index % q) as Value;
        index /= q;
    }
    tuple
}

/// Index of a predicate inside its [`CspLanguage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateId(pub usize);

/// A finite collection of predicates over a common domain `[q]`, kept sorted by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspLanguage {
    domain_size: u32,
    predicates: Vec<Predicate>,
}

impl CspLanguage {
    pub fn new(domain_size: u32, predicates: Vec<Predicate>) -> Result<Self, CspError> {
        if domain_size < 2 {
            return Err(CspError::DomainTooSmall(domain_size));
        }
        let mut by_name = BTreeMap::new();
        for p in predicates {
            if p.domain_size != domain_size {
                return Err(CspError::BadPredicate {
                    name: p.name.clone(),
                    reason: format!(
                        "defined over domain {}, language domain is {domain_size}",
                        p.domain_size
                    ),
                });
            }
            if by_name.contains_key(&p.name) {
                return Err(CspError::DuplicatePredicate(p.name));
            }
            by_name.insert(p.name.clone(), p);
        }
        Ok(CspLanguage {
            domain_size,
            predicates: by_name.into_values().collect(),
        })
    }

    pub fn domain_size(&self) -> u32 {
        self.domain_size
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.predicates
    }

    pub fn predicate(&self, id: PredicateId) -> &Predicate {
        &self.predicates[id.0]
    }

    pub fn id(&self, name: &str) -> Option<PredicateId> {
        self.predicates
            .binary_search_by(|p| p.name.as_str().cmp(name))
            .ok()
            .map(PredicateId)
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// First predicate (by name) of the given arity.
    pub fn first_of_arity(&self, arity: usize) -> Option<PredicateId> {
        self.predicates
            .iter()
            .position(|p| p.arity == arity)
            .map(PredicateId)
    }

    /// Sub-language containing only the listed predicates.
    pub fn restrict(&self, ids: impl IntoIterator<Item = PredicateId>) -> CspLanguage {
        let keep: BTreeSet<usize> = ids.into_iter().map(|id| id.0).collect();
        CspLanguage {
            domain_size: self.domain_size,
            predicates: keep.into_iter().map(|i| self.predicates[i].clone()).collect(),
        }
    }
}

/// A predicate applied to an ordered scope of distinct variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub predicate: PredicateId,
    pub scope: SmallVec<[usize; 4]>,
}

impl Constraint {
    pub fn new(predicate: PredicateId, scope: impl IntoIterator<Item = usize>) -> Self {
        Constraint {
            predicate,
            scope: scope.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// Every constraint weighs `1/m`.
    Uniform,
    Explicit(Vec<f64>),
}

/// A CSP instance over variables `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    language: Arc<CspLanguage>,
    num_variables: usize,
    constraints: Vec<Constraint>,
    weights: Weights,
}

impl Instance {
    pub fn unweighted(
        language: Arc<CspLanguage>,
        num_variables: usize,
        constraints: Vec<Constraint>,
    ) -> Result<Self, CspError> {
        Self::from_parts_unchecked(language, num_variables, constraints, Weights::Uniform).checked()
    }

    pub fn weighted(
        language: Arc<CspLanguage>,
        num_variables: usize,
        constraints: Vec<Constraint>,
        weights: Vec<f64>,
    ) -> Result<Self, CspError> {
        Self::from_parts_unchecked(language, num_variables, constraints, Weights::Explicit(weights))
            .checked()
    }

    /// Assembles an instance without checking any invariant. Use
    /// [`validate_instance`] to inspect the result.
    pub fn from_parts_unchecked(
        language: Arc<CspLanguage>,
        num_variables: usize,
        constraints: Vec<Constraint>,
        weights: Weights,
    ) -> Self {
        Instance {
            language,
            num_variables,
            constraints,
            weights,
        }
    }

    fn checked(self) -> Result<Self, CspError> {
        let violations = validate_instance(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(CspError::Invalid(violations))
        }
    }

    pub fn language(&self) -> &CspLanguage {
        &self.language
    }

    pub fn language_arc(&self) -> &Arc<CspLanguage> {
        &self.language
    }

    pub fn domain_size(&self) -> u32 {
        self.language.domain_size
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn is_weighted(&self) -> bool {
        matches!(self.weights, Weights::Explicit(_))
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn weight(&self, r: usize) -> f64 {
        match &self.weights {
            Weights::Uniform => 1.0 / self.constraints.len() as f64,
            Weights::Explicit(w) => w[r],
        }
    }

    /// Weights as an explicit vector (`1/m` each for unweighted instances).
    pub fn weight_vec(&self) -> Vec<f64> {
        (0..self.constraints.len()).map(|r| self.weight(r)).collect()
    }

    pub fn predicate_of(&self, r: usize) -> &Predicate {
        self.language.predicate(self.constraints[r].predicate)
    }

    /// Σ_r ar(P_r).
    pub fn total_arity(&self) -> usize {
        self.constraints.iter().map(|c| c.scope.len()).sum()
    }

    pub fn max_arity(&self) -> usize {
        self.constraints
            .iter()
            .map(|c| c.scope.len())
            .max()
            .unwrap_or(0)
    }

    /// Same constraints with explicit weights.
    pub fn to_weighted(&self) -> Instance {
        Instance {
            weights: Weights::Explicit(self.weight_vec()),
            ..self.clone()
        }
    }

    /// Whether constraint `r` holds under `values`. No bounds checks beyond slice indexing.
    #[inline]
    pub fn satisfied(&self, r: usize, values: &[Value]) -> bool {
        let c = &self.constraints[r];
        let q = self.language.domain_size as usize;
        let idx = c
            .scope
            .iter()
            .fold(0usize, |acc, &v| acc * q + values[v] as usize);
        self.language.predicate(c.predicate).holds_index(idx)
    }

    /// Number of satisfied constraints.
    pub fn satisfied_count(&self, values: &[Value]) -> usize {
        (0..self.constraints.len())
            .filter(|&r| self.satisfied(r, values))
            .count()
    }

    pub(crate) fn value_unchecked(&self, values: &[Value]) -> f64 {
        match &self.weights {
            Weights::Uniform => self.satisfied_count(values) as f64 / self.constraints.len() as f64,
            Weights::Explicit(w) => w
                .iter()
                .enumerate()
                .filter(|&(r, _)| self.satisfied(r, values))
                .fold(0.0, |acc, (_, &wr)| acc + wr),
        }
    }

    pub(crate) fn check_assignment(&self, values: &[Value]) -> Result<(), CspError> {
        if values.len() != self.num_variables {
            return Err(CspError::AssignmentLength {
                expected: self.num_variables,
                got: values.len(),
            });
        }
        let q = self.domain_size();
        if let Some((variable, &value)) = values.iter().enumerate().find(|(_, &v)| v >= q) {
            return Err(CspError::ValueOutOfDomain { variable, value });
        }
        Ok(())
    }
}

/// A total assignment of domain values to variables `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<Value>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment(vec![0; n])
    }

    pub fn into_inner(self) -> Vec<Value> {
        self.0
    }
}

impl Deref for Assignment {
    type Target = [Value];

    fn deref(&self) -> &[Value] {
        &self.0
    }
}

impl From<Vec<Value>> for Assignment {
    fn from(values: Vec<Value>) -> Self {
        Assignment(values)
    }
}

/// `Val_χ(F) = Σ_r w_r P_r(χ(S_r))`.
pub fn evaluate(instance: &Instance, assignment: &[Value]) -> Result<f64, CspError> {
    instance.check_assignment(assignment)?;
    Ok(instance.value_unchecked(assignment))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degrees: Vec<usize>,
    pub min: usize,
    pub max: usize,
    pub is_regular: bool,
    pub common_degree: Option<usize>,
}

/// Occurrence count of every variable.
pub fn degrees(instance: &Instance) -> DegreeReport {
    let mut degrees = vec![0usize; instance.num_variables];
    for c in &instance.constraints {
        for &v in &c.scope {
            degrees[v] += 1;
        }
    }
    let min = degrees.iter().copied().min().unwrap_or(0);
    let max = degrees.iter().copied().max().unwrap_or(0);
    let is_regular = min == max;
    DegreeReport {
        common_degree: is_regular.then_some(min),
        degrees,
        min,
        max,
        is_regular,
    }
}

/// Smallest satisfaction probability of any predicate under a uniformly random tuple.
pub fn gamma_lower_bound(language: &CspLanguage) -> Result<f64, CspError> {
    let mut gamma = 1.0f64;
    for p in &language.predicates {
        if p.satisfying.is_empty() {
            return Err(CspError::EmptyPredicate(p.name.clone()));
        }
        gamma = gamma.min(p.density());
    }
    Ok(gamma)
}

/// Closes a Boolean language under literal negation: adds `P^I(x) = P(x ⊕ I)` for
/// every `I ∈ {0,1}^k`. Originals keep their names; a new variant is named
/// `NAME^bits` and is dropped when its satisfying set already occurs.
pub fn close_under_shifts(language: &CspLanguage) -> Result<CspLanguage, CspError> {
    if language.domain_size != 2 {
        return Err(CspError::NonBooleanDomain(language.domain_size));
    }
    let mut seen: BTreeSet<(usize, Vec<Vec<Value>>)> = language
        .predicates
        .iter()
        .map(|p| (p.arity, p.satisfying.clone()))
        .collect();
    let mut names: BTreeSet<String> = language.predicates.iter().map(|p| p.name.clone()).collect();
    let mut out = language.predicates.clone();
    for p in &language.predicates {
        for mask in 1usize..(1 << p.arity) {
            let shift: Vec<Value> = (0..p.arity)
                .map(|i| ((mask >> (p.arity - 1 - i)) & 1) as Value)
                .collect();
            let mut tuples: Vec<Vec<Value>> = p
                .satisfying
                .iter()
                .map(|t| t.iter().zip(&shift).map(|(a, b)| a ^ b).collect())
                .collect();
            tuples.sort();
            if !seen.insert((p.arity, tuples.clone())) {
                continue;
            }
            let bits: String = shift.iter().map(|b| char::from(b'0' + *b as u8)).collect();
            let mut name = format!("{}^{bits}", p.name);
            while names.contains(&name) {
                name.push('\'');
            }
            names.insert(name.clone());
            let shifted = Predicate::new(name, p.arity, 2, tuples)?;
            out.push(shifted);
        }
    }
    CspLanguage::new(2, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoConstraints,
    UnknownPredicate,
    ArityMismatch,
    ScopeOutOfRange,
    ScopeNotDistinct,
    WeightCountMismatch,
    NegativeWeight,
    WeightsNotNormalized,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::NoConstraints => "no constraints",
            ViolationKind::UnknownPredicate => "unknown predicate",
            ViolationKind::ArityMismatch => "arity mismatch",
            ViolationKind::ScopeOutOfRange => "scope out of range",
            ViolationKind::ScopeNotDistinct => "scope not distinct",
            ViolationKind::WeightCountMismatch => "weight count mismatch",
            ViolationKind::NegativeWeight => "negative weight",
            ViolationKind::WeightsNotNormalized => "weights not normalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Option<usize>,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constraint {
            Some(r) => write!(f, "constraint {r}: {} ({})", self.kind, self.detail),
            None => write!(f, "{} ({})", self.kind, self.detail),
        }
    }
}

/// Lists every broken instance invariant; empty iff the instance is well formed.
pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |constraint, kind, detail: String| {
        out.push(Violation {
            constraint,
            kind,
            detail,
        })
    };
    let m = instance.constraints.len();
    if m == 0 {
        push(None, ViolationKind::NoConstraints, "m = 0".into());
    }
    for (r, c) in instance.constraints.iter().enumerate() {
        let Some(p) = instance.language.predicates.get(c.predicate.0) else {
            push(
                Some(r),
                ViolationKind::UnknownPredicate,
                format!("predicate id {}", c.predicate.0),
            );
            continue;
        };
        if c.scope.len() != p.arity {
            push(
                Some(r),
                ViolationKind::ArityMismatch,
                format!("`{}` has arity {}, scope has {}", p.name, p.arity, c.scope.len()),
            );
        }
        if let Some(&v) = c.scope.iter().find(|&&v| v >= instance.num_variables) {
            push(
                Some(r),
                ViolationKind::ScopeOutOfRange,
                format!("variable {v} >= n = {}", instance.num_variables),
            );
        }
        let distinct: BTreeSet<usize> = c.scope.iter().copied().collect();
        if distinct.len() != c.scope.len() {
            push(
                Some(r),
                ViolationKind::ScopeNotDistinct,
                format!("scope {:?}", c.scope.as_slice()),
            );
        }
    }
    if let Weights::Explicit(w) = &instance.weights {
        if w.len() != m {
            push(
                None,
                ViolationKind::WeightCountMismatch,
                format!("{} weights for {m} constraints", w.len()),
            );
        }
        for (r, &wr) in w.iter().enumerate() {
            if !(wr >= 0.0 && wr.is_finite()) {
                push(Some(r), ViolationKind::NegativeWeight, format!("w = {wr}"));
            }
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            push(
                None,
                ViolationKind::WeightsNotNormalized,
                format!("Σw = {total}"),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(preds: Vec<Predicate>) -> Arc<CspLanguage> {
        let q = preds[0].domain_size();
        Arc::new(CspLanguage::new(q, preds).unwrap())
    }

    fn triangle(weights: Option<Vec<f64>>) -> Instance {
        let l = lang(vec![Predicate::neq(2)]);
        let neq = l.id("NEQ").unwrap();
        let cs = vec![
            Constraint::new(neq, [0, 1]),
            Constraint::new(neq, [1, 2]),
            Constraint::new(neq, [0, 2]),
        ];
        match weights {
            None => Instance::unweighted(l, 3, cs).unwrap(),
            Some(w) => Instance::weighted(l, 3, cs, w).unwrap(),
        }
    }

    #[test]
    fn triangle_values() {
        let unweighted = triangle(None);
        assert_eq!(evaluate(&unweighted, &[0, 1, 0]).unwrap(), 2.0 / 3.0);
        let weighted = triangle(Some(vec![0.5, 0.3, 0.2]));
        assert!((evaluate(&weighted, &[0, 1, 0]).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_bad_assignments() {
        let f = triangle(None);
        assert!(matches!(
            evaluate(&f, &[0, 1]),
            Err(CspError::AssignmentLength { expected: 3, got: 2 })
        ));
        assert!(matches!(
            evaluate(&f, &[0, 2, 0]),
            Err(CspError::ValueOutOfDomain { variable: 1, value: 2 })
        ));
    }

    #[test]
    fn degree_reports() {
        let l = lang(vec![Predicate::or(2)]);
        let or2 = l.id("OR2").unwrap();
        let path = Instance::unweighted(
            l,
            3,
            vec![Constraint::new(or2, [0, 1]), Constraint::new(or2, [1, 2])],
        )
        .unwrap();
        let d = degrees(&path);
        assert_eq!(d.degrees, vec![1, 2, 1]);
        assert!(!d.is_regular);
        assert_eq!(d.common_degree, None);

        let d = degrees(&triangle(None));
        assert_eq!(d.degrees, vec![2, 2, 2]);
        assert!(d.is_regular);
        assert_eq!(d.common_degree, Some(2));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_lower_bound(&lang(vec![Predicate::neq(2)])).unwrap(), 0.5);
        assert_eq!(gamma_lower_bound(&lang(vec![Predicate::or(3)])).unwrap(), 7.0 / 8.0);
        let l = lang(vec![Predicate::eq(3, 2), Predicate::neq(2)]);
        assert_eq!(gamma_lower_bound(&l).unwrap(), 0.25);
        let never = Predicate::new("FALSE", 2, 2, Vec::new()).unwrap();
        assert_eq!(
            gamma_lower_bound(&lang(vec![never, Predicate::neq(2)])),
            Err(CspError::EmptyPredicate("FALSE".into()))
        );
    }

    #[test]
    fn shift_closure_of_and_has_all_literal_conjunctions() {
        let closed = close_under_shifts(&lang(vec![Predicate::and(2)])).unwrap();
        assert_eq!(closed.len(), 4);
        let sets: BTreeSet<Vec<Vec<Value>>> =
            closed.predicates().iter().map(|p| p.satisfying().to_vec()).collect();
        for a in 0..2 {
            for b in 0..2 {
                assert!(sets.contains(&vec![vec![a, b]]));
            }
        }
        // identity shift keeps the original name and set
        let or = close_under_shifts(&lang(vec![Predicate::or(2)])).unwrap();
        let id = or.id("OR2").unwrap();
        assert_eq!(or.predicate(id), &Predicate::or(2));
    }

    #[test]
    fn shift_closure_rejects_non_boolean() {
        let l = lang(vec![Predicate::neq(3)]);
        assert_eq!(close_under_shifts(&l), Err(CspError::NonBooleanDomain(3)));
    }

    #[test]
    fn shift_closure_dedupes_symmetric_predicates() {
        // NEQ ⊕ (1,1) = NEQ and NEQ ⊕ (0,1) = NEQ ⊕ (1,0) = EQ
        let closed = close_under_shifts(&lang(vec![Predicate::neq(2)])).unwrap();
        assert_eq!(closed.len(), 2);
    }

    #[test]
    fn validate_reports_each_rule() {
        let l = lang(vec![Predicate::neq(2)]);
        let neq = l.id("NEQ").unwrap();
        let bad = Instance::from_parts_unchecked(
            l.clone(),
            2,
            vec![Constraint::new(neq, [0, 0])],
            Weights::Uniform,
        );
        let v = validate_instance(&bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::ScopeNotDistinct);
        assert_eq!(v[0].kind.to_string(), "scope not distinct");

        let unnormalized = Instance::from_parts_unchecked(
            l.clone(),
            3,
            vec![Constraint::new(neq, [0, 1]), Constraint::new(neq, [1, 2])],
            Weights::Explicit(vec![0.5, 0.4]),
        );
        let v = validate_instance(&unnormalized);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind.to_string(), "weights not normalized");

        let out_of_range = Instance::from_parts_unchecked(
            l,
            2,
            vec![Constraint::new(neq, [0, 5]), Constraint::new(PredicateId(9), [0, 1])],
            Weights::Uniform,
        );
        let kinds: Vec<_> = validate_instance(&out_of_range).iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            vec![ViolationKind::ScopeOutOfRange, ViolationKind::UnknownPredicate]
        );
    }

    #[test]
    fn language_rejects_duplicates() {
        let err = CspLanguage::new(2, vec![Predicate::neq(2), Predicate::neq(2)]).unwrap_err();
        assert_eq!(err, CspError::DuplicatePredicate("NEQ".into()));
    }

    #[test]
    fn predicate_validation() {
        assert!(Predicate::new("P", 2, 2, vec![vec![0, 2]]).is_err());
        assert!(Predicate::new("P", 2, 2, vec![vec![0]]).is_err());
        assert!(Predicate::new("P", 0, 2, Vec::new()).is_err());
        let p = Predicate::new("P", 2, 3, vec![vec![2, 1], vec![0, 0], vec![2, 1]]).unwrap();
        assert_eq!(p.satisfying(), &[vec![0, 0], vec![2, 1]]);
        assert!(p.holds(&[2, 1]));
        assert!(!p.holds(&[1, 2]));
    }
}
