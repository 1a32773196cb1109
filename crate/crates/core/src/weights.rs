//! Weight handling: replication of weighted instances into unweighted ones,
//! exact constraint duplication, and the light/medium/heavy rescaling used
//! before solving weighted Min-CSPs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csp::{Assignment, Constraint, CspError, Instance, Weights};
use crate::solvers::{largest_falsifiable_prefix, FalsifiabilityOracle, SolveError};

/// Largest replicated instance we are willing to build.
pub const MAX_REPLICATED_CONSTRAINTS: u64 = 1 << 26;

/// Relative slack when comparing a weight against a class threshold.
const THRESHOLD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("instance is unweighted")]
    NotWeighted,
    #[error("replication would create {0} constraints")]
    TooLarge(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Csp(#[from] CspError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub epsilon: f64,
    pub q_total: u64,
    /// Copies of each source constraint; they appear consecutively in the output.
    pub counts: Vec<u64>,
}

impl ReplicationPlan {
    /// Source constraint of every replicated constraint.
    pub fn sources(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(r, &c)| std::iter::repeat_n(r, c as usize))
            .collect()
    }
}

/// Replaces each weighted constraint by `l_r ≈ w_r · q_total` unweighted copies,
/// `q_total = ⌈m/ε⌉`, so that every assignment's value moves by at most ε.
pub fn replicate_to_unweighted(
    instance: &Instance,
    epsilon: f64,
) -> Result<(Instance, ReplicationPlan), WeightError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(WeightError::InvalidEpsilon(epsilon));
    }
    if !instance.is_weighted() {
        return Err(WeightError::NotWeighted);
    }
    let m = instance.num_constraints();
    let raw = (m as f64 / epsilon).ceil();
    if raw > MAX_REPLICATED_CONSTRAINTS as f64 {
        return Err(WeightError::TooLarge(raw as u64));
    }
    let mut q_total = raw as u64;
    while (q_total as f64) * epsilon < m as f64 {
        q_total += 1;
    }
    let q = q_total as f64;

    let weights = instance.weight_vec();
    let scaled: Vec<f64> = weights.iter().map(|w| w * q).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor().max(0.0) as u64).collect();
    let fraction = |r: usize| scaled[r] - scaled[r].floor();
    let assigned: u64 = counts.iter().sum();

    if assigned < q_total {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| fraction(b).total_cmp(&fraction(a)).then(a.cmp(&b)));
        let mut missing = q_total - assigned;
        for &r in order.iter().cycle() {
            if missing == 0 {
                break;
            }
            counts[r] += 1;
            missing -= 1;
        }
    } else if assigned > q_total {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| fraction(a).total_cmp(&fraction(b)).then(a.cmp(&b)));
        let mut surplus = assigned - q_total;
        while surplus > 0 {
            for &r in &order {
                if surplus > 0 && counts[r] > 0 {
                    counts[r] -= 1;
                    surplus -= 1;
                }
            }
        }
    }

    let mut constraints = Vec::with_capacity(q_total as usize);
    for (r, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            constraints.push(instance.constraints()[r].clone());
        }
    }
    let g = Instance::unweighted(instance.language_arc().clone(), instance.num_variables(), constraints)?;
    Ok((
        g,
        ReplicationPlan {
            epsilon,
            q_total,
            counts,
        },
    ))
}

/// Duplicates every constraint `⌈m_min/m⌉` times, splitting its weight evenly,
/// so that the instance has at least `m_min` constraints and the same values.
pub fn ensure_min_constraints(instance: &Instance, m_min: usize) -> Instance {
    let m = instance.num_constraints();
    if m == 0 || m_min <= m {
        return instance.clone();
    }
    let factor = m_min.div_ceil(m);
    let constraints: Vec<Constraint> = instance
        .constraints()
        .iter()
        .flat_map(|c| std::iter::repeat_n(c.clone(), factor))
        .collect();
    let language = instance.language_arc().clone();
    let n = instance.num_variables();
    if instance.is_weighted() {
        let weights = instance
            .weight_vec()
            .into_iter()
            .flat_map(|w| std::iter::repeat_n(w / factor as f64, factor))
            .collect();
        Instance::from_parts_unchecked(language, n, constraints, Weights::Explicit(weights))
    } else {
        Instance::from_parts_unchecked(language, n, constraints, Weights::Uniform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightClass {
    Light,
    Medium,
    Heavy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinScalePlan {
    /// 1-based position of the pivot in `order`.
    pub k: usize,
    pub w_k: f64,
    pub sigma: f64,
    pub classes: Vec<WeightClass>,
    /// Positive-weight constraints sorted by descending weight (stable).
    pub order: Vec<usize>,
    /// Source constraint of each constraint of the rescaled instance.
    pub kept: Vec<usize>,
    pub light_threshold: f64,
    pub heavy_threshold: f64,
    pub dropped_light_weight: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl MinScalePlan {
    pub fn heavy(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == WeightClass::Heavy)
            .map(|(r, _)| r)
    }
}

/// Evidence that the optimum is zero: an assignment violating every
/// positive-weight constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCertificate {
    pub assignment: Assignment,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub enum MinScaleOutcome {
    Zero(ZeroCertificate),
    Scaled { instance: Instance, plan: MinScalePlan },
}

pub fn min_preprocess_scale(
    instance: &Instance,
    delta: f64,
    alpha: f64,
    oracle: &dyn FalsifiabilityOracle,
) -> Result<MinScaleOutcome, WeightError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(WeightError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(WeightError::InvalidParameter(format!("alpha must be at least 1, got {alpha}")));
    }
    let weights = instance.weight_vec();
    let m = weights.len();
    let mut order: Vec<usize> = (0..m).filter(|&r| weights[r] > 0.0).collect();

    if let Some(assignment) = oracle.falsify(instance, &order)? {
        let value = instance.value_unchecked(&assignment);
        return Ok(MinScaleOutcome::Zero(ZeroCertificate { assignment, value }));
    }

    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    let prefix = largest_falsifiable_prefix(instance, &order, oracle)?;
    let k = prefix.k;
    let pivot = order[k - 1];
    let w_k = weights[pivot];
    let m2 = (m * m) as f64;
    let light_threshold = w_k / m2;
    let heavy_threshold = w_k * m2;

    let classes: Vec<WeightClass> = (0..m)
        .map(|r| {
            let w = weights[r];
            if r == pivot {
                WeightClass::Medium
            } else if w <= light_threshold * (1.0 + THRESHOLD_TOLERANCE) {
                WeightClass::Light
            } else if w >= heavy_threshold * (1.0 - THRESHOLD_TOLERANCE) {
                WeightClass::Heavy
            } else {
                WeightClass::Medium
            }
        })
        .collect();

    let mut kept = Vec::new();
    let mut raw = Vec::new();
    let mut dropped_light_weight = 0.0;
    for r in 0..m {
        match classes[r] {
            WeightClass::Light => dropped_light_weight += weights[r],
            WeightClass::Medium => {
                kept.push(r);
                raw.push(weights[r]);
            }
            WeightClass::Heavy => {
                kept.push(r);
                raw.push(heavy_threshold);
            }
        }
    }
    let total: f64 = raw.iter().sum();
    let sigma = 1.0 / total;
    let constraints = kept.iter().map(|&r| instance.constraints()[r].clone()).collect();
    let scaled = raw.iter().map(|w| w * sigma).collect();
    let rescaled = Instance::weighted(
        instance.language_arc().clone(),
        instance.num_variables(),
        constraints,
        scaled,
    )?;
    Ok(MinScaleOutcome::Scaled {
        instance: rescaled,
        plan: MinScalePlan {
            k,
            w_k,
            sigma,
            classes,
            order,
            kept,
            light_threshold,
            heavy_threshold,
            dropped_light_weight,
            delta,
            alpha,
        },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{evaluate, CspLanguage, Predicate, Value};
    use crate::solvers::BruteForceOracle;

    fn neq_path(weights: Vec<f64>) -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let id = l.id("NEQ").unwrap();
        let m = weights.len();
        let cs = (0..m).map(|i| Constraint::new(id, [i, i + 1])).collect();
        Instance::weighted(l, m + 1, cs, weights).unwrap()
    }

    #[test]
    fn replication_counts() {
        let (g, plan) = replicate_to_unweighted(&neq_path(vec![0.5, 0.5]), 0.5).unwrap();
        assert_eq!(plan.q_total, 4);
        assert_eq!(plan.counts, vec![2, 2]);
        assert_eq!(g.num_constraints(), 4);
        assert!(!g.is_weighted());

        let (_, plan) = replicate_to_unweighted(&neq_path(vec![0.6, 0.4]), 0.5).unwrap();
        assert_eq!(plan.counts, vec![2, 2]);
        assert_eq!(plan.sources(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn replication_errors() {
        let f = neq_path(vec![0.5, 0.5]);
        assert!(matches!(replicate_to_unweighted(&f, 0.0), Err(WeightError::InvalidEpsilon(_))));
        assert!(matches!(replicate_to_unweighted(&f, f64::NAN), Err(WeightError::InvalidEpsilon(_))));
        let l = f.language_arc().clone();
        let u = Instance::unweighted(l, 3, f.constraints().to_vec()).unwrap();
        assert!(matches!(replicate_to_unweighted(&u, 0.5), Err(WeightError::NotWeighted)));
    }

    #[test]
    fn duplication_preserves_values() {
        let f = neq_path(vec![0.5, 0.3, 0.2]);
        let g = ensure_min_constraints(&f, 6);
        assert_eq!(g.num_constraints(), 6);
        assert_eq!(g.weight(0), 0.25);
        for idx in 0..16u32 {
            let chi: Vec<Value> = (0..4).map(|i| (idx >> i) & 1).collect();
            let (a, b) = (evaluate(&f, &chi).unwrap(), evaluate(&g, &chi).unwrap());
            assert!((a - b).abs() <= 1e-12);
        }
        let same = ensure_min_constraints(&f, 3);
        assert_eq!(same.num_constraints(), 3);
    }

    /// Weighted instance whose first `k - 1` heaviest constraints are jointly
    /// falsifiable but the first `k` are not: AND1 on x0 at the k-th position,
    /// preceded by NEQ constraints on disjoint pairs, with OR1(x0) first.
    fn with_pivot(weights: Vec<f64>, k: usize) -> Instance {
        let l = Arc::new(
            CspLanguage::new(
                2,
                vec![
                    Predicate::neq(2),
                    Predicate::or(1),
                    Predicate::from_fn("NOT1", 1, 2, |t| t[0] == 0).unwrap(),
                ],
            )
            .unwrap(),
        );
        let (neq, or1, not1) = (l.id("NEQ").unwrap(), l.id("OR1").unwrap(), l.id("NOT1").unwrap());
        let m = weights.len();
        let mut cs = Vec::new();
        for r in 0..m {
            if r == 0 {
                cs.push(Constraint::new(or1, [0]));
            } else if r == k - 1 {
                cs.push(Constraint::new(not1, [0]));
            } else {
                cs.push(Constraint::new(neq, [2 * r, 2 * r + 1]));
            }
        }
        Instance::weighted(l, 2 * m + 2, cs, weights).unwrap()
    }

    #[test]
    fn light_boundary_is_inclusive() {
        let f = with_pivot(vec![0.6, 0.2, 0.152, 0.04, 0.008], 2);
        let MinScaleOutcome::Scaled { instance, plan } =
            min_preprocess_scale(&f, 0.5, 1.0, &BruteForceOracle::default()).unwrap()
        else {
            panic!("expected a scaled instance");
        };
        assert_eq!(plan.k, 2);
        assert_eq!(plan.w_k, 0.2);
        assert_eq!(plan.classes[4], WeightClass::Light);
        assert_eq!(plan.heavy().count(), 0);
        assert_eq!(plan.kept, vec![0, 1, 2, 3]);
        assert!((plan.sigma - 1.0 / 0.992).abs() < 1e-12);
        assert_eq!(instance.num_constraints(), 4);
    }

    #[test]
    fn heavy_weights_clamped() {
        let f = with_pivot(vec![0.9, 0.06, 0.04], 2);
        let MinScaleOutcome::Scaled { instance, plan } =
            min_preprocess_scale(&f, 0.5, 1.0, &BruteForceOracle::default()).unwrap()
        else {
            panic!("expected a scaled instance");
        };
        assert_eq!(plan.classes[0], WeightClass::Heavy);
        assert!((plan.sigma - 1.5625).abs() < 1e-12);
        assert!((instance.weight(0) - 0.54 * 1.5625).abs() < 1e-12);
    }

    #[test]
    fn bipartite_cut_has_zero_certificate() {
        let f = neq_path(vec![0.25; 4]).to_weighted();
        match min_preprocess_scale(&f, 0.5, 1.0, &BruteForceOracle::default()).unwrap() {
            MinScaleOutcome::Zero(cert) => {
                assert_eq!(cert.value, 0.0);
                assert_eq!(evaluate(&f, &cert.assignment).unwrap(), 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
