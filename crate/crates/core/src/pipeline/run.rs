use serde_json::json;

use super::{digest, optimum_if_small, ratio, run_solver, Mode, PipelineError, PipelineReport, RegularSolver, Size, Stage};
use crate::csp::{gamma_lower_bound, Assignment, Constraint, Instance, Weights};
use crate::regularity::{
    pullback_deterministic, pullback_randomized, regularize_deterministic, regularize_randomized,
    DeterministicCertificate,
};
use crate::solvers::{FalsifiabilityOracle, Goal, DEFAULT_BUDGET};
use crate::weights::{ensure_min_constraints, min_preprocess_scale, replicate_to_unweighted, MinScaleOutcome};

fn check_delta(delta: f64) -> Result<(), PipelineError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PipelineError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Drops constraints whose predicate has no satisfying tuple and renormalizes.
/// `None` when nothing positive remains.
fn strip_unsatisfiable(f: &Instance) -> Option<Instance> {
    let keep: Vec<usize> = (0..f.num_constraints())
        .filter(|&r| !f.predicate_of(r).satisfying().is_empty())
        .collect();
    if keep.is_empty() {
        return None;
    }
    let constraints: Vec<Constraint> = keep.iter().map(|&r| f.constraints()[r].clone()).collect();
    let weights = match f.weights() {
        Weights::Uniform => Weights::Uniform,
        Weights::Explicit(w) => {
            let total: f64 = keep.iter().map(|&r| w[r]).sum();
            if !(total > 0.0) {
                return None;
            }
            Weights::Explicit(keep.iter().map(|&r| w[r] / total).collect())
        }
    };
    Some(Instance::from_parts_unchecked(
        f.language_arc().clone(),
        f.num_variables(),
        constraints,
        weights,
    ))
}

fn finish(
    f: &Instance,
    goal: Goal,
    delta: f64,
    alpha: Option<f64>,
    solver: &dyn RegularSolver,
    mode: Mode,
    stages: Vec<Stage>,
    assignment: Assignment,
) -> (Assignment, PipelineReport) {
    let value = f.value_unchecked(&assignment);
    let opt = optimum_if_small(f, goal, DEFAULT_BUDGET);
    let claimed_bound = alpha.map(|a| match goal {
        Goal::Max => a - delta,
        Goal::Min => a + delta,
    });
    let report = PipelineReport {
        version: super::REPORT_VERSION,
        input_digest: digest(f),
        goal,
        delta,
        alpha,
        solver: solver.name().to_string(),
        mode,
        stages,
        assignment: assignment.clone(),
        value,
        achieved_ratio: opt.and_then(|o| ratio(value, o)),
        opt,
        claimed_bound,
    };
    (assignment, report)
}

/// Max-CSP pipeline: strip identically false constraints, de-weight, regularize,
/// solve, pull back. Each lossy stage gets `ε = δγ/4`.
pub fn pipeline_max(
    f: &Instance,
    delta: f64,
    solver: &dyn RegularSolver,
    mode: Mode,
) -> Result<(Assignment, PipelineReport), PipelineError> {
    check_delta(delta)?;
    let alpha = solver.alpha();
    let mut stages = Vec::new();

    let Some(stripped) = strip_unsatisfiable(f) else {
        stages.push(Stage {
            operation: "strip-unsatisfiable".into(),
            parameters: json!({}),
            input: Size::of(f),
            output: Size { variables: f.num_variables(), constraints: 0 },
            certificate: None,
        });
        let zeros = Assignment::zeros(f.num_variables());
        return Ok(finish(f, Goal::Max, delta, alpha, solver, mode, stages, zeros));
    };
    stages.push(Stage {
        operation: "strip-unsatisfiable".into(),
        parameters: json!({}),
        input: Size::of(f),
        output: Size::of(&stripped),
        certificate: None,
    });

    let used = stripped.constraints().iter().map(|c| c.predicate);
    let gamma = gamma_lower_bound(&stripped.language().restrict(used))?;
    let epsilon = delta * gamma / 4.0;

    let g1 = if stripped.is_weighted() {
        let (g1, plan) = replicate_to_unweighted(&stripped, epsilon)?;
        stages.push(Stage {
            operation: "replicate-to-unweighted".into(),
            parameters: json!({ "epsilon": epsilon, "gamma": gamma }),
            input: Size::of(&stripped),
            output: Size::of(&g1),
            certificate: Some(json!({ "q_total": plan.q_total })),
        });
        g1
    } else {
        stripped
    };

    let chi = match mode {
        Mode::Det => {
            let (g, map) = regularize_deterministic(&g1, epsilon)?;
            stages.push(Stage {
                operation: "regularize-deterministic".into(),
                parameters: json!({ "epsilon": epsilon }),
                input: Size::of(&g1),
                output: Size::of(&g),
                certificate: Some(serde_json::to_value(DeterministicCertificate::new(&map)).expect("serializes")),
            });
            let zeta = run_solver(solver, &g, Goal::Max)?;
            pullback_deterministic(&g, &map, &zeta, Goal::Max)?
        }
        Mode::Rand { seed, profile } => {
            let (g, map, cert) = regularize_randomized(&g1, epsilon, seed, profile)?;
            stages.push(Stage {
                operation: "regularize-randomized".into(),
                parameters: json!({ "epsilon": epsilon, "seed": seed, "profile": profile }),
                input: Size::of(&g1),
                output: Size::of(&g),
                certificate: Some(serde_json::to_value(&cert).expect("serializes")),
            });
            let zeta = run_solver(solver, &g, Goal::Max)?;
            pullback_randomized(&g1, &map, &zeta)?
        }
    };
    Ok(finish(f, Goal::Max, delta, alpha, solver, mode, stages, chi))
}

/// Min-CSP pipeline: pad the constraint count to `⌈2/δ⌉`, settle `Opt = 0`
/// exactly, rescale weights around the falsifiable-prefix pivot, de-weight with
/// `ε = δ·w_k·σ/(4α)`, regularize with `ε = δ/m`, solve, pull back and audit
/// heavy constraints.
pub fn pipeline_min(
    f: &Instance,
    delta: f64,
    alpha: f64,
    solver: &dyn RegularSolver,
    oracle: &dyn FalsifiabilityOracle,
) -> Result<(Assignment, PipelineReport), PipelineError> {
    check_delta(delta)?;
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(PipelineError::InvalidParameter(format!("alpha must be at least 1, got {alpha}")));
    }
    let mode = Mode::Det;
    let mut stages = Vec::new();

    let m_min = (2.0 / delta).ceil() as usize;
    let f0 = ensure_min_constraints(f, m_min);
    stages.push(Stage {
        operation: "ensure-min-constraints".into(),
        parameters: json!({ "m_min": m_min }),
        input: Size::of(f),
        output: Size::of(&f0),
        certificate: None,
    });

    let (scaled, plan) = match min_preprocess_scale(&f0, delta, alpha, oracle)? {
        MinScaleOutcome::Zero(cert) => {
            stages.push(Stage {
                operation: "min-preprocess-scale".into(),
                parameters: json!({ "delta": delta, "alpha": alpha }),
                input: Size::of(&f0),
                output: Size::of(&f0),
                certificate: Some(json!({ "zero": cert })),
            });
            return Ok(finish(f, Goal::Min, delta, Some(alpha), solver, mode, stages, cert.assignment));
        }
        MinScaleOutcome::Scaled { instance, plan } => (instance, plan),
    };
    stages.push(Stage {
        operation: "min-preprocess-scale".into(),
        parameters: json!({ "delta": delta, "alpha": alpha }),
        input: Size::of(&f0),
        output: Size::of(&scaled),
        certificate: Some(json!({
            "k": plan.k,
            "w_k": plan.w_k,
            "sigma": plan.sigma,
            "heavy": plan.heavy().count(),
            "dropped_light_weight": plan.dropped_light_weight,
        })),
    });

    let eps_replicate = delta * plan.w_k * plan.sigma / (4.0 * alpha);
    let (g1, rplan) = replicate_to_unweighted(&scaled, eps_replicate)?;
    stages.push(Stage {
        operation: "replicate-to-unweighted".into(),
        parameters: json!({ "epsilon": eps_replicate }),
        input: Size::of(&scaled),
        output: Size::of(&g1),
        certificate: Some(json!({ "q_total": rplan.q_total })),
    });

    let eps_regular = delta / g1.num_constraints() as f64;
    let (g, map) = regularize_deterministic(&g1, eps_regular)?;
    stages.push(Stage {
        operation: "regularize-deterministic".into(),
        parameters: json!({ "epsilon": eps_regular }),
        input: Size::of(&g1),
        output: Size::of(&g),
        certificate: Some(serde_json::to_value(DeterministicCertificate::new(&map)).expect("serializes")),
    });

    let zeta = run_solver(solver, &g, Goal::Min)?;
    let chi = pullback_deterministic(&g, &map, &zeta, Goal::Min)?;

    let satisfied_heavy: Vec<usize> = plan.heavy().filter(|&r| f0.satisfied(r, &chi)).collect();
    if !satisfied_heavy.is_empty() {
        return Err(PipelineError::GuaranteeVoid(format!(
            "pulled-back assignment satisfies heavy constraints {satisfied_heavy:?}"
        )));
    }
    Ok(finish(f, Goal::Min, delta, Some(alpha), solver, mode, stages, chi))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{CspLanguage, Predicate};
    use crate::pipeline::{GreedySolver, RandomSolver};
    use crate::regularity::Profile;
    use crate::solvers::BruteForceOracle;

    fn triangle() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let neq = l.id("NEQ").unwrap();
        Instance::unweighted(
            l,
            3,
            vec![Constraint::new(neq, [0, 1]), Constraint::new(neq, [1, 2]), Constraint::new(neq, [0, 2])],
        )
        .unwrap()
    }

    #[test]
    fn regular_unweighted_input_with_random_solver() {
        let f = triangle();
        let (chi, report) = pipeline_max(&f, 0.2, &RandomSolver, Mode::Det).unwrap();
        assert_eq!(chi.len(), 3);
        assert!(report.value >= 0.5 - 0.2);
        assert_eq!(report.opt, Some(2.0 / 3.0));
        assert_eq!(report.version, 1);
    }

    #[test]
    fn all_false_constraints_give_zeros() {
        let never = Predicate::new("NEVER", 1, 2, vec![]).unwrap();
        let l = Arc::new(CspLanguage::new(2, vec![never]).unwrap());
        let f = Instance::unweighted(l.clone(), 2, vec![Constraint::new(l.id("NEVER").unwrap(), [0])]).unwrap();
        let (chi, report) = pipeline_max(&f, 0.5, &GreedySolver, Mode::Det).unwrap();
        assert_eq!(chi.0, vec![0, 0]);
        assert_eq!(report.value, 0.0);
    }

    #[test]
    fn randomized_mode_is_reproducible() {
        let f = triangle();
        let mode = Mode::Rand { seed: 3, profile: Profile::Test };
        let (_, a) = pipeline_max(&f, 0.9, &GreedySolver, mode).unwrap();
        let (_, b) = pipeline_max(&f, 0.9, &GreedySolver, mode).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn bipartite_min_is_zero() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let neq = l.id("NEQ").unwrap();
        let f = Instance::unweighted(l, 4, (0..3).map(|i| Constraint::new(neq, [i, i + 1])).collect()).unwrap();
        let (chi, report) = pipeline_min(&f, 0.5, 1.0, &GreedySolver, &BruteForceOracle::default()).unwrap();
        assert_eq!(f.value_unchecked(&chi), 0.0);
        assert_eq!(report.value, 0.0);
        assert_eq!(report.claimed_bound, Some(1.5));
    }

    #[test]
    fn parameters_validated() {
        let f = triangle();
        assert!(pipeline_max(&f, 0.0, &GreedySolver, Mode::Det).is_err());
        assert!(pipeline_min(&f, 0.5, 0.5, &GreedySolver, &BruteForceOracle::default()).is_err());
    }
}
