use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csp::{degrees, validate_instance, Instance, Value};
use crate::regularity::{
    pullback_deterministic, pullback_randomized, BlockEntry, BlockMap, ConstraintOrigin, CopyMap,
    ReductionCertificate, VarOrigin,
};
use crate::solvers::{brute_force_opt, enumeration_cost, Goal, DEFAULT_BUDGET};

const TOLERANCE: f64 = 1e-12;
/// Cap on constraint evaluations spent enumerating an instance inside `verify`.
const WORK_BUDGET: u128 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReductionMap {
    Block(BlockMap),
    Copy(CopyMap),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    /// Whether the property is only expected to hold with high probability.
    pub probabilistic: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn structural_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| !c.probabilistic)
            .all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, ok: bool, probabilistic: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            probabilistic,
            detail: detail.into(),
        });
    }

    fn skip(&mut self, name: &str, probabilistic: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            status: CheckStatus::Skipped,
            probabilistic,
            detail: detail.into(),
        });
    }
}

/// Structural and value checks of a reduction `F → G`. Every failure becomes a
/// report entry; nothing panics on inconsistent input.
pub fn verify(
    f: &Instance,
    g: &Instance,
    map: &ReductionMap,
    cert: Option<&ReductionCertificate>,
    samples: usize,
    seed: u64,
) -> VerifyReport {
    let mut report = VerifyReport::default();
    match map {
        ReductionMap::Block(map) => verify_blocks(&mut report, f, g, map, samples, seed),
        ReductionMap::Copy(map) => {
            let cert = match cert {
                Some(ReductionCertificate::Randomized(c)) => Some(c),
                _ => None,
            };
            verify_copies(&mut report, f, g, map, cert, samples, seed)
        }
    }
    report
}

fn random_assignment(rng: &mut ChaCha8Rng, n: usize, q: u32) -> Vec<Value> {
    (0..n).map(|_| rng.random_range(0..q)).collect()
}

/// Whether exhaustive enumeration is cheap, counting both assignments and the
/// constraints re-evaluated per step.
fn fits(instance: &Instance) -> bool {
    let cost = enumeration_cost(instance);
    let per_step = degrees(instance).max as u128 + 1;
    cost <= DEFAULT_BUDGET as u128 && cost.saturating_mul(per_step) <= WORK_BUDGET
}

fn verify_blocks(report: &mut VerifyReport, f: &Instance, g: &Instance, map: &BlockMap, samples: usize, seed: u64) {
    let n = f.num_variables();
    let m = f.num_constraints();
    let big_n = map.n_blocks;
    let degree = degrees(f).degrees;
    let mut offsets = Vec::with_capacity(n);
    let mut total = 0;
    for &d in &degree {
        offsets.push(total);
        total += d;
    }
    let sizes_ok = map.original_variables == n
        && map.original_constraints == m
        && map.copies == degree
        && map.first_copy == offsets
        && map.blocks.len() == big_n
        && map.blocks.iter().all(|row| row.len() == n)
        && g.num_variables() == total
        && g.num_constraints() == big_n * m;
    report.push(
        "sizes",
        sizes_ok,
        false,
        format!("G has {} variables and {} constraints", g.num_variables(), g.num_constraints()),
    );
    if !sizes_ok {
        return;
    }

    let common = degrees(g).common_degree;
    report.push("regular", common == Some(big_n), false, format!("common degree {common:?}, N = {big_n}"));
    let violations = validate_instance(g);
    report.push("valid", violations.is_empty(), false, format!("{} violations", violations.len()));

    let shapes_ok = map.blocks.iter().all(|row| {
        row.iter().enumerate().all(|(i, e)| match e {
            BlockEntry::Single(j) => *j < degree[i],
            BlockEntry::Mixed(list) => list.len() == degree[i] && list.iter().all(|&j| j < degree[i]),
            BlockEntry::Absent => degree[i] == 0,
        })
    });
    let usage = map.usage();
    let overused = usage.iter().position(|&u| u != big_n);
    report.push(
        "copy-usage",
        shapes_ok && overused.is_none(),
        false,
        match overused {
            Some(v) => format!("copy {v} used {} times, expected {big_n}", usage[v]),
            None if !shapes_ok => "malformed block entry".to_string(),
            None => format!("every copy used {big_n} times"),
        },
    );

    let mut mismatch = None;
    if shapes_ok {
        let mut seen = vec![0usize; n];
        'blocks: for b in 0..big_n {
            seen.iter_mut().for_each(|s| *s = 0);
            for (r, c) in f.constraints().iter().enumerate() {
                let gc = &g.constraints()[b * m + r];
                if gc.predicate != c.predicate || gc.scope.len() != c.scope.len() {
                    mismatch = Some(b * m + r);
                    break 'blocks;
                }
                for (&i, &v) in c.scope.iter().zip(gc.scope.iter()) {
                    if map.occurrence(b, i, seen[i]) != Some(v) {
                        mismatch = Some(b * m + r);
                        break 'blocks;
                    }
                    seen[i] += 1;
                }
            }
        }
    }
    report.push(
        "block-structure",
        shapes_ok && mismatch.is_none(),
        false,
        match mismatch {
            Some(r) => format!("constraint {r} of G disagrees with the map"),
            None => "every constraint matches its block".to_string(),
        },
    );

    let good: Vec<usize> = (0..big_n)
        .filter(|&b| map.blocks[b].iter().all(|e| !matches!(e, BlockEntry::Mixed(_))))
        .collect();
    let bound = big_n.saturating_sub(map.d_max);
    report.push(
        "good-blocks",
        good == map.good_blocks && good.len() >= bound,
        false,
        format!("{} good blocks, bound N - D = {bound}", good.len()),
    );

    let eps = map.epsilon;
    for goal in [Goal::Max, Goal::Min] {
        let name = format!("opt-sandwich-{goal}");
        if !fits(f) {
            report.skip(&name, false, "F exceeds the brute-force budget");
            continue;
        }
        let opt_f = brute_force_opt(f, goal).expect("budget checked");
        if fits(g) {
            let opt_g = brute_force_opt(g, goal).expect("budget checked").value;
            let ok = match goal {
                Goal::Max => opt_f.value <= opt_g + TOLERANCE && opt_g <= opt_f.value + eps + TOLERANCE,
                Goal::Min => opt_g <= opt_f.value + TOLERANCE && opt_f.value <= opt_g + eps + TOLERANCE,
            };
            report.push(&name, ok, false, format!("Opt(F) = {}, Opt(G) = {opt_g}, ε = {eps}", opt_f.value));
        } else {
            let lifted = g.value_unchecked(&map.lift(&opt_f.assignment));
            let ok = (lifted - opt_f.value).abs() <= TOLERANCE;
            report.push(
                &name,
                ok,
                false,
                format!("G too large; lifted optimum of F has value {lifted} on G, Opt(F) = {}", opt_f.value),
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..samples {
        let zeta = random_assignment(&mut rng, g.num_variables(), g.domain_size());
        let val_g = g.value_unchecked(&zeta);
        for goal in [Goal::Max, Goal::Min] {
            let ok = match pullback_deterministic(g, map, &zeta, goal) {
                Ok(chi) => {
                    let val_f = f.value_unchecked(&chi);
                    match goal {
                        Goal::Max => val_f >= val_g - eps - TOLERANCE,
                        Goal::Min => val_f <= val_g + eps + TOLERANCE,
                    }
                }
                Err(_) => false,
            };
            failures += usize::from(!ok);
        }
    }
    if samples == 0 {
        report.skip("pullback", false, "no samples requested");
    } else {
        report.push(
            "pullback",
            failures == 0,
            false,
            format!("{failures} of {} sampled pull-backs lose more than ε", 2 * samples),
        );
    }
}

fn verify_copies(
    report: &mut VerifyReport,
    f: &Instance,
    g: &Instance,
    map: &CopyMap,
    cert: Option<&crate::regularity::RandomizedCertificate>,
    samples: usize,
    seed: u64,
) {
    let degree = degrees(f).degrees;
    let sizes_ok = map.original_variables == f.num_variables()
        && map.copies == degree
        && g.num_variables() == map.num_variables()
        && g.num_constraints() == map.num_constraints();
    report.push(
        "sizes",
        sizes_ok,
        false,
        format!("G has {} variables and {} constraints", g.num_variables(), g.num_constraints()),
    );
    if !sizes_ok {
        return;
    }
    let common = degrees(g).common_degree;
    report.push(
        "regular",
        common == Some(map.delta as usize),
        false,
        format!("common degree {common:?}, Δ = {}", map.delta),
    );
    let violations = validate_instance(g);
    report.push("valid", violations.is_empty(), false, format!("{} violations", violations.len()));

    let copy_of = |v: usize| match map.origin(v) {
        VarOrigin::Copy { original, .. } => Some(original),
        VarOrigin::Dummy => None,
    };
    let mut bad = None;
    let (mut changed, mut added) = (0u64, 0u64);
    for (r, c) in g.constraints().iter().enumerate() {
        let ok = match map.constraint_origin(r) {
            ConstraintOrigin::Sampled { source, changed: was_changed } => {
                changed += u64::from(was_changed);
                match f.constraints().get(source) {
                    None => false,
                    Some(src) => {
                        let positions_ok = src.predicate == c.predicate
                            && src.scope.len() == c.scope.len()
                            && src
                                .scope
                                .iter()
                                .zip(c.scope.iter())
                                .all(|(&i, &v)| copy_of(v).is_none_or(|o| o == i));
                        let dummies = c.scope.iter().any(|&v| copy_of(v).is_none());
                        positions_ok && dummies == was_changed
                    }
                }
            }
            ConstraintOrigin::Padding => {
                added += 1;
                true
            }
            ConstraintOrigin::Closure => {
                added += 1;
                c.scope.iter().all(|&v| copy_of(v).is_none())
            }
        };
        if !ok {
            bad = Some(r);
            break;
        }
    }
    report.push(
        "copy-map",
        bad.is_none(),
        false,
        match bad {
            Some(r) => format!("constraint {r} of G disagrees with its recorded origin"),
            None => "every constraint matches its origin".to_string(),
        },
    );

    let Some(cert) = cert else {
        for name in ["change-bound", "replacements", "opt-lower", "pullback"] {
            report.skip(name, name.starts_with("opt") || name == "pullback", "no certificate supplied");
        }
        return;
    };
    let bound = cert.params.change_bound();
    report.push(
        "change-bound",
        (changed + added) as f64 <= bound,
        false,
        format!("{} changed or added constraints, B = {bound:.1}", changed + added),
    );
    let limit = cert.params.replacement_bound();
    report.push(
        "replacements",
        cert.replacements as f64 <= limit,
        false,
        format!("{} replacements, 4mW = {limit}", cert.replacements),
    );

    let eps = cert.params.epsilon;
    if fits(f) {
        let opt_f = brute_force_opt(f, Goal::Max).expect("budget checked");
        let (opt_g, how) = if fits(g) {
            (brute_force_opt(g, Goal::Max).expect("budget checked").value, "Opt(G)")
        } else {
            (lifted_lower_bound(g, map, &opt_f.assignment), "lifted lower bound on Opt(G)")
        };
        report.push(
            "opt-lower",
            opt_f.value <= opt_g + eps + TOLERANCE,
            true,
            format!("Opt(F) = {}, {how} = {opt_g}, ε = {eps}", opt_f.value),
        );
    } else {
        report.skip("opt-lower", true, "F exceeds the brute-force budget");
    }

    if samples == 0 {
        report.skip("pullback", true, "no samples requested");
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..samples {
        let zeta = random_assignment(&mut rng, g.num_variables(), g.domain_size());
        let val_g = g.value_unchecked(&zeta);
        let ok = pullback_randomized(f, map, &zeta)
            .map(|chi| f.value_unchecked(&chi) >= val_g - eps - TOLERANCE)
            .unwrap_or(false);
        failures += usize::from(!ok);
    }
    report.push(
        "pullback",
        failures == 0,
        true,
        format!("{failures} of {samples} sampled pull-backs lose more than ε"),
    );
}

/// Value on `G` of the lift of `chi`, with each dummy then set (in index order)
/// to the value satisfying most of its constraints. A lower bound on `Opt(G)`.
pub fn lifted_lower_bound(g: &Instance, map: &CopyMap, chi: &[Value]) -> f64 {
    let mut values = map.lift(chi, 0).0;
    let first_dummy = map.num_copies();
    let mut occurrences: Vec<Vec<usize>> = vec![Vec::new(); map.dummies];
    for (r, c) in g.constraints().iter().enumerate() {
        for &v in c.scope.iter().filter(|&&v| v >= first_dummy) {
            occurrences[v - first_dummy].push(r);
        }
    }
    for (k, occ) in occurrences.iter().enumerate() {
        let v = first_dummy + k;
        let mut best = (0, 0usize);
        for a in 0..g.domain_size() {
            values[v] = a;
            let count = occ.iter().filter(|&&r| g.satisfied(r, &values)).count();
            if a == 0 || count > best.1 {
                best = (a, count);
            }
        }
        values[v] = best.0;
    }
    g.value_unchecked(&values)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{Constraint, CspLanguage, Predicate};
    use crate::regularity::{regularize_deterministic, regularize_randomized, Profile};

    fn or2_path() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::or(2), Predicate::neq(2)]).unwrap());
        let (or2, neq) = (l.id("OR2").unwrap(), l.id("NEQ").unwrap());
        Instance::unweighted(
            l,
            4,
            vec![Constraint::new(or2, [0, 1]), Constraint::new(neq, [1, 2]), Constraint::new(neq, [0, 2])],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_output_verifies() {
        let f = or2_path();
        let (g, map) = regularize_deterministic(&f, 0.5).unwrap();
        let report = verify(&f, &g, &ReductionMap::Block(map), None, 50, 1);
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.get("opt-sandwich-max").unwrap().status, CheckStatus::Pass);
    }

    #[test]
    fn overused_copy_is_flagged() {
        let f = or2_path();
        let (g, mut map) = regularize_deterministic(&f, 0.5).unwrap();
        // variable 0 has two copies; point block 0 at copy 1 as well
        let target = map.blocks.iter().position(|row| row[0] == BlockEntry::Single(0)).unwrap();
        map.blocks[target][0] = BlockEntry::Single(1);
        let report = verify(&f, &g, &ReductionMap::Block(map), None, 0, 1);
        let usage = report.get("copy-usage").unwrap();
        assert_eq!(usage.status, CheckStatus::Fail);
        assert!(usage.detail.starts_with("copy 0 used"), "{}", usage.detail);
    }

    #[test]
    fn randomized_output_verifies() {
        let f = or2_path();
        let (g, map, cert) = regularize_randomized(&f, 0.5, 4, Profile::Test).unwrap();
        let cert = ReductionCertificate::Randomized(cert);
        let report = verify(&f, &g, &ReductionMap::Copy(map), Some(&cert), 20, 1);
        assert!(report.structural_passed(), "{report:?}");
        assert_eq!(report.get("change-bound").unwrap().status, CheckStatus::Pass);
    }
}
