#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regulus::formats::{parse_dimacs, parse_instance};
use regulus::{Constraint, CspLanguage, Instance, Predicate, Value};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

/// Every `.csp` file of the golden corpus, sorted by name, plus the DIMACS imports.
pub fn corpus() -> Vec<(String, Instance)> {
    let mut entries: Vec<_> = fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .filter_map(|path| {
            let name = path.file_name()?.to_str()?.to_string();
            let text = fs::read_to_string(&path).ok()?;
            let instance = match path.extension()?.to_str()? {
                "csp" => parse_instance(&text).unwrap(),
                "cnf" | "wcnf" => parse_dimacs(&text).unwrap(),
                _ => return None,
            };
            Some((name, instance))
        })
        .collect()
}

/// All of `[q]^n` in lexicographic order.
pub fn assignments(n: usize, q: u32) -> impl Iterator<Item = Vec<Value>> {
    let total = (q as usize).pow(n as u32);
    (0..total).map(move |mut idx| {
        let mut chi = vec![0; n];
        for slot in chi.iter_mut().rev() {
            *slot = (idx % q as usize) as Value;
            idx /= q as usize;
        }
        chi
    })
}

/// Independent evaluation by direct tuple lookup.
pub fn naive_value(f: &Instance, chi: &[Value]) -> f64 {
    f.constraints()
        .iter()
        .enumerate()
        .map(|(r, c)| {
            let tuple: Vec<Value> = c.scope.iter().map(|&v| chi[v]).collect();
            if f.predicate_of(r).satisfying().contains(&tuple) {
                f.weight(r)
            } else {
                0.0
            }
        })
        .sum()
}

pub fn naive_opt(f: &Instance, max: bool) -> f64 {
    let values = assignments(f.num_variables(), f.domain_size()).map(|chi| naive_value(f, &chi));
    if max {
        values.fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.fold(f64::INFINITY, f64::min)
    }
}

pub fn mixed_language() -> Arc<CspLanguage> {
    Arc::new(CspLanguage::new(2, vec![Predicate::or(2), Predicate::or(3), Predicate::neq(2)]).unwrap())
}

/// Random instance over OR2/OR3/NEQ with `n ≥ 3`.
pub fn random_mixed(rng: &mut ChaCha8Rng, n: usize, m: usize, weighted: bool) -> Instance {
    let lang = mixed_language();
    let constraints: Vec<Constraint> = (0..m)
        .map(|_| {
            let p = rng.random_range(0..lang.len());
            let id = lang.id(lang.predicates()[p].name()).unwrap();
            let k = lang.predicates()[p].arity();
            let scope = rand::seq::index::sample(rng, n, k).into_vec();
            Constraint::new(id, scope)
        })
        .collect();
    if weighted {
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(1..=100) as f64).collect();
        let total: f64 = raw.iter().sum();
        Instance::weighted(lang, n, constraints, raw.iter().map(|w| w / total).collect()).unwrap()
    } else {
        Instance::unweighted(lang, n, constraints).unwrap()
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small Boolean instances over `{OR2, OR3, NEQ, AND2}`.
pub fn small_instance(max_n: usize, max_m: usize, weighted: bool) -> impl Strategy<Value = Instance> {
    (3..=max_n, 1..=max_m).prop_flat_map(move |(n, m)| {
        let constraint = (0usize..4).prop_flat_map(move |p| {
            let k = [2, 3, 2, 2][p];
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), k)
                .prop_shuffle()
                .prop_map(move |scope| (p, scope))
        });
        (
            proptest::collection::vec(constraint, m),
            proptest::collection::vec(1u32..=50, m),
        )
            .prop_map(move |(cs, raw)| {
                let lang = Arc::new(
                    CspLanguage::new(
                        2,
                        vec![Predicate::or(2), Predicate::or(3), Predicate::neq(2), Predicate::and(2)],
                    )
                    .unwrap(),
                );
                let ids = ["OR2", "OR3", "NEQ", "AND2"].map(|name| lang.id(name).unwrap());
                let constraints = cs.into_iter().map(|(p, scope)| Constraint::new(ids[p], scope)).collect();
                if weighted {
                    let total: f64 = raw.iter().map(|&w| w as f64).sum();
                    let w = raw.iter().map(|&w| w as f64 / total).collect();
                    Instance::weighted(lang, n, constraints, w).unwrap()
                } else {
                    Instance::unweighted(lang, n, constraints).unwrap()
                }
            })
    })
}
