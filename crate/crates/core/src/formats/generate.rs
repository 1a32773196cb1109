use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::csp::{close_under_shifts, Constraint, CspLanguage, Instance, Predicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Clauses on `k` distinct variables with uniformly random literal signs.
    RandomKsat { k: usize },
    /// Disequalities on random pairs.
    RandomMaxcut,
    /// Uniform mix of `NEQ`, `OR2` and `OR3`.
    RandomMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Unweighted output.
    Uniform,
    /// Weights drawn from the flat Dirichlet distribution.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub weights: WeightMode,
}

/// Seeded random instance; identical specs give identical instances.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance, FormatError> {
    let (language, max_arity) = match spec.family {
        Family::RandomKsat { k } => {
            if k == 0 {
                return Err(FormatError::InfeasibleSpec("k must be at least 1".into()));
            }
            let base = CspLanguage::new(2, vec![Predicate::or(k)])?;
            (close_under_shifts(&base)?, k)
        }
        Family::RandomMaxcut => (CspLanguage::new(2, vec![Predicate::neq(2)])?, 2),
        Family::RandomMixed => (
            CspLanguage::new(2, vec![Predicate::neq(2), Predicate::or(2), Predicate::or(3)])?,
            3,
        ),
    };
    if spec.m == 0 {
        return Err(FormatError::InfeasibleSpec("m must be at least 1".into()));
    }
    if spec.n < max_arity {
        return Err(FormatError::InfeasibleSpec(format!(
            "n = {} is smaller than the arity {max_arity}",
            spec.n
        )));
    }
    let language = Arc::new(language);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut constraints = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let id = match spec.family {
            Family::RandomKsat { k } => {
                let mask: u64 = rng.random_range(0..1u64 << k);
                let name = if mask == 0 {
                    format!("OR{k}")
                } else {
                    format!("OR{k}^{mask:0k$b}")
                };
                language.id(&name).expect("closure contains every sign pattern")
            }
            Family::RandomMaxcut => language.id("NEQ").expect("NEQ"),
            Family::RandomMixed => {
                let pick = rng.random_range(0..language.len());
                crate::csp::PredicateId(pick)
            }
        };
        let arity = language.predicate(id).arity();
        let mut scope = sample(&mut rng, spec.n, arity).into_vec();
        scope.sort_unstable();
        constraints.push(Constraint::new(id, scope));
    }
    let instance = match spec.weights {
        WeightMode::Uniform => Instance::unweighted(language, spec.n, constraints)?,
        WeightMode::Dirichlet => {
            let raw: Vec<f64> = (0..spec.m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = raw.iter().sum();
            let weights = raw.into_iter().map(|w| w / total).collect();
            Instance::weighted(language, spec.n, constraints, weights)?
        }
    };
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::validate_instance;
    use crate::formats::serialize_instance;

    fn spec(family: Family, n: usize, m: usize, seed: u64, weights: WeightMode) -> GeneratorSpec {
        GeneratorSpec {
            family,
            n,
            m,
            seed,
            weights,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(Family::RandomMaxcut, 4, 4, 7, WeightMode::Uniform);
        let a = serialize_instance(&generate(&s).unwrap());
        let b = serialize_instance(&generate(&s).unwrap());
        assert_eq!(a, b);
        let other = serialize_instance(&generate(&GeneratorSpec { seed: 8, ..s }).unwrap());
        assert_ne!(a, other);
    }

    #[test]
    fn ksat_scopes_are_distinct_triples() {
        let f = generate(&spec(Family::RandomKsat { k: 3 }, 5, 10, 1, WeightMode::Uniform)).unwrap();
        for c in f.constraints() {
            assert_eq!(c.scope.len(), 3);
            assert!(c.scope[0] < c.scope[1] && c.scope[1] < c.scope[2]);
        }
    }

    #[test]
    fn dirichlet_weights_normalized() {
        for seed in 0..100 {
            let f = generate(&spec(Family::RandomMixed, 6, 9, seed, WeightMode::Dirichlet)).unwrap();
            let total: f64 = f.weight_vec().iter().sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn generators_are_validate_clean() {
        let families = [Family::RandomKsat { k: 2 }, Family::RandomMaxcut, Family::RandomMixed];
        for family in families {
            for seed in 0..1000 {
                let weights = if seed % 2 == 0 {
                    WeightMode::Uniform
                } else {
                    WeightMode::Dirichlet
                };
                let f = generate(&spec(family, 5, 7, seed, weights)).unwrap();
                assert!(validate_instance(&f).is_empty());
            }
        }
    }

    #[test]
    fn infeasible_specs() {
        assert!(generate(&spec(Family::RandomMixed, 2, 3, 0, WeightMode::Uniform)).is_err());
        assert!(generate(&spec(Family::RandomMaxcut, 3, 0, 0, WeightMode::Uniform)).is_err());
        assert!(generate(&spec(Family::RandomKsat { k: 0 }, 3, 1, 0, WeightMode::Uniform)).is_err());
    }
}
