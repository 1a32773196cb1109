//! DIMACS CNF / WCNF import for Max-k-SAT instances.
//!
//! A clause over `k` distinct variables becomes the shifted disjunction `ORk^I`,
//! where bit `i` of `I` is set when the `i`-th literal is negated (plain `ORk`
//! when no literal is). A clause mentioning both `x` and `¬x` becomes the
//! all-true predicate `TRUEk`. Soft clause weights of a WCNF file are normalized;
//! hard clauses are rejected.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::FormatError;
use crate::csp::{Constraint, CspLanguage, Instance, Predicate};

pub fn parse_dimacs(text: &str) -> Result<Instance, FormatError> {
    let err = |line: usize, message: String| FormatError::Dimacs { line, message };

    let mut header: Option<(bool, usize, usize, Option<f64>)> = None;
    let mut clauses: Vec<(usize, f64, Vec<i64>)> = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut current_weight: Option<f64> = None;
    let mut current_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(lineno, "second problem line".into()));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let weighted = match fields.get(1) {
                Some(&"cnf") => false,
                Some(&"wcnf") => true,
                _ => return Err(err(lineno, format!("unsupported problem line `{line}`"))),
            };
            let num = |i: usize| -> Result<usize, FormatError> {
                fields
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, format!("bad problem line `{line}`")))
            };
            let top = if weighted {
                fields.get(4).and_then(|s| s.parse::<f64>().ok())
            } else {
                None
            };
            header = Some((weighted, num(2)?, num(3)?, top));
            continue;
        }
        let Some((weighted, _, _, top)) = header else {
            return Err(err(lineno, "clause before problem line".into()));
        };
        for tok in line.split_whitespace() {
            if weighted && current_weight.is_none() {
                let w: f64 = tok
                    .parse()
                    .map_err(|_| err(lineno, format!("bad clause weight `{tok}`")))?;
                if top.is_some_and(|t| w >= t) {
                    return Err(err(lineno, "hard clauses are not supported".into()));
                }
                current_weight = Some(w);
                current_line = lineno;
                continue;
            }
            let lit: i64 = tok
                .parse()
                .map_err(|_| err(lineno, format!("bad literal `{tok}`")))?;
            if current.is_empty() && current_weight.is_none() {
                current_line = lineno;
            }
            if lit == 0 {
                let w = current_weight.take().unwrap_or(1.0);
                clauses.push((current_line, w, std::mem::take(&mut current)));
            } else {
                current.push(lit);
            }
        }
    }
    let Some((weighted, n, m, _)) = header else {
        return Err(err(0, "missing problem line".into()));
    };
    if !current.is_empty() {
        return Err(err(current_line, "unterminated clause".into()));
    }
    if clauses.len() != m {
        return Err(err(0, format!("header declares {m} clauses, found {}", clauses.len())));
    }

    let mut predicates: BTreeMap<String, Predicate> = BTreeMap::new();
    let mut staged: Vec<(String, Vec<usize>)> = Vec::with_capacity(m);
    for (lineno, _, lits) in &clauses {
        if lits.is_empty() {
            return Err(err(*lineno, "empty clause".into()));
        }
        let mut scope: Vec<usize> = Vec::new();
        let mut negated: Vec<bool> = Vec::new();
        let mut tautology = false;
        for &lit in lits {
            let var = lit.unsigned_abs() as usize;
            if var == 0 || var > n {
                return Err(err(*lineno, format!("variable {var} outside 1..={n}")));
            }
            match scope.iter().position(|&v| v == var - 1) {
                Some(pos) => tautology |= negated[pos] != (lit < 0),
                None => {
                    scope.push(var - 1);
                    negated.push(lit < 0);
                }
            }
        }
        let k = scope.len();
        let name = if tautology {
            format!("TRUE{k}")
        } else if negated.iter().any(|&b| b) {
            let bits: String = negated.iter().map(|&b| if b { '1' } else { '0' }).collect();
            format!("OR{k}^{bits}")
        } else {
            format!("OR{k}")
        };
        if !predicates.contains_key(&name) {
            let p = if tautology {
                Predicate::from_fn(name.clone(), k, 2, |_| true)?
            } else {
                let neg = negated.clone();
                Predicate::from_fn(name.clone(), k, 2, move |t| {
                    t.iter().zip(&neg).any(|(&v, &n)| (v == 1) != n)
                })?
            };
            predicates.insert(name.clone(), p);
        }
        staged.push((name, scope));
    }
    let language = Arc::new(CspLanguage::new(2, predicates.into_values().collect())?);
    let constraints = staged
        .into_iter()
        .map(|(name, scope)| Constraint::new(language.id(&name).expect("registered"), scope))
        .collect();
    let instance = if weighted {
        let total: f64 = clauses.iter().map(|(_, w, _)| w).sum();
        if !(total > 0.0) {
            return Err(err(0, "total clause weight must be positive".into()));
        }
        let weights = clauses.iter().map(|(_, w, _)| w / total).collect();
        Instance::weighted(language, n, constraints, weights)?
    } else {
        Instance::unweighted(language, n, constraints)?
    };
    Ok(instance)
}
