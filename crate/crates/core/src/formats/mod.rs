//! Textual instance (`.csp`) and assignment (`.asn`) formats.
//!
//! A `.csp` file is a JSON document:
//!
//! ```text
//! {
//!   "constraints": [
//!     {"pred": "NEQ", "scope": [0, 1], "weight": 0.5},
//!     {"pred": "NEQ", "scope": [1, 2], "weight": 0.5}
//!   ],
//!   "domain": 2,
//!   "predicates": {
//!     "NEQ": {"arity": 2, "satisfying": [[0, 1], [1, 0]]}
//!   },
//!   "variables": 3
//! }
//! ```
//!
//! Either every constraint carries a `weight` or none does. The canonical form
//! produced by [`serialize_instance`] has sorted keys, predicates sorted by name,
//! satisfying tuples sorted lexicographically, one constraint per line and weights
//! printed with 12 significant digits.

mod dimacs;
mod generate;

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use thiserror::Error;

use crate::csp::{Assignment, Constraint, CspError, CspLanguage, Instance, Predicate, Value, Weights};

pub use dimacs::parse_dimacs;
pub use generate::{generate, Family, GeneratorSpec, WeightMode};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("constraint {constraint}: unknown predicate `{name}`")]
    UnknownPredicate { constraint: usize, name: String },
    #[error("either all constraints carry a weight or none does (constraint {0} differs)")]
    MixedWeights(usize),
    #[error("dimacs line {line}: {message}")]
    Dimacs { line: usize, message: String },
    #[error("assignment: {0}")]
    Assignment(String),
    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),
    #[error(transparent)]
    Csp(#[from] CspError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    constraints: Vec<RawConstraint>,
    domain: u32,
    #[serde(deserialize_with = "unique_predicates")]
    predicates: Vec<(String, RawPredicate)>,
    variables: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredicate {
    arity: usize,
    satisfying: Vec<Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraint {
    pred: String,
    scope: Vec<usize>,
    #[serde(default)]
    weight: Option<f64>,
}

fn unique_predicates<'de, D>(deserializer: D) -> Result<Vec<(String, RawPredicate)>, D::Error>
where
    D: Deserializer<'de>,
{
    struct PredicateMap;

    impl<'de> Visitor<'de> for PredicateMap {
        type Value = Vec<(String, RawPredicate)>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map from predicate names to definitions")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
            let mut out: Vec<(String, RawPredicate)> = Vec::new();
            while let Some((name, def)) = map.next_entry::<String, RawPredicate>()? {
                if out.iter().any(|(n, _)| *n == name) {
                    return Err(de::Error::custom(format!("duplicate predicate `{name}`")));
                }
                out.push((name, def));
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(PredicateMap)
}

/// Parses a `.csp` document into a validated [`Instance`].
pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let raw: RawInstance = serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })?;
    let predicates = raw
        .predicates
        .into_iter()
        .map(|(name, p)| Predicate::new(name, p.arity, raw.domain, p.satisfying))
        .collect::<Result<Vec<_>, _>>()?;
    let language = Arc::new(CspLanguage::new(raw.domain, predicates)?);

    let weighted = raw.constraints.first().is_some_and(|c| c.weight.is_some());
    let mut constraints = Vec::with_capacity(raw.constraints.len());
    let mut weights = Vec::new();
    for (r, c) in raw.constraints.into_iter().enumerate() {
        let id = language
            .id(&c.pred)
            .ok_or_else(|| FormatError::UnknownPredicate {
                constraint: r,
                name: c.pred.clone(),
            })?;
        match (weighted, c.weight) {
            (true, Some(w)) => weights.push(w),
            (false, None) => {}
            _ => return Err(FormatError::MixedWeights(r)),
        }
        constraints.push(Constraint::new(id, c.scope));
    }
    let instance = if weighted {
        Instance::weighted(language, raw.variables, constraints, weights)?
    } else {
        Instance::unweighted(language, raw.variables, constraints)?
    };
    Ok(instance)
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// Canonical text of an instance; byte-identical for equal instances.
pub fn serialize_instance(instance: &Instance) -> String {
    let language = instance.language();
    let mut out = String::from("{\n  \"constraints\": [\n");
    let m = instance.num_constraints();
    for (r, c) in instance.constraints().iter().enumerate() {
        let name = language.predicate(c.predicate).name();
        let _ = write!(
            out,
            "    {{\"pred\": {}, \"scope\": {}",
            json_string(name),
            int_list(c.scope.iter().copied())
        );
        if let Weights::Explicit(w) = instance.weights() {
            let _ = write!(out, ", \"weight\": {}", format_weight(w[r]));
        }
        out.push('}');
        out.push_str(if r + 1 < m { ",\n" } else { "\n" });
    }
    let _ = write!(out, "  ],\n  \"domain\": {},\n  \"predicates\": {{\n", language.domain_size());
    let preds = language.predicates();
    for (i, p) in preds.iter().enumerate() {
        let tuples = p
            .satisfying()
            .iter()
            .map(|t| int_list(t.iter().copied()))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = write!(
            out,
            "    {}: {{\"arity\": {}, \"satisfying\": [{}]}}",
            json_string(p.name()),
            p.arity(),
            tuples
        );
        out.push_str(if i + 1 < preds.len() { ",\n" } else { "\n" });
    }
    let _ = write!(out, "  }},\n  \"variables\": {}\n}}\n", instance.num_variables());
    out
}

/// Re-emits any parseable document in canonical form.
pub fn canonicalize(text: &str) -> Result<String, FormatError> {
    parse_instance(text).map(|i| serialize_instance(&i))
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn int_list<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    let body = items.map(|v| v.to_string()).collect::<Vec<_>>().join(", ");
    format!("[{body}]")
}

/// Decimal rendering with 12 significant digits, trailing zeros trimmed.
pub fn format_weight(w: f64) -> String {
    if w == 0.0 || !w.is_finite() {
        return "0".to_string();
    }
    let exponent = w.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    let mut s = format!("{w:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Parses a one-line, space-separated `.asn` assignment.
pub fn parse_assignment(text: &str) -> Result<Assignment, FormatError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(line) = lines.next() else {
        return Ok(Assignment(Vec::new()));
    };
    if lines.next().is_some() {
        return Err(FormatError::Assignment("expected a single line".into()));
    }
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<Value>()
                .map_err(|e| FormatError::Assignment(format!("`{tok}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Assignment)
}

pub fn serialize_assignment(assignment: &[Value]) -> String {
    let mut s = assignment
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    s.push('\n');
    s
}
