use std::fmt;
use std::str::FromStr;

use num_integer::gcd;
use serde::{Deserialize, Serialize};

use super::RegularityError;
use crate::csp::Instance;

/// Multipliers of the three lower bounds on the sample multiplier `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Test,
}

impl Profile {
    pub fn constants(self) -> Constants {
        match self {
            Profile::Paper => Constants {
                c1: 64.0,
                c2: 1.0,
                c3: 22.2,
            },
            Profile::Test => Constants {
                c1: 8.0,
                c2: 1.0,
                c3: 22.2,
            },
        }
    }

    /// Warning attached to certificates produced with weakened constants.
    pub fn caveat(self) -> Option<&'static str> {
        match self {
            Profile::Paper => None,
            Profile::Test => Some(
                "test profile: c1 lowered to 8, concentration guarantees hold with lower probability",
            ),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Paper => "paper",
            Profile::Test => "test",
        })
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Profile::Paper),
            "test" => Ok(Profile::Test),
            other => Err(format!("unknown profile `{other}` (expected paper or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeParams {
    pub epsilon: f64,
    pub m: usize,
    /// Average arity.
    pub w_avg: f64,
    pub w_max: usize,
    pub beta: f64,
    pub d: u64,
    pub delta: u64,
    pub constants: Constants,
}

impl DegreeParams {
    /// Allowed number of changed plus added constraints.
    pub fn change_bound(&self) -> f64 {
        let (m, w, d, beta) = (self.m as f64, self.w_avg, self.d as f64, self.beta);
        8.0 * m * w + 2.0 * beta * m * w * d + 3.0 * (1.0 + beta) * d
    }

    /// Replacements tolerated during surplus repair.
    pub fn replacement_bound(&self) -> f64 {
        4.0 * self.m as f64 * self.w_avg
    }
}

pub fn target_degree_params(
    instance: &Instance,
    epsilon: f64,
    constants: Constants,
) -> Result<DegreeParams, RegularityError> {
    let m = instance.num_constraints();
    if m == 0 {
        return Err(RegularityError::NoConstraints);
    }
    let w_avg = instance.total_arity() as f64 / m as f64;
    degree_params(m, w_avg, instance.max_arity(), epsilon, constants)
}

/// Parameter computation from instance statistics alone.
pub fn degree_params(
    m: usize,
    w_avg: f64,
    w_max: usize,
    epsilon: f64,
    constants: Constants,
) -> Result<DegreeParams, RegularityError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(RegularityError::InvalidEpsilon(epsilon));
    }
    let beta = epsilon / (5.0 * w_avg);
    let b2 = beta * beta;
    let bounds = [
        constants.c1 * (2.0 / beta).ln() / b2,
        constants.c2 * (w_max * w_max) as f64 * 8f64.ln() / (b2 * m as f64 * w_avg * w_avg),
        constants.c3 * w_avg / (epsilon * epsilon),
    ];
    let d = bounds.iter().fold(1.0f64, |acc, b| acc.max(b.ceil()));
    if d > (1u64 << 52) as f64 {
        return Err(RegularityError::TooLarge {
            what: "sample multiplier",
            size: d as u128,
            limit: 1 << 52,
        });
    }
    let d = d as u64;
    let mut delta = ((1.0 + beta) * d as f64).ceil() as u64;
    while gcd(delta, w_max as u64) != 1 {
        delta += 1;
    }
    Ok(DegreeParams {
        epsilon,
        m,
        w_avg,
        w_max,
        beta,
        d,
        delta,
        constants,
    })
}
