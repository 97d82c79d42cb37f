//! Deterministic numerical kernels shared by the analysis modules.
//!
//! Everything here is a pure function of its inputs.

pub mod concentration;
pub mod entropy;
pub mod lp;
pub mod poisson;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use concentration::{
    bernoulli_kl, hoeffding_exponent_bound, hoeffding_kl_interval, hoeffding_log_bound,
    serfling_deviation,
};
pub use entropy::{binary_entropy, inv_binary_entropy};
pub use lp::{solve_bounded_lp, Constraint, LinearProgram, LpError, LpSolution, Relation, Sense};
pub use poisson::{ln_poisson_pmf, poisson_pmf, poisson_tail};

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);
    pub const HALF: Probability = Probability(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        Probability::new(v)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A security failure probability in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FailureBudget(f64);

impl FailureBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon <= 1.0 {
            Ok(FailureBudget(epsilon))
        } else {
            Err(domain(format!("failure budget {epsilon} outside (0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Splits the budget evenly into `parts` pieces.
    pub fn split(self, parts: usize) -> FailureBudget {
        FailureBudget(self.0 / parts.max(1) as f64)
    }
}

impl TryFrom<f64> for FailureBudget {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        FailureBudget::new(v)
    }
}

impl From<FailureBudget> for f64 {
    fn from(p: FailureBudget) -> f64 {
        p.0
    }
}
