//! Numerical tolerances shared by the solvers and the query.
//!
//! Every check that compares floating-point masses or costs reads its slack
//! from a [`Tolerances`] record so callers can tighten or loosen them in one
//! place. The defaults are the values the test-suite is pinned to.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed `|W_A - W_B|` relative to `max(W_A, W_B, 1)`.
    pub weight_balance: f64,
    /// Allowed marginal violation of a plan, relative to the total mass.
    pub marginal: f64,
    /// Allowed relative gap between a stored plan cost and its recomputation.
    pub cost: f64,
    /// Optimality slack of the exact solver, relative to `W * max_distance`.
    pub optimality: f64,
    /// Per-node surplus at or below `surplus_zero * W` counts as balanced.
    pub surplus_zero: f64,
    /// Absolute slack for deciding an exact tie in the degenerate query path.
    pub tie: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            weight_balance: 1e-9,
            marginal: 1e-7,
            cost: 1e-9,
            optimality: 1e-7,
            surplus_zero: 1e-12,
            tie: 1e-12,
        }
    }
}

impl Tolerances {
    pub(crate) fn balanced(&self, lhs: f64, rhs: f64) -> bool {
        (lhs - rhs).abs() <= self.weight_balance * lhs.max(rhs).max(1.0)
    }
}
