//! Numeric tolerances shared across the crate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed deviation of a state norm from one.
    pub norm: f64,
    /// Two states are distinct when their fidelity is below `1 - distinct`.
    pub distinct: f64,
    /// Allowed deviation of ensemble weights from summing to one.
    pub weight_sum: f64,
    /// Hermiticity / trace checks on moment operators.
    pub operator: f64,
    /// Largest moment-operator side length `d^k`.
    pub moment_cap: usize,
    /// Allowed difference between the two marginal masses of a transport problem.
    pub marginal: f64,
    /// Negative round-off tolerated on a reported distance before clamping.
    pub report_floor: f64,
    /// Redraws allowed when a generator produces a colliding state.
    pub max_redraws: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        DEFAULT
    }
}

pub const DEFAULT: Tolerances = Tolerances {
    norm: 1e-12,
    distinct: 1e-9,
    weight_sum: 1e-12,
    operator: 1e-10,
    moment_cap: 4096,
    marginal: 1e-9,
    report_floor: 1e-10,
    max_redraws: 100,
};
