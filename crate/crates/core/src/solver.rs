//! Shared solver configuration and the result type produced by every static clearing routine.

use serde::{Deserialize, Serialize};

/// Default sup-norm residual accepted as a fixed point.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Default Picard iteration budget.
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of recent iterates compared when looking for cycles.
    pub cycle_window: usize,
    pub cycle_tolerance: f64,
    /// Indicator patterns enumerated at most when certifying nonexistence.
    pub max_branch_patterns: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            cycle_window: 8,
            cycle_tolerance: 1e-8,
            max_branch_patterns: 1 << 12,
        }
    }
}

/// Which extremal fixed point an iteration targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Greatest,
    Least,
    /// A fixed point with no extremality claim.
    Single,
}

/// Outcome of a static clearing computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub wealth: Vec<f64>,
    pub payments: Vec<f64>,
    /// Nodes with strictly negative wealth.
    pub defaults: Vec<usize>,
    /// Sup-norm of `clearing_map(wealth) - wealth`.
    pub residual: f64,
    pub iterations: usize,
    pub direction: Direction,
    pub converged: bool,
    /// Iterates failed to move monotonically away from the starting corner.
    pub non_monotone: bool,
    pub warnings: Vec<String>,
}

impl ClearingResult {
    pub fn positive_equity(&self) -> f64 {
        self.wealth.iter().map(|v| v.max(0.0)).sum()
    }
}

pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn default_set(wealth: &[f64]) -> Vec<usize> {
    wealth
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v < 0.0)
        .map(|(i, _)| i)
        .collect()
}
