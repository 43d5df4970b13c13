//! Benchmark fixtures.

use contagion_core::generate::{dynamic_spec, regular_network, rng, strictly_nonspeculative_network};
use contagion_core::scenario::{load_scenario, ScenarioFile};
use contagion_core::{DynamicSpec, FinancialNetwork};

/// Constant-obligation networks with `banks` banks plus society.
pub fn regular(banks: usize, seed: u64) -> FinancialNetwork {
    regular_network(&mut rng(seed), banks)
}

/// Insured networks accepted by the falsifier.
pub fn insured(banks: usize, seed: u64) -> FinancialNetwork {
    strictly_nonspeculative_network(&mut rng(seed), banks, 200).expect("generator finds a network")
}

pub fn dynamic(banks: usize, periods: usize, seed: u64) -> DynamicSpec {
    dynamic_spec(&mut rng(seed), banks, periods)
}

pub fn bundled(name: &str) -> ScenarioFile {
    load_scenario(&format!("bundled:{name}")).expect("bundled scenario parses")
}
