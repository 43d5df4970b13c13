//! Clearing engine for interbank networks with wealth-contingent obligations.
//!
//! Static clearing (greatest and least fixed points, fictitious default,
//! nonexistence diagnosis) and multi-period clearing with debt roll-forward.

pub mod analysis;
pub mod contracts;
pub mod dynamic;
pub mod error;
pub mod generate;
pub mod network;
pub mod scenario;
pub mod solver;
pub mod static_clearing;

pub use analysis::{
    compare_static_dynamic, conservation_audit_dynamic, conservation_audit_static,
    sensitivity_in_assets, two_period_spec, ComparisonReport, ConservationAudit,
    SensitivityReport, SplitSchedule,
};
pub use contracts::{
    build_stability_fund, check_insurance_tree, evaluate_liabilities, threshold_coefficient,
    threshold_eta, upper_bound_matrix, wealth_box, ContingentContract, ContractKind, FundMode,
    InsuranceTreeVerdict, LiabilitySpec, StabilityFundConfig, WealthBox,
};
pub use dynamic::{
    clear_dynamic, clear_step, default_set_update, dynamic_totals, net_cash_flow,
    relative_exposure, validate_dynamic, DynamicSpec, DynamicState, DynamicTotals, PeriodState,
    RemovalPolicy, TimedContract,
};
pub use error::{ClearingError, Result};
pub use network::{
    clear_eisenberg_noe, payments_from_wealth, total_and_relative_liabilities, validate_network,
    FinancialNetwork, RelativeLiabilities, ValidationReport, WealthVector,
};
pub use solver::{ClearingResult, Direction, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
pub use static_clearing::{
    check_nonspeculative, clear_static, clearing_map, detect_nonexistence,
    fictitious_default_static, residual, solve_static, FictitiousDefaultResult, FirmVerdict,
    NonexistenceDiagnosis, SpeculationReport, SocietyVerdict, StaticOutcome,
};
pub use scenario::{
    load_scenario, parse_scenario, parse_scenario_str, run_scenario, Mode, Overrides, RunReport,
    RunStatus, ScenarioError, ScenarioFile,
};
