//! Comparative statics, conservation audits and static-versus-dynamic reports.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamic::{clear_dynamic, DynamicSpec, DynamicState, RemovalPolicy, TimedContract};
use crate::error::{ClearingError, Result};
use crate::network::FinancialNetwork;
use crate::solver::{sup_distance, Direction, SolverOptions};
use crate::static_clearing::{
    check_nonspeculative, clear_static, solve_static, BranchRecord, FirmVerdict, SocietyVerdict,
    StaticOutcome,
};

/// Tolerance for monotonicity violations and conservation gaps.
pub const AUDIT_TOLERANCE: f64 = 1e-8;
/// Allowed jump between consecutive grid points, in multiples of the asset step.
pub const JUMP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFailure {
    pub index: usize,
    pub s: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub base_x: Vec<f64>,
    pub perturbed_x: Vec<f64>,
    pub base_v: Vec<f64>,
    pub perturbed_v: Vec<f64>,
    pub direction: Vec<f64>,
    /// Ramp parameters `s` in `[0, 1]`.
    pub grid: Vec<f64>,
    /// Wealths at each cleared grid point.
    pub wealths: Vec<Vec<f64>>,
    pub monotone: bool,
    pub max_violation: f64,
    /// Largest sup-norm change between consecutive grid points.
    pub max_jump: f64,
    pub jump_bound: f64,
    pub continuous: bool,
    pub failure: Option<SensitivityFailure>,
    /// Set when the network is outside the scope of the monotonicity guarantee.
    pub scope_banner: Option<String>,
}

/// Clears the network along `x + s * direction`, `s` on an evenly spaced grid of
/// `steps` points in `[0, 1]`, and checks that wealths never decrease.
pub fn sensitivity_in_assets(
    net: &FinancialNetwork,
    direction: &[f64],
    steps: usize,
    opts: &SolverOptions,
) -> Result<SensitivityReport> {
    net.ensure_valid()?;
    let n = net.node_count();
    if direction.len() != n || direction.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(ClearingError::InvalidInput(format!(
            "direction must have {n} finite nonnegative entries"
        )));
    }
    if steps < 2 {
        return Err(ClearingError::InvalidInput("sensitivity needs at least 2 grid points".into()));
    }
    let speculation = check_nonspeculative(net, 2_000, 0)?;
    let scope_banner = match (&speculation.firms, &speculation.society) {
        (FirmVerdict::Falsified(_), _) => Some(
            "outside monotonicity scope: the network is speculative, monotonicity is not guaranteed".to_string(),
        ),
        (_, SocietyVerdict::Falsified(_)) => Some(
            "outside monotonicity scope: society is not strictly nonspeculative".to_string(),
        ),
        (_, SocietyVerdict::NotApplicable) => Some(
            "outside monotonicity scope: no society node, uniqueness is not guaranteed".to_string(),
        ),
        _ => None,
    };

    let h = 1.0 / (steps - 1) as f64;
    let grid: Vec<f64> = (0..steps).map(|k| k as f64 * h).collect();
    let assets_at = |s: f64| -> Vec<f64> {
        net.assets
            .iter()
            .zip(direction)
            .map(|(x, d)| x + s * d)
            .collect()
    };
    let cleared: Vec<Result<Vec<f64>>> = grid
        .par_iter()
        .map(|&s| {
            let shifted = FinancialNetwork {
                assets: assets_at(s),
                ..net.clone()
            };
            clear_static(&shifted, Direction::Greatest, opts).map(|r| r.wealth)
        })
        .collect();

    let mut wealths = Vec::new();
    let mut failure = None;
    for (k, r) in cleared.into_iter().enumerate() {
        match r {
            Ok(v) => wealths.push(v),
            Err(e) => {
                failure = Some(SensitivityFailure {
                    index: k,
                    s: grid[k],
                    error: e.to_string(),
                });
                break;
            }
        }
    }

    let mut max_violation: f64 = 0.0;
    let mut max_jump: f64 = 0.0;
    for pair in wealths.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            max_violation = max_violation.max(a - b);
        }
        max_jump = max_jump.max(sup_distance(&pair[0], &pair[1]));
    }
    let step_size = h * direction.iter().sum::<f64>();
    let jump_bound = JUMP_FACTOR * step_size;
    let last = wealths.len().saturating_sub(1);
    Ok(SensitivityReport {
        base_x: net.assets.clone(),
        perturbed_x: assets_at(grid[last]),
        base_v: wealths.first().cloned().unwrap_or_default(),
        perturbed_v: wealths.last().cloned().unwrap_or_default(),
        direction: direction.to_vec(),
        grid: grid[..wealths.len()].to_vec(),
        monotone: max_violation <= AUDIT_TOLERANCE,
        max_violation: max_violation.max(0.0),
        max_jump,
        jump_bound,
        continuous: max_jump <= jump_bound + AUDIT_TOLERANCE,
        failure,
        scope_banner,
        wealths,
    })
}

/// Positive equity against injected cash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationAudit {
    /// `sum_i V_i^+`.
    pub positive_equity: f64,
    /// External cash that entered the system.
    pub external_cash: f64,
    pub gap: f64,
    pub holds: bool,
    /// The identity is expected to hold for this kind of run.
    pub applicable: bool,
}

fn audit(positive_equity: f64, external_cash: f64, applicable: bool) -> ConservationAudit {
    let gap = (positive_equity - external_cash).abs();
    ConservationAudit {
        positive_equity,
        external_cash,
        gap,
        holds: gap <= AUDIT_TOLERANCE,
        applicable,
    }
}

/// `sum V^+ = sum x` at a static fixed point.
pub fn conservation_audit_static(net: &FinancialNetwork, wealth: &[f64]) -> ConservationAudit {
    audit(
        wealth.iter().map(|v| v.max(0.0)).sum(),
        net.assets.iter().sum(),
        true,
    )
}

/// `sum V(T)^+ = sum_t sum x(t) + sum V(-1)^+` after a dynamic run. The identity
/// is exact when shortfalls roll forward; removal extinguishes claims.
pub fn conservation_audit_dynamic(spec: &DynamicSpec, state: &DynamicState) -> ConservationAudit {
    let injected: f64 = spec.cash_flows.iter().flatten().sum::<f64>()
        + spec.initial_wealth.iter().map(|v| v.max(0.0)).sum::<f64>();
    audit(
        state.terminal_wealth().iter().map(|v| v.max(0.0)).sum(),
        injected,
        spec.removal_policy == RemovalPolicy::RollForwardOnly,
    )
}

/// Split of static assets over two clearing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSchedule {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl SplitSchedule {
    /// All assets available at the first date.
    pub fn upfront(net: &FinancialNetwork) -> Self {
        Self {
            x0: net.assets.clone(),
            x1: vec![0.0; net.node_count()],
        }
    }

    /// `eps` per node at the first date, the remainder at the second.
    pub fn first_date(net: &FinancialNetwork, eps: &[f64]) -> Self {
        Self {
            x0: eps.to_vec(),
            x1: net.assets.iter().zip(eps).map(|(x, e)| x - e).collect(),
        }
    }
}

/// Two-date dynamic version of a static network: base obligations at date 0,
/// contingent payouts at date 1.
pub fn two_period_spec(net: &FinancialNetwork, schedule: &SplitSchedule) -> Result<DynamicSpec> {
    let n = net.node_count();
    if schedule.x0.len() != n || schedule.x1.len() != n {
        return Err(ClearingError::InvalidInput(format!(
            "split schedule needs {n} entries per date"
        )));
    }
    for i in 0..n {
        let (a, b) = (schedule.x0[i], schedule.x1[i]);
        if a < 0.0 || b < 0.0 || (a + b - net.assets[i]).abs() > 1e-12 * (1.0 + net.assets[i]) {
            return Err(ClearingError::InvalidInput(format!(
                "split of node {} ({a} + {b}) does not add up to its assets {}",
                net.label(i),
                net.assets[i]
            )));
        }
    }
    Ok(DynamicSpec::new(
        net.has_society,
        vec![schedule.x0.clone(), schedule.x1.clone()],
        vec![net.liabilities.base.clone(), DMatrix::zeros(n, n)],
    )
    .with_contracts(
        net.liabilities
            .contracts
            .iter()
            .map(|&contract| TimedContract { time: 1, contract })
            .collect(),
    )
    .with_labels(net.labels.clone()))
}

/// Distance from the dynamic terminal wealth to one static candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMatch {
    pub name: String,
    pub wealth: Vec<f64>,
    pub distance: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schedule: SplitSchedule,
    /// `fixed_point`, `nonexistent` or `inconclusive`.
    pub static_status: String,
    pub static_outcome: StaticOutcome,
    pub static_least: Option<Vec<f64>>,
    pub dynamic_terminal: Vec<f64>,
    pub dynamic: DynamicState,
    pub candidates: Vec<CandidateMatch>,
    /// The dynamic terminal wealth equals a static equilibrium.
    pub coincides: bool,
    pub verdict: String,
}

fn branch_name(b: &BranchRecord) -> String {
    if b.assumed_negative.iter().all(|&neg| neg) {
        "insolvent-branch".into()
    } else if b.assumed_negative.iter().all(|&neg| !neg) {
        "solvent-branch".into()
    } else {
        let bits: String = b
            .assumed_negative
            .iter()
            .map(|&neg| if neg { '1' } else { '0' })
            .collect();
        format!("branch-{bits}")
    }
}

/// Runs the static solver and the two-date dynamic solver on the same network
/// and reports how the terminal wealth relates to the static candidates.
pub fn compare_static_dynamic(
    net: &FinancialNetwork,
    schedule: &SplitSchedule,
    opts: &SolverOptions,
) -> Result<ComparisonReport> {
    let spec = two_period_spec(net, schedule)?;
    let dynamic = clear_dynamic(&spec, opts)?;
    let terminal = dynamic.terminal_wealth().to_vec();
    let outcome = solve_static(net, Direction::Greatest, opts)?;

    let mut candidates = Vec::new();
    let mut push = |name: String, wealth: Vec<f64>| {
        let distance = sup_distance(&wealth, &terminal);
        candidates.push(CandidateMatch {
            name,
            distance,
            matches: distance <= AUDIT_TOLERANCE,
            wealth,
        });
    };
    let mut static_least = None;
    let static_status = match &outcome {
        StaticOutcome::FixedPoint(r) => {
            let name = if r.direction == Direction::Greatest {
                "static greatest equilibrium"
            } else {
                "static equilibrium"
            };
            push(name.into(), r.wealth.clone());
            if let Ok(least) = clear_static(net, Direction::Least, opts) {
                if sup_distance(&least.wealth, &r.wealth) > AUDIT_TOLERANCE {
                    push("static least equilibrium".into(), least.wealth.clone());
                }
                static_least = Some(least.wealth);
            }
            "fixed_point"
        }
        StaticOutcome::Nonexistent(d) => {
            for b in &d.certificate {
                if let Some(w) = &b.wealth {
                    push(format!("{} proposal", branch_name(b)), w.clone());
                }
            }
            "nonexistent"
        }
        StaticOutcome::Inconclusive(r) => {
            for b in &r.branches {
                if let Some(w) = &b.wealth {
                    push(format!("{} proposal", branch_name(b)), w.clone());
                }
            }
            "inconclusive"
        }
    };

    let coincides = static_status == "fixed_point" && candidates.iter().any(|c| c.matches);
    let verdict = match candidates.iter().find(|c| c.matches) {
        Some(c) => format!("matches {}", c.name),
        None => {
            let nearest = candidates
                .iter()
                .min_by(|a, b| a.distance.total_cmp(&b.distance));
            match nearest {
                Some(c) => format!(
                    "mismatch: dynamic terminal wealth differs from {} by {:.3e}",
                    c.name, c.distance
                ),
                None => "mismatch: no static candidate available".into(),
            }
        }
    };
    Ok(ComparisonReport {
        schedule: schedule.clone(),
        static_status: static_status.into(),
        static_outcome: outcome,
        static_least,
        dynamic_terminal: terminal,
        dynamic,
        candidates,
        coincides,
        verdict,
    })
}
