//! Multi-period clearing with debt roll-forward and lagged contingent obligations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contracts::{contract_violations, threshold_coefficient, ContingentContract, ContractKind};
use crate::error::{ClearingError, Result};
use crate::network::{default_labels, shortfall, ValidationReport};
use crate::solver::{sup_distance, SolverOptions};

/// What happens to a firm once it ends a period with negative wealth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalPolicy {
    /// Unpaid debt rolls into the next period; nobody leaves the system.
    #[default]
    RollForwardOnly,
    /// Firms with negative wealth at `t - 1` stop paying and receiving from `t` on.
    RemoveOnDefault,
}

/// A contract whose payout falls due at `time`, triggered by wealths at `time - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedContract {
    pub time: usize,
    pub contract: ContingentContract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSpec {
    pub labels: Vec<String>,
    pub has_society: bool,
    /// External cash flow `x(t)` per period and node.
    pub cash_flows: Vec<Vec<f64>>,
    /// Non-contingent obligations `L0(t)` per period.
    pub base_liabilities: Vec<DMatrix<f64>>,
    pub contracts: Vec<TimedContract>,
    pub removal_policy: RemovalPolicy,
    /// Wealth before the first clearing date, `V(-1)`.
    pub initial_wealth: Vec<f64>,
}

impl DynamicSpec {
    pub fn new(has_society: bool, cash_flows: Vec<Vec<f64>>, base_liabilities: Vec<DMatrix<f64>>) -> Self {
        let n = cash_flows.first().map_or(0, Vec::len);
        Self {
            labels: default_labels(n, has_society),
            has_society,
            cash_flows,
            base_liabilities,
            contracts: Vec::new(),
            removal_policy: RemovalPolicy::RollForwardOnly,
            initial_wealth: vec![0.0; n],
        }
    }

    pub fn with_contracts(mut self, contracts: Vec<TimedContract>) -> Self {
        self.contracts = contracts;
        self
    }

    pub fn with_policy(mut self, policy: RemovalPolicy) -> Self {
        self.removal_policy = policy;
        self
    }

    pub fn with_initial_wealth(mut self, wealth: Vec<f64>) -> Self {
        self.initial_wealth = wealth;
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    /// Number of clearing dates.
    pub fn periods(&self) -> usize {
        self.cash_flows.len()
    }

    pub fn node_count(&self) -> usize {
        self.initial_wealth.len()
    }

    pub fn bank_count(&self) -> usize {
        self.node_count() - usize::from(self.has_society)
    }

    pub fn is_society(&self, node: usize) -> bool {
        self.has_society && node == 0
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_dynamic(self);
        match report.violations.first() {
            None => Ok(()),
            Some(first) => Err(ClearingError::InvalidInput(first.clone())),
        }
    }
}

pub fn validate_dynamic(spec: &DynamicSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.node_count();
    let periods = spec.periods();
    let v = &mut report.violations;
    if n == 0 {
        v.push("network has no nodes".into());
        return report;
    }
    if periods == 0 {
        v.push("horizon has no clearing dates".into());
    }
    if spec.labels.len() != n {
        v.push(format!("{} labels for {n} nodes", spec.labels.len()));
        return report;
    }
    if spec.base_liabilities.len() != periods {
        v.push(format!(
            "{} liability matrices for {periods} clearing dates",
            spec.base_liabilities.len()
        ));
        return report;
    }
    for (i, &w) in spec.initial_wealth.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            v.push(format!("initial wealth of node {} must be finite and nonnegative", spec.labels[i]));
        }
    }
    for t in 0..periods {
        let x = &spec.cash_flows[t];
        if x.len() != n {
            v.push(format!("cash flows at time {t} have {} entries for {n} nodes", x.len()));
            continue;
        }
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_finite() || xi < 0.0 {
                v.push(format!("negative or non-finite cash flow at node {} time {t}", spec.labels[i]));
            }
        }
        let l = &spec.base_liabilities[t];
        if l.nrows() != n || l.ncols() != n {
            v.push(format!("liability matrix at time {t} is {}x{}, expected {n}x{n}", l.nrows(), l.ncols()));
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let e = l[(i, j)];
                if !e.is_finite() || e < 0.0 {
                    v.push(format!(
                        "liability {} -> {} at time {t} is not finite and nonnegative",
                        spec.labels[i], spec.labels[j]
                    ));
                } else if i == j && e != 0.0 {
                    v.push(format!("nonzero diagonal at node {} time {t}", spec.labels[i]));
                } else if spec.is_society(i) && e != 0.0 {
                    v.push(format!(
                        "society has liabilities to node {} at time {t}",
                        spec.labels[j]
                    ));
                }
            }
        }
    }
    for tc in &spec.contracts {
        if tc.time >= periods {
            v.push(format!("contract due at time {} beyond horizon of {periods} dates", tc.time));
        }
        v.extend(contract_violations(&tc.contract, &spec.labels, spec.has_society));
    }
    report
}

/// Cleared state of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodState {
    pub time: usize,
    pub wealth: Vec<f64>,
    pub payments: Vec<f64>,
    /// Total obligations including rolled-forward shortfall.
    pub pbar: Vec<f64>,
    /// Relative liabilities, row-major.
    pub pi: Vec<Vec<f64>>,
    /// Relative exposures, row-major.
    pub exposure: Vec<Vec<f64>>,
    /// Nominal obligations falling due this period, row-major.
    pub liabilities: Vec<Vec<f64>>,
    pub cash_flow: Vec<f64>,
    pub active: Vec<bool>,
    /// Illiquid set of each inner round, starting with `D^1`.
    pub default_sets: Vec<Vec<usize>>,
    /// Linear solves performed by the inner loop.
    pub inner_rounds: usize,
    /// Sup-norm defect of the payment form of the clearing equation.
    pub residual: f64,
    /// Sup-norm defect of the exposure form, over active nodes.
    pub recursion_residual: f64,
    pub conditions: PeriodConditions,
}

/// Existence and uniqueness conditions evaluated along the realized path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodConditions {
    /// Every bank has positive cash flow or positive obligations to society.
    pub cash_or_society: bool,
    /// `c_i >= sum_{j bank} L_ji - sum_j L_ij` for every bank.
    pub cash_flow_floor: bool,
    /// Every bank owes society a positive amount.
    pub owes_society: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub labels: Vec<String>,
    pub has_society: bool,
    pub removal_policy: RemovalPolicy,
    pub initial_wealth: Vec<f64>,
    pub periods: Vec<PeriodState>,
    pub total_inner_rounds: usize,
    /// Initial solvency plus the per-period conditions hold on every date.
    pub uniqueness_conditions_hold: bool,
    pub warnings: Vec<String>,
}

impl DynamicState {
    pub fn terminal_wealth(&self) -> &[f64] {
        self.periods
            .last()
            .map_or(self.initial_wealth.as_slice(), |p| p.wealth.as_slice())
    }

    pub fn wealth_at(&self, t: usize) -> Option<&[f64]> {
        self.periods.get(t).map(|p| p.wealth.as_slice())
    }

    pub fn max_inner_rounds(&self) -> usize {
        self.periods.iter().map(|p| p.inner_rounds).max().unwrap_or(0)
    }
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// The previous period as seen from `t`.
struct Previous {
    wealth: Vec<f64>,
    pi: DMatrix<f64>,
    exposure: DMatrix<f64>,
    active: Vec<bool>,
}

fn previous(t: usize, spec: &DynamicSpec, history: &[PeriodState]) -> Result<Previous> {
    let n = spec.node_count();
    if history.len() < t {
        return Err(ClearingError::MissingHistory {
            needed: t,
            available: history.len(),
        });
    }
    if t == 0 {
        // V(-1) >= 0, so pi(-1) and a(-1) only ever multiply zero shortfalls
        return Ok(Previous {
            wealth: spec.initial_wealth.clone(),
            pi: DMatrix::zeros(n, n),
            exposure: DMatrix::zeros(n, n),
            active: vec![true; n],
        });
    }
    let p = &history[t - 1];
    Ok(Previous {
        wealth: p.wealth.clone(),
        pi: from_rows(&p.pi, n),
        exposure: from_rows(&p.exposure, n),
        active: p.active.clone(),
    })
}

/// Active set `N_0^t` under the spec's removal policy.
pub fn default_set_update(t: usize, spec: &DynamicSpec, history: &[PeriodState]) -> Result<Vec<bool>> {
    let prev = previous(t, spec, history)?;
    Ok(match spec.removal_policy {
        RemovalPolicy::RollForwardOnly => vec![true; spec.node_count()],
        RemovalPolicy::RemoveOnDefault => (0..spec.node_count())
            .map(|i| spec.is_society(i) || (prev.active[i] && prev.wealth[i] >= 0.0))
            .collect(),
    })
}

/// Lag-one payout of a contract given the previous period.
fn lagged_payout(c: &ContingentContract, prev: &Previous, prev_pbar: &[f64]) -> f64 {
    let v = &prev.wealth;
    match c.kind {
        ContractKind::Cds => c.eta * shortfall(v[c.reference]),
        ContractKind::DigitalCds => {
            if v[c.reference] < 0.0 {
                c.notional
            } else {
                0.0
            }
        }
        ContractKind::SelfInsurance | ContractKind::StabilityFundClaim => {
            c.eta * shortfall(v[c.beneficiary])
        }
        ContractKind::Insurance | ContractKind::ThresholdInsurance => {
            let k = c.reference;
            let loss = prev.exposure[(k, c.beneficiary)] * shortfall(v[k]);
            let eta = if c.kind == ContractKind::ThresholdInsurance {
                let total = prev_pbar[k];
                threshold_coefficient(
                    c.eta,
                    c.tau,
                    prev.pi[(k, c.beneficiary)] * total,
                    total,
                    shortfall(v[k]),
                )
            } else {
                c.eta
            };
            eta * loss
        }
    }
}

/// Nominal obligations `L(t, V_{t-1})` with inactive firms' rows and columns zeroed.
pub fn liabilities_at(t: usize, spec: &DynamicSpec, history: &[PeriodState]) -> Result<DMatrix<f64>> {
    let prev = previous(t, spec, history)?;
    let active = default_set_update(t, spec, history)?;
    let prev_pbar: Vec<f64> = if t == 0 {
        vec![0.0; spec.node_count()]
    } else {
        history[t - 1].pbar.clone()
    };
    let mut l = spec.base_liabilities[t].clone();
    for tc in spec.contracts.iter().filter(|tc| tc.time == t) {
        let c = &tc.contract;
        l[(c.writer, c.beneficiary)] += lagged_payout(c, &prev, &prev_pbar);
    }
    for i in (0..l.nrows()).filter(|&i| !active[i]) {
        l.row_mut(i).fill(0.0);
        l.column_mut(i).fill(0.0);
    }
    Ok(l)
}

/// Totals and relative liabilities of period `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicTotals {
    pub liabilities: DMatrix<f64>,
    pub pbar: Vec<f64>,
    pub pi: DMatrix<f64>,
    pub active: Vec<bool>,
}

/// `pbar_i(t) = sum_j L_ij(t) + V_i(t-1)^-` and the blended relative liabilities.
///
/// Shortfalls of removed firms are extinguished rather than rolled forward.
pub fn dynamic_totals(t: usize, spec: &DynamicSpec, history: &[PeriodState]) -> Result<DynamicTotals> {
    let prev = previous(t, spec, history)?;
    let active = default_set_update(t, spec, history)?;
    let liabilities = liabilities_at(t, spec, history)?;
    let n = spec.node_count();
    let rolled: Vec<f64> = (0..n)
        .map(|i| if active[i] { shortfall(prev.wealth[i]) } else { 0.0 })
        .collect();
    let pbar: Vec<f64> = (0..n).map(|i| liabilities.row(i).sum() + rolled[i]).collect();
    let uniform = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
    let pi = DMatrix::from_fn(n, n, |i, j| {
        if pbar[i] > 0.0 {
            (liabilities[(i, j)] + prev.pi[(i, j)] * rolled[i]) / pbar[i]
        } else if i != j {
            uniform
        } else {
            0.0
        }
    });
    Ok(DynamicTotals {
        liabilities,
        pbar,
        pi,
        active,
    })
}

/// Net cash flow `c(t) = x(t) + L^T 1 - L 1`.
pub fn net_cash_flow(t: usize, spec: &DynamicSpec, history: &[PeriodState]) -> Result<Vec<f64>> {
    let l = liabilities_at(t, spec, history)?;
    Ok(cash_flow_of(&spec.cash_flows[t], &l))
}

fn cash_flow_of(x: &[f64], l: &DMatrix<f64>) -> Vec<f64> {
    (0..x.len())
        .map(|i| x[i] + l.column(i).sum() - l.row(i).sum())
        .collect()
}

/// Relative exposure `A(t)`.
///
/// Rows of active firms whose shortfall does not exceed their total obligations
/// equal `Pi(t)`; other rows are rescaled by the actual shortfall.
pub fn relative_exposure(
    totals: &DynamicTotals,
    prev_exposure: &DMatrix<f64>,
    prev_wealth: &[f64],
    wealth: &[f64],
) -> DMatrix<f64> {
    let n = wealth.len();
    DMatrix::from_fn(n, n, |i, j| {
        let short = shortfall(wealth[i]);
        if totals.active[i] && totals.pbar[i] >= short {
            totals.pi[(i, j)]
        } else if short > 0.0 {
            (totals.liabilities[(i, j)] + prev_exposure[(i, j)] * shortfall(prev_wealth[i])) / short
        } else {
            0.0
        }
    })
}

fn check_conditions(spec: &DynamicSpec, t: usize, l: &DMatrix<f64>, c: &[f64]) -> PeriodConditions {
    let x = &spec.cash_flows[t];
    let banks: Vec<usize> = (0..spec.node_count()).filter(|&i| !spec.is_society(i)).collect();
    let owes = |i: usize| spec.has_society && l[(i, 0)] > 0.0;
    PeriodConditions {
        cash_or_society: banks.iter().all(|&i| x[i] > 0.0 || owes(i)),
        cash_flow_floor: banks.iter().all(|&i| {
            let floor: f64 = banks.iter().map(|&j| l[(j, i)]).sum::<f64>() - l.row(i).sum();
            c[i] >= floor - 1e-12
        }),
        owes_society: banks.iter().all(|&i| owes(i)),
    }
}

/// Clears period `t` given the cleared history `0..t`.
///
/// Fictitious default loop: starting from the wealth every firm would have if all
/// active firms paid in full, the illiquid set grows and each round solves
/// `(I - Pi(t)^T Lambda) V = b` directly.
pub fn clear_step(
    t: usize,
    spec: &DynamicSpec,
    history: &[PeriodState],
    opts: &SolverOptions,
) -> Result<PeriodState> {
    if t >= spec.periods() {
        return Err(ClearingError::InvalidInput(format!(
            "time {t} is beyond the horizon of {} dates",
            spec.periods()
        )));
    }
    let prev = previous(t, spec, history)?;
    let totals = dynamic_totals(t, spec, history)?;
    let n = spec.node_count();
    let x = &spec.cash_flows[t];
    let pi_t = totals.pi.transpose();

    // wealth if every active firm paid in full
    let b: Vec<f64> = (0..n)
        .map(|i| {
            let inflow: f64 = (0..n)
                .filter(|&j| totals.active[j])
                .map(|j| pi_t[(i, j)] * totals.pbar[j])
                .sum();
            prev.wealth[i].max(0.0) + x[i] + inflow - totals.pbar[i]
        })
        .collect();
    let rhs = DVector::from_column_slice(&b);

    let mut wealth = b.clone();
    let mut previous_set: Vec<usize> = Vec::new();
    let mut default_sets = Vec::new();
    let mut rounds = 0;
    loop {
        let current: Vec<usize> = (0..n)
            .filter(|&i| totals.active[i] && wealth[i] < 0.0)
            .collect();
        default_sets.push(current.clone());
        if current == previous_set {
            break;
        }
        if rounds > spec.bank_count() {
            return Err(ClearingError::Numerical(format!(
                "time {t}: illiquid sets failed to stabilise"
            )));
        }
        let mut system = DMatrix::<f64>::identity(n, n);
        for &d in &current {
            for i in 0..n {
                system[(i, d)] -= pi_t[(i, d)];
            }
        }
        let solution = system.lu().solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite()));
        let Some(solution) = solution else {
            return Err(ClearingError::Numerical(format!(
                "time {t}: singular system for illiquid set {current:?}"
            )));
        };
        rounds += 1;
        wealth = solution.iter().copied().collect();
        previous_set = current;
    }

    let payments: Vec<f64> = (0..n)
        .map(|i| {
            if totals.active[i] {
                (totals.pbar[i] - shortfall(wealth[i])).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let eq_rhs: Vec<f64> = (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).map(|j| pi_t[(i, j)] * payments[j]).sum();
            prev.wealth[i].max(0.0) + x[i] + inflow - totals.pbar[i]
        })
        .collect();
    let residual = sup_distance(&eq_rhs, &wealth);
    if residual > opts.tolerance * (1.0 + wealth.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(ClearingError::NotConverged {
            iterations: rounds,
            residual,
            last: wealth,
            context: format!("time {t}: clearing equation not satisfied"),
        });
    }

    let exposure = relative_exposure(&totals, &prev.exposure, &prev.wealth, &wealth);
    let cash_flow = cash_flow_of(x, &totals.liabilities);
    let recursion_residual = (0..n)
        .filter(|&i| totals.active[i])
        .map(|i| {
            let loss: f64 = (0..n).map(|j| exposure[(j, i)] * shortfall(wealth[j])).sum();
            let carried: f64 = (0..n)
                .filter(|&j| totals.active[j])
                .map(|j| prev.exposure[(j, i)] * shortfall(prev.wealth[j]))
                .sum();
            (prev.wealth[i] + cash_flow[i] - loss + carried - wealth[i]).abs()
        })
        .fold(0.0, f64::max);

    Ok(PeriodState {
        time: t,
        conditions: check_conditions(spec, t, &totals.liabilities, &cash_flow),
        payments,
        pbar: totals.pbar.clone(),
        pi: to_rows(&totals.pi),
        exposure: to_rows(&exposure),
        liabilities: to_rows(&totals.liabilities),
        cash_flow,
        active: totals.active.clone(),
        default_sets,
        inner_rounds: rounds,
        residual,
        recursion_residual,
        wealth,
    })
}

fn at_time(t: usize, e: ClearingError) -> ClearingError {
    match e {
        ClearingError::Numerical(m) if !m.starts_with("time ") => {
            ClearingError::Numerical(format!("time {t}: {m}"))
        }
        other => other,
    }
}

/// Clears every period in order.
pub fn clear_dynamic(spec: &DynamicSpec, opts: &SolverOptions) -> Result<DynamicState> {
    spec.ensure_valid()?;
    let mut periods: Vec<PeriodState> = Vec::with_capacity(spec.periods());
    for t in 0..spec.periods() {
        let state = clear_step(t, spec, &periods, opts).map_err(|e| at_time(t, e))?;
        periods.push(state);
    }
    let initially_solvent = spec.initial_wealth.iter().all(|&w| w >= 0.0);
    let mut warnings = Vec::new();
    for p in &periods {
        if !p.conditions.cash_or_society {
            warnings.push(format!(
                "time {}: some bank has neither cash flow nor obligations to society",
                p.time
            ));
        }
        if !p.conditions.owes_society {
            warnings.push(format!(
                "time {}: not every bank owes society; uniqueness is not certified",
                p.time
            ));
        }
    }
    let uniqueness_conditions_hold = initially_solvent
        && periods.iter().all(|p| {
            p.conditions.cash_or_society && p.conditions.cash_flow_floor && p.conditions.owes_society
        });
    Ok(DynamicState {
        labels: spec.labels.clone(),
        has_society: spec.has_society,
        removal_policy: spec.removal_policy,
        initial_wealth: spec.initial_wealth.clone(),
        total_inner_rounds: periods.iter().map(|p| p.inner_rounds).sum(),
        periods,
        uniqueness_conditions_hold,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        sup_distance(a, b) <= 1e-8
    }

    /// Two-date chain: base obligations at 0, `contract` at 1.
    fn chain(eps: f64, contract: ContingentContract) -> DynamicSpec {
        let mut l0 = DMatrix::zeros(3, 3);
        l0[(0, 1)] = 2.0;
        l0[(1, 2)] = 1.5;
        DynamicSpec::new(
            false,
            vec![vec![eps, 0.0, 1.0], vec![1.0 - eps, 0.0, 1.0]],
            vec![l0, DMatrix::zeros(3, 3)],
        )
        .with_contracts(vec![TimedContract { time: 1, contract }])
    }

    #[test]
    fn digital_chain_resolves() {
        let spec = chain(0.0, ContingentContract::digital_cds(2, 0, 1, 1.0));
        let state = clear_dynamic(&spec, &SolverOptions::default()).unwrap();
        assert!(close(state.wealth_at(0).unwrap(), &[-2.0, -1.5, 1.0]));
        assert!(close(state.terminal_wealth(), &[0.0, 0.5, 2.5]));
        assert_eq!(state.periods[1].pbar, vec![2.0, 1.5, 1.0]);
        // bank 1 exactly at its obligations: first branch
        assert_eq!(state.periods[0].exposure[0][1], 1.0);
    }

    #[test]
    fn cash_flow_at_time_zero() {
        let spec = chain(0.0, ContingentContract::digital_cds(2, 0, 1, 1.0));
        let c = net_cash_flow(0, &spec, &[]).unwrap();
        assert_eq!(c, vec![-2.0, 0.5, 2.5]);
        assert_eq!(c.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn missing_history_is_reported() {
        let spec = chain(0.0, ContingentContract::digital_cds(2, 0, 1, 1.0));
        assert_eq!(
            dynamic_totals(1, &spec, &[]).unwrap_err(),
            ClearingError::MissingHistory {
                needed: 1,
                available: 0
            }
        );
    }

    #[test]
    fn self_insurance_chain() {
        let spec = chain(0.3, ContingentContract::self_insurance(2, 0, 1.0));
        let state = clear_dynamic(&spec, &SolverOptions::default()).unwrap();
        assert!(close(state.terminal_wealth(), &[0.7, 0.5, 1.8]));
    }

    #[test]
    fn remove_on_default_zeroes_rows_and_columns() {
        let spec = chain(0.0, ContingentContract::digital_cds(2, 0, 1, 1.0))
            .with_policy(RemovalPolicy::RemoveOnDefault);
        let state = clear_dynamic(&spec, &SolverOptions::default()).unwrap();
        assert_eq!(state.periods[1].active, vec![false, false, true]);
        let l = &state.periods[1].liabilities;
        assert!(l[0].iter().all(|&v| v == 0.0));
        assert!(l.iter().all(|row| row[0] == 0.0));
        // removed firms' shortfalls are extinguished
        assert_eq!(state.periods[1].pbar, vec![0.0, 0.0, 0.0]);
        assert!(close(state.terminal_wealth(), &[1.0, 0.0, 2.0]));
    }

    #[test]
    fn second_exposure_branch_rescales() {
        let totals = DynamicTotals {
            liabilities: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            pbar: vec![1.0, 0.0],
            pi: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            active: vec![true, true],
        };
        let prev = DMatrix::zeros(2, 2);
        let a = relative_exposure(&totals, &prev, &[0.0, 0.0], &[-4.0, 0.0]);
        assert_eq!(a[(0, 1)], 0.25);
        assert!(a.row(0).sum() <= 1.0);
        let a = relative_exposure(&totals, &prev, &[0.0, 0.0], &[-0.5, 0.0]);
        assert_eq!(a[(0, 1)], 1.0);
    }

    #[test]
    fn all_solvent_policies_agree() {
        let mut l0 = DMatrix::zeros(3, 3);
        l0[(1, 0)] = 1.0;
        l0[(2, 1)] = 1.0;
        l0[(2, 0)] = 0.5;
        let spec = DynamicSpec::new(
            true,
            vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]],
            vec![l0.clone(), l0],
        );
        let a = clear_dynamic(&spec, &SolverOptions::default()).unwrap();
        let b = clear_dynamic(
            &spec.clone().with_policy(RemovalPolicy::RemoveOnDefault),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(a.periods, b.periods);
        assert!(a.uniqueness_conditions_hold);
    }
}
