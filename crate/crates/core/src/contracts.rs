//! Wealth-contingent obligations: contract kinds, evaluation of `L(V)`, bounds
//! and structural checks.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ClearingError, Result};
use crate::network::{shortfall, FinancialNetwork, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    /// Covers a fraction `eta` of the beneficiary's pro-rata loss on the reference's debt.
    Insurance,
    /// Insurance whose coverage coefficient depends on a threshold `tau`.
    ThresholdInsurance,
    /// Pays `eta * V_ref^-`, no insurable interest required.
    Cds,
    /// Pays a fixed `notional` when the reference has strictly negative wealth.
    DigitalCds,
    /// Pays `eta * V_beneficiary^-`: the beneficiary insures its own shortfall.
    SelfInsurance,
    /// A stability fund's obligation `V_beneficiary^-` to a member bank.
    StabilityFundClaim,
}

impl ContractKind {
    pub fn is_insurance(self) -> bool {
        matches!(self, Self::Insurance | Self::ThresholdInsurance)
    }

    /// Kinds whose payout is triggered by another node's wealth.
    pub fn uses_reference(self) -> bool {
        matches!(
            self,
            Self::Insurance | Self::ThresholdInsurance | Self::Cds | Self::DigitalCds
        )
    }
}

/// One contingent contract: `writer` owes `beneficiary` an amount driven by the
/// wealth of `reference`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContingentContract {
    pub kind: ContractKind,
    pub writer: usize,
    pub beneficiary: usize,
    pub reference: usize,
    pub eta: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub notional: f64,
}

impl ContingentContract {
    fn with(kind: ContractKind, writer: usize, beneficiary: usize, reference: usize) -> Self {
        Self {
            kind,
            writer,
            beneficiary,
            reference,
            eta: 1.0,
            tau: 0.0,
            notional: 0.0,
        }
    }

    pub fn insurance(writer: usize, beneficiary: usize, reference: usize, eta: f64) -> Self {
        Self {
            eta,
            ..Self::with(ContractKind::Insurance, writer, beneficiary, reference)
        }
    }

    pub fn threshold_insurance(
        writer: usize,
        beneficiary: usize,
        reference: usize,
        eta: f64,
        tau: f64,
    ) -> Self {
        Self {
            eta,
            tau,
            ..Self::with(ContractKind::ThresholdInsurance, writer, beneficiary, reference)
        }
    }

    pub fn cds(writer: usize, beneficiary: usize, reference: usize, eta: f64) -> Self {
        Self {
            eta,
            ..Self::with(ContractKind::Cds, writer, beneficiary, reference)
        }
    }

    pub fn digital_cds(writer: usize, beneficiary: usize, reference: usize, notional: f64) -> Self {
        Self {
            notional,
            ..Self::with(ContractKind::DigitalCds, writer, beneficiary, reference)
        }
    }

    pub fn self_insurance(writer: usize, beneficiary: usize, eta: f64) -> Self {
        Self {
            eta,
            ..Self::with(ContractKind::SelfInsurance, writer, beneficiary, beneficiary)
        }
    }

    pub fn stability_fund_claim(fund: usize, member: usize) -> Self {
        Self::with(ContractKind::StabilityFundClaim, fund, member, member)
    }

    /// Node whose wealth drives the payout.
    pub fn trigger(&self) -> usize {
        if self.kind.uses_reference() {
            self.reference
        } else {
            self.beneficiary
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        (self.writer, self.beneficiary, self.reference, self.kind)
            .cmp(&(other.writer, other.beneficiary, other.reference, other.kind))
            .then(self.eta.total_cmp(&other.eta))
            .then(self.tau.total_cmp(&other.tau))
            .then(self.notional.total_cmp(&other.notional))
    }

    fn describe(&self, labels: &[String]) -> String {
        let kind = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let label = |i: usize| labels.get(i).map(String::as_str).unwrap_or("?");
        let base = format!(
            "{kind} contract {} -> {}",
            label(self.writer),
            label(self.beneficiary)
        );
        if self.kind.uses_reference() {
            format!("{base} on {}", label(self.reference))
        } else {
            base
        }
    }
}

/// Base obligations plus the contingent contracts layered on top.
///
/// Contracts are stored in a canonical order so that evaluation is independent
/// of the order they were supplied in.
#[derive(Debug, Clone, PartialEq)]
pub struct LiabilitySpec {
    pub base: DMatrix<f64>,
    pub contracts: Vec<ContingentContract>,
}

impl LiabilitySpec {
    pub fn new(base: DMatrix<f64>, mut contracts: Vec<ContingentContract>) -> Self {
        contracts.sort_by(|a, b| a.canonical_cmp(b));
        Self { base, contracts }
    }

    pub fn constant(base: DMatrix<f64>) -> Self {
        Self::new(base, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.base.nrows()
    }

    pub fn has_insurance(&self) -> bool {
        self.contracts.iter().any(|c| c.kind.is_insurance())
    }

    /// Reference nodes of digital contracts, i.e. the discontinuities of `L(V)`.
    pub fn indicator_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .contracts
            .iter()
            .filter(|c| c.kind == ContractKind::DigitalCds)
            .map(|c| c.reference)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// Coverage coefficient of a threshold insurance contract.
///
/// `owed` is what the reference owes the beneficiary, `total` the reference's
/// total obligations and `reference_shortfall` its `V^-`. The coefficient is
/// `eta_hat * [paid + tau]^+ / [paid]^+` with `paid = owed - owed/total * shortfall`,
/// clipped to `[0, eta_hat]`, and zero when nothing is paid.
pub fn threshold_coefficient(
    eta_hat: f64,
    tau: f64,
    owed: f64,
    total: f64,
    reference_shortfall: f64,
) -> f64 {
    let loss = if total > 0.0 {
        owed / total * reference_shortfall
    } else {
        0.0
    };
    let paid = (owed - loss).max(0.0);
    if paid <= 0.0 {
        return 0.0;
    }
    let ratio = (owed - loss + tau).max(0.0) / paid;
    eta_hat * ratio.min(1.0)
}

/// [`threshold_coefficient`] for a contract against a resolved liability matrix.
pub fn threshold_eta(contract: &ContingentContract, wealth: &[f64], resolved: &DMatrix<f64>) -> f64 {
    if contract.kind != ContractKind::ThresholdInsurance {
        return contract.eta;
    }
    let k = contract.reference;
    threshold_coefficient(
        contract.eta,
        contract.tau,
        resolved[(k, contract.beneficiary)],
        resolved.row(k).sum(),
        shortfall(wealth[k]),
    )
}

/// Payout of a contract that does not read other rows of `L`.
fn direct_payout(c: &ContingentContract, wealth: &[f64]) -> f64 {
    match c.kind {
        ContractKind::Cds => c.eta * shortfall(wealth[c.reference]),
        ContractKind::DigitalCds => {
            if wealth[c.reference] < 0.0 {
                c.notional
            } else {
                0.0
            }
        }
        ContractKind::SelfInsurance | ContractKind::StabilityFundClaim => {
            c.eta * shortfall(wealth[c.beneficiary])
        }
        ContractKind::Insurance | ContractKind::ThresholdInsurance => 0.0,
    }
}

/// Payout of an insurance contract given the current reference row.
fn insurance_payout(c: &ContingentContract, wealth: &[f64], current: &DMatrix<f64>) -> f64 {
    let k = c.reference;
    let total = current.row(k).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let loss = current[(k, c.beneficiary)] / total * shortfall(wealth[k]);
    threshold_eta(c, wealth, current) * loss
}

/// Evaluates the nominal liability matrix `L(V)`.
///
/// Insurance payouts read the reference's own (possibly insured) obligations,
/// so they are resolved by repeated sweeps; for an acyclic dependency graph
/// the sweeps reach the exact matrix after at most depth + 1 passes.
pub fn evaluate_liabilities(spec: &LiabilitySpec, wealth: &[f64]) -> Result<DMatrix<f64>> {
    let n = spec.node_count();
    if wealth.len() != n {
        return Err(ClearingError::InvalidInput(format!(
            "wealth vector has {} entries, network has {n} nodes",
            wealth.len()
        )));
    }
    let mut direct = spec.base.clone();
    for c in spec.contracts.iter().filter(|c| !c.kind.is_insurance()) {
        direct[(c.writer, c.beneficiary)] += direct_payout(c, wealth);
    }
    if !spec.has_insurance() {
        return Ok(direct);
    }
    if let InsuranceTreeVerdict::Cycle { beneficiary, nodes } = check_insurance_tree(spec) {
        return Err(ClearingError::Structural(format!(
            "cyclic insurance chain for beneficiary {beneficiary}: {nodes:?}"
        )));
    }
    let acyclic_rows = insurance_rows_acyclic(spec);
    let mut current = direct.clone();
    for sweep in 0..10_000 {
        let mut next = direct.clone();
        for c in spec.contracts.iter().filter(|c| c.kind.is_insurance()) {
            next[(c.writer, c.beneficiary)] += insurance_payout(c, wealth, &current);
        }
        if next == current {
            return Ok(next);
        }
        let change = (&next - &current).amax();
        let scale = 1.0 + next.amax();
        current = next;
        if acyclic_rows {
            if sweep > n + 1 {
                return Err(ClearingError::Numerical(
                    "insurance sweeps failed to stabilise on an acyclic dependency graph".into(),
                ));
            }
        } else if change <= 1e-15 * scale {
            return Ok(current);
        }
    }
    Err(ClearingError::Structural(
        "insurance obligations do not settle: coupled insurance rows diverge".into(),
    ))
}

/// Outcome of the insurance tree check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum InsuranceTreeVerdict {
    Pass,
    /// Writers along `nodes` insure `beneficiary` against each other in a loop.
    Cycle { beneficiary: usize, nodes: Vec<usize> },
}

/// Checks that, for every beneficiary, no chain of insurers insures each other's
/// nonpayment in a loop.
pub fn check_insurance_tree(spec: &LiabilitySpec) -> InsuranceTreeVerdict {
    let mut by_beneficiary: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for c in spec.contracts.iter().filter(|c| c.kind.is_insurance()) {
        by_beneficiary
            .entry(c.beneficiary)
            .or_default()
            .push((c.writer, c.reference));
    }
    let n = spec.node_count();
    for (beneficiary, edges) in by_beneficiary {
        if let Some(nodes) = find_cycle(n, &edges) {
            return InsuranceTreeVerdict::Cycle { beneficiary, nodes };
        }
    }
    InsuranceTreeVerdict::Pass
}

fn insurance_rows_acyclic(spec: &LiabilitySpec) -> bool {
    let edges: Vec<(usize, usize)> = spec
        .contracts
        .iter()
        .filter(|c| c.kind.is_insurance())
        .map(|c| (c.writer, c.reference))
        .collect();
    find_cycle(spec.node_count(), &edges).is_none()
}

/// Depth-first search for a directed cycle; returns its nodes in order.
fn find_cycle(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a < n && b < n {
            adj[a].push(b);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack: Vec<usize> = Vec::new();

    fn visit(
        u: usize,
        adj: &[Vec<usize>],
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[u] = 1;
        stack.push(u);
        for &v in &adj[u] {
            if state[v] == 1 {
                let start = stack.iter().position(|&s| s == v).unwrap_or(0);
                return Some(stack[start..].to_vec());
            }
            if state[v] == 0 {
                if let Some(c) = visit(v, adj, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[u] = 2;
        None
    }

    for u in 0..n {
        if state[u] == 0 {
            if let Some(c) = visit(u, &adj, &mut state, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}

/// Upper bound of the payout of one contract given the current box floor.
fn payout_bound(c: &ContingentContract, floor: &[f64]) -> f64 {
    match c.kind {
        ContractKind::DigitalCds => c.notional,
        _ => c.eta * shortfall(floor[c.trigger()]),
    }
}

/// Componentwise upper bound `Lbar` of `L(V)` over the wealth box.
///
/// The box floor `x_i - sum_j Lbar_ij` and the bounds depend on each other; the
/// two are updated alternately until they stop changing.
pub fn upper_bound_matrix(spec: &LiabilitySpec, assets: &[f64]) -> Result<DMatrix<f64>> {
    let n = spec.node_count();
    let mut bound = spec.base.clone();
    if spec.contracts.is_empty() {
        return Ok(bound);
    }
    for _ in 0..=n + 2 {
        let floor: Vec<f64> = (0..n).map(|i| assets[i] - bound.row(i).sum()).collect();
        let mut next = spec.base.clone();
        for c in &spec.contracts {
            next[(c.writer, c.beneficiary)] += payout_bound(c, &floor);
        }
        if next == bound {
            return Ok(bound);
        }
        bound = next;
    }
    Err(ClearingError::Structural(
        "contingent obligations are unbounded: contract bounds feed back on each other".into(),
    ))
}

/// The compact box containing every fixed point of the clearing map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl WealthBox {
    pub fn contains(&self, wealth: &[f64], tol: f64) -> bool {
        wealth
            .iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] - tol && v <= self.upper[i] + tol)
    }

    /// Clamps a point into the box.
    pub fn clamp(&self, wealth: &mut [f64]) {
        for (i, v) in wealth.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Box `[x_i - sum_j Lbar_ij, x_i + sum_j Lbar_ji]`.
pub fn wealth_box(net: &FinancialNetwork) -> Result<WealthBox> {
    let bound = upper_bound_matrix(&net.liabilities, &net.assets)?;
    let n = net.node_count();
    Ok(WealthBox {
        lower: (0..n).map(|i| net.assets[i] - bound.row(i).sum()).collect(),
        upper: (0..n).map(|i| net.assets[i] + bound.column(i).sum()).collect(),
    })
}

/// Checks of a single contract that do not depend on the rest of the network.
pub(crate) fn contract_violations(
    c: &ContingentContract,
    labels: &[String],
    has_society: bool,
) -> Vec<String> {
    let n = labels.len();
    let mut out = Vec::new();
    if c.writer >= n || c.beneficiary >= n || c.reference >= n {
        out.push(format!(
            "contract references node index out of range ({n} nodes): writer {}, beneficiary {}, reference {}",
            c.writer, c.beneficiary, c.reference
        ));
        return out;
    }
    let is_society = |i: usize| has_society && i == 0;
    let what = c.describe(labels);
    if c.writer == c.beneficiary {
        out.push(format!("{what}: writer and beneficiary coincide"));
    }
    if is_society(c.writer) {
        out.push(format!("{what}: society cannot owe obligations"));
    }
    if c.kind.uses_reference() && is_society(c.reference) {
        out.push(format!("{what}: reference must be a bank"));
    }
    if c.kind.is_insurance() && c.writer == c.reference {
        out.push(format!("{what}: a firm cannot insure against itself"));
    }
    if !c.eta.is_finite() || c.eta < 0.0 {
        out.push(format!("{what}: eta must be finite and nonnegative"));
    } else if c.kind.is_insurance() && c.eta > 1.0 {
        out.push(format!("{what}: insurance coverage eta must lie in [0, 1]"));
    }
    if !c.tau.is_finite() || c.tau < 0.0 {
        out.push(format!("{what}: threshold tau must be finite and nonnegative"));
    }
    if !c.notional.is_finite() || c.notional < 0.0 {
        out.push(format!("{what}: notional must be finite and nonnegative"));
    }
    out
}

pub(crate) fn validate_contracts(net: &FinancialNetwork, report: &mut ValidationReport) {
    let before = report.violations.len();
    let mut coverage: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in &net.liabilities.contracts {
        let found = contract_violations(c, &net.labels, net.has_society);
        let ok = found.is_empty();
        report.violations.extend(found);
        if ok && c.kind.is_insurance() {
            *coverage.entry((c.beneficiary, c.reference)).or_default() += c.eta;
        }
    }
    for ((beneficiary, reference), total) in coverage {
        if total > 1.0 {
            report.warnings.push(format!(
                "over-insurance: node {} holds total coverage {total} on node {}",
                net.label(beneficiary),
                net.label(reference)
            ));
        }
    }
    if report.violations.len() > before {
        return;
    }
    if let InsuranceTreeVerdict::Cycle { beneficiary, nodes } =
        check_insurance_tree(&net.liabilities)
    {
        let chain: Vec<&str> = nodes.iter().map(|&i| net.label(i)).collect();
        report.violations.push(format!(
            "cyclic insurance chain for beneficiary {}: {}",
            net.label(beneficiary),
            chain.join(" -> ")
        ));
        return;
    }
    if net.liabilities.base.nrows() == net.node_count() && net.assets.iter().all(|x| x.is_finite()) {
        if let Err(e) = upper_bound_matrix(&net.liabilities, &net.assets) {
            report.violations.push(e.to_string());
        }
    }
}

/// How the stability fund is capitalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FundMode {
    /// Contributions leave the banks' assets before clearing.
    PreCollected,
    /// Contributions are obligations settled during clearing.
    InClearing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityFundConfig {
    /// Contribution per node, `0 <= y_i <= x_i`; zero for society.
    pub contributions: Vec<f64>,
    pub mode: FundMode,
}

/// Adds a stability fund node `B` (appended last) that owes every bank its shortfall.
pub fn build_stability_fund(
    net: &FinancialNetwork,
    cfg: &StabilityFundConfig,
) -> Result<FinancialNetwork> {
    net.ensure_valid()?;
    let n = net.node_count();
    if cfg.contributions.len() != n {
        return Err(ClearingError::InvalidInput(format!(
            "expected {n} contributions, got {}",
            cfg.contributions.len()
        )));
    }
    for (i, &y) in cfg.contributions.iter().enumerate() {
        if !y.is_finite() || y < 0.0 || y > net.assets[i] {
            return Err(ClearingError::InvalidInput(format!(
                "contribution {y} of node {} is outside [0, {}]",
                net.label(i),
                net.assets[i]
            )));
        }
        if net.is_society(i) && y != 0.0 {
            return Err(ClearingError::InvalidInput(
                "society does not contribute to the stability fund".into(),
            ));
        }
    }
    let fund = n;
    let mut base = DMatrix::zeros(n + 1, n + 1);
    base.view_mut((0, 0), (n, n)).copy_from(&net.liabilities.base);
    let mut assets = net.assets.clone();
    match cfg.mode {
        FundMode::PreCollected => {
            for (x, y) in assets.iter_mut().zip(&cfg.contributions) {
                *x -= y;
            }
            assets.push(cfg.contributions.iter().sum());
        }
        FundMode::InClearing => {
            for (i, &y) in cfg.contributions.iter().enumerate() {
                base[(i, fund)] = y;
            }
            assets.push(0.0);
        }
    }
    let mut contracts = net.liabilities.contracts.clone();
    contracts.extend(
        (0..n)
            .filter(|&i| !net.is_society(i))
            .map(|i| ContingentContract::stability_fund_claim(fund, i)),
    );
    let mut labels = net.labels.clone();
    let mut fund_label = "B".to_string();
    while labels.contains(&fund_label) {
        fund_label.push('\'');
    }
    labels.push(fund_label);
    Ok(FinancialNetwork {
        labels,
        has_society: net.has_society,
        assets,
        liabilities: LiabilitySpec::new(base, contracts),
    })
}
