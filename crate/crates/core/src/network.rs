//! Network data model, relative liabilities and the baseline Eisenberg-Noe clearing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contracts::{self, ContingentContract, LiabilitySpec};
use crate::error::{ClearingError, Result};
use crate::solver::{default_set, sup_distance, ClearingResult, Direction, SolverOptions};

/// A wealth vector over all nodes, society first when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WealthVector(pub Vec<f64>);

impl WealthVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Componentwise `max(v, 0)`.
    pub fn positive(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.max(0.0)).collect()
    }

    /// Componentwise `max(-v, 0)`.
    pub fn negative(&self) -> Vec<f64> {
        self.0.iter().map(|&v| shortfall(v)).collect()
    }

    /// The vector `-V^-`, which carries exactly the information a sign-dependent
    /// liability function can see.
    pub fn negative_part_only(&self) -> Self {
        Self(self.0.iter().map(|&v| -shortfall(v)).collect())
    }
}

impl std::ops::Deref for WealthVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for WealthVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[inline]
pub fn shortfall(v: f64) -> f64 {
    if v < 0.0 {
        -v
    } else {
        0.0
    }
}

/// Total obligations per node and the pro-rata shares of each debtor's total.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeLiabilities {
    pub pbar: Vec<f64>,
    pub pi: DMatrix<f64>,
}

/// Computes `pbar` and `Pi` from a nominal liability matrix.
///
/// Rows with zero total obligations get the uniform convention: `1/(N-1)` off
/// the diagonal, zero on it, so that every row sums to one.
pub fn total_and_relative_liabilities(l: &DMatrix<f64>) -> Result<RelativeLiabilities> {
    if !l.is_square() {
        return Err(ClearingError::InvalidInput(format!(
            "liability matrix must be square, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    for ((i, j), v) in l.iter().enumerate().map(|(k, v)| ((k % l.nrows(), k / l.nrows()), v)) {
        if !v.is_finite() || *v < 0.0 {
            return Err(ClearingError::InvalidInput(format!(
                "liability entry ({i}, {j}) = {v} is not a finite nonnegative number"
            )));
        }
    }
    Ok(relative_liabilities(l))
}

pub(crate) fn relative_liabilities(l: &DMatrix<f64>) -> RelativeLiabilities {
    let n = l.nrows();
    let pbar: Vec<f64> = (0..n).map(|i| l.row(i).sum()).collect();
    let mut pi = DMatrix::zeros(n, n);
    let uniform = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
    for i in 0..n {
        if pbar[i] > 0.0 {
            for j in 0..n {
                pi[(i, j)] = l[(i, j)] / pbar[i];
            }
        } else {
            for j in 0..n {
                if j != i {
                    pi[(i, j)] = uniform;
                }
            }
        }
    }
    RelativeLiabilities { pbar, pi }
}

/// Realized payments `[pbar - V^-]^+`.
pub fn payments_from_wealth(pbar: &[f64], wealth: &[f64]) -> Vec<f64> {
    pbar.iter()
        .zip(wealth)
        .map(|(&p, &v)| (p - shortfall(v)).max(0.0))
        .collect()
}

/// Interbank network: external assets, base obligations and contingent contracts.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialNetwork {
    pub labels: Vec<String>,
    /// Node 0 is society when set.
    pub has_society: bool,
    pub assets: Vec<f64>,
    pub liabilities: LiabilitySpec,
}

impl FinancialNetwork {
    /// Builds a network with constant obligations and default labels
    /// (`0` for society, `1..=n` for banks).
    pub fn new(has_society: bool, assets: Vec<f64>, base: DMatrix<f64>) -> Self {
        let labels = default_labels(assets.len(), has_society);
        Self {
            labels,
            has_society,
            assets,
            liabilities: LiabilitySpec::new(base, Vec::new()),
        }
    }

    pub fn with_contracts(mut self, contracts: Vec<ContingentContract>) -> Self {
        self.liabilities = LiabilitySpec::new(self.liabilities.base, contracts);
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    pub fn node_count(&self) -> usize {
        self.assets.len()
    }

    pub fn bank_count(&self) -> usize {
        self.node_count() - usize::from(self.has_society)
    }

    pub fn is_society(&self, node: usize) -> bool {
        self.has_society && node == 0
    }

    pub fn label(&self, node: usize) -> &str {
        self.labels.get(node).map(String::as_str).unwrap_or("?")
    }

    pub fn is_constant(&self) -> bool {
        self.liabilities.contracts.is_empty()
    }

    /// Runs [`validate_network`] and turns the first violation into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = validate_network(self);
        match report.violations.first() {
            None => Ok(()),
            Some(first) => Err(ClearingError::InvalidInput(if report.violations.len() == 1 {
                first.clone()
            } else {
                format!("{first} (and {} more)", report.violations.len() - 1)
            })),
        }
    }
}

pub(crate) fn default_labels(nodes: usize, has_society: bool) -> Vec<String> {
    (0..nodes)
        .map(|i| {
            if has_society {
                i.to_string()
            } else {
                (i + 1).to_string()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every structural problem with a network. An empty violation list
/// means all solvers will accept it.
pub fn validate_network(net: &FinancialNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = net.node_count();
    let base = &net.liabilities.base;
    if net.labels.len() != n {
        report
            .violations
            .push(format!("expected {n} node labels, got {}", net.labels.len()));
    }
    if base.nrows() != n || base.ncols() != n {
        report.violations.push(format!(
            "liability matrix is {}x{} but the network has {n} nodes",
            base.nrows(),
            base.ncols()
        ));
        return report;
    }
    if net.has_society && n == 0 {
        report.violations.push("society flag set on an empty network".into());
        return report;
    }
    let mut seen = std::collections::HashSet::new();
    for label in &net.labels {
        if !seen.insert(label.as_str()) {
            report.violations.push(format!("duplicate node id {label}"));
        }
    }
    for (i, &x) in net.assets.iter().enumerate() {
        if !x.is_finite() {
            report
                .violations
                .push(format!("non-finite external assets at node {}", net.label(i)));
        } else if x < 0.0 {
            report
                .violations
                .push(format!("negative external assets at node {}", net.label(i)));
        }
    }
    for i in 0..n {
        for j in 0..n {
            let l = base[(i, j)];
            if !l.is_finite() {
                report.violations.push(format!(
                    "non-finite liability from node {} to node {}",
                    net.label(i),
                    net.label(j)
                ));
                continue;
            }
            if l < 0.0 {
                report.violations.push(format!(
                    "negative liability from node {} to node {}",
                    net.label(i),
                    net.label(j)
                ));
            }
            if i == j && l != 0.0 {
                report
                    .violations
                    .push(format!("nonzero diagonal at node {}", net.label(i)));
            } else if net.is_society(i) && l != 0.0 {
                report.violations.push(format!(
                    "society has liabilities to node {}",
                    net.label(j)
                ));
            }
        }
    }
    contracts::validate_contracts(net, &mut report);
    report
}

/// Clears a network with constant obligations.
///
/// Runs the classical fictitious default loop in wealth form: the default set
/// grows until stable and each round solves `(I - Pi^T Lambda) V = x + Pi^T pbar - pbar`
/// directly. If a round hits a singular system (closed defaulting cycles with no
/// outside creditor) the routine falls back to Picard iteration on payments from
/// `pbar`, which reaches the greatest clearing vector.
pub fn clear_eisenberg_noe(net: &FinancialNetwork, opts: &SolverOptions) -> Result<ClearingResult> {
    net.ensure_valid()?;
    if !net.is_constant() {
        return Err(ClearingError::InvalidInput(
            "Eisenberg-Noe clearing needs constant obligations; use the static solver for contracts"
                .into(),
        ));
    }
    let n = net.node_count();
    let rel = relative_liabilities(&net.liabilities.base);
    let x = &net.assets;
    let pi_t = rel.pi.transpose();
    let pbar = DVector::from_column_slice(&rel.pbar);
    let rhs = DVector::from_column_slice(x) + &pi_t * &pbar - &pbar;

    let mut wealth: Vec<f64> = rhs.iter().copied().collect();
    let mut defaulted = default_set(&wealth);
    let mut rounds = 0;
    let mut singular = false;
    while !defaulted.is_empty() && rounds <= n {
        rounds += 1;
        let mut system = DMatrix::<f64>::identity(n, n);
        for &d in &defaulted {
            for j in 0..n {
                system[(j, d)] -= pi_t[(j, d)];
            }
        }
        match system.lu().solve(&rhs) {
            Some(sol) if sol.iter().all(|v| v.is_finite()) => {
                wealth = sol.iter().copied().collect();
            }
            _ => {
                singular = true;
                break;
            }
        }
        let next = default_set(&wealth);
        if next == defaulted {
            break;
        }
        defaulted = next;
    }

    let mut payments = payments_from_wealth(&rel.pbar, &wealth);
    let mut residual = payment_residual(x, &rel, &payments);
    let mut iterations = rounds;
    if singular || residual > opts.tolerance {
        let (p, res, iters) = picard_payments(x, &rel, opts);
        payments = p;
        residual = res;
        iterations = rounds + iters;
        let inflow = &pi_t * DVector::from_column_slice(&payments);
        wealth = (0..n).map(|i| x[i] + inflow[i] - rel.pbar[i]).collect();
        if residual > opts.tolerance {
            return Err(ClearingError::NotConverged {
                iterations,
                residual,
                last: wealth,
                context: "Eisenberg-Noe payment iteration".into(),
            });
        }
    }
    Ok(ClearingResult {
        defaults: default_set(&wealth),
        wealth,
        payments,
        residual,
        iterations,
        direction: Direction::Greatest,
        converged: true,
        non_monotone: false,
        warnings: Vec::new(),
    })
}

/// Sup-norm defect of `p = pbar ∧ (x + Pi^T p)`.
pub fn payment_residual(x: &[f64], rel: &RelativeLiabilities, p: &[f64]) -> f64 {
    let n = x.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let available: f64 = x[i] + (0..n).map(|j| rel.pi[(j, i)] * p[j]).sum::<f64>();
        let target = rel.pbar[i].min(available);
        worst = worst.max((p[i] - target).abs());
    }
    worst
}

fn picard_payments(
    x: &[f64],
    rel: &RelativeLiabilities,
    opts: &SolverOptions,
) -> (Vec<f64>, f64, usize) {
    let n = x.len();
    let mut p = rel.pbar.clone();
    for k in 1..=opts.max_iterations {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let available = x[i] + (0..n).map(|j| rel.pi[(j, i)] * p[j]).sum::<f64>();
                rel.pbar[i].min(available)
            })
            .collect();
        let step = sup_distance(&next, &p);
        p = next;
        if step <= opts.tolerance * 1e-2 {
            return (p.clone(), payment_residual(x, rel, &p), k);
        }
    }
    let res = payment_residual(x, rel, &p);
    (p, res, opts.max_iterations)
}
