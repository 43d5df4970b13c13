#![allow(dead_code)]

use contagion_core::{ContingentContract, DynamicSpec, FinancialNetwork, TimedContract};
use nalgebra::DMatrix;

pub const GOLDEN: f64 = 1e-8;

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert!(sup(a, b) <= tol, "{a:?} vs {b:?} (tol {tol:e})");
}

pub fn positive_sum(v: &[f64]) -> f64 {
    v.iter().map(|x| x.max(0.0)).sum()
}

/// Mutual unit debt between banks 2 and 3, bank 2 holds 3/16, and writes a CDS
/// on bank 3 to bank 1.
pub fn mutual_cds() -> FinancialNetwork {
    let mut l = DMatrix::zeros(3, 3);
    l[(1, 2)] = 1.0;
    l[(2, 1)] = 1.0;
    FinancialNetwork::new(false, vec![0.0, 3.0 / 16.0, 0.0], l)
        .with_contracts(vec![ContingentContract::cds(1, 0, 2, 1.0)])
}

fn chain_base() -> DMatrix<f64> {
    let mut l = DMatrix::zeros(3, 3);
    l[(0, 1)] = 2.0;
    l[(1, 2)] = 1.5;
    l
}

pub fn plain_chain() -> FinancialNetwork {
    FinancialNetwork::new(false, vec![1.0, 0.0, 2.0], chain_base())
}

/// Chain 1 -> 2 -> 3 with a digital CDS on bank 2 paying bank 1.
pub fn digital_chain() -> FinancialNetwork {
    plain_chain().with_contracts(vec![ContingentContract::digital_cds(2, 0, 1, 1.0)])
}

/// Chain 1 -> 2 -> 3 with bank 3 covering bank 1's own shortfall.
pub fn self_insured_chain() -> FinancialNetwork {
    plain_chain().with_contracts(vec![ContingentContract::self_insurance(2, 0, 1.0)])
}

/// Two-date reading: base debts at date 0, contract at date 1.
pub fn two_dates(net: &FinancialNetwork, x0: Vec<f64>) -> DynamicSpec {
    let n = net.node_count();
    let x1: Vec<f64> = net.assets.iter().zip(&x0).map(|(a, b)| a - b).collect();
    DynamicSpec::new(net.has_society, vec![x0, x1], vec![net.liabilities.base.clone(), DMatrix::zeros(n, n)])
        .with_contracts(
            net.liabilities
                .contracts
                .iter()
                .map(|&contract| TimedContract { time: 1, contract })
                .collect(),
        )
}

/// Payment iteration `p <- min(pbar, (x + Pi^T p)^+)` from `p = pbar`,
/// written against the raw matrix.
pub fn payment_oracle(assets: &[f64], l: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = assets.len();
    let pbar: Vec<f64> = (0..n).map(|i| (0..n).map(|j| l[(i, j)]).sum()).collect();
    let share = |i: usize, j: usize| if pbar[i] > 0.0 { l[(i, j)] / pbar[i] } else { 0.0 };
    let mut p = pbar.clone();
    for _ in 0..1_000_000 {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let inflow: f64 = (0..n).map(|j| share(j, i) * p[j]).sum();
                (assets[i] + inflow).max(0.0).min(pbar[i])
            })
            .collect();
        let gap = sup(&next, &p);
        p = next;
        if gap <= 1e-14 {
            break;
        }
    }
    let wealth: Vec<f64> = (0..n)
        .map(|i| assets[i] + (0..n).map(|j| share(j, i) * p[j]).sum::<f64>() - pbar[i])
        .collect();
    (p, wealth)
}
