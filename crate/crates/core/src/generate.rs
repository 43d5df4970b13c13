//! Seeded random networks for property suites and benchmarks.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contracts::{upper_bound_matrix, ContingentContract};
use crate::dynamic::{DynamicSpec, TimedContract};
use crate::error::{ClearingError, Result};
use crate::network::FinancialNetwork;
use crate::static_clearing::{check_nonspeculative, FirmVerdict};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn interbank<R: Rng>(rng: &mut R, banks: usize, density: f64, scale: f64) -> DMatrix<f64> {
    let n = banks + 1;
    let mut base = DMatrix::zeros(n, n);
    for i in 1..n {
        base[(i, 0)] = rng.gen_range(0.1..1.0);
        for j in 1..n {
            if i != j && rng.gen_bool(density) {
                base[(i, j)] = rng.gen_range(0.05..scale);
            }
        }
    }
    base
}

/// Constant obligations with society as node 0; every bank owes society.
pub fn regular_network<R: Rng>(rng: &mut R, banks: usize) -> FinancialNetwork {
    let density = rng.gen_range(0.2..0.8);
    let base = interbank(rng, banks, density, 2.0);
    let mut assets = vec![0.0];
    assets.extend((0..banks).map(|_| rng.gen_range(0.0..2.0)));
    FinancialNetwork::new(true, assets, base)
}

/// Regular network plus insurance written by insurers that stay solvent on the
/// whole wealth box. Candidates are kept only if the falsifier finds no witness
/// in `samples` pairs.
pub fn strictly_nonspeculative_network<R: Rng>(
    rng: &mut R,
    banks: usize,
    samples: usize,
) -> Result<FinancialNetwork> {
    for _ in 0..64 {
        let mut net = regular_network(rng, banks);
        if banks >= 3 && rng.gen_bool(0.7) {
            let mut ids: Vec<usize> = (1..=banks).collect();
            ids.shuffle(rng);
            let writers = rng.gen_range(1..=banks / 3);
            let (insurers, others) = ids.split_at(writers);
            let mut contracts = Vec::new();
            for &w in insurers {
                let refs: Vec<usize> = others.to_vec();
                let k = *refs.choose(rng).expect("nonempty");
                let creditors: Vec<usize> = (0..=banks)
                    .filter(|&j| j != k && j != w && net.liabilities.base[(k, j)] > 0.0)
                    .collect();
                if let Some(&b) = creditors.choose(rng) {
                    contracts.push(ContingentContract::insurance(w, b, k, rng.gen_range(0.1..0.9)));
                }
            }
            net = net.clone().with_contracts(contracts);
            let bound = upper_bound_matrix(&net.liabilities, &net.assets)?;
            for &w in insurers {
                let owed: f64 = bound.row(w).sum();
                net.assets[w] = net.assets[w].max(owed + rng.gen_range(0.1..1.0));
            }
        }
        if net.is_constant() {
            return Ok(net);
        }
        let report = check_nonspeculative(&net, samples, rng.gen())?;
        if matches!(report.firms, FirmVerdict::NotFalsified { .. }) && report.is_strictly_nonspeculative() {
            return Ok(net);
        }
    }
    Err(ClearingError::Numerical(
        "no strictly nonspeculative candidate found".into(),
    ))
}

/// Insurance arranged in layers: writers in layer `l` only reference banks in
/// lower layers, so every insurance chain is acyclic.
pub fn layered_insurance_network<R: Rng>(rng: &mut R, banks: usize, layers: usize) -> FinancialNetwork {
    let net = regular_network(rng, banks);
    let layers = layers.max(2);
    let layer: Vec<usize> = (0..=banks).map(|i| if i == 0 { 0 } else { (i - 1) * layers / banks }).collect();
    let mut contracts = Vec::new();
    for w in 1..=banks {
        for k in 1..=banks {
            if layer[k] >= layer[w] || !rng.gen_bool(0.5) {
                continue;
            }
            let creditors: Vec<usize> = (0..=banks)
                .filter(|&j| j != k && j != w && net.liabilities.base[(k, j)] > 0.0)
                .collect();
            if let Some(&b) = creditors.choose(rng) {
                contracts.push(ContingentContract::insurance(w, b, k, rng.gen_range(0.1..0.5)));
            }
        }
    }
    net.with_contracts(contracts)
}

/// Dynamic spec with society, solvent initial wealths and positive
/// `x_i(t) + L_i0(t)` for every bank and date.
pub fn dynamic_spec<R: Rng>(rng: &mut R, banks: usize, periods: usize) -> DynamicSpec {
    let n = banks + 1;
    let periods = periods.max(1);
    let cash: Vec<Vec<f64>> = (0..periods)
        .map(|_| {
            let mut x = vec![0.0];
            x.extend((0..banks).map(|_| rng.gen_range(0.0..1.0)));
            x
        })
        .collect();
    let base: Vec<DMatrix<f64>> = (0..periods)
        .map(|_| {
            let mut l = interbank(rng, banks, 0.4, 1.5);
            for i in 1..n {
                l[(i, 0)] = rng.gen_range(0.1..0.8);
            }
            l
        })
        .collect();
    let mut contracts = Vec::new();
    if banks >= 3 && periods >= 2 && rng.gen_bool(0.5) {
        let w = rng.gen_range(1..n);
        let k = loop {
            let k = rng.gen_range(1..n);
            if k != w {
                break k;
            }
        };
        let b = (1..n).find(|&b| b != w && b != k).expect("three banks");
        contracts.push(TimedContract {
            time: rng.gen_range(1..periods),
            contract: ContingentContract::insurance(w, b, k, rng.gen_range(0.1..0.9)),
        });
    }
    let mut initial = vec![0.0];
    initial.extend((0..banks).map(|_| rng.gen_range(0.0..1.0)));
    DynamicSpec::new(true, cash, base)
        .with_contracts(contracts)
        .with_initial_wealth(initial)
}

/// Random relabelling that keeps society at node 0; `perm[old] = new`.
pub fn node_permutation<R: Rng>(rng: &mut R, n: usize, has_society: bool) -> Vec<usize> {
    let start = usize::from(has_society);
    let mut tail: Vec<usize> = (start..n).collect();
    tail.shuffle(rng);
    (0..start).chain(tail).collect()
}

fn permute_matrix(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

fn permute_vec<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = v.to_vec();
    for (i, x) in v.iter().enumerate() {
        out[perm[i]] = x.clone();
    }
    out
}

/// Values indexed by new labels mapped back to the original order.
pub fn unpermute<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&p| v[p].clone()).collect()
}

fn permute_contract(c: &ContingentContract, perm: &[usize]) -> ContingentContract {
    ContingentContract {
        writer: perm[c.writer],
        beneficiary: perm[c.beneficiary],
        reference: perm[c.reference],
        ..*c
    }
}

pub fn permute_network(net: &FinancialNetwork, perm: &[usize]) -> FinancialNetwork {
    FinancialNetwork::new(
        net.has_society,
        permute_vec(&net.assets, perm),
        permute_matrix(&net.liabilities.base, perm),
    )
    .with_contracts(net.liabilities.contracts.iter().map(|c| permute_contract(c, perm)).collect())
    .with_labels(permute_vec(&net.labels, perm))
}

pub fn permute_dynamic(spec: &DynamicSpec, perm: &[usize]) -> DynamicSpec {
    DynamicSpec::new(
        spec.has_society,
        spec.cash_flows.iter().map(|x| permute_vec(x, perm)).collect(),
        spec.base_liabilities.iter().map(|l| permute_matrix(l, perm)).collect(),
    )
    .with_contracts(
        spec.contracts
            .iter()
            .map(|tc| TimedContract {
                time: tc.time,
                contract: permute_contract(&tc.contract, perm),
            })
            .collect(),
    )
    .with_policy(spec.removal_policy)
    .with_initial_wealth(permute_vec(&spec.initial_wealth, perm))
    .with_labels(permute_vec(&spec.labels, perm))
}
