mod common;

use common::*;
use contagion_core::contracts::{evaluate_liabilities, upper_bound_matrix, wealth_box};
use contagion_core::generate::{
    dynamic_spec, layered_insurance_network, node_permutation, permute_network, regular_network,
    rng, strictly_nonspeculative_network, unpermute,
};
use contagion_core::network::shortfall;
use contagion_core::scenario::{
    parse_scenario_str, ContractEntry, LiabilityEntry, Meta, Mode, NetworkSection, NodeEntry, Num,
    ScenarioFile, SolverSection, SCHEMA,
};
use contagion_core::{
    clear_dynamic, clear_static, conservation_audit_dynamic, conservation_audit_static,
    fictitious_default_static, total_and_relative_liabilities, Direction, FinancialNetwork,
    SolverOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn sample_in_box<R: Rng>(r: &mut R, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&lo, &hi)| if hi > lo { r.gen_range(lo..=hi) } else { lo })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_liabilities_are_row_stochastic(
        n in 2usize..7,
        entries in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], 49),
    ) {
        let l = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { entries[i * 7 + j] });
        let rel = total_and_relative_liabilities(&l).unwrap();
        for i in 0..n {
            let row: f64 = rel.pi.row(i).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12, "row {i} sums to {row}");
            prop_assert!(rel.pi.row(i).iter().all(|&p| p >= 0.0));
            let expected: f64 = l.row(i).sum();
            prop_assert_eq!(rel.pbar[i], expected);
        }
    }

    #[test]
    fn payments_are_bounded_by_obligations(seed in any::<u64>(), banks in 1usize..8) {
        let net = regular_network(&mut rng(seed), banks);
        let r = clear_static(&net, Direction::Greatest, &opts()).unwrap();
        let pbar: Vec<f64> = (0..net.node_count()).map(|i| net.liabilities.base.row(i).sum()).collect();
        for i in 0..net.node_count() {
            prop_assert!(r.payments[i] >= 0.0 && r.payments[i] <= pbar[i]);
            prop_assert_eq!(r.payments[i], (pbar[i] - shortfall(r.wealth[i])).max(0.0));
            if r.wealth[i] >= 0.0 {
                prop_assert_eq!(r.payments[i], pbar[i]);
            }
        }
    }

    #[test]
    fn obligations_depend_only_on_shortfalls(seed in any::<u64>(), banks in 2usize..8) {
        let mut r = rng(seed);
        let net = layered_insurance_network(&mut r, banks, 3);
        let bx = wealth_box(&net).unwrap();
        let v = sample_in_box(&mut r, &bx.lower, &bx.upper);
        let negative: Vec<f64> = v.iter().map(|&x| -shortfall(x)).collect();
        prop_assert_eq!(
            evaluate_liabilities(&net.liabilities, &v).unwrap(),
            evaluate_liabilities(&net.liabilities, &negative).unwrap()
        );
    }

    #[test]
    fn contract_order_does_not_matter(seed in any::<u64>(), banks in 2usize..8) {
        let mut r = rng(seed);
        let net = layered_insurance_network(&mut r, banks, 3);
        let mut shuffled = net.liabilities.contracts.clone();
        shuffled.shuffle(&mut r);
        let other = FinancialNetwork::new(true, net.assets.clone(), net.liabilities.base.clone())
            .with_contracts(shuffled);
        let bx = wealth_box(&net).unwrap();
        let v = sample_in_box(&mut r, &bx.lower, &bx.upper);
        prop_assert_eq!(
            evaluate_liabilities(&net.liabilities, &v).unwrap(),
            evaluate_liabilities(&other.liabilities, &v).unwrap()
        );
    }

    #[test]
    fn obligations_stay_below_upper_bound(seed in any::<u64>(), banks in 2usize..8) {
        let mut r = rng(seed);
        let net = layered_insurance_network(&mut r, banks, 3);
        let bound = upper_bound_matrix(&net.liabilities, &net.assets).unwrap();
        let bx = wealth_box(&net).unwrap();
        for _ in 0..8 {
            let v = sample_in_box(&mut r, &bx.lower, &bx.upper);
            let l = evaluate_liabilities(&net.liabilities, &v).unwrap();
            for (a, b) in l.iter().zip(bound.iter()) {
                prop_assert!(*a >= 0.0 && *a <= b + 1e-12, "{a} exceeds {b}");
            }
        }
    }

    #[test]
    fn clearing_wealth_lies_in_box(seed in any::<u64>(), banks in 2usize..7) {
        let net = strictly_nonspeculative_network(&mut rng(seed), banks, 100).unwrap();
        let r = clear_static(&net, Direction::Greatest, &opts()).unwrap();
        prop_assert!(wealth_box(&net).unwrap().contains(&r.wealth, 1e-8));
        prop_assert!(conservation_audit_static(&net, &r.wealth).holds);
    }

    #[test]
    fn default_sets_grow(seed in any::<u64>(), banks in 1usize..8) {
        let net = strictly_nonspeculative_network(&mut rng(seed), banks, 100).unwrap();
        let fd = fictitious_default_static(&net, &opts()).unwrap();
        for pair in fd.default_sets.windows(2) {
            prop_assert!(pair[0].iter().all(|i| pair[1].contains(i)), "{:?}", fd.default_sets);
        }
        prop_assert!(fd.rounds <= banks);
        let greatest = clear_static(&net, Direction::Greatest, &opts()).unwrap();
        prop_assert!(sup(&fd.result.wealth, &greatest.wealth) <= GOLDEN);
    }

    #[test]
    fn static_solution_is_relabelling_invariant(seed in any::<u64>(), banks in 1usize..8) {
        let mut r = rng(seed);
        let net = regular_network(&mut r, banks);
        let perm = node_permutation(&mut r, net.node_count(), true);
        let a = clear_static(&net, Direction::Greatest, &opts()).unwrap();
        let b = clear_static(&permute_network(&net, &perm), Direction::Greatest, &opts()).unwrap();
        prop_assert!(sup(&a.wealth, &unpermute(&b.wealth, &perm)) <= 1e-10);
    }

    #[test]
    fn wealth_rises_with_assets(seed in any::<u64>(), banks in 1usize..8) {
        let mut r = rng(seed);
        let net = regular_network(&mut r, banks);
        let mut richer = net.clone();
        for x in richer.assets.iter_mut().skip(1) {
            *x += r.gen_range(0.0..0.5);
        }
        let a = clear_static(&net, Direction::Greatest, &opts()).unwrap();
        let b = clear_static(&richer, Direction::Greatest, &opts()).unwrap();
        for (lo, hi) in a.wealth.iter().zip(&b.wealth) {
            prop_assert!(*hi >= lo - 1e-8);
        }
    }

    #[test]
    fn dynamic_equations_agree(seed in any::<u64>(), banks in 1usize..7, periods in 1usize..6) {
        let spec = dynamic_spec(&mut rng(seed), banks, periods);
        let state = clear_dynamic(&spec, &opts()).unwrap();
        for p in &state.periods {
            prop_assert!(p.residual <= 1e-8, "t={} residual {:e}", p.time, p.residual);
            prop_assert!(p.recursion_residual <= 1e-8, "t={} recursion {:e}", p.time, p.recursion_residual);
            prop_assert!(p.inner_rounds <= banks);
            for pair in p.default_sets.windows(2) {
                prop_assert!(pair[0].iter().all(|i| pair[1].contains(i)));
            }
        }
        prop_assert!(state.total_inner_rounds <= banks * periods);
        prop_assert!(conservation_audit_dynamic(&spec, &state).holds);
    }

    #[test]
    fn digital_chain_terminal_ignores_split(eps in 0.0f64..=1.0) {
        let state = clear_dynamic(&two_dates(&digital_chain(), vec![eps, 0.0, 1.0]), &opts()).unwrap();
        prop_assert!(sup(state.terminal_wealth(), &[0.0, 0.5, 2.5]) <= GOLDEN);
    }

    #[test]
    fn mutual_cds_terminal_ignores_split(eps in 0.0f64..=(3.0 / 16.0)) {
        let state = clear_dynamic(&two_dates(&mutual_cds(), vec![0.0, eps, 0.0]), &opts()).unwrap();
        prop_assert!(sup(state.terminal_wealth(), &[0.0, 3.0 / 16.0, 0.0]) <= GOLDEN);
    }

    #[test]
    fn scenario_round_trip(seed in any::<u64>(), banks in 1usize..7, dynamic in any::<bool>()) {
        let mut r = rng(seed);
        let net = layered_insurance_network(&mut r, banks, 2);
        let file = scenario_from(&net, dynamic);
        let text = file.to_json();
        let parsed = parse_scenario_str(&text).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.to_json(), text);
        let rebuilt = parsed.to_network().unwrap();
        prop_assert_eq!(rebuilt.assets, net.assets);
        prop_assert_eq!(rebuilt.liabilities, net.liabilities);
    }
}

fn scenario_from(net: &FinancialNetwork, dynamic: bool) -> ScenarioFile {
    let n = net.node_count();
    let mut liabilities = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let amount = net.liabilities.base[(i, j)];
            if amount > 0.0 {
                liabilities.push(LiabilityEntry {
                    from: net.labels[i].clone(),
                    to: net.labels[j].clone(),
                    amount: Num(amount),
                    time: 0,
                });
            }
        }
    }
    ScenarioFile {
        schema: SCHEMA.into(),
        meta: Meta {
            name: "generated".into(),
            description: String::new(),
        },
        mode: if dynamic { Mode::Dynamic } else { Mode::Static },
        network: NetworkSection {
            has_society: net.has_society,
            nodes: net
                .labels
                .iter()
                .zip(&net.assets)
                .map(|(id, &a)| NodeEntry {
                    id: id.clone(),
                    assets: Some(Num(a)),
                    cash_flows: None,
                    epsilon_split: None,
                })
                .collect(),
        },
        liabilities,
        contracts: net
            .liabilities
            .contracts
            .iter()
            .map(|c| ContractEntry {
                kind: c.kind,
                writer: net.labels[c.writer].clone(),
                beneficiary: net.labels[c.beneficiary].clone(),
                reference: Some(net.labels[c.reference].clone()),
                eta: Some(Num(c.eta)),
                tau: None,
                notional: None,
                time: Some(1),
            })
            .collect(),
        solver: SolverSection::default(),
        horizon: None,
        epsilon: None,
    }
}
