//! Static clearing with wealth-contingent obligations: the clearing map, corner
//! iterations, the fictitious default algorithm, the nonspeculative falsifier and
//! nonexistence diagnosis.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contracts::{evaluate_liabilities, wealth_box, ContractKind, LiabilitySpec, WealthBox};
use crate::error::{ClearingError, Result};
use crate::network::{
    payments_from_wealth, relative_liabilities, shortfall, FinancialNetwork, RelativeLiabilities,
};
use crate::solver::{default_set, sup_distance, ClearingResult, Direction, SolverOptions};

/// Slack allowed when comparing map values in the falsifier.
const MONOTONICITY_SLACK: f64 = 1e-12;

fn totals_at(net: &FinancialNetwork, wealth: &[f64]) -> Result<RelativeLiabilities> {
    let l = evaluate_liabilities(&net.liabilities, wealth)?;
    Ok(relative_liabilities(&l))
}

/// `x + Pi^T pay - pbar` for given totals and payments.
fn wealth_from_payments(x: &[f64], rel: &RelativeLiabilities, pay: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).map(|j| rel.pi[(j, i)] * pay[j]).sum();
            x[i] + inflow - rel.pbar[i]
        })
        .collect()
}

/// The clearing map `x + Pi(V)^T [pbar(V) - V^-]^+ - pbar(V)`.
pub fn clearing_map(net: &FinancialNetwork, wealth: &[f64]) -> Result<Vec<f64>> {
    let rel = totals_at(net, wealth)?;
    let pay = payments_from_wealth(&rel.pbar, wealth);
    Ok(wealth_from_payments(&net.assets, &rel, &pay))
}

/// Sup-norm fixed-point defect of `wealth`.
pub fn residual(net: &FinancialNetwork, wealth: &[f64]) -> Result<f64> {
    Ok(sup_distance(&clearing_map(net, wealth)?, wealth))
}

/// Society's inflow `sum_j pi_j0(V) [pbar_j(V) - V_j^-]^+`.
pub fn society_inflow(net: &FinancialNetwork, wealth: &[f64]) -> Result<f64> {
    if !net.has_society {
        return Ok(0.0);
    }
    let rel = totals_at(net, wealth)?;
    let pay = payments_from_wealth(&rel.pbar, wealth);
    Ok((1..net.node_count()).map(|j| rel.pi[(j, 0)] * pay[j]).sum())
}

fn finish(
    net: &FinancialNetwork,
    wealth: Vec<f64>,
    residual: f64,
    iterations: usize,
    direction: Direction,
    non_monotone: bool,
) -> Result<ClearingResult> {
    let rel = totals_at(net, &wealth)?;
    let mut warnings = Vec::new();
    if non_monotone {
        warnings.push(
            "iterates were not monotone: the system is likely speculative, no uniqueness or extremality guarantee"
                .to_string(),
        );
    }
    Ok(ClearingResult {
        payments: payments_from_wealth(&rel.pbar, &wealth),
        defaults: default_set(&wealth),
        wealth,
        residual,
        iterations,
        direction,
        converged: true,
        non_monotone,
        warnings,
    })
}

/// Picard iteration trace used by the corner solvers and the diagnosis.
struct PicardRun {
    wealth: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
    non_monotone: bool,
    cycle: Option<Vec<Vec<f64>>>,
    trace: Vec<Vec<f64>>,
}

/// Iterates `map` from `start`. `descending` is the expected direction of a
/// monotone sequence (`Some(true)` from the top corner). With `detect_cycles`
/// the run stops at the first repeating window of iterates.
fn picard<F>(
    map: F,
    start: Vec<f64>,
    opts: &SolverOptions,
    descending: Option<bool>,
    detect_cycles: bool,
) -> Result<PicardRun>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let window = opts.cycle_window.max(2);
    let mut recent: VecDeque<Vec<f64>> = VecDeque::with_capacity(2 * window + 1);
    let mut trace = Vec::new();
    let mut current = start;
    let mut non_monotone = false;
    let mut best = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let next = map(&current)?;
        let res = sup_distance(&next, &current);
        best = best.min(res);
        if res <= opts.tolerance {
            return Ok(PicardRun {
                wealth: current,
                residual: res,
                iterations: it,
                converged: true,
                non_monotone,
                cycle: None,
                trace,
            });
        }
        if let Some(down) = descending {
            let wrong_way = current.iter().zip(&next).any(|(&a, &b)| {
                if down {
                    b > a + MONOTONICITY_SLACK
                } else {
                    b < a - MONOTONICITY_SLACK
                }
            });
            non_monotone |= wrong_way;
        }
        if trace.len() < 64 {
            trace.push(current.clone());
        }
        recent.push_back(current);
        if recent.len() > 2 * window {
            recent.pop_front();
        }
        if detect_cycles {
            if let Some(cycle) = find_period(&recent, &next, window, opts.cycle_tolerance) {
                return Ok(PicardRun {
                    wealth: next,
                    residual: best,
                    iterations: it + 1,
                    converged: false,
                    non_monotone,
                    cycle: Some(cycle),
                    trace,
                });
            }
        }
        current = next;
    }
    Ok(PicardRun {
        wealth: current,
        residual: best,
        iterations: opts.max_iterations,
        converged: false,
        non_monotone,
        cycle: None,
        trace,
    })
}

/// Smallest period `p >= 2` such that the last `p` transitions repeat the
/// previous `p`, returning one full period of states.
fn find_period(
    recent: &VecDeque<Vec<f64>>,
    next: &[f64],
    window: usize,
    tol: f64,
) -> Option<Vec<Vec<f64>>> {
    let mut seq: Vec<&[f64]> = recent.iter().map(Vec::as_slice).collect();
    seq.push(next);
    let len = seq.len();
    'period: for p in 2..=window {
        if len < 2 * p {
            break;
        }
        for m in 0..p {
            if sup_distance(seq[len - 1 - m], seq[len - 1 - m - p]) > tol {
                continue 'period;
            }
        }
        // a true period must not collapse to a fixed point
        if sup_distance(seq[len - 1], seq[len - 2]) <= tol {
            return None;
        }
        return Some(seq[len - p..].iter().map(|s| s.to_vec()).collect());
    }
    None
}

/// Damping factors tried when the plain iteration oscillates.
const DAMPING: [f64; 3] = [0.5, 0.25, 0.1];

/// Iterates `(1 - a) V + a F(V)` from `start` for each damping factor and
/// returns the first limit certified by the undamped residual of `map`.
fn damped_limit<F>(map: F, start: Vec<f64>, opts: &SolverOptions) -> Result<Option<(Vec<f64>, f64, usize)>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut spent = 0;
    for alpha in DAMPING {
        let damped = |v: &[f64]| -> Result<Vec<f64>> {
            let image = map(v)?;
            Ok(v.iter()
                .zip(&image)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect())
        };
        let damped_opts = SolverOptions {
            tolerance: alpha * opts.tolerance,
            ..*opts
        };
        let run = picard(damped, start.clone(), &damped_opts, None, false)?;
        spent += run.iterations;
        if run.converged {
            let res = sup_distance(&map(&run.wealth)?, &run.wealth);
            if res <= opts.tolerance {
                return Ok(Some((run.wealth, res, spent)));
            }
        }
    }
    Ok(None)
}

fn damped_search(
    net: &FinancialNetwork,
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<Option<(Vec<f64>, f64, usize)>> {
    damped_limit(|v| clearing_map(net, v), start, opts)
}

fn corner(bx: &WealthBox, direction: Direction) -> Vec<f64> {
    match direction {
        Direction::Least => bx.lower.clone(),
        _ => bx.upper.clone(),
    }
}

/// Picard iteration of the clearing map from a corner of the wealth box.
///
/// `Greatest` (and `Single`) start at the top corner, `Least` at the bottom one.
/// For a nonspeculative network the iterates are monotone and the limits are the
/// extremal fixed points. If the iterates oscillate the search is repeated with
/// damping from the same corner; any limit found that way is certified by its
/// residual only and the result is flagged.
pub fn clear_static(
    net: &FinancialNetwork,
    direction: Direction,
    opts: &SolverOptions,
) -> Result<ClearingResult> {
    net.ensure_valid()?;
    let bx = wealth_box(net)?;
    let run = picard(
        |v| clearing_map(net, v),
        corner(&bx, direction),
        opts,
        Some(direction != Direction::Least),
        false,
    )?;
    if run.converged {
        return finish(net, run.wealth, run.residual, run.iterations, direction, run.non_monotone);
    }
    if run.non_monotone {
        if let Some((wealth, res, iters)) = damped_search(net, corner(&bx, direction), opts)? {
            let mut result = finish(net, wealth, res, run.iterations + iters, direction, true)?;
            result
                .warnings
                .push("plain iteration oscillated; limit found by damped iteration".into());
            return Ok(result);
        }
    }
    Err(ClearingError::NotConverged {
        iterations: run.iterations,
        residual: run.residual,
        last: run.wealth,
        context: format!("{direction:?} corner iteration of the clearing map"),
    })
}

/// Result of the static fictitious default algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FictitiousDefaultResult {
    pub result: ClearingResult,
    /// Number of inner fixed-point solves.
    pub rounds: usize,
    /// Default set `D^k` of every round, starting with `D^1`.
    pub default_sets: Vec<Vec<usize>>,
}

/// Fictitious default algorithm for contingent obligations.
///
/// Starts from `x + Pi(0)^T pbar(0) - pbar(0)`, grows the set `D` of insolvent
/// banks and, per round, solves for the maximal `V` with
/// `V = x + Pi(LV)^T [pbar(LV) + LV]^+ - pbar(LV)` where `L` selects `D`.
pub fn fictitious_default_static(
    net: &FinancialNetwork,
    opts: &SolverOptions,
) -> Result<FictitiousDefaultResult> {
    net.ensure_valid()?;
    let n = net.node_count();
    let banks = net.bank_count();
    let bx = wealth_box(net)?;
    let x = &net.assets;

    let zero = vec![0.0; n];
    let rel0 = totals_at(net, &zero)?;
    let mut wealth = wealth_from_payments(x, &rel0, &rel0.pbar);
    let mut previous: Vec<usize> = Vec::new();
    let mut default_sets = Vec::new();
    let mut iterations = 0;
    let mut damped = false;
    for k in 1.. {
        let current: Vec<usize> = default_set(&wealth)
            .into_iter()
            .filter(|&i| !net.is_society(i))
            .collect();
        default_sets.push(current.clone());
        if current == previous {
            let rounds = k - 1;
            let res = residual(net, &wealth)?;
            let mut result = finish(net, wealth, res, iterations, Direction::Greatest, damped)?;
            result.iterations = iterations;
            return Ok(FictitiousDefaultResult {
                result,
                rounds,
                default_sets,
            });
        }
        if k > banks + 1 {
            break;
        }
        let mask: Vec<bool> = (0..n).map(|i| current.binary_search(&i).is_ok()).collect();
        let inner = |v: &[f64]| -> Result<Vec<f64>> {
            let selected: Vec<f64> = (0..n).map(|i| if mask[i] { v[i] } else { 0.0 }).collect();
            let rel = totals_at(net, &selected)?;
            let pay: Vec<f64> = (0..n)
                .map(|i| (rel.pbar[i] + selected[i]).max(0.0))
                .collect();
            Ok(wealth_from_payments(x, &rel, &pay))
        };
        let run = picard(&inner, bx.upper.clone(), opts, Some(true), false)?;
        iterations += run.iterations;
        damped |= run.non_monotone;
        wealth = if run.converged {
            run.wealth
        } else if let Some((limit, _, iters)) = damped_limit(&inner, bx.upper.clone(), opts)? {
            iterations += iters;
            damped = true;
            limit
        } else {
            return Err(ClearingError::Numerical(format!(
                "inner fixed point of round {k} did not converge (residual {:e}) for default set {:?}",
                run.residual,
                current.iter().map(|&i| net.label(i)).collect::<Vec<_>>()
            )));
        };
        previous = current;
    }
    Err(ClearingError::Numerical(format!(
        "default sets failed to stabilise within {} rounds",
        banks + 1
    )))
}

/// A pair `V <= V'` on which firm `firm`'s clearing map decreases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub firm: usize,
    pub map_at_lower: f64,
    pub map_at_upper: f64,
}

/// A pair `V <= V'`, `V != V'` in the negative orthant where society's inflow does not rise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocietyWitness {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub inflow_at_lower: f64,
    pub inflow_at_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FirmVerdict {
    NotFalsified { samples: usize },
    Falsified(MonotonicityWitness),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SocietyVerdict {
    NotApplicable,
    NotFalsified { samples: usize },
    Falsified(SocietyWitness),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeculationReport {
    pub firms: FirmVerdict,
    pub society: SocietyVerdict,
}

impl SpeculationReport {
    pub fn is_speculative(&self) -> bool {
        matches!(self.firms, FirmVerdict::Falsified(_))
    }

    pub fn is_strictly_nonspeculative(&self) -> bool {
        matches!(self.firms, FirmVerdict::NotFalsified { .. })
            && matches!(self.society, SocietyVerdict::NotFalsified { .. })
    }
}

/// Draws an ordered pair `lo <= hi` inside `[floor, ceil]`, alternating
/// single-coordinate and full-vector gaps.
fn ordered_pair(rng: &mut ChaCha8Rng, floor: &[f64], ceil: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = floor.len();
    let lo: Vec<f64> = (0..n)
        .map(|i| {
            if ceil[i] > floor[i] {
                rng.gen_range(floor[i]..=ceil[i])
            } else {
                floor[i]
            }
        })
        .collect();
    let mut hi = lo.clone();
    if rng.gen_bool(0.5) {
        let i = rng.gen_range(0..n);
        hi[i] += rng.gen::<f64>() * (ceil[i] - lo[i]);
    } else {
        for i in 0..n {
            hi[i] += rng.gen::<f64>() * (ceil[i] - lo[i]);
        }
    }
    (lo, hi)
}

/// Sampling falsifier for the nonspeculative property.
///
/// Draws `samples` ordered pairs in the wealth box and looks for a firm whose
/// clearing-map value drops as wealths rise; separately tests that society's
/// inflow strictly increases on the negative part of the box. Deterministic
/// for a given `seed`.
pub fn check_nonspeculative(
    net: &FinancialNetwork,
    samples: usize,
    seed: u64,
) -> Result<SpeculationReport> {
    net.ensure_valid()?;
    if samples == 0 {
        return Err(ClearingError::InvalidInput("sample count must be positive".into()));
    }
    let bx = wealth_box(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut firms = FirmVerdict::NotFalsified { samples };
    for _ in 0..samples {
        let (lo, hi) = ordered_pair(&mut rng, &bx.lower, &bx.upper);
        let a = clearing_map(net, &lo)?;
        let b = clearing_map(net, &hi)?;
        if let Some(firm) = (0..a.len()).find(|&i| a[i] > b[i] + MONOTONICITY_SLACK) {
            firms = FirmVerdict::Falsified(MonotonicityWitness {
                map_at_lower: a[firm],
                map_at_upper: b[firm],
                lower: lo,
                upper: hi,
                firm,
            });
            break;
        }
    }

    let society = if net.has_society {
        let floor: Vec<f64> = bx.lower.iter().map(|&v| v.min(0.0)).collect();
        let ceil: Vec<f64> = bx.upper.iter().map(|&v| v.min(0.0)).collect();
        let mut verdict = SocietyVerdict::NotFalsified { samples };
        for _ in 0..samples {
            let (lo, hi) = ordered_pair(&mut rng, &floor, &ceil);
            // society's own wealth does not enter its inflow
            if (1..lo.len()).all(|i| hi[i] <= lo[i]) {
                continue;
            }
            let a = society_inflow(net, &lo)?;
            let b = society_inflow(net, &hi)?;
            if b <= a {
                verdict = SocietyVerdict::Falsified(SocietyWitness {
                    lower: lo,
                    upper: hi,
                    inflow_at_lower: a,
                    inflow_at_upper: b,
                });
                break;
            }
        }
        verdict
    } else {
        SocietyVerdict::NotApplicable
    };
    Ok(SpeculationReport { firms, society })
}

/// One indicator pattern of a system with digital contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    /// Reference nodes whose indicator is fixed by this branch.
    pub nodes: Vec<usize>,
    /// `true` where the branch assumes the reference has negative wealth.
    pub assumed_negative: Vec<bool>,
    /// Fixed point of the branch system, when one was found.
    pub wealth: Option<Vec<f64>>,
    pub consistent: bool,
    /// The branch solution is unique and contradicts the assumed pattern.
    pub conclusive: bool,
    /// Nodes whose sign contradicts the assumption.
    pub violated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceDiagnosis {
    /// Recurring states of the clearing-map iteration.
    pub cycle: Vec<Vec<f64>>,
    pub period: usize,
    /// Exhaustive branch records; every branch is conclusive and inconsistent.
    pub certificate: Vec<BranchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconclusiveReport {
    pub reason: String,
    pub cycle: Vec<Vec<f64>>,
    pub period: usize,
    pub branches: Vec<BranchRecord>,
    /// Leading iterates of the clearing-map iteration.
    pub trace: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StaticOutcome {
    FixedPoint(ClearingResult),
    Nonexistent(NonexistenceDiagnosis),
    Inconclusive(InconclusiveReport),
}

impl StaticOutcome {
    pub fn fixed_point(&self) -> Option<&ClearingResult> {
        match self {
            Self::FixedPoint(r) => Some(r),
            _ => None,
        }
    }
}

/// Replaces every digital contract on a node in `nodes` by its payout under `pattern`.
fn fix_indicators(spec: &LiabilitySpec, nodes: &[usize], pattern: &[bool]) -> LiabilitySpec {
    let mut base = spec.base.clone();
    let mut contracts = Vec::new();
    for c in &spec.contracts {
        if c.kind == ContractKind::DigitalCds {
            let idx = nodes.binary_search(&c.reference).expect("indicator node listed");
            if pattern[idx] {
                base[(c.writer, c.beneficiary)] += c.notional;
            }
        } else {
            contracts.push(*c);
        }
    }
    LiabilitySpec::new(base, contracts)
}

fn solve_branch(
    net: &FinancialNetwork,
    bx: &WealthBox,
    nodes: &[usize],
    pattern: Vec<bool>,
    opts: &SolverOptions,
) -> Result<BranchRecord> {
    let branch_net = FinancialNetwork {
        liabilities: fix_indicators(&net.liabilities, nodes, &pattern),
        ..net.clone()
    };
    let map = |v: &[f64]| clearing_map(&branch_net, v);
    let top = picard(map, bx.upper.clone(), opts, Some(true), false)?;
    let bottom = picard(map, bx.lower.clone(), opts, Some(false), false)?;
    let mut record = BranchRecord {
        nodes: nodes.to_vec(),
        assumed_negative: pattern.clone(),
        wealth: None,
        consistent: false,
        conclusive: false,
        violated: Vec::new(),
    };
    let candidates: Vec<&PicardRun> = [&top, &bottom].into_iter().filter(|r| r.converged).collect();
    for run in &candidates {
        if residual(net, &run.wealth)? <= opts.tolerance {
            record.wealth = Some(run.wealth.clone());
            record.consistent = true;
            return Ok(record);
        }
    }
    let Some(first) = candidates.first() else {
        return Ok(record);
    };
    record.wealth = Some(first.wealth.clone());
    record.violated = nodes
        .iter()
        .zip(&pattern)
        .filter(|&(&k, &neg)| (first.wealth[k] < 0.0) != neg)
        .map(|(&k, _)| k)
        .collect();
    let unique = top.converged
        && bottom.converged
        && !top.non_monotone
        && !bottom.non_monotone
        && sup_distance(&top.wealth, &bottom.wealth) <= opts.cycle_tolerance;
    let clear_of_boundary = nodes
        .iter()
        .all(|&k| first.wealth[k].abs() > opts.cycle_tolerance);
    record.conclusive = unique && clear_of_boundary && !record.violated.is_empty();
    Ok(record)
}

/// Diagnoses a static system on which the corner iteration failed.
///
/// Runs the clearing-map iteration with cycle detection, then a damped
/// iteration, and for systems whose discontinuities are digital indicators
/// enumerates every indicator pattern. Nonexistence is certified only when each
/// pattern has a unique branch solution contradicting its own assumption.
pub fn detect_nonexistence(net: &FinancialNetwork, opts: &SolverOptions) -> Result<StaticOutcome> {
    net.ensure_valid()?;
    let bx = wealth_box(net)?;
    let map = |v: &[f64]| clearing_map(net, v);
    let plain = picard(map, bx.upper.clone(), opts, Some(true), true)?;
    if plain.converged {
        return Ok(StaticOutcome::FixedPoint(finish(
            net,
            plain.wealth,
            plain.residual,
            plain.iterations,
            Direction::Single,
            plain.non_monotone,
        )?));
    }
    let cycle = plain.cycle.clone().unwrap_or_default();
    let period = cycle.len();

    let nodes = net.liabilities.indicator_nodes();
    let mut branches = Vec::new();
    if !nodes.is_empty() && nodes.len() < usize::BITS as usize && (1usize << nodes.len()) <= opts.max_branch_patterns {
        let m = nodes.len();
        branches = (0..1usize << m)
            .into_par_iter()
            .map(|bits| {
                let pattern: Vec<bool> = (0..m).map(|b| bits >> b & 1 == 1).collect();
                solve_branch(net, &bx, &nodes, pattern, opts)
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(hit) = branches.iter().find(|b| b.consistent) {
            let wealth = hit.wealth.clone().expect("consistent branch has a solution");
            let res = residual(net, &wealth)?;
            return Ok(StaticOutcome::FixedPoint(finish(
                net,
                wealth,
                res,
                plain.iterations,
                Direction::Single,
                true,
            )?));
        }
        if branches.iter().all(|b| b.conclusive) {
            return Ok(StaticOutcome::Nonexistent(NonexistenceDiagnosis {
                cycle,
                period,
                certificate: branches,
            }));
        }
    }

    if let Some((wealth, res, iters)) = damped_search(net, bx.upper.clone(), opts)? {
        return Ok(StaticOutcome::FixedPoint(finish(
            net,
            wealth,
            res,
            plain.iterations + iters,
            Direction::Single,
            true,
        )?));
    }

    let reason = if nodes.is_empty() {
        "no fixed point found and no indicator structure to enumerate".to_string()
    } else if branches.is_empty() {
        format!(
            "{} indicator nodes exceed the branch enumeration cap",
            nodes.len()
        )
    } else {
        "some indicator branches could not be decided".to_string()
    };
    Ok(StaticOutcome::Inconclusive(InconclusiveReport {
        reason,
        cycle,
        period,
        branches,
        trace: plain.trace,
    }))
}

/// Corner iteration with fallback to [`detect_nonexistence`].
pub fn solve_static(
    net: &FinancialNetwork,
    direction: Direction,
    opts: &SolverOptions,
) -> Result<StaticOutcome> {
    match clear_static(net, direction, opts) {
        Ok(result) => Ok(StaticOutcome::FixedPoint(result)),
        Err(ClearingError::NotConverged { .. }) => detect_nonexistence(net, opts),
        Err(e) => Err(e),
    }
}

/// Evaluated obligations, totals and payments at a wealth vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticSnapshot {
    pub liabilities: DMatrix<f64>,
    pub relative: RelativeLiabilities,
    pub payments: Vec<f64>,
}

pub fn snapshot(net: &FinancialNetwork, wealth: &[f64]) -> Result<StaticSnapshot> {
    let liabilities = evaluate_liabilities(&net.liabilities, wealth)?;
    let relative = relative_liabilities(&liabilities);
    let payments = payments_from_wealth(&relative.pbar, wealth);
    Ok(StaticSnapshot {
        liabilities,
        relative,
        payments,
    })
}

/// Total shortfall `sum_i V_i^-`.
pub fn total_shortfall(wealth: &[f64]) -> f64 {
    wealth.iter().map(|&v| shortfall(v)).sum()
}
