//! Plain-text tables for standard output.

use std::fmt::Write;

use contagion_core::analysis::{ComparisonReport, SensitivityReport};
use contagion_core::scenario::{RunReport, RunResult, RunStatus};
use contagion_core::static_clearing::{BranchRecord, SocietyVerdict, SpeculationReport};
use contagion_core::{ClearingResult, DynamicState, FirmVerdict, StaticOutcome};

fn num(v: f64) -> String {
    format!("{v:.10}")
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("({})", parts.join(", "))
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(headers.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn static_table(labels: &[String], r: &ClearingResult) -> String {
    let rows: Vec<Vec<String>> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            vec![
                l.clone(),
                num(r.wealth[i]),
                num(r.payments[i]),
                if r.wealth[i] < 0.0 { "default" } else { "solvent" }.to_string(),
            ]
        })
        .collect();
    table(&["node", "wealth", "payment", "status"], &rows)
}

fn dynamic_table(labels: &[String], state: &DynamicState) -> String {
    let rows: Vec<Vec<String>> = state
        .periods
        .iter()
        .flat_map(|p| {
            labels.iter().enumerate().map(move |(i, l)| {
                vec![
                    p.time.to_string(),
                    l.clone(),
                    num(p.wealth[i]),
                    num(p.payments[i]),
                    if p.active[i] { "" } else { "removed" }.to_string(),
                ]
            })
        })
        .collect();
    table(&["time", "node", "wealth", "payment", "note"], &rows)
}

fn branches(labels: &[String], records: &[BranchRecord]) -> String {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|b| {
            let assumption: Vec<String> = b
                .nodes
                .iter()
                .zip(&b.assumed_negative)
                .map(|(&k, &neg)| format!("V{} {}", labels[k], if neg { "< 0" } else { ">= 0" }))
                .collect();
            vec![
                assumption.join(", "),
                b.wealth.as_deref().map_or("none".into(), vector),
                if b.consistent { "yes" } else { "no" }.into(),
                if b.conclusive { "yes" } else { "no" }.into(),
            ]
        })
        .collect();
    table(&["assumption", "wealth", "consistent", "conclusive"], &rows)
}

pub fn outcome(labels: &[String], outcome: &StaticOutcome) -> String {
    match outcome {
        StaticOutcome::FixedPoint(r) => {
            let mut s = static_table(labels, r);
            let _ = writeln!(s, "residual {:.3e} after {} iterations", r.residual, r.iterations);
            for w in &r.warnings {
                let _ = writeln!(s, "warning: {w}");
            }
            s
        }
        StaticOutcome::Nonexistent(d) => {
            let mut s = format!("no clearing wealth exists: iteration cycles with period {}\n", d.period);
            s += &branches(labels, &d.certificate);
            s
        }
        StaticOutcome::Inconclusive(r) => {
            let mut s = format!("inconclusive: {}\n", r.reason);
            if !r.branches.is_empty() {
                s += &branches(labels, &r.branches);
            }
            s
        }
    }
}

pub fn report(r: &RunReport) -> String {
    let mut s = String::new();
    if !r.scenario.is_empty() {
        let _ = writeln!(s, "scenario {}", r.scenario);
    }
    match &r.result {
        RunResult::Static { outcome: o } => s += &outcome(&r.labels, o),
        RunResult::Dynamic { state } => {
            s += &dynamic_table(&r.labels, state);
            if !state.uniqueness_conditions_hold {
                let _ = writeln!(s, "note: uniqueness conditions not met");
            }
            for w in &state.warnings {
                let _ = writeln!(s, "warning: {w}");
            }
        }
        RunResult::Failure { error } => {
            let _ = writeln!(s, "solver failure: {error}");
        }
    }
    if let Some(c) = &r.audits.conservation {
        let _ = writeln!(
            s,
            "conservation: positive equity {} vs external cash {} (gap {:.3e}){}",
            num(c.positive_equity),
            num(c.external_cash),
            c.gap,
            if c.applicable && !c.holds { " FAILED" } else { "" }
        );
    }
    if let Some(false) = r.audits.within_box {
        let _ = writeln!(s, "warning: wealth outside the a priori box");
    }
    if let Some(w) = &r.speculative_warning {
        let _ = writeln!(s, "warning: {w}");
    }
    let status = match r.status {
        RunStatus::Solved => "solved",
        RunStatus::Nonexistent => "nonexistent",
        RunStatus::Inconclusive => "inconclusive",
    };
    let _ = writeln!(s, "status {status} (exit {})", r.exit_code);
    s
}

pub fn sweep(values: &[f64], reports: &[RunReport]) -> String {
    let rows: Vec<Vec<String>> = values
        .iter()
        .zip(reports)
        .map(|(&eps, r)| {
            let wealth = match &r.result {
                RunResult::Static {
                    outcome: StaticOutcome::FixedPoint(c),
                } => vector(&c.wealth),
                RunResult::Dynamic { state } => vector(state.terminal_wealth()),
                RunResult::Static { .. } => "none".into(),
                RunResult::Failure { error } => error.clone(),
            };
            vec![num(eps), format!("{:?}", r.status).to_lowercase(), wealth]
        })
        .collect();
    table(&["epsilon", "status", "terminal wealth"], &rows)
}

pub fn speculation(labels: &[String], r: &SpeculationReport, samples: usize) -> String {
    let mut s = String::new();
    match &r.firms {
        FirmVerdict::NotFalsified { .. } => {
            let _ = writeln!(s, "firms: no speculative witness in {samples} sampled pairs");
        }
        FirmVerdict::Falsified(w) => {
            let _ = writeln!(
                s,
                "firms: speculative, node {} maps to {} at {} but {} at {}",
                labels[w.firm],
                num(w.map_at_lower),
                vector(&w.lower),
                num(w.map_at_upper),
                vector(&w.upper)
            );
        }
    }
    let _ = match &r.society {
        SocietyVerdict::NotApplicable => writeln!(s, "society: not present"),
        SocietyVerdict::NotFalsified { .. } => {
            writeln!(s, "society: inflow strictly increasing on all sampled pairs")
        }
        SocietyVerdict::Falsified(w) => writeln!(
            s,
            "society: inflow {} at {} not below {} at {}",
            num(w.inflow_at_lower),
            vector(&w.lower),
            num(w.inflow_at_upper),
            vector(&w.upper)
        ),
    };
    s
}

pub fn sensitivity(labels: &[String], r: &SensitivityReport) -> String {
    let mut s = String::new();
    if let Some(b) = &r.scope_banner {
        let _ = writeln!(s, "note: {b}");
    }
    let mut headers = vec!["s"];
    headers.extend(labels.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = r
        .grid
        .iter()
        .zip(&r.wealths)
        .map(|(&g, w)| std::iter::once(num(g)).chain(w.iter().map(|&x| num(x))).collect())
        .collect();
    s += &table(&headers, &rows);
    let _ = writeln!(
        s,
        "monotone {} (max violation {:.3e}), max jump {:.3e} against bound {:.3e}",
        r.monotone, r.max_violation, r.max_jump, r.jump_bound
    );
    if let Some(f) = &r.failure {
        let _ = writeln!(s, "failed at grid point {} (s = {}): {}", f.index, num(f.s), f.error);
    }
    s
}

pub fn comparison(labels: &[String], r: &ComparisonReport) -> String {
    let mut s = format!("static: {}\n", r.static_status);
    let _ = writeln!(s, "dynamic terminal wealth {}", vector(&r.dynamic_terminal));
    let rows: Vec<Vec<String>> = r
        .candidates
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                vector(&c.wealth),
                format!("{:.3e}", c.distance),
                if c.matches { "yes" } else { "no" }.into(),
            ]
        })
        .collect();
    s += &table(&["candidate", "wealth", "distance", "match"], &rows);
    let _ = writeln!(s, "nodes {}", labels.join(", "));
    let _ = writeln!(s, "verdict: {}", r.verdict);
    s
}
