//! Scenario files, run reports and CSV export.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::analysis::{conservation_audit_dynamic, conservation_audit_static, ConservationAudit, SplitSchedule};
use crate::contracts::{wealth_box, ContingentContract, ContractKind};
use crate::dynamic::{clear_dynamic, validate_dynamic, DynamicSpec, DynamicState, RemovalPolicy, TimedContract};
use crate::error::ClearingError;
use crate::network::{validate_network, FinancialNetwork, ValidationReport};
use crate::solver::{Direction, SolverOptions, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::static_clearing::{check_nonspeculative, residual, solve_static, FirmVerdict, StaticOutcome};

pub const SCHEMA: &str = "contagion-clear/1";
pub const REPORT_SCHEMA: &str = "contagion-clear-report/1";
/// Environment variable overriding the default tolerance.
pub const TOLERANCE_ENV: &str = "CONTAGION_CLEAR_TOL";
/// Falsifier samples used for the speculative warning unless configured.
pub const DEFAULT_SAMPLES: usize = 2_000;

/// Bundled scenarios, addressable as `bundled:<name>`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("ex_3_8", include_str!("../scenarios/ex_3_8.json")),
    ("ex_4_7", include_str!("../scenarios/ex_4_7.json")),
    ("ex_4_8", include_str!("../scenarios/ex_4_8.json")),
    ("ex_4_9", include_str!("../scenarios/ex_4_9.json")),
    ("regular_society", include_str!("../scenarios/regular_society.json")),
    ("stability_fund", include_str!("../scenarios/stability_fund.json")),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Semantic(String),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

pub type ScenarioResult<T> = std::result::Result<T, ScenarioError>;

/// A number written either as a JSON number or as a string holding a decimal
/// or an exact fraction such as `"3/16"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

/// Parses `"a/b"` or a decimal literal.
pub fn parse_number(text: &str) -> Option<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let num: f64 = a.trim().parse().ok()?;
            let den: f64 = b.trim().parse().ok()?;
            if den == 0.0 {
                return None;
            }
            num / den
        }
        None => text.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string such as \"3/16\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
                parse_number(v)
                    .map(Num)
                    .ok_or_else(|| E::custom(format!("cannot read {v:?} as a number")))
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    /// Static external assets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<Num>,
    /// Per-date cash flows for dynamic runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash_flows: Option<Vec<Num>>,
    /// Amount split as `epsilon` at date 0 and the remainder at date 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_split: Option<Num>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default)]
    pub has_society: bool,
    /// With a society the first node is society.
    pub nodes: Vec<NodeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiabilityEntry {
    pub from: String,
    pub to: String,
    pub amount: Num,
    #[serde(default)]
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractEntry {
    pub kind: ContractKind,
    pub writer: String,
    pub beneficiary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notional: Option<Num>,
    /// Due date in dynamic runs (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal_policy: Option<RemovalPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: String,
    #[serde(default)]
    pub meta: Meta,
    #[serde(default)]
    pub mode: Mode,
    pub network: NetworkSection,
    #[serde(default)]
    pub liabilities: Vec<LiabilityEntry>,
    #[serde(default)]
    pub contracts: Vec<ContractEntry>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Num>,
}

fn semantic(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Semantic(msg.into())
}

/// Parses scenario text and runs every structural check.
pub fn parse_scenario_str(text: &str) -> ScenarioResult<ScenarioFile> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let report = file.validate(None)?;
    if let Some(first) = report.violations.first() {
        return Err(semantic(first.clone()));
    }
    Ok(file)
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> ScenarioResult<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario_str(&text)
}

/// Loads `bundled:<name>` or a file path.
pub fn load_scenario(source: &str) -> ScenarioResult<ScenarioFile> {
    match source.strip_prefix("bundled:") {
        Some(name) => {
            let text = bundled_scenario(name).ok_or_else(|| {
                let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
                semantic(format!(
                    "no bundled scenario {name:?}; available: {}",
                    names.join(", ")
                ))
            })?;
            parse_scenario_str(text)
        }
        None => parse_scenario(Path::new(source)),
    }
}

impl ScenarioFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn labels(&self) -> Vec<String> {
        self.network.nodes.iter().map(|n| n.id.clone()).collect()
    }

    fn index(&self) -> ScenarioResult<HashMap<&str, usize>> {
        let mut map = HashMap::new();
        for (i, node) in self.network.nodes.iter().enumerate() {
            if node.id.is_empty() {
                return Err(semantic(format!("node {i} has an empty id")));
            }
            if map.insert(node.id.as_str(), i).is_some() {
                return Err(semantic(format!("duplicate node id {:?}", node.id)));
            }
        }
        Ok(map)
    }

    fn lookup(index: &HashMap<&str, usize>, id: &str, what: &str) -> ScenarioResult<usize> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| semantic(format!("{what} references unknown node {id:?}")))
    }

    fn contract(&self, index: &HashMap<&str, usize>, k: usize) -> ScenarioResult<ContingentContract> {
        let e = &self.contracts[k];
        let what = format!("contract {}", k + 1);
        let writer = Self::lookup(index, &e.writer, &what)?;
        let beneficiary = Self::lookup(index, &e.beneficiary, &what)?;
        let reference = match (&e.reference, e.kind.uses_reference()) {
            (Some(r), _) => Self::lookup(index, r, &what)?,
            (None, false) => beneficiary,
            (None, true) => return Err(semantic(format!("{what} needs a reference node"))),
        };
        Ok(ContingentContract {
            kind: e.kind,
            writer,
            beneficiary,
            reference,
            eta: e.eta.map_or(1.0, |n| n.0),
            tau: e.tau.map_or(0.0, |n| n.0),
            notional: e.notional.map_or(0.0, |n| n.0),
        })
    }

    fn epsilon_value(&self, epsilon: Option<f64>) -> Option<f64> {
        epsilon.or(self.epsilon.map(|n| n.0))
    }

    /// Static network: assets from `assets`, else summed cash flows, else the
    /// split amount; obligations summed over dates.
    pub fn to_network(&self) -> ScenarioResult<FinancialNetwork> {
        let index = self.index()?;
        let n = self.network.nodes.len();
        if n == 0 {
            return Err(semantic("network has no nodes"));
        }
        let assets: Vec<f64> = self
            .network
            .nodes
            .iter()
            .map(|node| {
                if let Some(a) = node.assets {
                    a.0
                } else if let Some(cf) = &node.cash_flows {
                    cf.iter().map(|c| c.0).sum()
                } else {
                    node.epsilon_split.map_or(0.0, |a| a.0)
                }
            })
            .collect();
        let mut base = DMatrix::zeros(n, n);
        for (k, l) in self.liabilities.iter().enumerate() {
            let what = format!("liability {}", k + 1);
            let i = Self::lookup(&index, &l.from, &what)?;
            let j = Self::lookup(&index, &l.to, &what)?;
            base[(i, j)] += l.amount.0;
        }
        let contracts = (0..self.contracts.len())
            .map(|k| self.contract(&index, k))
            .collect::<ScenarioResult<Vec<_>>>()?;
        Ok(FinancialNetwork::new(self.network.has_society, assets, base)
            .with_contracts(contracts)
            .with_labels(self.labels()))
    }

    /// Number of clearing dates of the dynamic reading.
    pub fn periods(&self) -> usize {
        let from_nodes = self
            .network
            .nodes
            .iter()
            .map(|n| {
                let cf = n.cash_flows.as_ref().map_or(0, Vec::len);
                if n.epsilon_split.is_some() {
                    cf.max(2)
                } else {
                    cf
                }
            })
            .max()
            .unwrap_or(0);
        let from_liabilities = self.liabilities.iter().map(|l| l.time + 1).max().unwrap_or(0);
        let from_contracts = self
            .contracts
            .iter()
            .map(|c| c.time.unwrap_or(1) + 1)
            .max()
            .unwrap_or(0);
        self.horizon
            .unwrap_or_else(|| from_nodes.max(from_liabilities).max(from_contracts).max(1))
    }

    /// Dynamic specification for a given asset split `epsilon` (falls back to the
    /// file's `epsilon`).
    pub fn to_dynamic(&self, epsilon: Option<f64>, policy: RemovalPolicy) -> ScenarioResult<DynamicSpec> {
        let index = self.index()?;
        let n = self.network.nodes.len();
        let periods = self.periods();
        let eps = self.epsilon_value(epsilon);
        let mut cash = vec![vec![0.0; n]; periods];
        for (i, node) in self.network.nodes.iter().enumerate() {
            if let Some(cf) = &node.cash_flows {
                if cf.len() > periods {
                    return Err(semantic(format!(
                        "node {:?} has {} cash flows for a horizon of {periods}",
                        node.id,
                        cf.len()
                    )));
                }
                for (t, c) in cf.iter().enumerate() {
                    cash[t][i] += c.0;
                }
            } else if let Some(amount) = node.epsilon_split {
                let e = eps.ok_or_else(|| {
                    semantic(format!("node {:?} splits its assets but no epsilon is given", node.id))
                })?;
                if periods < 2 {
                    return Err(semantic("an epsilon split needs at least two dates"));
                }
                if !(0.0..=amount.0).contains(&e) {
                    return Err(semantic(format!(
                        "epsilon {e} is outside [0, {}] for node {:?}",
                        amount.0, node.id
                    )));
                }
                cash[0][i] += e;
                cash[1][i] += amount.0 - e;
            } else if let Some(a) = node.assets {
                cash[0][i] += a.0;
            }
        }
        let mut base = vec![DMatrix::zeros(n, n); periods];
        for (k, l) in self.liabilities.iter().enumerate() {
            let what = format!("liability {}", k + 1);
            let i = Self::lookup(&index, &l.from, &what)?;
            let j = Self::lookup(&index, &l.to, &what)?;
            if l.time >= periods {
                return Err(semantic(format!("{what} is due at time {} beyond the horizon", l.time)));
            }
            base[l.time][(i, j)] += l.amount.0;
        }
        let contracts = (0..self.contracts.len())
            .map(|k| {
                Ok(TimedContract {
                    time: self.contracts[k].time.unwrap_or(1),
                    contract: self.contract(&index, k)?,
                })
            })
            .collect::<ScenarioResult<Vec<_>>>()?;
        Ok(DynamicSpec::new(self.network.has_society, cash, base)
            .with_contracts(contracts)
            .with_policy(policy)
            .with_labels(self.labels()))
    }

    /// Two-date asset split of the dynamic reading, for static comparisons.
    pub fn split_schedule(&self, epsilon: Option<f64>) -> ScenarioResult<SplitSchedule> {
        let spec = self.to_dynamic(epsilon, RemovalPolicy::RollForwardOnly)?;
        let n = spec.node_count();
        match spec.cash_flows.len() {
            1 => Ok(SplitSchedule {
                x0: spec.cash_flows[0].clone(),
                x1: vec![0.0; n],
            }),
            2 => Ok(SplitSchedule {
                x0: spec.cash_flows[0].clone(),
                x1: spec.cash_flows[1].clone(),
            }),
            t => Err(semantic(format!("comparison needs at most two dates, scenario has {t}"))),
        }
    }

    /// Structural report for the file's mode.
    pub fn validate(&self, epsilon: Option<f64>) -> ScenarioResult<ValidationReport> {
        if self.schema != SCHEMA {
            return Err(semantic(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        match self.mode {
            Mode::Static => Ok(validate_network(&self.to_network()?)),
            Mode::Dynamic => {
                let policy = self.solver.removal_policy.unwrap_or_default();
                Ok(validate_dynamic(&self.to_dynamic(epsilon, policy)?))
            }
        }
    }
}

/// Command-line or caller overrides; `None` keeps the file's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub direction: Option<Direction>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub epsilon: Option<f64>,
    pub removal_policy: Option<RemovalPolicy>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    /// Tolerance read from the environment, below file values in precedence.
    pub env_tolerance: Option<f64>,
}

/// Reads [`TOLERANCE_ENV`].
pub fn env_tolerance() -> ScenarioResult<Option<f64>> {
    match std::env::var(TOLERANCE_ENV) {
        Ok(v) => match parse_number(&v) {
            Some(t) if t > 0.0 => Ok(Some(t)),
            _ => Err(semantic(format!("{TOLERANCE_ENV}={v:?} is not a positive number"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeta {
    pub tolerance: f64,
    /// `flag`, `file`, `env` or `default`.
    pub tolerance_source: String,
    pub max_iterations: usize,
    pub direction: Direction,
    pub removal_policy: RemovalPolicy,
    pub samples: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

impl SolverMeta {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..SolverOptions::default()
        }
    }
}

/// Applies precedence flag > file > environment > default.
pub fn resolve_solver(file: &ScenarioFile, o: &Overrides) -> ScenarioResult<SolverMeta> {
    let (tolerance, tolerance_source) = if let Some(t) = o.tolerance {
        (t, "flag")
    } else if let Some(t) = file.solver.tolerance {
        (t.0, "file")
    } else if let Some(t) = o.env_tolerance {
        (t, "env")
    } else {
        (DEFAULT_TOLERANCE, "default")
    };
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(semantic(format!("tolerance {tolerance} must be positive")));
    }
    Ok(SolverMeta {
        tolerance,
        tolerance_source: tolerance_source.into(),
        max_iterations: o
            .max_iterations
            .or(file.solver.max_iterations)
            .unwrap_or(DEFAULT_MAX_ITERATIONS),
        direction: o.direction.or(file.solver.direction).unwrap_or(Direction::Greatest),
        removal_policy: o
            .removal_policy
            .or(file.solver.removal_policy)
            .unwrap_or_default(),
        samples: o.samples.or(file.solver.samples).unwrap_or(DEFAULT_SAMPLES),
        seed: o.seed.or(file.solver.seed).unwrap_or(0),
        epsilon: file.epsilon_value(o.epsilon),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Solved,
    Nonexistent,
    Inconclusive,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Solved => 0,
            Self::Nonexistent => 2,
            Self::Inconclusive => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunResult {
    Static { outcome: StaticOutcome },
    Dynamic { state: DynamicState },
    Failure { error: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Audits {
    pub conservation: Option<ConservationAudit>,
    /// Fixed-point residual recomputed from the reported wealths.
    pub residual: Option<f64>,
    pub within_box: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub scenario: String,
    pub mode: Mode,
    pub labels: Vec<String>,
    pub status: RunStatus,
    pub exit_code: i32,
    pub result: RunResult,
    pub audits: Audits,
    pub speculative_warning: Option<String>,
    pub solver: SolverMeta,
    /// Wall-clock data, kept apart from the reproducible numeric payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    /// JSON of everything but the timings; identical across reruns.
    pub fn payload_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings = None;
        serde_json::to_string_pretty(&copy).expect("report serialises")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Rows of `(time, node, wealth, payment)`.
    pub fn trajectory(&self) -> Vec<TrajectoryRow> {
        match &self.result {
            RunResult::Static {
                outcome: StaticOutcome::FixedPoint(r),
            } => rows_for(0, &self.labels, &r.wealth, &r.payments),
            RunResult::Dynamic { state } => state
                .periods
                .iter()
                .flat_map(|p| rows_for(p.time, &self.labels, &p.wealth, &p.payments))
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: usize,
    pub node: String,
    pub wealth: f64,
    pub payment: f64,
}

fn rows_for(time: usize, labels: &[String], wealth: &[f64], payments: &[f64]) -> Vec<TrajectoryRow> {
    labels
        .iter()
        .zip(wealth.iter().zip(payments))
        .map(|(node, (&wealth, &payment))| TrajectoryRow {
            time,
            node: node.clone(),
            wealth,
            payment,
        })
        .collect()
}

/// Writes trajectory rows as CSV with header `time,node,wealth,payment`.
pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["time", "node", "wealth", "payment"])?;
    }
    w.flush()?;
    Ok(())
}

fn speculative_warning(net: &FinancialNetwork, meta: &SolverMeta) -> ScenarioResult<Option<String>> {
    if net.is_constant() {
        return Ok(None);
    }
    let report = check_nonspeculative(net, meta.samples.max(1), meta.seed)?;
    Ok(match report.firms {
        FirmVerdict::Falsified(w) => Some(format!(
            "speculative system: node {} gains when wealths fall; no uniqueness guarantee",
            net.label(w.firm)
        )),
        FirmVerdict::NotFalsified { .. } => None,
    })
}

/// Runs a parsed scenario.
///
/// Solver failures become an inconclusive report; invalid input is an error.
pub fn run_scenario(file: &ScenarioFile, overrides: &Overrides) -> ScenarioResult<RunReport> {
    let meta = resolve_solver(file, overrides)?;
    let opts = meta.options();
    let mode = overrides.mode.unwrap_or(file.mode);
    let labels = file.labels();
    let started = Instant::now();
    let mut audits = Audits::default();
    let mut speculative = None;

    let (status, result) = match mode {
        Mode::Static => {
            let net = file.to_network()?;
            net.ensure_valid()?;
            speculative = speculative_warning(&net, &meta)?;
            match solve_static(&net, meta.direction, &opts) {
                Ok(outcome) => {
                    let status = match &outcome {
                        StaticOutcome::FixedPoint(r) => {
                            audits.conservation = Some(conservation_audit_static(&net, &r.wealth));
                            audits.residual = Some(residual(&net, &r.wealth)?);
                            audits.within_box = Some(wealth_box(&net)?.contains(&r.wealth, 1e-8));
                            RunStatus::Solved
                        }
                        StaticOutcome::Nonexistent(_) => RunStatus::Nonexistent,
                        StaticOutcome::Inconclusive(_) => RunStatus::Inconclusive,
                    };
                    (status, RunResult::Static { outcome })
                }
                Err(ClearingError::InvalidInput(m)) => return Err(semantic(m)),
                Err(e) => (RunStatus::Inconclusive, RunResult::Failure { error: e.to_string() }),
            }
        }
        Mode::Dynamic => {
            let spec = file.to_dynamic(meta.epsilon, meta.removal_policy)?;
            spec.ensure_valid()?;
            match clear_dynamic(&spec, &opts) {
                Ok(state) => {
                    audits.conservation = Some(conservation_audit_dynamic(&spec, &state));
                    audits.residual = state.periods.iter().map(|p| p.residual).reduce(f64::max);
                    (RunStatus::Solved, RunResult::Dynamic { state })
                }
                Err(ClearingError::InvalidInput(m)) => return Err(semantic(m)),
                Err(e) => (RunStatus::Inconclusive, RunResult::Failure { error: e.to_string() }),
            }
        }
    };
    Ok(RunReport {
        schema: REPORT_SCHEMA.into(),
        scenario: file.meta.name.clone(),
        mode,
        labels,
        exit_code: status.exit_code(),
        status,
        result,
        audits,
        speculative_warning: speculative,
        solver: meta,
        timings: Some(Timings {
            solve_ms: started.elapsed().as_secs_f64() * 1e3,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_accept_fractions() {
        assert_eq!(parse_number("3/16"), Some(0.1875));
        assert_eq!(parse_number(" -21/16 "), Some(-1.3125));
        assert_eq!(parse_number("0.25"), Some(0.25));
        assert_eq!(parse_number("1/0"), None);
        assert_eq!(parse_number("abc"), None);
        let n: Num = serde_json::from_str("\"3/16\"").unwrap();
        assert_eq!(n.0, 3.0 / 16.0);
        let n: Num = serde_json::from_str("2").unwrap();
        assert_eq!(n.0, 2.0);
    }

    #[test]
    fn every_bundled_scenario_parses() {
        for (name, text) in BUNDLED {
            let file = parse_scenario_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(file.schema, SCHEMA);
        }
    }

    #[test]
    fn empty_liabilities_are_valid() {
        let text = r#"{"schema": "contagion-clear/1",
            "network": {"has_society": true, "nodes": [{"id": "society"}, {"id": "a", "assets": 1}]}}"#;
        let file = parse_scenario_str(text).unwrap();
        let net = file.to_network().unwrap();
        assert_eq!(net.assets, vec![0.0, 1.0]);
        assert!(validate_network(&net).is_valid());
    }

    #[test]
    fn unknown_node_is_semantic_error() {
        let text = r#"{"schema": "contagion-clear/1",
            "network": {"nodes": [{"id": "bank1"}, {"id": "bank2"}]},
            "contracts": [{"kind": "cds", "writer": "bank1", "beneficiary": "bank2", "reference": "bank9"}]}"#;
        match parse_scenario_str(text) {
            Err(ScenarioError::Semantic(m)) => assert!(m.contains("bank9"), "{m}"),
            other => panic!("expected a semantic error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_scenario_str("{\n  \"schema\": 3,\n}") {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn tolerance_precedence() {
        let mut file = parse_scenario_str(bundled_scenario("ex_3_8").unwrap()).unwrap();
        file.solver.tolerance = None;
        let env = Overrides {
            env_tolerance: Some(1e-9),
            ..Overrides::default()
        };
        assert_eq!(resolve_solver(&file, &env).unwrap().tolerance_source, "env");
        file.solver.tolerance = Some(Num(1e-11));
        let meta = resolve_solver(&file, &env).unwrap();
        assert_eq!((meta.tolerance, meta.tolerance_source.as_str()), (1e-11, "file"));
        let flag = Overrides {
            tolerance: Some(1e-12),
            ..env
        };
        assert_eq!(resolve_solver(&file, &flag).unwrap().tolerance_source, "flag");
        assert_eq!(
            resolve_solver(&file, &Overrides::default()).unwrap().tolerance,
            1e-11
        );
    }

    #[test]
    fn csv_has_expected_header() {
        let rows = vec![TrajectoryRow {
            time: 1,
            node: "a".into(),
            wealth: -0.5,
            payment: 0.25,
        }];
        let mut buf = Vec::new();
        write_trajectory_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,node,wealth,payment\n1,a,-0.5,0.25\n");
    }
}
