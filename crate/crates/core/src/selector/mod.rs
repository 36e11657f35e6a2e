//! Portfolio scoring and algorithm selection.
//!
//! A [`RunMatrix`] holds one [`PerformanceRecord`] per (instance, approach)
//! and any number of feature tables keyed by schema id. Scores are PAR10:
//! the runtime of a solved run, ten times the timeout otherwise (errors
//! included).

mod cv;
mod learners;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::EncodingKind;
use crate::features::FeatureTable;

pub use cv::{cross_validate, stratified_folds, CvReport, Decision, FoldResult};
pub use learners::{
    fit_regressor, kmeans, train_learner, KMeans, LearnerKind, Regressor, Standardizer, TargetTransform,
    TrainedLearner, TreeNode, DEFAULT_RIDGE_LAMBDA,
};
pub use tree::{
    train_flat, train_hierarchy, FeatureLookup, HierarchySpec, NodeModel, NodeSpec, Selector, SelectorKind,
    SelectorNode, SelectorSpec, SELECTOR_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("no records to score")]
    Empty,
    #[error("records disagree on the timeout ({0} vs {1})")]
    InconsistentTimeout(f64, f64),
    #[error("run matrix is missing ({instance}, {approach})")]
    MissingCell { instance: String, approach: String },
    #[error("run matrix has more than one record for ({instance}, {approach})")]
    Duplicate { instance: String, approach: String },
    #[error("invalid record for ({instance}, {approach}): {reason}")]
    InvalidRecord { instance: String, approach: String, reason: String },
    #[error("unknown approach `{0}`")]
    UnknownApproach(String),
    #[error("no `{schema}` features for instance `{instance}`")]
    MissingFeatures { instance: String, schema: String },
    #[error("feature vector has {got} values, the model expects {expected}")]
    FeatureLength { expected: usize, got: usize },
    #[error("{n} instances cannot be split into {folds} folds")]
    TooFewInstances { n: usize, folds: usize },
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("learner needs at least 2 samples with finite features, got {0}")]
    TooFewSamples(usize),
    #[error("unsupported selector file version {0}")]
    Version(u32),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A solving approach: a CSP solver, or an encoding paired with a SAT solver.
///
/// Written `csp:<solver>` or `sat:<encoding>:<solver>`; ordering is the
/// lexicographic order of that string form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ApproachId {
    Csp { solver: String },
    Sat { encoding: EncodingKind, solver: String },
}

impl ApproachId {
    pub fn csp(solver: impl Into<String>) -> ApproachId {
        ApproachId::Csp { solver: solver.into() }
    }

    pub fn sat(encoding: EncodingKind, solver: impl Into<String>) -> ApproachId {
        ApproachId::Sat { encoding, solver: solver.into() }
    }

    pub fn solver(&self) -> &str {
        match self {
            ApproachId::Csp { solver } | ApproachId::Sat { solver, .. } => solver,
        }
    }

    pub fn encoding(&self) -> Option<EncodingKind> {
        match self {
            ApproachId::Csp { .. } => None,
            ApproachId::Sat { encoding, .. } => Some(*encoding),
        }
    }

    pub fn is_csp(&self) -> bool {
        matches!(self, ApproachId::Csp { .. })
    }
}

impl fmt::Display for ApproachId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApproachId::Csp { solver } => write!(f, "csp:{solver}"),
            ApproachId::Sat { encoding, solver } => write!(f, "sat:{encoding}:{solver}"),
        }
    }
}

impl FromStr for ApproachId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid_solver = |x: &str| !x.is_empty() && !x.contains([':', ',', ' ']);
        match s.split(':').collect::<Vec<_>>().as_slice() {
            ["csp", solver] if valid_solver(solver) => Ok(ApproachId::csp(*solver)),
            ["sat", enc, solver] if valid_solver(solver) => Ok(ApproachId::sat(enc.parse()?, *solver)),
            _ => Err(format!("bad approach `{s}` (expected csp:<solver> or sat:<encoding>:<solver>)")),
        }
    }
}

impl TryFrom<String> for ApproachId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ApproachId> for String {
    fn from(a: ApproachId) -> String {
        a.to_string()
    }
}

impl PartialOrd for ApproachId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ApproachId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Solved,
    Timeout,
    Error,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Solved => "solved",
            RunStatus::Timeout => "timeout",
            RunStatus::Error => "error",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub instance: String,
    pub approach: ApproachId,
    pub status: RunStatus,
    /// Seconds; equals `timeout` for timeouts.
    pub runtime: f64,
    pub timeout: f64,
    #[serde(default)]
    pub answer: Option<Answer>,
    /// Solver work units (nodes, decisions, propagations) when known.
    #[serde(default)]
    pub work: Option<u64>,
    #[serde(default)]
    pub memory_mb: Option<u64>,
}

impl PerformanceRecord {
    pub fn new(
        instance: impl Into<String>,
        approach: ApproachId,
        status: RunStatus,
        runtime: f64,
        timeout: f64,
    ) -> Self {
        PerformanceRecord {
            instance: instance.into(),
            approach,
            status,
            runtime,
            timeout,
            answer: None,
            work: None,
            memory_mb: None,
        }
    }

    pub fn solved(&self) -> bool {
        self.status == RunStatus::Solved
    }

    /// PAR10 contribution.
    pub fn score(&self) -> f64 {
        if self.solved() {
            self.runtime
        } else {
            10.0 * self.timeout
        }
    }

    fn check(&self) -> Result<(), SelectorError> {
        let bad = |reason: &str| SelectorError::InvalidRecord {
            instance: self.instance.clone(),
            approach: self.approach.to_string(),
            reason: reason.into(),
        };
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(bad("timeout must be positive"));
        }
        if !(self.runtime >= 0.0 && self.runtime.is_finite()) {
            return Err(bad("runtime must be finite and non-negative"));
        }
        if self.solved() && self.runtime > self.timeout {
            return Err(bad("solved run exceeds the timeout"));
        }
        if self.status == RunStatus::Timeout && self.runtime != self.timeout {
            return Err(bad("timed-out run must report runtime = timeout"));
        }
        Ok(())
    }
}

/// Mean PAR10 of `records`, which must share one timeout.
pub fn par10(records: &[PerformanceRecord]) -> Result<f64, SelectorError> {
    let first = records.first().ok_or(SelectorError::Empty)?;
    for r in records {
        if r.timeout != first.timeout {
            return Err(SelectorError::InconsistentTimeout(first.timeout, r.timeout));
        }
    }
    Ok(records.iter().map(PerformanceRecord::score).sum::<f64>() / records.len() as f64)
}

/// Dense instance × approach performance table with attached features.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMatrix {
    instances: Vec<String>,
    approaches: Vec<ApproachId>,
    /// Row-major: `cells[i * approaches.len() + a]`.
    cells: Vec<PerformanceRecord>,
    timeout: f64,
    /// schema id -> instance id -> values
    features: BTreeMap<String, HashMap<String, Vec<f64>>>,
}

impl RunMatrix {
    /// Builds a matrix from records in any order. Instances keep first-seen
    /// order; approaches are sorted.
    pub fn from_records(records: Vec<PerformanceRecord>) -> Result<RunMatrix, SelectorError> {
        let first = records.first().ok_or(SelectorError::Empty)?;
        let timeout = first.timeout;
        let mut instances: Vec<String> = Vec::new();
        let mut inst_index: HashMap<String, usize> = HashMap::new();
        let mut approaches: Vec<ApproachId> = Vec::new();
        for r in &records {
            r.check()?;
            if r.timeout != timeout {
                return Err(SelectorError::InconsistentTimeout(timeout, r.timeout));
            }
            if !inst_index.contains_key(&r.instance) {
                inst_index.insert(r.instance.clone(), instances.len());
                instances.push(r.instance.clone());
            }
            if !approaches.contains(&r.approach) {
                approaches.push(r.approach.clone());
            }
        }
        approaches.sort();
        let na = approaches.len();
        let mut slots: Vec<Option<PerformanceRecord>> = vec![None; instances.len() * na];
        for r in records {
            let i = inst_index[&r.instance];
            let a = approaches.binary_search(&r.approach).unwrap();
            let slot = &mut slots[i * na + a];
            if slot.is_some() {
                return Err(SelectorError::Duplicate { instance: r.instance, approach: r.approach.to_string() });
            }
            *slot = Some(r);
        }
        let mut cells = Vec::with_capacity(slots.len());
        for (k, s) in slots.into_iter().enumerate() {
            match s {
                Some(r) => cells.push(r),
                None => {
                    return Err(SelectorError::MissingCell {
                        instance: instances[k / na].clone(),
                        approach: approaches[k % na].to_string(),
                    })
                }
            }
        }
        Ok(RunMatrix { instances, approaches, cells, timeout, features: BTreeMap::new() })
    }

    pub fn instances(&self) -> &[String] {
        &self.instances
    }

    pub fn approaches(&self) -> &[ApproachId] {
        &self.approaches
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    pub fn records(&self) -> &[PerformanceRecord] {
        &self.cells
    }

    pub fn approach_index(&self, a: &ApproachId) -> Option<usize> {
        self.approaches.binary_search(a).ok()
    }

    pub fn record(&self, instance: usize, approach: usize) -> &PerformanceRecord {
        &self.cells[instance * self.approaches.len() + approach]
    }

    pub fn score(&self, instance: usize, approach: usize) -> f64 {
        self.record(instance, approach).score()
    }

    pub fn add_features(&mut self, schema: &str, instance: &str, values: Vec<f64>) {
        self.features.entry(schema.to_string()).or_default().insert(instance.to_string(), values);
    }

    pub fn attach_features(&mut self, table: &FeatureTable) {
        for (id, values) in &table.rows {
            self.add_features(&table.schema, id, values.clone());
        }
    }

    pub fn features(&self, schema: &str, instance: &str) -> Option<&[f64]> {
        self.features.get(schema)?.get(instance).map(Vec::as_slice)
    }

    pub fn schemas(&self) -> impl Iterator<Item = &str> {
        self.features.keys().map(String::as_str)
    }

    /// Every feature vector of `instance`, keyed by schema.
    pub fn feature_lookup(&self, instance: &str) -> FeatureLookup {
        self.features.iter().filter_map(|(s, m)| m.get(instance).map(|v| (s.clone(), v.clone()))).collect()
    }

    /// Restriction to a subset of instance rows, in the given order.
    pub fn select_instances(&self, rows: &[usize]) -> RunMatrix {
        let na = self.approaches.len();
        let mut cells = Vec::with_capacity(rows.len() * na);
        for &i in rows {
            cells.extend_from_slice(&self.cells[i * na..(i + 1) * na]);
        }
        let instances: Vec<String> = rows.iter().map(|&i| self.instances[i].clone()).collect();
        let features = self
            .features
            .iter()
            .map(|(s, m)| {
                let sub = instances.iter().filter_map(|id| m.get(id).map(|v| (id.clone(), v.clone()))).collect();
                (s.clone(), sub)
            })
            .collect();
        RunMatrix { instances, approaches: self.approaches.clone(), cells, timeout: self.timeout, features }
    }

    /// PAR10 of a single approach over all instances.
    pub fn approach_par10(&self, approach: usize) -> f64 {
        let n = self.instances.len();
        (0..n).map(|i| self.score(i, approach)).sum::<f64>() / n as f64
    }

    /// Approach with the lowest PAR10, ties to the lowest id.
    pub fn single_best(&self) -> (ApproachId, f64) {
        let (a, s) = (0..self.approaches.len())
            .map(|a| (a, self.approach_par10(a)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        (self.approaches[a].clone(), s)
    }

    /// Index of the best approach for `instance` among `subset` (approach
    /// indices), ties to the lowest id.
    pub fn best_in(&self, instance: usize, subset: &[usize]) -> usize {
        let mut best = subset[0];
        for &a in &subset[1..] {
            let (s, b) = (self.score(instance, a), self.score(instance, best));
            if s < b || (s == b && self.approaches[a] < self.approaches[best]) {
                best = a;
            }
        }
        best
    }

    /// Per-instance best approach over the whole portfolio.
    pub fn best_labels(&self) -> Vec<ApproachId> {
        let all: Vec<usize> = (0..self.approaches.len()).collect();
        (0..self.instances.len()).map(|i| self.approaches[self.best_in(i, &all)].clone()).collect()
    }

    /// PAR10 and solved count of a per-instance decision list.
    pub fn evaluate(&self, choices: &[usize]) -> (f64, usize) {
        assert_eq!(choices.len(), self.instances.len());
        let mut total = 0.0;
        let mut solved = 0;
        for (i, &a) in choices.iter().enumerate() {
            let r = self.record(i, a);
            total += r.score();
            solved += usize::from(r.solved());
        }
        (total / choices.len() as f64, solved)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbsResult {
    pub par10: f64,
    pub n_solved: usize,
    pub choices: Vec<ApproachId>,
}

/// Oracle selection restricted to `subset`.
pub fn virtual_best(matrix: &RunMatrix, subset: &[ApproachId]) -> Result<VbsResult, SelectorError> {
    if subset.is_empty() {
        return Err(SelectorError::Empty);
    }
    let idx: Vec<usize> = subset
        .iter()
        .map(|a| matrix.approach_index(a).ok_or_else(|| SelectorError::UnknownApproach(a.to_string())))
        .collect::<Result<_, _>>()?;
    let picks: Vec<usize> = (0..matrix.instances().len()).map(|i| matrix.best_in(i, &idx)).collect();
    let (par10, n_solved) = matrix.evaluate(&picks);
    Ok(VbsResult { par10, n_solved, choices: picks.into_iter().map(|a| matrix.approaches()[a].clone()).collect() })
}

pub fn write_matrix_csv<W: Write>(records: &[PerformanceRecord], sink: W) -> Result<(), SelectorError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(source: R) -> Result<Vec<PerformanceRecord>, SelectorError> {
    let mut r = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
