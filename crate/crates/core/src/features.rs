//! Fixed-schema feature vectors.
//!
//! Five feature sets are available: the CSP set, the SAT set on the direct,
//! support and direct-order encodings, and their concatenation. Undefined
//! values (a ratio over an empty set, a statistic of an unconstrained
//! instance) are reported as `-1`.
//!
//! Dynamic features come from budgeted probes counted in nodes or
//! conflicts, never wall-clock time, so vectors are reproducible bit for bit.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{solve_dpll, unit_propagate, CnfFormula, DpllConfig, Lit, PropagationStatus, SatStatus};
use crate::csp::{
    ac3, constraint_tightness, solve_backtracking, CspError, CspInstance, Find, IntOp, Propagation, Relation,
    SearchConfig, SearchStatus,
};
use crate::encoder::{encode, EncodeError, EncodingKind};

pub const SENTINEL: f64 = -1.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("feature csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Value range class of a feature, used for sanity checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Non-negative count.
    Count,
    /// Non-negative real, or the sentinel.
    Ratio,
    /// In `[0, 1]`, or the sentinel.
    Fraction,
    /// Exactly 0 or 1.
    Flag,
}

impl FeatureKind {
    pub fn admits(self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            FeatureKind::Count => v >= 0.0 && v.fract() == 0.0,
            FeatureKind::Ratio => v >= 0.0 || v == SENTINEL,
            FeatureKind::Fraction => (0.0..=1.0).contains(&v) || v == SENTINEL,
            FeatureKind::Flag => v == 0.0 || v == 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    Csp,
    SatDirect,
    SatSupport,
    SatDirectOrder,
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Csp,
        FeatureSet::SatDirect,
        FeatureSet::SatSupport,
        FeatureSet::SatDirectOrder,
        FeatureSet::Combined,
    ];

    pub fn schema_id(self) -> &'static str {
        match self {
            FeatureSet::Csp => "csp/1",
            FeatureSet::SatDirect => "sat-direct/1",
            FeatureSet::SatSupport => "sat-support/1",
            FeatureSet::SatDirectOrder => "sat-directorder/1",
            FeatureSet::Combined => "combined/1",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            FeatureSet::Csp => "csp",
            FeatureSet::SatDirect => "sat-direct",
            FeatureSet::SatSupport => "sat-support",
            FeatureSet::SatDirectOrder => "sat-directorder",
            FeatureSet::Combined => "combined",
        }
    }

    fn encoding(self) -> Option<EncodingKind> {
        match self {
            FeatureSet::SatDirect => Some(EncodingKind::Direct),
            FeatureSet::SatSupport => Some(EncodingKind::Support),
            FeatureSet::SatDirectOrder => Some(EncodingKind::DirectOrder),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.keyword() == s || f.schema_id() == s)
            .ok_or_else(|| format!("unknown feature set `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub id: String,
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: String,
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    fn new(schema: &str) -> FeatureVector {
        FeatureVector { schema: schema.into(), names: Vec::new(), kinds: Vec::new(), values: Vec::new() }
    }

    fn push(&mut self, name: &str, kind: FeatureKind, value: f64) {
        let value = if value.is_finite() { value } else { SENTINEL };
        self.names.push(name.into());
        self.kinds.push(kind);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema { id: self.schema.clone(), names: self.names.clone(), kinds: self.kinds.clone() }
    }

    /// Names of features whose value is outside their kind's range.
    pub fn out_of_range(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.kinds)
            .zip(&self.values)
            .filter(|((_, k), &v)| !k.admits(v))
            .map(|((n, _), _)| n.as_str())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspProbe {
    pub node_budget: u64,
}

impl Default for CspProbe {
    fn default() -> Self {
        CspProbe { node_budget: 1000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatProbe {
    pub conflict_budget: u64,
    /// Maximum number of clauses used for the graph block.
    pub graph_sample: usize,
}

impl Default for SatProbe {
    fn default() -> Self {
        SatProbe { conflict_budget: 100, graph_sample: 2000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub csp: CspProbe,
    pub sat: SatProbe,
}

struct Summary {
    mean: f64,
    min: f64,
    max: f64,
    cv: f64,
}

/// Mean, extremes and coefficient of variation; all sentinel when empty.
fn summarize(xs: &[f64]) -> Summary {
    if xs.is_empty() {
        return Summary { mean: SENTINEL, min: SENTINEL, max: SENTINEL, cv: SENTINEL };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Summary { mean, min, max, cv }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        SENTINEL
    }
}

pub fn csp_features(instance: &CspInstance, probe: &CspProbe) -> Result<FeatureVector, FeatureError> {
    use FeatureKind::*;
    instance.ensure_valid()?;
    let mut fv = FeatureVector::new(FeatureSet::Csp.schema_id());
    let n = instance.n_vars();
    let m = instance.constraints.len();

    fv.push("n_vars", Count, n as f64);
    fv.push("n_constraints", Count, m as f64);
    fv.push("n_unary", Count, instance.unary.len() as f64);
    fv.push("constraint_var_ratio", Ratio, ratio(m as f64, n as f64));

    let doms: Vec<f64> = instance.variables.iter().map(|v| v.domain.len() as f64).collect();
    let ds = summarize(&doms);
    fv.push("domain_mean", Ratio, ds.mean);
    fv.push("domain_max", Ratio, ds.max);
    fv.push("domain_min", Ratio, ds.min);
    fv.push("domain_cv", Ratio, ds.cv);
    fv.push("log10_search_space", Ratio, doms.iter().map(|d| d.log10()).sum());

    let tight: Vec<f64> =
        instance.constraints.iter().map(|c| constraint_tightness(c, instance)).collect::<Result<_, _>>()?;
    let ts = summarize(&tight);
    fv.push("tightness_mean", Fraction, ts.mean);
    fv.push("tightness_max", Fraction, ts.max);
    fv.push("tightness_min", Fraction, ts.min);
    fv.push("tightness_cv", Ratio, ts.cv);

    let frac = |pred: &dyn Fn(&Relation) -> bool| {
        ratio(instance.constraints.iter().filter(|c| pred(&c.relation)).count() as f64, m as f64)
    };
    let op_in =
        |ops: &'static [IntOp]| move |r: &Relation| matches!(r, Relation::Intensional { op, .. } if ops.contains(op));
    fv.push("frac_extensional", Fraction, frac(&|r| r.is_extensional()));
    fv.push("frac_eq", Fraction, frac(&op_in(&[IntOp::Eq])));
    fv.push("frac_neq", Fraction, frac(&op_in(&[IntOp::Neq])));
    fv.push("frac_ordering", Fraction, frac(&op_in(&[IntOp::Lt, IntOp::Leq, IntOp::Gt, IntOp::Geq])));
    fv.push("frac_absdiff", Fraction, frac(&op_in(&[IntOp::AbsDiffEq, IntOp::AbsDiffNeq])));

    let pairs: BTreeSet<(usize, usize)> =
        instance.constraints.iter().map(|c| (c.scope.0.min(c.scope.1), c.scope.0.max(c.scope.1))).collect();
    let max_pairs = n * n.saturating_sub(1) / 2;
    fv.push("graph_density", Fraction, if max_pairs == 0 { 0.0 } else { pairs.len() as f64 / max_pairs as f64 });
    let mut degree = vec![0.0; n];
    for &(a, b) in &pairs {
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    let gs = summarize(&degree);
    fv.push("degree_mean", Ratio, gs.mean);
    fv.push("degree_max", Ratio, gs.max);
    fv.push("degree_cv", Ratio, gs.cv);

    let ac = ac3(instance)?;
    let total: usize = instance.variables.iter().map(|v| v.domain.len()).sum();
    let kept: usize = ac.domains.iter().map(Vec::len).sum();
    fv.push("ac_pruned_frac", Fraction, ratio((total - kept) as f64, total as f64));
    fv.push("ac_wipeout", Flag, f64::from(u8::from(ac.wipeout)));

    let config = SearchConfig::new(Propagation::Ac3, Find::First).with_node_budget(probe.node_budget);
    let out = solve_backtracking(instance, &config)?;
    fv.push("probe_nodes", Count, out.nodes as f64);
    fv.push("probe_propagations", Count, out.propagations as f64);
    fv.push("probe_backtracks", Count, out.backtracks as f64);
    fv.push("probe_depth_frac", Fraction, ratio(out.max_depth as f64, n as f64));
    fv.push("probe_budget_used", Fraction, ratio(out.nodes as f64, probe.node_budget as f64).min(1.0));
    fv.push("probe_solved", Flag, f64::from(u8::from(out.status != SearchStatus::BudgetExhausted)));
    Ok(fv)
}

/// Evenly strided subset of at most `limit` clause indices.
fn sample_indices(n: usize, limit: usize) -> Vec<usize> {
    if n <= limit || limit == 0 {
        return (0..n).collect();
    }
    let stride = n.div_ceil(limit);
    (0..n).step_by(stride).collect()
}

/// Variables ordered by decreasing occurrence count, ties by index.
fn busiest_vars(f: &CnfFormula, occ: &[usize]) -> Vec<Lit> {
    let mut vars: Vec<usize> = (1..=f.n_vars()).filter(|&v| occ[v] > 0).collect();
    vars.sort_by_key(|&v| (std::cmp::Reverse(occ[v]), v));
    vars.into_iter().map(|v| v as Lit).collect()
}

pub fn sat_features(f: &CnfFormula, probe: &SatProbe) -> FeatureVector {
    sat_features_with_schema(f, probe, "sat/1")
}

fn sat_features_with_schema(f: &CnfFormula, probe: &SatProbe, schema: &str) -> FeatureVector {
    use FeatureKind::*;
    let mut fv = FeatureVector::new(schema);
    let nv = f.n_vars();
    let nc = f.n_clauses();
    let clauses = f.clauses();

    fv.push("n_vars", Count, nv as f64);
    fv.push("n_clauses", Count, nc as f64);
    fv.push("clause_var_ratio", Ratio, ratio(nc as f64, nv as f64));
    fv.push("var_clause_ratio", Ratio, ratio(nv as f64, nc as f64));

    let lens: Vec<f64> = clauses.iter().map(|c| c.len() as f64).collect();
    let ls = summarize(&lens);
    fv.push("clause_len_mean", Ratio, ls.mean);
    fv.push("clause_len_cv", Ratio, ls.cv);
    let frac_len = |k: usize| ratio(clauses.iter().filter(|c| c.len() == k).count() as f64, nc as f64);
    fv.push("frac_unary", Fraction, frac_len(1));
    fv.push("frac_binary", Fraction, frac_len(2));
    fv.push("frac_ternary", Fraction, frac_len(3));

    let pos: Vec<f64> = clauses
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().filter(|&&l| l > 0).count() as f64 / c.len() as f64)
        .collect();
    let ps = summarize(&pos);
    fv.push("pos_frac_mean", Fraction, ps.mean);
    fv.push("pos_frac_cv", Ratio, ps.cv);

    let mut pos_occ = vec![0usize; nv + 1];
    let mut neg_occ = vec![0usize; nv + 1];
    for c in clauses {
        for &l in c {
            if l > 0 {
                pos_occ[l as usize] += 1;
            } else {
                neg_occ[(-l) as usize] += 1;
            }
        }
    }
    let occ: Vec<usize> = (0..=nv).map(|v| pos_occ[v] + neg_occ[v]).collect();
    let balance: Vec<f64> = (1..=nv).filter(|&v| occ[v] > 0).map(|v| pos_occ[v] as f64 / occ[v] as f64).collect();
    let bs = summarize(&balance);
    fv.push("var_pos_frac_mean", Fraction, bs.mean);
    fv.push("var_pos_frac_cv", Ratio, bs.cv);

    let is_horn = |c: &Vec<Lit>| c.iter().filter(|&&l| l > 0).count() <= 1;
    let horn = clauses.iter().filter(|c| is_horn(c)).count();
    fv.push("horn_frac", Fraction, ratio(horn as f64, nc as f64));
    let mut horn_occ = vec![0usize; nv + 1];
    for c in clauses.iter().filter(|c| is_horn(c)) {
        for &l in c {
            horn_occ[l.unsigned_abs() as usize] += 1;
        }
    }
    let ho: Vec<f64> = (1..=nv).map(|v| horn_occ[v] as f64 / nc.max(1) as f64).collect();
    let hs = summarize(&ho);
    fv.push("horn_var_occ_mean", Fraction, hs.mean);
    fv.push("horn_var_occ_max", Fraction, hs.max);
    fv.push("horn_var_occ_cv", Ratio, hs.cv);

    // graph block on a strided clause sample
    let sample = sample_indices(nc, probe.graph_sample);
    let mut var_clauses: Vec<Vec<usize>> = vec![Vec::new(); nv + 1];
    for (si, &ci) in sample.iter().enumerate() {
        for &l in &clauses[ci] {
            var_clauses[l.unsigned_abs() as usize].push(si);
        }
    }
    let used: Vec<usize> = (1..=nv).filter(|&v| !var_clauses[v].is_empty()).collect();
    let mut vg_degree = Vec::with_capacity(used.len());
    for &v in &used {
        let mut nbrs = BTreeSet::new();
        for &si in &var_clauses[v] {
            for &l in &clauses[sample[si]] {
                nbrs.insert(l.unsigned_abs() as usize);
            }
        }
        nbrs.remove(&v);
        vg_degree.push(ratio(nbrs.len() as f64, (used.len() - 1) as f64).max(0.0));
    }
    let vgs = summarize(&vg_degree);
    fv.push("vg_degree_mean", Fraction, vgs.mean);
    fv.push("vg_degree_cv", Ratio, vgs.cv);

    let mut cg_degree = Vec::with_capacity(sample.len());
    for &ci in &sample {
        let mut nbrs = BTreeSet::new();
        for &l in &clauses[ci] {
            nbrs.extend(var_clauses[l.unsigned_abs() as usize].iter().copied());
        }
        let own = nbrs.len().saturating_sub(usize::from(!clauses[ci].is_empty()));
        cg_degree.push(ratio(own as f64, (sample.len() - 1) as f64).max(0.0));
    }
    let cgs = summarize(&cg_degree);
    fv.push("cg_degree_mean", Fraction, cgs.mean);
    fv.push("cg_degree_cv", Ratio, cgs.cv);

    let vcg: Vec<f64> = used.iter().map(|&v| var_clauses[v].len() as f64 / sample.len() as f64).collect();
    let vcs = summarize(&vcg);
    fv.push("vcg_var_degree_mean", Fraction, vcs.mean);
    fv.push("vcg_var_degree_cv", Ratio, vcs.cv);

    // probing
    let root = unit_propagate(f, &[]);
    let root_conflict = root.status == PropagationStatus::Conflict;
    fv.push("up_root_frac", Fraction, ratio(root.implied.len() as f64, nv as f64).min(1.0));
    let order: Vec<Lit> = busiest_vars(f, &occ)
        .into_iter()
        .filter(|l| !root.implied.contains(l) && !root.implied.contains(&-l))
        .collect();
    for depth in [1usize, 4] {
        let (frac, conflict) = if root_conflict || order.is_empty() {
            (0.0, root_conflict)
        } else {
            let assumptions: Vec<Lit> = order.iter().take(depth).copied().collect();
            let up = unit_propagate(f, &assumptions);
            let implied = up.implied.len().saturating_sub(root.implied.len() + assumptions.len());
            (ratio(implied as f64, nv as f64).clamp(0.0, 1.0), up.status == PropagationStatus::Conflict)
        };
        fv.push(&format!("up_depth{depth}_frac"), Fraction, frac);
        fv.push(&format!("up_depth{depth}_conflict"), Flag, f64::from(u8::from(conflict)));
    }

    let out = solve_dpll(f, &DpllConfig { conflict_budget: Some(probe.conflict_budget), ..Default::default() });
    fv.push("probe_decisions", Count, out.decisions as f64);
    fv.push("probe_propagations", Count, out.propagations as f64);
    fv.push("probe_conflicts", Count, out.conflicts as f64);
    fv.push("probe_solved", Flag, f64::from(u8::from(out.status != SatStatus::BudgetExhausted)));
    fv
}

fn prefixed(out: &mut FeatureVector, prefix: &str, part: FeatureVector) {
    for ((name, kind), value) in part.names.into_iter().zip(part.kinds).zip(part.values) {
        out.push(&format!("{prefix}.{name}"), kind, value);
    }
}

/// Features of `instance` under the given feature set.
pub fn features_for(
    instance: &CspInstance,
    set: FeatureSet,
    probe: &ProbeConfig,
) -> Result<FeatureVector, FeatureError> {
    match set {
        FeatureSet::Csp => csp_features(instance, &probe.csp),
        FeatureSet::Combined => combined_features(instance, probe),
        sat => {
            let enc = encode(instance, sat.encoding().unwrap())?;
            Ok(sat_features_with_schema(&enc.formula, &probe.sat, sat.schema_id()))
        }
    }
}

/// `csp ++ sat(direct) ++ sat(support) ++ sat(directorder)`, names prefixed
/// by their block.
pub fn combined_features(instance: &CspInstance, probe: &ProbeConfig) -> Result<FeatureVector, FeatureError> {
    let mut fv = FeatureVector::new(FeatureSet::Combined.schema_id());
    prefixed(&mut fv, "csp", csp_features(instance, &probe.csp)?);
    for (prefix, kind) in [
        ("direct", EncodingKind::Direct),
        ("support", EncodingKind::Support),
        ("directorder", EncodingKind::DirectOrder),
    ] {
        let enc = encode(instance, kind)?;
        prefixed(&mut fv, prefix, sat_features(&enc.formula, &probe.sat));
    }
    Ok(fv)
}

/// Schema of a feature set. Names and order never depend on the instance.
pub fn schema(set: FeatureSet) -> FeatureSchema {
    let mut probe_inst = CspInstance::with_variables([("X", crate::csp::Domain::range(1, 1))]);
    probe_inst.meta.name = "schema".into();
    features_for(&probe_inst, set, &ProbeConfig::default()).expect("schema probe instance is valid").schema()
}

/// A feature matrix: one row per instance id.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub schema: String,
    pub names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl FeatureTable {
    pub fn new(schema: impl Into<String>, names: Vec<String>) -> FeatureTable {
        FeatureTable { schema: schema.into(), names, rows: Vec::new() }
    }

    pub fn push(&mut self, id: impl Into<String>, fv: &FeatureVector) -> Result<(), FeatureError> {
        if fv.schema != self.schema || fv.names != self.names {
            return Err(FeatureError::Csv(format!("schema mismatch: {} vs {}", fv.schema, self.schema)));
        }
        self.rows.push((id.into(), fv.values.clone()));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.iter().find(|(i, _)| i == id).map(|(_, v)| v.as_slice())
    }
}

/// Writes `# schema: <id>`, a header `instance,<names...>` and one row per
/// instance.
pub fn write_feature_csv<W: Write>(table: &FeatureTable, mut sink: W) -> Result<(), FeatureError> {
    writeln!(sink, "# schema: {}", table.schema)?;
    let mut w = csv::Writer::from_writer(sink);
    let header = std::iter::once("instance").chain(table.names.iter().map(String::as_str));
    w.write_record(header).map_err(|e| FeatureError::Csv(e.to_string()))?;
    for (id, values) in &table.rows {
        let rec = std::iter::once(id.clone()).chain(values.iter().map(|v| v.to_string()));
        w.write_record(rec).map_err(|e| FeatureError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(source: R) -> Result<FeatureTable, FeatureError> {
    let mut reader = BufReader::new(source);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let schema = first
        .trim()
        .strip_prefix("# schema:")
        .map(|s| s.trim().to_string())
        .ok_or_else(|| FeatureError::Csv("missing `# schema:` line".into()))?;
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| FeatureError::Csv(e.to_string()))?.clone();
    if headers.get(0) != Some("instance") {
        return Err(FeatureError::Csv("first column must be `instance`".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut table = FeatureTable::new(schema, names);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Csv(e.to_string()))?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| FeatureError::Csv(format!("row {}: bad number `{s}`", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != table.names.len() {
            return Err(FeatureError::Csv(format!("row {} has {} values", i + 1, values.len())));
        }
        table.rows.push((rec[0].to_string(), values));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{alldifferent_example, Domain};

    #[test]
    fn example_csp_features() {
        let fv = csp_features(&alldifferent_example(), &CspProbe::default()).unwrap();
        assert_eq!(fv.get("n_vars"), Some(3.0));
        assert_eq!(fv.get("n_constraints"), Some(3.0));
        assert_eq!(fv.get("domain_mean"), Some(3.0));
        assert!((fv.get("tightness_mean").unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(fv.get("frac_neq"), Some(1.0));
        assert_eq!(fv.get("graph_density"), Some(1.0));
        assert_eq!(fv.get("probe_solved"), Some(1.0));
        assert!(fv.out_of_range().is_empty());
    }

    #[test]
    fn unconstrained_instance_uses_sentinels() {
        let inst = CspInstance::with_variables([("A", Domain::range(1, 4)), ("B", Domain::range(1, 2))]);
        let fv = csp_features(&inst, &CspProbe::default()).unwrap();
        assert_eq!(fv.get("n_constraints"), Some(0.0));
        assert_eq!(fv.get("graph_density"), Some(0.0));
        assert_eq!(fv.get("tightness_mean"), Some(SENTINEL));
        assert_eq!(fv.get("tightness_max"), Some(SENTINEL));
        assert_eq!(fv.get("frac_neq"), Some(SENTINEL));
    }

    #[test]
    fn small_formula_size_block() {
        let f = CnfFormula::from_clauses(4, [vec![1, 2, -4], vec![-2, -3], vec![3, 4]]).unwrap();
        let fv = sat_features(&f, &SatProbe::default());
        assert_eq!(fv.get("n_vars"), Some(4.0));
        assert_eq!(fv.get("n_clauses"), Some(3.0));
        assert_eq!(fv.get("clause_var_ratio"), Some(0.75));
        assert!((fv.get("frac_binary").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(fv.out_of_range().is_empty());
    }

    #[test]
    fn positive_units_are_horn() {
        let f = CnfFormula::from_clauses(3, [vec![1], vec![2], vec![3]]).unwrap();
        let fv = sat_features(&f, &SatProbe::default());
        assert_eq!(fv.get("horn_frac"), Some(1.0));
        assert_eq!(fv.get("up_root_frac"), Some(1.0));
    }

    #[test]
    fn empty_formula_is_all_sentinel_or_zero() {
        let fv = sat_features(&CnfFormula::new(0), &SatProbe::default());
        assert!(fv.out_of_range().is_empty(), "{:?}", fv.out_of_range());
        assert_eq!(fv.get("clause_var_ratio"), Some(SENTINEL));
    }

    #[test]
    fn combined_layout() {
        let inst = alldifferent_example();
        let probe = ProbeConfig::default();
        let fv = combined_features(&inst, &probe).unwrap();
        let csp_len = schema(FeatureSet::Csp).names.len();
        let sat_len = schema(FeatureSet::SatDirect).names.len();
        assert_eq!(fv.len(), csp_len + 3 * sat_len);
        let direct = features_for(&inst, FeatureSet::SatDirect, &probe).unwrap();
        assert_eq!(&fv.values[csp_len..csp_len + sat_len], direct.values.as_slice());
        assert_eq!(direct.get("n_vars"), Some(9.0));
        assert_eq!(direct.get("n_clauses"), Some(21.0));
        assert_eq!(fv, combined_features(&inst, &probe).unwrap());
    }

    #[test]
    fn schema_names_are_unique() {
        for set in FeatureSet::ALL {
            let s = schema(set);
            let unique: BTreeSet<&String> = s.names.iter().collect();
            assert_eq!(unique.len(), s.names.len(), "{set}");
            assert_eq!(s.id, set.schema_id());
        }
    }

    #[test]
    fn csv_round_trip() {
        let inst = alldifferent_example();
        let fv = csp_features(&inst, &CspProbe::default()).unwrap();
        let mut table = FeatureTable::new(fv.schema.clone(), fv.names.clone());
        table.push("a", &fv).unwrap();
        table.push("b", &fv).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# schema: csp/1\ninstance,n_vars,"));
        assert_eq!(read_feature_csv(buf.as_slice()).unwrap(), table);
    }
}
