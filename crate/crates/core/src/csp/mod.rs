//! Finite-domain CSP instances with binary constraints.
//!
//! Instances are plain data: construction does not validate, [`CspInstance::validate`]
//! reports every invariant violation, and [`CspInstance::ensure_valid`] turns
//! those into an error. The parser and the generator always hand out valid
//! instances.

mod ac3;
pub mod format;
mod search;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ac3::{ac3, Ac3Outcome};
pub use search::{solve_backtracking, Find, Propagation, SearchConfig, SearchOutcome, SearchStatus};

/// Default bound on the number of tuples enumerated for a single constraint.
pub const DEFAULT_TUPLE_CAP: u64 = 1_000_000;

pub type VarId = usize;

#[derive(Debug, Error)]
pub enum CspError {
    #[error("constraint {index} spans {size} tuples, above the enumeration cap of {cap}")]
    EnumerationCap { index: usize, size: u64, cap: u64 },
    #[error("invalid instance: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A strictly increasing, non-empty list of integer values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Domain(Vec<i64>);

impl Domain {
    /// Builds a domain from arbitrary values; sorts and removes duplicates.
    /// Returns `None` when no value is given.
    pub fn new(values: impl IntoIterator<Item = i64>) -> Option<Domain> {
        let set: BTreeSet<i64> = values.into_iter().collect();
        if set.is_empty() {
            None
        } else {
            Some(Domain(set.into_iter().collect()))
        }
    }

    /// Contiguous range `lo..=hi`.
    pub fn range(lo: i64, hi: i64) -> Domain {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        Domain((lo..=hi).collect())
    }

    /// Wraps values without checking; used by `validate` tests.
    pub fn from_raw(values: Vec<i64>) -> Domain {
        Domain(values)
    }

    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Zero-based position of `v` in the domain.
    pub fn rank_of(&self, v: i64) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }

    pub fn min(&self) -> i64 {
        self.0[0]
    }

    pub fn max(&self) -> i64 {
        self.0[self.0.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub domain: Domain,
}

/// Arithmetic relations between two variables, read as `X op Y + offset`.
/// The absolute-difference forms read `|X - Y| == offset` and `|X - Y| != offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IntOp {
    Eq,
    Neq,
    Lt,
    Leq,
    Gt,
    Geq,
    AbsDiffEq,
    AbsDiffNeq,
}

impl IntOp {
    pub const ALL: [IntOp; 8] =
        [IntOp::Eq, IntOp::Neq, IntOp::Lt, IntOp::Leq, IntOp::Gt, IntOp::Geq, IntOp::AbsDiffEq, IntOp::AbsDiffNeq];

    pub fn holds(self, x: i64, y: i64, offset: i64) -> bool {
        let rhs = y + offset;
        match self {
            IntOp::Eq => x == rhs,
            IntOp::Neq => x != rhs,
            IntOp::Lt => x < rhs,
            IntOp::Leq => x <= rhs,
            IntOp::Gt => x > rhs,
            IntOp::Geq => x >= rhs,
            IntOp::AbsDiffEq => (x - y).abs() == offset,
            IntOp::AbsDiffNeq => (x - y).abs() != offset,
        }
    }

    /// The relation seen from the other variable, with the matching offset.
    pub fn transposed(self, offset: i64) -> (IntOp, i64) {
        match self {
            IntOp::Eq => (IntOp::Eq, -offset),
            IntOp::Neq => (IntOp::Neq, -offset),
            IntOp::Lt => (IntOp::Gt, -offset),
            IntOp::Leq => (IntOp::Geq, -offset),
            IntOp::Gt => (IntOp::Lt, -offset),
            IntOp::Geq => (IntOp::Leq, -offset),
            IntOp::AbsDiffEq | IntOp::AbsDiffNeq => (self, offset),
        }
    }

    /// True for the four ordering relations.
    pub fn is_inequality(self) -> bool {
        matches!(self, IntOp::Lt | IntOp::Leq | IntOp::Gt | IntOp::Geq)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            IntOp::Eq => "eq",
            IntOp::Neq => "neq",
            IntOp::Lt => "lt",
            IntOp::Leq => "leq",
            IntOp::Gt => "gt",
            IntOp::Geq => "geq",
            IntOp::AbsDiffEq => "absdiff-eq",
            IntOp::AbsDiffNeq => "absdiff-neq",
        }
    }

    pub fn from_keyword(s: &str) -> Option<IntOp> {
        IntOp::ALL.into_iter().find(|op| op.keyword() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// Only the listed `(x, y)` value pairs are allowed.
    Allowed(BTreeSet<(i64, i64)>),
    /// The listed `(x, y)` value pairs are forbidden, everything else is allowed.
    Forbidden(BTreeSet<(i64, i64)>),
    Intensional {
        op: IntOp,
        offset: i64,
    },
}

impl Relation {
    pub fn intensional(op: IntOp) -> Relation {
        Relation::Intensional { op, offset: 0 }
    }

    pub fn allows(&self, x: i64, y: i64) -> bool {
        match self {
            Relation::Allowed(t) => t.contains(&(x, y)),
            Relation::Forbidden(t) => !t.contains(&(x, y)),
            Relation::Intensional { op, offset } => op.holds(x, y, *offset),
        }
    }

    fn transposed(&self) -> Relation {
        let swap = |t: &BTreeSet<(i64, i64)>| t.iter().map(|&(a, b)| (b, a)).collect();
        match self {
            Relation::Allowed(t) => Relation::Allowed(swap(t)),
            Relation::Forbidden(t) => Relation::Forbidden(swap(t)),
            Relation::Intensional { op, offset } => {
                let (op, offset) = op.transposed(*offset);
                Relation::Intensional { op, offset }
            }
        }
    }

    pub fn is_extensional(&self) -> bool {
        !matches!(self, Relation::Intensional { .. })
    }
}

/// A binary constraint over `scope.0` (X) and `scope.1` (Y).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub scope: (VarId, VarId),
    pub relation: Relation,
}

impl Constraint {
    pub fn new(x: VarId, y: VarId, relation: Relation) -> Constraint {
        Constraint { scope: (x, y), relation }
    }

    fn canonical(&self) -> (VarId, VarId, Relation) {
        let (x, y) = self.scope;
        if x <= y {
            (x, y, self.relation.clone())
        } else {
            (y, x, self.relation.transposed())
        }
    }
}

/// `X op bound` on a single variable. Only the six plain comparison
/// operators are meaningful here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnaryConstraint {
    pub var: VarId,
    pub op: IntOp,
    pub bound: i64,
}

impl UnaryConstraint {
    pub fn allows(&self, v: i64) -> bool {
        self.op.holds(v, self.bound, 0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub tags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspInstance {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub unary: Vec<UnaryConstraint>,
    pub meta: Metadata,
}

/// One invariant violation, located by the offending item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VariableIdMismatch { position: usize, id: VarId },
    DuplicateName { name: String },
    EmptyDomain { var: VarId },
    UnsortedDomain { var: VarId },
    ScopeOutOfRange { constraint: usize, var: VarId },
    ScopeNotDistinct { constraint: usize },
    TupleOutOfDomain { constraint: usize, tuple: (i64, i64) },
    DuplicateConstraint { constraint: usize, first: usize },
    UnaryOutOfRange { constraint: usize, var: VarId },
    UnaryOperator { constraint: usize, op: IntOp },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VariableIdMismatch { position, id } => {
                write!(f, "variable at position {position} has id {id}")
            }
            Violation::DuplicateName { name } => write!(f, "duplicate variable name `{name}`"),
            Violation::EmptyDomain { var } => write!(f, "variable {var} has an empty domain"),
            Violation::UnsortedDomain { var } => {
                write!(f, "domain of variable {var} is not strictly increasing")
            }
            Violation::ScopeOutOfRange { constraint, var } => {
                write!(f, "constraint {constraint} references unknown variable {var}")
            }
            Violation::ScopeNotDistinct { constraint } => {
                write!(f, "constraint {constraint} has a repeated variable in its scope")
            }
            Violation::TupleOutOfDomain { constraint, tuple } => {
                write!(f, "constraint {constraint} lists tuple {tuple:?} outside the domains")
            }
            Violation::DuplicateConstraint { constraint, first } => {
                write!(f, "constraint {constraint} duplicates constraint {first}")
            }
            Violation::UnaryOutOfRange { constraint, var } => {
                write!(f, "unary constraint {constraint} references unknown variable {var}")
            }
            Violation::UnaryOperator { constraint, op } => {
                write!(f, "unary constraint {constraint} uses unsupported operator {}", op.keyword())
            }
        }
    }
}

/// A (possibly partial) map from variable id to value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub BTreeMap<VarId, i64>);

impl Assignment {
    pub fn get(&self, var: VarId) -> Option<i64> {
        self.0.get(&var).copied()
    }

    pub fn set(&mut self, var: VarId, value: i64) {
        self.0.insert(var, value);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(VarId, i64)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (VarId, i64)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

impl CspInstance {
    /// Starts an instance with the given variables; ids follow insertion order.
    pub fn with_variables<S: Into<String>>(vars: impl IntoIterator<Item = (S, Domain)>) -> CspInstance {
        let variables = vars
            .into_iter()
            .enumerate()
            .map(|(id, (name, domain))| Variable { id, name: name.into(), domain })
            .collect();
        CspInstance { variables, ..Default::default() }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: Domain) -> VarId {
        let id = self.variables.len();
        self.variables.push(Variable { id, name: name.into(), domain });
        id
    }

    pub fn add_constraint(&mut self, x: VarId, y: VarId, relation: Relation) {
        self.constraints.push(Constraint::new(x, y, relation));
    }

    pub fn add_unary(&mut self, var: VarId, op: IntOp, bound: i64) {
        self.unary.push(UnaryConstraint { var, op, bound });
    }

    /// Decomposes `alldifferent(vars)` into pairwise disequalities.
    pub fn add_alldifferent(&mut self, vars: &[VarId]) {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                self.add_constraint(a, b, Relation::intensional(IntOp::Neq));
            }
        }
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn domain(&self, var: VarId) -> &Domain {
        &self.variables[var].domain
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    /// Reports every invariant violation; an empty list means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.variables.len();
        let mut names = HashSet::new();
        for (pos, var) in self.variables.iter().enumerate() {
            if var.id != pos {
                out.push(Violation::VariableIdMismatch { position: pos, id: var.id });
            }
            if !names.insert(var.name.as_str()) {
                out.push(Violation::DuplicateName { name: var.name.clone() });
            }
            if var.domain.is_empty() {
                out.push(Violation::EmptyDomain { var: pos });
            } else if var.domain.values().windows(2).any(|w| w[0] >= w[1]) {
                out.push(Violation::UnsortedDomain { var: pos });
            }
        }

        let mut seen: Vec<((VarId, VarId, Relation), usize)> = Vec::new();
        for (ci, c) in self.constraints.iter().enumerate() {
            let (x, y) = c.scope;
            let mut in_range = true;
            for v in [x, y] {
                if v >= n {
                    out.push(Violation::ScopeOutOfRange { constraint: ci, var: v });
                    in_range = false;
                }
            }
            if x == y {
                out.push(Violation::ScopeNotDistinct { constraint: ci });
                continue;
            }
            if !in_range {
                continue;
            }
            if let Relation::Allowed(t) | Relation::Forbidden(t) = &c.relation {
                let (dx, dy) = (self.domain(x), self.domain(y));
                for &(a, b) in t {
                    if !dx.contains(a) || !dy.contains(b) {
                        out.push(Violation::TupleOutOfDomain { constraint: ci, tuple: (a, b) });
                    }
                }
            }
            let key = c.canonical();
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                out.push(Violation::DuplicateConstraint { constraint: ci, first: *first });
            } else {
                seen.push((key, ci));
            }
        }

        for (ui, u) in self.unary.iter().enumerate() {
            if u.var >= n {
                out.push(Violation::UnaryOutOfRange { constraint: ui, var: u.var });
            }
            if matches!(u.op, IntOp::AbsDiffEq | IntOp::AbsDiffNeq) {
                out.push(Violation::UnaryOperator { constraint: ui, op: u.op });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<(), CspError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CspError::Invalid(v))
        }
    }

    /// Oracle consistency check: total, in-domain, and every constraint satisfied.
    pub fn is_solution(&self, assignment: &Assignment) -> bool {
        if assignment.len() != self.n_vars() {
            return false;
        }
        let value = |v: VarId| assignment.get(v);
        for var in &self.variables {
            match value(var.id) {
                Some(x) if var.domain.contains(x) => {}
                _ => return false,
            }
        }
        let binary_ok = self.constraints.iter().all(|c| {
            let (x, y) = c.scope;
            c.relation.allows(value(x).unwrap(), value(y).unwrap())
        });
        binary_ok && self.unary.iter().all(|u| u.allows(value(u.var).unwrap()))
    }

    /// Copy of this instance with each domain replaced by `domains[var]`.
    /// Extensional tuples outside the new domains are dropped. Every new
    /// domain must be non-empty.
    pub fn restrict_domains(&self, domains: &[Vec<i64>]) -> CspInstance {
        let mut out = self.clone();
        for (var, values) in out.variables.iter_mut().zip(domains) {
            var.domain = Domain::new(values.iter().copied()).expect("restricted domain is empty");
        }
        for c in &mut out.constraints {
            let (x, y) = c.scope;
            let (dx, dy) = (out.variables[x].domain.clone(), out.variables[y].domain.clone());
            if let Relation::Allowed(t) | Relation::Forbidden(t) = &mut c.relation {
                t.retain(|&(a, b)| dx.contains(a) && dy.contains(b));
            }
        }
        out
    }

    /// Number of tuples in the domain product of a constraint.
    pub fn product_size(&self, c: &Constraint) -> u64 {
        self.domain(c.scope.0).len() as u64 * self.domain(c.scope.1).len() as u64
    }

    /// Total number of complete assignments, saturating.
    pub fn search_space(&self) -> u128 {
        self.variables.iter().fold(1u128, |acc, v| acc.saturating_mul(v.domain.len() as u128))
    }

    /// Index of `c` in this instance, used for error locations.
    fn index_of(&self, c: &Constraint) -> usize {
        self.constraints.iter().position(|o| std::ptr::eq(o, c)).unwrap_or(usize::MAX)
    }
}

/// Domain-product pairs violating `c`, in lexicographic order.
pub fn forbidden_tuples(c: &Constraint, instance: &CspInstance) -> Result<Vec<(i64, i64)>, CspError> {
    forbidden_tuples_capped(c, instance, DEFAULT_TUPLE_CAP)
}

pub fn forbidden_tuples_capped(c: &Constraint, instance: &CspInstance, cap: u64) -> Result<Vec<(i64, i64)>, CspError> {
    if let Relation::Forbidden(t) = &c.relation {
        return Ok(t.iter().copied().collect());
    }
    check_cap(c, instance, cap)?;
    let (dx, dy) = (instance.domain(c.scope.0), instance.domain(c.scope.1));
    let mut out = Vec::new();
    for &a in dx.values() {
        for &b in dy.values() {
            if !c.relation.allows(a, b) {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

/// Fraction of the domain product forbidden by `c`.
pub fn constraint_tightness(c: &Constraint, instance: &CspInstance) -> Result<f64, CspError> {
    let forbidden = forbidden_tuples(c, instance)?.len();
    Ok(forbidden as f64 / instance.product_size(c) as f64)
}

fn check_cap(c: &Constraint, instance: &CspInstance, cap: u64) -> Result<(), CspError> {
    let size = instance.product_size(c);
    if size > cap {
        return Err(CspError::EnumerationCap { index: instance.index_of(c), size, cap });
    }
    Ok(())
}

/// Rank-level view of a binary constraint: `allowed[i * dy + j]` tells
/// whether rank `i` of X and rank `j` of Y are compatible.
#[derive(Clone, Debug)]
pub(crate) struct RankTable {
    pub x: VarId,
    pub y: VarId,
    pub dy: usize,
    pub allowed: Vec<bool>,
}

impl RankTable {
    #[inline]
    pub fn ok(&self, i: usize, j: usize) -> bool {
        self.allowed[i * self.dy + j]
    }
}

/// Instance compiled to rank tables, shared by the search, AC-3 and the encoders.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub dom_sizes: Vec<usize>,
    pub tables: Vec<RankTable>,
    /// Per variable: (table index, other variable, whether this variable is the table's X).
    pub adjacency: Vec<Vec<(usize, VarId, bool)>>,
    /// Per variable and rank: false when a unary constraint excludes the value.
    pub unary_ok: Vec<Vec<bool>>,
}

impl Compiled {
    pub fn new(instance: &CspInstance, cap: u64) -> Result<Compiled, CspError> {
        let dom_sizes: Vec<usize> = instance.variables.iter().map(|v| v.domain.len()).collect();
        let mut tables = Vec::with_capacity(instance.constraints.len());
        let mut adjacency = vec![Vec::new(); instance.n_vars()];
        for (ci, c) in instance.constraints.iter().enumerate() {
            check_cap(c, instance, cap).map_err(|e| match e {
                CspError::EnumerationCap { size, cap, .. } => CspError::EnumerationCap { index: ci, size, cap },
                other => other,
            })?;
            let (x, y) = c.scope;
            let (dx, dy) = (instance.domain(x), instance.domain(y));
            let mut allowed = Vec::with_capacity(dx.len() * dy.len());
            for &a in dx.values() {
                for &b in dy.values() {
                    allowed.push(c.relation.allows(a, b));
                }
            }
            adjacency[x].push((ci, y, true));
            adjacency[y].push((ci, x, false));
            tables.push(RankTable { x, y, dy: dy.len(), allowed });
        }
        let mut unary_ok: Vec<Vec<bool>> = dom_sizes.iter().map(|&d| vec![true; d]).collect();
        for u in &instance.unary {
            for (r, &v) in instance.domain(u.var).values().iter().enumerate() {
                if !u.allows(v) {
                    unary_ok[u.var][r] = false;
                }
            }
        }
        Ok(Compiled { dom_sizes, tables, adjacency, unary_ok })
    }

    /// Compatibility of `var = rank_a` with `other = rank_b` under table `t`.
    #[inline]
    pub fn compatible(&self, t: usize, var_is_x: bool, rank_a: usize, rank_b: usize) -> bool {
        let table = &self.tables[t];
        if var_is_x {
            table.ok(rank_a, rank_b)
        } else {
            table.ok(rank_b, rank_a)
        }
    }
}

/// Example from the direct-encoding walkthrough: X, Y, Z over {1,2,3} with
/// alldifferent(X, Y, Z) decomposed into pairwise disequalities.
pub fn alldifferent_example() -> CspInstance {
    let mut inst = CspInstance::with_variables(["X", "Y", "Z"].map(|n| (n, Domain::range(1, 3))));
    inst.add_alldifferent(&[0, 1, 2]);
    inst.meta.name = "alldiff3".into();
    inst
}
