//! CSP to CNF translation.
//!
//! Values are addressed by their zero-based rank in the variable's domain;
//! SAT variables are numbered per CSP variable in id order.
//!
//! - **Direct**: one SAT variable `x_v` per value. Domain clauses are one
//!   at-least-one clause and `d(d-1)/2` pairwise at-most-one clauses. Each
//!   forbidden tuple `(v, w)` becomes `(¬x_v ∨ ¬y_w)`.
//! - **Support**: direct domain clauses; for each value `v` of X the clause
//!   `¬x_v ∨ ⋁ y_w` over the supports `w` of `v` in Y, and symmetrically for
//!   Y. An empty support yields the unit `(¬x_v)`.
//! - **Order**: one SAT variable `x≤r` per rank `r = 1..d`. Domain clauses
//!   are the chain `(¬x≤r ∨ x≤r+1)` and the unit `(x≤d)`. Each forbidden
//!   tuple becomes `(¬x≤v ∨ x≤v-1 ∨ ¬y≤w ∨ y≤w-1)` where `x≤0` literals are
//!   dropped; a variable with a single value contributes no literal.
//! - **Direct-order**: both representations, linked by channelling clauses
//!   for `x_v ↔ (x≤v ∧ ¬x≤v-1)`. Ordering relations (`lt`, `leq`, `gt`,
//!   `geq`) are posted on the order side as staircase clauses
//!   `(x≤v-1 ∨ ¬y≤w)`; every other relation uses direct conflict clauses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{CnfError, CnfFormula, Lit, SatModel};
use crate::csp::{forbidden_tuples_capped, Assignment, CspError, CspInstance, Domain, Relation, DEFAULT_TUPLE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EncodingKind {
    Direct,
    Support,
    Order,
    DirectOrder,
}

impl EncodingKind {
    pub const ALL: [EncodingKind; 4] =
        [EncodingKind::Direct, EncodingKind::Support, EncodingKind::Order, EncodingKind::DirectOrder];

    pub fn keyword(self) -> &'static str {
        match self {
            EncodingKind::Direct => "direct",
            EncodingKind::Support => "support",
            EncodingKind::Order => "order",
            EncodingKind::DirectOrder => "directorder",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for EncodingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        EncodingKind::ALL
            .into_iter()
            .find(|k| k.keyword() == norm)
            .ok_or_else(|| format!("unknown encoding `{s}` (expected direct, support, order or directorder)"))
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error("encoder produced a malformed clause: {0}")]
    Clause(#[from] CnfError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("model has {got} variables, encoding has {expected}")]
    ModelSize { expected: usize, got: usize },
    #[error("variable {var} has {count} true value literals")]
    NotExactlyOne { var: usize, count: usize },
    #[error("order literals of variable {var} do not form a chain ending in true")]
    BrokenChain { var: usize },
    #[error("direct and order views of variable {var} disagree")]
    ChannelMismatch { var: usize },
}

#[derive(Clone, Debug)]
pub struct EncodeOptions {
    /// Emit pairwise at-most-one clauses in the support encoding.
    pub support_amo: bool,
    pub tuple_cap: u64,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions { support_amo: true, tuple_cap: DEFAULT_TUPLE_CAP }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClauseCategory {
    Domain,
    Constraint,
    Channel,
}

/// Which representation a constraint was posted on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSide {
    Direct,
    Support,
    Order,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub domain: usize,
    pub constraint: usize,
    pub channel: usize,
    /// Per binary constraint, in instance order.
    pub binary_sides: Vec<ConstraintSide>,
    /// Per unary constraint, in instance order.
    pub unary_sides: Vec<ConstraintSide>,
}

impl EncodingStats {
    pub fn total(&self) -> usize {
        self.domain + self.constraint + self.channel
    }
}

/// Bidirectional map between CSP values and SAT variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub kind: EncodingKind,
    domains: Vec<Domain>,
    /// First SAT variable of each CSP variable's value block (`x_v`).
    direct_base: Vec<Option<Lit>>,
    /// First SAT variable of each CSP variable's order block (`x≤1`).
    order_base: Vec<Option<Lit>>,
    n_sat_vars: usize,
}

impl VarMap {
    fn new(kind: EncodingKind, instance: &CspInstance) -> VarMap {
        let domains: Vec<Domain> = instance.variables.iter().map(|v| v.domain.clone()).collect();
        let (direct, order) = match kind {
            EncodingKind::Direct | EncodingKind::Support => (true, false),
            EncodingKind::Order => (false, true),
            EncodingKind::DirectOrder => (true, true),
        };
        let mut next: Lit = 1;
        let mut direct_base = Vec::with_capacity(domains.len());
        let mut order_base = Vec::with_capacity(domains.len());
        for d in &domains {
            let d = d.len() as Lit;
            direct_base.push(direct.then(|| {
                next += d;
                next - d
            }));
            order_base.push(order.then(|| {
                next += d;
                next - d
            }));
        }
        VarMap { kind, domains, direct_base, order_base, n_sat_vars: (next - 1) as usize }
    }

    pub fn n_sat_vars(&self) -> usize {
        self.n_sat_vars
    }

    pub fn n_csp_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domain(&self, var: usize) -> &Domain {
        &self.domains[var]
    }

    /// SAT variable of `var = value of rank` (zero-based rank).
    pub fn value_lit(&self, var: usize, rank: usize) -> Option<Lit> {
        self.direct_base[var].map(|b| b + rank as Lit)
    }

    /// SAT variable of `var ≤ (domain value at one-based rank r)`, `r = 1..=d`.
    /// Rank 0 is the constant false and has no variable.
    pub fn le_lit(&self, var: usize, rank: usize) -> Option<Lit> {
        if rank == 0 {
            return None;
        }
        self.order_base[var].map(|b| b + rank as Lit - 1)
    }

    /// Reverse lookup: which CSP variable and role a SAT variable plays.
    pub fn describe(&self, sat_var: usize) -> Option<String> {
        let sv = sat_var as Lit;
        for (var, d) in self.domains.iter().enumerate() {
            let len = d.len() as Lit;
            if let Some(b) = self.direct_base[var] {
                if (b..b + len).contains(&sv) {
                    return Some(format!("x{var}={}", d.values()[(sv - b) as usize]));
                }
            }
            if let Some(b) = self.order_base[var] {
                if (b..b + len).contains(&sv) {
                    return Some(format!("x{var}<={}", d.values()[(sv - b) as usize]));
                }
            }
        }
        None
    }

    /// FNV-1a digest of the layout, used in DIMACS comments.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv::new();
        h.write(self.kind.keyword().as_bytes());
        for (var, d) in self.domains.iter().enumerate() {
            for v in d.values() {
                h.write(&v.to_le_bytes());
            }
            h.write(&self.direct_base[var].unwrap_or(0).to_le_bytes());
            h.write(&self.order_base[var].unwrap_or(0).to_le_bytes());
        }
        h.finish()
    }
}

pub(crate) struct Fnv(u64);

impl Fnv {
    pub fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct EncodedInstance {
    pub formula: CnfFormula,
    pub map: VarMap,
    pub kind: EncodingKind,
    pub stats: EncodingStats,
    /// Category of each clause, aligned with `formula.clauses()`.
    pub categories: Vec<ClauseCategory>,
}

impl EncodedInstance {
    pub fn clauses_in(&self, category: ClauseCategory) -> impl Iterator<Item = &Vec<Lit>> {
        self.formula.clauses().iter().zip(&self.categories).filter(move |(_, &c)| c == category).map(|(cl, _)| cl)
    }

    /// `c` comment lines for DIMACS output.
    pub fn comments(&self, instance: &CspInstance) -> Vec<String> {
        let mut out = vec![format!("encoding {}", self.kind)];
        let mut h = Fnv::new();
        h.write(crate::csp::format::write_csp(instance).as_bytes());
        let name = if instance.meta.name.is_empty() { "-" } else { instance.meta.name.as_str() };
        out.push(format!("instance {name} digest {:016x}", h.finish()));
        out.push(format!("varmap digest {:016x}", self.map.digest()));
        let tags: Vec<String> = ["n", "d", "m", "t"]
            .iter()
            .filter_map(|k| instance.meta.tags.get(*k).map(|v| format!("{k}={v}")))
            .collect();
        if !tags.is_empty() {
            out.push(format!("params {}", tags.join(" ")));
        }
        out.push(format!(
            "clauses domain={} constraint={} channel={}",
            self.stats.domain, self.stats.constraint, self.stats.channel
        ));
        out
    }
}

struct Builder {
    formula: CnfFormula,
    categories: Vec<ClauseCategory>,
    stats: EncodingStats,
}

impl Builder {
    fn push(&mut self, category: ClauseCategory, clause: Vec<Lit>) -> Result<(), EncodeError> {
        self.formula.add_clause(clause)?;
        self.categories.push(category);
        match category {
            ClauseCategory::Domain => self.stats.domain += 1,
            ClauseCategory::Constraint => self.stats.constraint += 1,
            ClauseCategory::Channel => self.stats.channel += 1,
        }
        Ok(())
    }
}

/// Literals of `X = rank` (zero-based) in the order representation,
/// following the boundary conventions above.
fn order_eq_literals(map: &VarMap, var: usize, rank: usize) -> Vec<Lit> {
    let d = map.domain(var).len();
    if d == 1 {
        return Vec::new();
    }
    let r1 = rank + 1;
    let mut out = vec![-map.le_lit(var, r1).unwrap()];
    if let Some(prev) = map.le_lit(var, r1 - 1) {
        out.push(prev);
    }
    out
}

fn direct_domain(b: &mut Builder, map: &VarMap, var: usize, amo: bool) -> Result<(), EncodeError> {
    let d = map.domain(var).len();
    let lits: Vec<Lit> = (0..d).map(|r| map.value_lit(var, r).unwrap()).collect();
    b.push(ClauseCategory::Domain, lits.clone())?;
    if amo {
        for i in 0..d {
            for j in i + 1..d {
                b.push(ClauseCategory::Domain, vec![-lits[i], -lits[j]])?;
            }
        }
    }
    Ok(())
}

fn order_domain(b: &mut Builder, map: &VarMap, var: usize) -> Result<(), EncodeError> {
    let d = map.domain(var).len();
    for r in 1..d {
        b.push(ClauseCategory::Domain, vec![-map.le_lit(var, r).unwrap(), map.le_lit(var, r + 1).unwrap()])?;
    }
    b.push(ClauseCategory::Domain, vec![map.le_lit(var, d).unwrap()])
}

fn channel(b: &mut Builder, map: &VarMap, var: usize) -> Result<(), EncodeError> {
    let d = map.domain(var).len();
    for r in 1..=d {
        let eq = map.value_lit(var, r - 1).unwrap();
        let le = map.le_lit(var, r).unwrap();
        let prev = map.le_lit(var, r - 1);
        b.push(ClauseCategory::Channel, vec![-eq, le])?;
        if let Some(p) = prev {
            b.push(ClauseCategory::Channel, vec![-eq, -p])?;
            b.push(ClauseCategory::Channel, vec![eq, -le, p])?;
        } else {
            b.push(ClauseCategory::Channel, vec![eq, -le])?;
        }
    }
    Ok(())
}

/// Rank-level forbidden matrix of a binary constraint, `f[i][j]`.
fn forbidden_matrix(instance: &CspInstance, ci: usize, cap: u64) -> Result<Vec<Vec<bool>>, CspError> {
    let c = &instance.constraints[ci];
    let (dx, dy) = (instance.domain(c.scope.0), instance.domain(c.scope.1));
    let mut m = vec![vec![false; dy.len()]; dx.len()];
    let tuples = forbidden_tuples_capped(c, instance, cap).map_err(|e| match e {
        CspError::EnumerationCap { size, cap, .. } => CspError::EnumerationCap { index: ci, size, cap },
        other => other,
    })?;
    for (a, b) in tuples {
        m[dx.rank_of(a).unwrap()][dy.rank_of(b).unwrap()] = true;
    }
    Ok(m)
}

/// Corners `(i, j)` (zero-based) covering a forbidden set closed under
/// increasing `i` and decreasing `j`, so that `f[i'][j']` holds exactly when
/// some corner has `i' ≥ i` and `j' ≤ j`. `None` when the set is not closed.
fn staircase(f: &[Vec<bool>]) -> Option<Vec<(usize, usize)>> {
    let dx = f.len();
    let dy = f.first().map_or(0, Vec::len);
    // lowest forbidden row per column
    let low: Vec<Option<usize>> = (0..dy).map(|j| (0..dx).find(|&i| f[i][j])).collect();
    for j in 0..dy {
        if let Some(m) = low[j] {
            if (m..dx).any(|i| !f[i][j]) {
                return None;
            }
            if j > 0 && low[j - 1].is_none_or(|p| p > m) {
                return None;
            }
        }
    }
    let mut corners = Vec::new();
    for j in 0..dy {
        if let Some(m) = low[j] {
            let dominated = j + 1 < dy && low[j + 1] == Some(m);
            if !dominated {
                corners.push((m, j));
            }
        }
    }
    Some(corners)
}

fn transpose(f: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let dx = f.len();
    let dy = f.first().map_or(0, Vec::len);
    (0..dy).map(|j| (0..dx).map(|i| f[i][j]).collect()).collect()
}

/// Order-side clauses for a binary constraint, or `None` if its forbidden set
/// is not a staircase in either orientation.
fn order_staircase_clauses(map: &VarMap, x: usize, y: usize, f: &[Vec<bool>]) -> Option<Vec<Vec<Lit>>> {
    // X large with Y small is forbidden: ¬(X ≥ v ∧ Y ≤ w) = (x≤v-1 ∨ ¬y≤w)
    if let Some(corners) = staircase(f) {
        return Some(
            corners
                .into_iter()
                .map(|(i, j)| {
                    let mut c = Vec::new();
                    c.extend(map.le_lit(x, i));
                    c.push(-map.le_lit(y, j + 1).unwrap());
                    c
                })
                .collect(),
        );
    }
    // X small with Y large is forbidden: ¬(X ≤ v ∧ Y ≥ w) = (¬x≤v ∨ y≤w-1)
    let ft = transpose(f);
    staircase(&ft).map(|corners| {
        corners
            .into_iter()
            .map(|(j, i)| {
                let mut c = vec![-map.le_lit(x, i + 1).unwrap()];
                c.extend(map.le_lit(y, j));
                c
            })
            .collect()
    })
}

/// Order-side clause for a unary forbidden set, when it is a prefix or suffix
/// of the domain.
fn order_unary_clause(map: &VarMap, var: usize, forbidden: &[bool]) -> Option<Vec<Lit>> {
    let d = forbidden.len();
    let first = forbidden.iter().position(|&b| b);
    let Some(first) = first else {
        return Some(Vec::new()).filter(|_| false);
    };
    if forbidden[first..].iter().all(|&b| b) {
        // forbidden suffix from `first`: X ≤ value at rank `first`
        return Some(map.le_lit(var, first).into_iter().collect());
    }
    let last = d - 1 - forbidden.iter().rev().position(|&b| b).unwrap();
    if forbidden[..=last].iter().all(|&b| b) {
        return Some(vec![-map.le_lit(var, last + 1).unwrap()]);
    }
    None
}

fn encode_binary(
    b: &mut Builder,
    map: &VarMap,
    instance: &CspInstance,
    ci: usize,
    opts: &EncodeOptions,
) -> Result<(), EncodeError> {
    let c = &instance.constraints[ci];
    let (x, y) = c.scope;
    let f = forbidden_matrix(instance, ci, opts.tuple_cap)?;
    let (dx, dy) = (f.len(), f[0].len());
    let use_order_side = matches!(&c.relation, Relation::Intensional { op, .. } if op.is_inequality());

    let side = match map.kind {
        EncodingKind::Direct => ConstraintSide::Direct,
        EncodingKind::Support => ConstraintSide::Support,
        EncodingKind::Order => ConstraintSide::Order,
        EncodingKind::DirectOrder if use_order_side => {
            if let Some(clauses) = order_staircase_clauses(map, x, y, &f) {
                for cl in clauses {
                    b.push(ClauseCategory::Constraint, cl)?;
                }
                b.stats.binary_sides.push(ConstraintSide::Order);
                return Ok(());
            }
            ConstraintSide::Direct
        }
        EncodingKind::DirectOrder => ConstraintSide::Direct,
    };

    match side {
        ConstraintSide::Direct => {
            for i in 0..dx {
                for j in 0..dy {
                    if f[i][j] {
                        let cl = vec![-map.value_lit(x, i).unwrap(), -map.value_lit(y, j).unwrap()];
                        b.push(ClauseCategory::Constraint, cl)?;
                    }
                }
            }
        }
        ConstraintSide::Support => {
            for i in 0..dx {
                let mut cl = vec![-map.value_lit(x, i).unwrap()];
                cl.extend((0..dy).filter(|&j| !f[i][j]).map(|j| map.value_lit(y, j).unwrap()));
                b.push(ClauseCategory::Constraint, cl)?;
            }
            for j in 0..dy {
                let mut cl = vec![-map.value_lit(y, j).unwrap()];
                cl.extend((0..dx).filter(|&i| !f[i][j]).map(|i| map.value_lit(x, i).unwrap()));
                b.push(ClauseCategory::Constraint, cl)?;
            }
        }
        ConstraintSide::Order => {
            for i in 0..dx {
                for j in 0..dy {
                    if f[i][j] {
                        let mut cl = order_eq_literals(map, x, i);
                        cl.extend(order_eq_literals(map, y, j));
                        b.push(ClauseCategory::Constraint, cl)?;
                    }
                }
            }
        }
    }
    b.stats.binary_sides.push(side);
    Ok(())
}

fn encode_unary(b: &mut Builder, map: &VarMap, instance: &CspInstance, ui: usize) -> Result<(), EncodeError> {
    let u = &instance.unary[ui];
    let dom = instance.domain(u.var);
    let forbidden: Vec<bool> = dom.values().iter().map(|&v| !u.allows(v)).collect();

    if map.kind == EncodingKind::DirectOrder && u.op.is_inequality() {
        if forbidden.iter().all(|&f| !f) {
            b.stats.unary_sides.push(ConstraintSide::Order);
            return Ok(());
        }
        if let Some(cl) = order_unary_clause(map, u.var, &forbidden) {
            b.push(ClauseCategory::Constraint, cl)?;
            b.stats.unary_sides.push(ConstraintSide::Order);
            return Ok(());
        }
    }

    let side = match map.kind {
        EncodingKind::Order => ConstraintSide::Order,
        EncodingKind::Support => ConstraintSide::Support,
        _ => ConstraintSide::Direct,
    };
    for (r, _) in forbidden.iter().enumerate().filter(|(_, &f)| f) {
        let cl = match side {
            ConstraintSide::Order => order_eq_literals(map, u.var, r),
            _ => vec![-map.value_lit(u.var, r).unwrap()],
        };
        b.push(ClauseCategory::Constraint, cl)?;
    }
    b.stats.unary_sides.push(side);
    Ok(())
}

pub fn encode_with(
    instance: &CspInstance,
    kind: EncodingKind,
    opts: &EncodeOptions,
) -> Result<EncodedInstance, EncodeError> {
    instance.ensure_valid()?;
    let map = VarMap::new(kind, instance);
    let mut b =
        Builder { formula: CnfFormula::new(map.n_sat_vars()), categories: Vec::new(), stats: EncodingStats::default() };

    for var in 0..instance.n_vars() {
        match kind {
            EncodingKind::Direct => direct_domain(&mut b, &map, var, true)?,
            EncodingKind::Support => direct_domain(&mut b, &map, var, opts.support_amo)?,
            EncodingKind::Order => order_domain(&mut b, &map, var)?,
            EncodingKind::DirectOrder => {
                direct_domain(&mut b, &map, var, true)?;
                order_domain(&mut b, &map, var)?;
                channel(&mut b, &map, var)?;
            }
        }
    }
    for ci in 0..instance.constraints.len() {
        encode_binary(&mut b, &map, instance, ci, opts)?;
    }
    for ui in 0..instance.unary.len() {
        encode_unary(&mut b, &map, instance, ui)?;
    }

    debug_assert_eq!(b.stats.total(), b.formula.n_clauses());
    Ok(EncodedInstance { formula: b.formula, map, kind, stats: b.stats, categories: b.categories })
}

pub fn encode(instance: &CspInstance, kind: EncodingKind) -> Result<EncodedInstance, EncodeError> {
    encode_with(instance, kind, &EncodeOptions::default())
}

pub fn encode_direct(instance: &CspInstance) -> Result<EncodedInstance, EncodeError> {
    encode(instance, EncodingKind::Direct)
}

pub fn encode_support(instance: &CspInstance) -> Result<EncodedInstance, EncodeError> {
    encode(instance, EncodingKind::Support)
}

pub fn encode_order(instance: &CspInstance) -> Result<EncodedInstance, EncodeError> {
    encode(instance, EncodingKind::Order)
}

pub fn encode_direct_order(instance: &CspInstance) -> Result<EncodedInstance, EncodeError> {
    encode(instance, EncodingKind::DirectOrder)
}

fn decode_direct(map: &VarMap, model: &SatModel, var: usize) -> Result<usize, DecodeError> {
    let d = map.domain(var).len();
    let on: Vec<usize> = (0..d).filter(|&r| model.lit(map.value_lit(var, r).unwrap())).collect();
    match on.as_slice() {
        [r] => Ok(*r),
        _ => Err(DecodeError::NotExactlyOne { var, count: on.len() }),
    }
}

fn decode_order(map: &VarMap, model: &SatModel, var: usize) -> Result<usize, DecodeError> {
    let d = map.domain(var).len();
    let le: Vec<bool> = (1..=d).map(|r| model.lit(map.le_lit(var, r).unwrap())).collect();
    let first = le.iter().position(|&b| b).ok_or(DecodeError::BrokenChain { var })?;
    if le[first..].iter().all(|&b| b) {
        Ok(first)
    } else {
        Err(DecodeError::BrokenChain { var })
    }
}

/// Reads a CSP assignment back from a SAT model of `enc.formula`.
pub fn decode_model(enc: &EncodedInstance, model: &SatModel) -> Result<Assignment, DecodeError> {
    let map = &enc.map;
    if model.len() != map.n_sat_vars() {
        return Err(DecodeError::ModelSize { expected: map.n_sat_vars(), got: model.len() });
    }
    let mut out = Assignment::default();
    for var in 0..map.n_csp_vars() {
        let rank = match enc.kind {
            EncodingKind::Direct | EncodingKind::Support => decode_direct(map, model, var)?,
            EncodingKind::Order => decode_order(map, model, var)?,
            EncodingKind::DirectOrder => {
                let a = decode_direct(map, model, var)?;
                let b = decode_order(map, model, var)?;
                if a != b {
                    return Err(DecodeError::ChannelMismatch { var });
                }
                a
            }
        };
        out.set(var, map.domain(var).values()[rank]);
    }
    Ok(out)
}
