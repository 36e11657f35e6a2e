//! Clause tables of the three-variable alldifferent example, written
//! symbolically: `x1` is X=1, `x<=2` is X<=2.

use std::collections::BTreeSet;

use csp_portfolio::cnf::Lit;
use csp_portfolio::encoder::{ClauseCategory, EncodedInstance};

/// Parses a clause written as in the worked tables: `x1 | -y2`, `-x<=2 | x<=1`.
pub fn lit(enc: &EncodedInstance, token: &str) -> Lit {
    let (neg, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token),
    };
    let var = "xyz".find(&body[..1]).unwrap();
    let l = if let Some(r) = body[1..].strip_prefix("<=") {
        enc.map.le_lit(var, r.parse().unwrap()).unwrap()
    } else {
        let value: usize = body[1..].parse().unwrap();
        enc.map.value_lit(var, value - 1).unwrap()
    };
    if neg {
        -l
    } else {
        l
    }
}

pub fn clause_set(enc: &EncodedInstance, text: &[&str]) -> BTreeSet<Vec<Lit>> {
    text.iter()
        .map(|c| {
            let mut cl: Vec<Lit> = c.split('|').map(|t| lit(enc, t.trim())).collect();
            cl.sort_unstable();
            cl
        })
        .collect()
}

pub fn category_set(enc: &EncodedInstance, cat: ClauseCategory) -> BTreeSet<Vec<Lit>> {
    enc.clauses_in(cat)
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect()
}

pub const DIRECT_DOMAIN: [&str; 12] = [
    "x1 | x2 | x3",
    "-x1 | -x2",
    "-x1 | -x3",
    "-x2 | -x3",
    "y1 | y2 | y3",
    "-y1 | -y2",
    "-y1 | -y3",
    "-y2 | -y3",
    "z1 | z2 | z3",
    "-z1 | -z2",
    "-z1 | -z3",
    "-z2 | -z3",
];

pub const DIRECT_CONSTRAINTS: [&str; 9] = [
    "-x1 | -y1",
    "-x2 | -y2",
    "-x3 | -y3",
    "-x1 | -z1",
    "-x2 | -z2",
    "-x3 | -z3",
    "-y1 | -z1",
    "-y2 | -z2",
    "-y3 | -z3",
];

pub const SUPPORT_CONSTRAINTS: [&str; 18] = [
    "-x1 | y2 | y3",
    "-x2 | y1 | y3",
    "-x3 | y1 | y2",
    "-y1 | x2 | x3",
    "-y2 | x1 | x3",
    "-y3 | x1 | x2",
    "-x1 | z2 | z3",
    "-x2 | z1 | z3",
    "-x3 | z1 | z2",
    "-z1 | x2 | x3",
    "-z2 | x1 | x3",
    "-z3 | x1 | x2",
    "-y1 | z2 | z3",
    "-y2 | z1 | z3",
    "-y3 | z1 | z2",
    "-z1 | y2 | y3",
    "-z2 | y1 | y3",
    "-z3 | y1 | y2",
];

pub const ORDER_DOMAIN: [&str; 9] = [
    "-x<=1 | x<=2",
    "-x<=2 | x<=3",
    "x<=3",
    "-y<=1 | y<=2",
    "-y<=2 | y<=3",
    "y<=3",
    "-z<=1 | z<=2",
    "-z<=2 | z<=3",
    "z<=3",
];

pub const ORDER_CONSTRAINTS: [&str; 9] = [
    "-x<=1 | -y<=1",
    "-x<=2 | x<=1 | -y<=2 | y<=1",
    "-x<=3 | x<=2 | -y<=3 | y<=2",
    "-x<=1 | -z<=1",
    "-x<=2 | x<=1 | -z<=2 | z<=1",
    "-x<=3 | x<=2 | -z<=3 | z<=2",
    "-y<=1 | -z<=1",
    "-y<=2 | y<=1 | -z<=2 | z<=1",
    "-y<=3 | y<=2 | -z<=3 | z<=2",
];
