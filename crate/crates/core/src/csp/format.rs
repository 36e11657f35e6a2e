//! Native line-based CSP text format, version 1.
//!
//! ```text
//! format csp/1                 # optional version line
//! name alldiff3                # optional metadata
//! tag source example           # optional key/value metadata, repeatable
//! vars 3
//! var X 1 2 3                  # explicit values, or a range token `1..3`
//! var Y 1..3
//! var Z 1..3
//! con X Y neq                  # eq|neq|lt|leq|gt|geq|absdiff-eq|absdiff-neq, optional integer offset
//! con X Z forbidden (1,1) (2,2)
//! con Y Z allowed (1,2) (2,1)
//! unary X leq 2                # eq|neq|lt|leq|gt|geq against a constant
//! alldifferent X Y Z           # expands to pairwise neq
//! ```
//!
//! `#` starts a comment. Intensional relations read `X op Y + offset`; the
//! absolute-difference forms read `|X - Y| op offset`. Every `var` line must
//! come after `vars` and the number of `var` lines must match its count.
//! Instances are validated after parsing.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;

use super::{CspError, CspInstance, Domain, IntOp, Relation};

pub const FORMAT_VERSION: &str = "csp/1";

fn err(line: usize, message: impl Into<String>) -> CspError {
    CspError::Parse { line, message: message.into() }
}

fn parse_int(tok: &str, line: usize) -> Result<i64, CspError> {
    tok.parse().map_err(|_| err(line, format!("expected an integer, found `{tok}`")))
}

fn parse_tuples(rest: &str, line: usize) -> Result<BTreeSet<(i64, i64)>, CspError> {
    let compact: String = rest.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = BTreeSet::new();
    let mut s = compact.as_str();
    while !s.is_empty() {
        let body = s
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| err(line, format!("malformed tuple list near `{s}`")))?;
        let (pair, tail) = body;
        let (a, b) = pair.split_once(',').ok_or_else(|| err(line, format!("tuple `({pair})` needs two values")))?;
        out.insert((parse_int(a, line)?, parse_int(b, line)?));
        s = tail;
    }
    Ok(out)
}

fn parse_domain(tokens: &[&str], line: usize) -> Result<Domain, CspError> {
    let mut values = Vec::new();
    for tok in tokens {
        if let Some((lo, hi)) = tok.split_once("..") {
            let (lo, hi) = (parse_int(lo, line)?, parse_int(hi, line)?);
            if lo > hi {
                return Err(err(line, format!("empty range `{tok}`")));
            }
            values.extend(lo..=hi);
        } else {
            values.push(parse_int(tok, line)?);
        }
    }
    let len = values.len();
    let domain = Domain::new(values).ok_or_else(|| err(line, "variable needs at least one value"))?;
    if domain.len() != len {
        return Err(err(line, "domain lists a value twice"));
    }
    Ok(domain)
}

pub fn parse_csp(text: &str) -> Result<CspInstance, CspError> {
    let mut inst = CspInstance::default();
    let mut declared: Option<(usize, usize)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let var = |name: &str, inst: &CspInstance| {
            inst.var_by_name(name).ok_or_else(|| err(line, format!("unknown variable `{name}`")))
        };
        match tokens[0] {
            "format" => {
                if tokens.get(1) != Some(&FORMAT_VERSION) {
                    return Err(err(line, format!("unsupported format version, expected {FORMAT_VERSION}")));
                }
            }
            "name" => inst.meta.name = content["name".len()..].trim().to_string(),
            "tag" => {
                if tokens.len() < 3 {
                    return Err(err(line, "tag needs a key and a value"));
                }
                let value = tokens[2..].join(" ");
                inst.meta.tags.insert(tokens[1].to_string(), value);
            }
            "vars" => {
                if declared.is_some() {
                    return Err(err(line, "duplicate `vars` header"));
                }
                let n = tokens.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| err(line, "`vars` needs a count"))?;
                declared = Some((n, line));
            }
            "var" => {
                let Some((n, _)) = declared else {
                    return Err(err(line, "`var` before `vars` header"));
                };
                if tokens.len() < 3 {
                    return Err(err(line, "`var` needs a name and at least one value"));
                }
                if inst.n_vars() == n {
                    return Err(err(line, format!("more than the declared {n} variables")));
                }
                if inst.var_by_name(tokens[1]).is_some() {
                    return Err(err(line, format!("variable `{}` declared twice", tokens[1])));
                }
                let domain = parse_domain(&tokens[2..], line)?;
                inst.add_variable(tokens[1], domain);
            }
            "con" => {
                if tokens.len() < 4 {
                    return Err(err(line, "`con` needs two variables and a relation"));
                }
                let (x, y) = (var(tokens[1], &inst)?, var(tokens[2], &inst)?);
                let relation = match tokens[3] {
                    "forbidden" | "allowed" => {
                        let rest = content.splitn(5, char::is_whitespace).nth(4).unwrap_or("");
                        let tuples = parse_tuples(rest, line)?;
                        if tokens[3] == "forbidden" {
                            Relation::Forbidden(tuples)
                        } else {
                            Relation::Allowed(tuples)
                        }
                    }
                    kw => {
                        let op =
                            IntOp::from_keyword(kw).ok_or_else(|| err(line, format!("unknown relation `{kw}`")))?;
                        let offset = match tokens.get(4) {
                            Some(t) => parse_int(t.trim_start_matches('+'), line)?,
                            None => 0,
                        };
                        if tokens.len() > 5 {
                            return Err(err(line, "trailing tokens after offset"));
                        }
                        Relation::Intensional { op, offset }
                    }
                };
                inst.add_constraint(x, y, relation);
            }
            "unary" => {
                if tokens.len() != 4 {
                    return Err(err(line, "`unary` needs a variable, an operator and a constant"));
                }
                let x = var(tokens[1], &inst)?;
                let op = IntOp::from_keyword(tokens[2])
                    .filter(|op| !matches!(op, IntOp::AbsDiffEq | IntOp::AbsDiffNeq))
                    .ok_or_else(|| err(line, format!("unsupported unary operator `{}`", tokens[2])))?;
                inst.add_unary(x, op, parse_int(tokens[3], line)?);
            }
            "alldifferent" => {
                let vars = tokens[1..].iter().map(|t| var(t, &inst)).collect::<Result<Vec<_>, _>>()?;
                inst.add_alldifferent(&vars);
            }
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }

    match declared {
        None => return Err(err(0, "missing `vars` header")),
        Some((n, line)) if n != inst.n_vars() => {
            return Err(err(line, format!("header declares {n} variables, found {}", inst.n_vars())));
        }
        _ => {}
    }
    inst.ensure_valid()?;
    Ok(inst)
}

pub fn read_csp<R: Read>(mut reader: R) -> Result<CspInstance, CspError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_csp(&text)
}

pub fn read_csp_file(path: impl AsRef<std::path::Path>) -> Result<CspInstance, CspError> {
    parse_csp(&std::fs::read_to_string(path)?)
}

fn tuples_text(t: &BTreeSet<(i64, i64)>) -> String {
    t.iter().map(|(a, b)| format!("({a},{b})")).collect::<Vec<_>>().join(" ")
}

/// Serializes an instance. Output is deterministic and parses back to an
/// equal instance (alldifferent appears in its decomposed form).
pub fn write_csp(inst: &CspInstance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format {FORMAT_VERSION}");
    if !inst.meta.name.is_empty() {
        let _ = writeln!(s, "name {}", inst.meta.name);
    }
    for (k, v) in &inst.meta.tags {
        let _ = writeln!(s, "tag {k} {v}");
    }
    let _ = writeln!(s, "vars {}", inst.n_vars());
    for v in &inst.variables {
        let vals = v.domain.values();
        let contiguous = vals.len() > 2 && vals.windows(2).all(|w| w[1] == w[0] + 1);
        if contiguous {
            let _ = writeln!(s, "var {} {}..{}", v.name, v.domain.min(), v.domain.max());
        } else {
            let vals: Vec<String> = vals.iter().map(i64::to_string).collect();
            let _ = writeln!(s, "var {} {}", v.name, vals.join(" "));
        }
    }
    for c in &inst.constraints {
        let (x, y) = (&inst.variables[c.scope.0].name, &inst.variables[c.scope.1].name);
        let rel = match &c.relation {
            Relation::Forbidden(t) => format!("forbidden {}", tuples_text(t)),
            Relation::Allowed(t) => format!("allowed {}", tuples_text(t)),
            Relation::Intensional { op, offset: 0 } => op.keyword().to_string(),
            Relation::Intensional { op, offset } => format!("{} {offset}", op.keyword()),
        };
        let _ = writeln!(s, "con {x} {y} {}", rel.trim_end());
    }
    for u in &inst.unary {
        let _ = writeln!(s, "unary {} {} {}", inst.variables[u.var].name, u.op.keyword(), u.bound);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::alldifferent_example;

    #[test]
    fn parses_the_documented_example() {
        let text = "format csp/1\nvars 3\nvar X 1 2 3\nvar Y 1..3\nvar Z 1..3\n\
                    con X Y neq\ncon X Z forbidden (1,1) (2, 2)\ncon Y Z allowed (1,2) (2,1)\n\
                    unary X leq 2\n";
        let inst = parse_csp(text).unwrap();
        assert_eq!(inst.n_vars(), 3);
        assert_eq!(inst.constraints.len(), 3);
        assert_eq!(inst.unary.len(), 1);
        assert_eq!(inst.constraints[1].relation, Relation::Forbidden([(1, 1), (2, 2)].into_iter().collect()));
    }

    #[test]
    fn alldifferent_expands_pairwise() {
        let inst = parse_csp("vars 3\nvar X 1..3\nvar Y 1..3\nvar Z 1..3\nalldifferent X Y Z\n").unwrap();
        let mut expected = alldifferent_example();
        expected.meta = Default::default();
        assert_eq!(inst, expected);
    }

    #[test]
    fn round_trip_preserves_instance() {
        let mut inst = alldifferent_example();
        inst.add_constraint(0, 1, Relation::Intensional { op: IntOp::Lt, offset: -1 });
        inst.add_constraint(1, 2, Relation::Allowed(BTreeSet::new()));
        inst.add_unary(2, IntOp::Neq, 2);
        inst.meta.tags.insert("seed".into(), "42".into());
        assert_eq!(parse_csp(&write_csp(&inst)).unwrap(), inst);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_csp("vars 1\nvar X 1 2\ncon X Q neq\n").unwrap_err();
        assert!(matches!(e, CspError::Parse { line: 3, .. }), "{e}");
        let e = parse_csp("vars 2\nvar X 1 2\n").unwrap_err();
        assert!(matches!(e, CspError::Parse { line: 1, .. }), "{e}");
        let e = parse_csp("var X 1\n").unwrap_err();
        assert!(matches!(e, CspError::Parse { line: 1, .. }), "{e}");
    }

    #[test]
    fn semantic_violations_surface_after_parse() {
        let e = parse_csp("vars 2\nvar X 1 2\nvar Y 1 2\ncon X Y forbidden (3,1)\n").unwrap_err();
        assert!(matches!(e, CspError::Invalid(_)), "{e}");
    }
}
