use std::io::{BufRead, BufReader, Read, Write};

use super::{CnfError, CnfFormula, Lit};

pub const DIMACS_HEADER_PREFIX: &str = "p cnf";

/// Writes `p cnf <vars> <clauses>` followed by one zero-terminated clause per
/// line, in formula order.
pub fn write_dimacs<W: Write>(f: &CnfFormula, sink: &mut W) -> std::io::Result<()> {
    write_dimacs_with_comments(f, &[], sink)
}

/// Like [`write_dimacs`] with leading `c` comment lines.
pub fn write_dimacs_with_comments<W: Write>(f: &CnfFormula, comments: &[String], sink: &mut W) -> std::io::Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(sink, "c {line}")?;
        }
    }
    writeln!(sink, "{DIMACS_HEADER_PREFIX} {} {}", f.n_vars(), f.n_clauses())?;
    let mut line = String::new();
    for clause in f.clauses() {
        line.clear();
        for lit in clause {
            line.push_str(&lit.to_string());
            line.push(' ');
        }
        line.push('0');
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> CnfError {
    CnfError::Parse { line, message: message.into() }
}

/// Reads a DIMACS CNF file. Comment lines (`c ...`) may appear anywhere,
/// clauses may span lines, and a `%` line ends the input. The number of
/// clauses must match the header.
pub fn read_dimacs<R: Read>(source: R) -> Result<CnfFormula, CnfError> {
    let reader = BufReader::new(source);
    let mut header: Option<(usize, usize, usize)> = None;
    let mut formula = CnfFormula::new(0);
    let mut pending: Vec<Lit> = Vec::new();
    let mut pending_line = 0;
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(line_no, "second problem line"));
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(parse_err(line_no, format!("malformed problem line `{trimmed}`")));
            }
            let vars =
                parts[2].parse().map_err(|_| parse_err(line_no, format!("bad variable count `{}`", parts[2])))?;
            let clauses =
                parts[3].parse().map_err(|_| parse_err(line_no, format!("bad clause count `{}`", parts[3])))?;
            formula = CnfFormula::new(vars);
            header = Some((vars, clauses, line_no));
            continue;
        }
        if header.is_none() {
            return Err(parse_err(line_no, "clause before the problem line"));
        }
        for tok in trimmed.split_whitespace() {
            let lit: Lit = tok.parse().map_err(|_| parse_err(line_no, format!("bad literal `{tok}`")))?;
            if pending.is_empty() {
                pending_line = line_no;
            }
            if lit == 0 {
                let clause = std::mem::take(&mut pending);
                formula.add_clause(clause).map_err(|e| parse_err(pending_line, e.to_string()))?;
            } else {
                pending.push(lit);
            }
        }
    }

    let Some((_, expected, header_line)) = header else {
        return Err(parse_err(last_line.max(1), "missing `p cnf` problem line"));
    };
    if !pending.is_empty() {
        return Err(parse_err(pending_line, "clause not terminated by 0"));
    }
    if formula.n_clauses() != expected {
        return Err(parse_err(
            header_line,
            format!("header declares {expected} clauses, found {}", formula.n_clauses()),
        ));
    }
    Ok(formula)
}
