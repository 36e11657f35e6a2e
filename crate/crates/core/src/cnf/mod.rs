//! CNF formulas over DIMACS-style signed literals, plus the internal SAT
//! oracle (unit propagation, DPLL and exact model counting).

mod dimacs;
mod dpll;
pub(crate) mod engine;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dimacs::{read_dimacs, write_dimacs, write_dimacs_with_comments, DIMACS_HEADER_PREFIX};
pub use dpll::{
    count_models, solve_dpll, unit_propagate, DpllConfig, DpllOutcome, ModelCount, Phase, PropagationResult,
    PropagationStatus, SatStatus,
};

/// A literal: positive asserts the variable, negative its negation. Never 0.
pub type Lit = i32;

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("literal 0 inside a clause")]
    ZeroLiteral,
    #[error("literal {lit} exceeds the {n_vars} declared variables")]
    VarOutOfRange { lit: Lit, n_vars: usize },
    #[error("literal {lit} appears twice in one clause")]
    DuplicateLiteral { lit: Lit },
    #[error("clause contains both {var} and -{var}")]
    Tautology { var: Lit },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    n_vars: usize,
    clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn new(n_vars: usize) -> CnfFormula {
        CnfFormula { n_vars, clauses: Vec::new() }
    }

    pub fn from_clauses<I, C>(n_vars: usize, clauses: I) -> Result<CnfFormula, CnfError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<Lit>>,
    {
        let mut f = CnfFormula::new(n_vars);
        for c in clauses {
            f.add_clause(c.into())?;
        }
        Ok(f)
    }

    /// Appends a clause after checking it: no zero, in range, no repeated
    /// literal, no complementary pair.
    pub fn add_clause(&mut self, clause: Vec<Lit>) -> Result<(), CnfError> {
        for (i, &lit) in clause.iter().enumerate() {
            if lit == 0 {
                return Err(CnfError::ZeroLiteral);
            }
            if lit.unsigned_abs() as usize > self.n_vars {
                return Err(CnfError::VarOutOfRange { lit, n_vars: self.n_vars });
            }
            for &other in &clause[..i] {
                if other == lit {
                    return Err(CnfError::DuplicateLiteral { lit });
                }
                if other == -lit {
                    return Err(CnfError::Tautology { var: lit.abs() });
                }
            }
        }
        self.clauses.push(clause);
        Ok(())
    }

    /// Grows the variable count; returns the first new variable.
    pub fn new_vars(&mut self, count: usize) -> Lit {
        let first = self.n_vars + 1;
        self.n_vars += count;
        first as Lit
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, model: &SatModel) -> bool {
        model.len() == self.n_vars && self.clauses.iter().all(|c| c.iter().any(|&l| model.lit(l)))
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        write_dimacs(self, &mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Total truth assignment; index 0 holds variable 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatModel(pub Vec<bool>);

impl SatModel {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, var: usize) -> bool {
        self.0[var - 1]
    }

    pub fn lit(&self, lit: Lit) -> bool {
        self.value(lit.unsigned_abs() as usize) == (lit > 0)
    }

    /// Builds a model from the set of true variables.
    pub fn from_true_vars(n_vars: usize, true_vars: &[usize]) -> SatModel {
        let mut v = vec![false; n_vars];
        for &t in true_vars {
            v[t - 1] = true;
        }
        SatModel(v)
    }
}
