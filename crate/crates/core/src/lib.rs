//! Constraint satisfaction through SAT encodings and a learned solver portfolio.
//!
//! - [`csp`]: instances, validation, AC-3 and the backtracking oracle.
//! - [`generator`]: uniform random binary instances with exact tightness.
//! - [`cnf`]: CNF formulas, DIMACS I/O, unit propagation, DPLL, model counting.
//! - [`encoder`]: direct, support, order and direct-order encodings with model decoding.
//! - [`features`]: fixed-schema feature vectors for CSP and CNF instances.
//! - [`selector`]: PAR10 scoring, virtual best, learners, hierarchical and flat selectors.
//! - [`runner`]: solver adapters, run matrices, phase-transition sweeps and portfolio evaluation.

pub mod cnf;
pub mod csp;
pub mod encoder;
pub mod features;
pub mod generator;
pub mod runner;
pub mod selector;
