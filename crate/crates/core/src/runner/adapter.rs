use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::encoder::EncodingKind;
use crate::selector::ApproachId;

/// Colon-separated directories searched for external solver programs given
/// by bare name.
pub const SOLVER_PATH_ENV: &str = "CSP_PORTFOLIO_SOLVER_PATH";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdapterKind {
    SatExternal,
    CspExternal,
    SatInternal,
    CspInternal,
}

impl AdapterKind {
    pub fn is_sat(self) -> bool {
        matches!(self, AdapterKind::SatExternal | AdapterKind::SatInternal)
    }

    pub fn is_internal(self) -> bool {
        matches!(self, AdapterKind::SatInternal | AdapterKind::CspInternal)
    }
}

/// How solver output is read. Both formats use an `s SATISFIABLE` /
/// `s UNSATISFIABLE` status line; SAT solvers list the model as signed
/// DIMACS literals on `v` lines, CSP solvers as `NAME=value` tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Competition,
}

/// The built-in engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InternalEngine {
    /// Chronological backtracking.
    Backtracking,
    /// Backtracking maintaining arc consistency.
    Mac,
    /// DPLL trying the positive phase first.
    Dpll,
    /// DPLL trying the negative phase first.
    DpllNegative,
}

impl InternalEngine {
    pub fn name(self) -> &'static str {
        match self {
            InternalEngine::Backtracking => "internal-bt",
            InternalEngine::Mac => "internal-mac",
            InternalEngine::Dpll => "internal-dpll",
            InternalEngine::DpllNegative => "internal-dpll-neg",
        }
    }

    fn kind(self) -> AdapterKind {
        match self {
            InternalEngine::Backtracking | InternalEngine::Mac => AdapterKind::CspInternal,
            InternalEngine::Dpll | InternalEngine::DpllNegative => AdapterKind::SatInternal,
        }
    }

    fn from_name(name: &str) -> Option<InternalEngine> {
        [InternalEngine::Backtracking, InternalEngine::Mac, InternalEngine::Dpll, InternalEngine::DpllNegative]
            .into_iter()
            .find(|e| e.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverAdapter {
    pub name: String,
    pub kind: AdapterKind,
    /// Program and arguments; `{input}` and `{seed}` are substituted.
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default)]
    pub output: OutputFormat,
    /// Per-adapter wall-clock cap, applied on top of the run limit.
    #[serde(default)]
    pub wall_seconds: Option<f64>,
    #[serde(default)]
    pub memory_mb: Option<u64>,
}

impl SolverAdapter {
    pub fn internal(engine: InternalEngine) -> SolverAdapter {
        SolverAdapter {
            name: engine.name().into(),
            kind: engine.kind(),
            command: Vec::new(),
            output: OutputFormat::Competition,
            wall_seconds: None,
            memory_mb: None,
        }
    }

    pub fn external(name: impl Into<String>, kind: AdapterKind, command: Vec<String>) -> SolverAdapter {
        SolverAdapter {
            name: name.into(),
            kind,
            command,
            output: OutputFormat::Competition,
            wall_seconds: None,
            memory_mb: None,
        }
    }

    pub fn engine(&self) -> Option<InternalEngine> {
        InternalEngine::from_name(&self.name).filter(|e| e.kind() == self.kind)
    }

    /// Checks the adapter invariants: internal kinds name a built-in engine
    /// and carry no command; external commands resolve to a program.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |reason: String| RunnerError::Adapter { name: self.name.clone(), reason };
        if self.name.is_empty() || self.name.contains(':') || self.name.contains(char::is_whitespace) {
            return Err(bad("names must be non-empty, without `:` or spaces".into()));
        }
        if let Some(w) = self.wall_seconds {
            if !(w > 0.0) {
                return Err(bad("wall_seconds must be positive".into()));
            }
        }
        if self.kind.is_internal() {
            if !self.command.is_empty() {
                return Err(bad("internal adapters take no command".into()));
            }
            if self.engine().is_none() {
                return Err(bad(format!("no built-in {:?} engine with this name", self.kind)));
            }
            return Ok(());
        }
        let program = self.command.first().ok_or_else(|| bad("external adapters need a command".into()))?;
        resolve_program(program).map(|_| ())
    }

    /// The command line for one run.
    pub fn argv(&self, input: &Path, seed: u64) -> Result<Vec<String>, RunnerError> {
        let program = resolve_program(&self.command[0])?;
        let mut out = vec![program.to_string_lossy().into_owned()];
        for arg in &self.command[1..] {
            out.push(arg.replace("{input}", &input.to_string_lossy()).replace("{seed}", &seed.to_string()));
        }
        Ok(out)
    }
}

/// Absolute paths are taken as given; bare names are looked up in the
/// directories listed in [`SOLVER_PATH_ENV`].
pub fn resolve_program(program: &str) -> Result<PathBuf, RunnerError> {
    let p = Path::new(program);
    if p.is_absolute() {
        return if p.is_file() { Ok(p.to_path_buf()) } else { Err(RunnerError::ProgramNotFound(program.into())) };
    }
    if program.contains('/') {
        return Err(RunnerError::ProgramNotFound(format!("{program} (relative paths are not accepted)")));
    }
    let dirs = std::env::var_os(SOLVER_PATH_ENV).unwrap_or_default();
    std::env::split_paths(&dirs)
        .map(|d| d.join(program))
        .find(|c| c.is_file())
        .ok_or_else(|| RunnerError::ProgramNotFound(program.into()))
}

/// Adapters by solver name, separately for CSP and SAT solvers.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    csp: BTreeMap<String, SolverAdapter>,
    sat: BTreeMap<String, SolverAdapter>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// The four built-in engines.
    pub fn internal() -> Registry {
        let mut r = Registry::default();
        for e in [InternalEngine::Backtracking, InternalEngine::Mac, InternalEngine::Dpll, InternalEngine::DpllNegative]
        {
            r.add(SolverAdapter::internal(e)).expect("built-in adapters are valid");
        }
        r
    }

    pub fn add(&mut self, adapter: SolverAdapter) -> Result<(), RunnerError> {
        adapter.validate()?;
        let table = if adapter.kind.is_sat() { &mut self.sat } else { &mut self.csp };
        table.insert(adapter.name.clone(), adapter);
        Ok(())
    }

    /// Adds adapters from a JSON array.
    pub fn load_json(&mut self, text: &str) -> Result<(), RunnerError> {
        let list: Vec<SolverAdapter> = serde_json::from_str(text)?;
        for a in list {
            self.add(a)?;
        }
        Ok(())
    }

    pub fn adapter_for(&self, approach: &ApproachId) -> Result<&SolverAdapter, RunnerError> {
        let table = if approach.is_csp() { &self.csp } else { &self.sat };
        table.get(approach.solver()).ok_or_else(|| RunnerError::MissingAdapter(approach.to_string()))
    }

    pub fn csp_solvers(&self) -> impl Iterator<Item = &str> {
        self.csp.keys().map(String::as_str)
    }

    pub fn sat_solvers(&self) -> impl Iterator<Item = &str> {
        self.sat.keys().map(String::as_str)
    }

    /// Every CSP solver plus every SAT solver under each encoding.
    pub fn approaches(&self, encodings: &[EncodingKind]) -> Vec<ApproachId> {
        let mut out: Vec<ApproachId> = self.csp_solvers().map(ApproachId::csp).collect();
        for &enc in encodings {
            out.extend(self.sat_solvers().map(|s| ApproachId::sat(enc, s)));
        }
        out.sort();
        out
    }
}

impl fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdapterKind::SatExternal => "sat-external",
            AdapterKind::CspExternal => "csp-external",
            AdapterKind::SatInternal => "sat-internal",
            AdapterKind::CspInternal => "csp-internal",
        })
    }
}
