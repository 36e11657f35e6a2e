//! Running approaches on instances: built-in engines and external solver
//! processes, answer verification, and experiment orchestration.

pub mod adapter;
pub mod experiment;
mod process;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{
    resolve_program, AdapterKind, InternalEngine, OutputFormat, Registry, SolverAdapter, SOLVER_PATH_ENV,
};
pub use experiment::{
    aggregate_sweep, evaluate_portfolio, feature_table, load_instances, phase_transition_experiment, run_matrix,
    write_report_csv, write_sweep_csv, ExperimentConfig, InstanceSource, NamedInstance, PhaseSweep, PortfolioReport,
    ReportRow, SweepRow,
};
pub use process::{parse_csp_output, parse_sat_output};

use crate::cnf::{solve_dpll, write_dimacs, DpllConfig, Phase, SatStatus};
use crate::csp::format::write_csp;
use crate::csp::{
    solve_backtracking, Assignment, CspError, CspInstance, Find, Propagation, SearchConfig, SearchStatus,
};
use crate::encoder::{decode_model, encode, EncodeError};
use crate::selector::{Answer, ApproachId, PerformanceRecord, RunStatus};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("no adapter configured for {0}")]
    MissingAdapter(String),
    #[error("adapter `{name}`: {reason}")]
    Adapter { name: String, reason: String },
    #[error("solver program `{0}` not found")]
    ProgramNotFound(String),
    #[error("could not start `{program}`: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Generator(#[from] crate::generator::GeneratorError),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Selector(#[from] crate::selector::SelectorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How built-in engines measure runtime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Clock {
    /// Runtime is engine work (nodes, decisions, propagations) times a fixed
    /// cost per unit, so results are reproducible across machines.
    Work { seconds_per_unit: f64 },
    /// Elapsed wall-clock time.
    Wall,
}

impl Default for Clock {
    fn default() -> Self {
        Clock::Work { seconds_per_unit: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    /// Seconds.
    pub timeout: f64,
    #[serde(default)]
    pub memory_mb: Option<u64>,
    /// Substituted for `{seed}` in external commands.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clock: Clock,
}

impl RunLimits {
    pub fn new(timeout: f64) -> RunLimits {
        RunLimits { timeout, memory_mb: None, seed: 0, clock: Clock::default() }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(RunnerError::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if let Clock::Work { seconds_per_unit } = self.clock {
            if !(seconds_per_unit > 0.0) {
                return Err(RunnerError::Config("seconds_per_unit must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A run's record plus what is needed to audit it.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: PerformanceRecord,
    /// The verified solution of a satisfiable answer.
    pub assignment: Option<Assignment>,
    /// Why the run ended in `error`.
    pub diagnostic: Option<String>,
}

struct Raw {
    status: RunStatus,
    runtime: f64,
    answer: Option<Answer>,
    work: Option<u64>,
    assignment: Option<Assignment>,
    diagnostic: Option<String>,
}

impl Raw {
    fn error(runtime: f64, diagnostic: String) -> Raw {
        Raw {
            status: RunStatus::Error,
            runtime,
            answer: None,
            work: None,
            assignment: None,
            diagnostic: Some(diagnostic),
        }
    }

    fn timeout(timeout: f64, work: Option<u64>) -> Raw {
        Raw { status: RunStatus::Timeout, runtime: timeout, answer: None, work, assignment: None, diagnostic: None }
    }
}

struct Budget {
    work: Option<u64>,
    deadline: Option<Instant>,
    start: Instant,
}

impl Budget {
    fn new(limits: &RunLimits, timeout: f64) -> Budget {
        let start = Instant::now();
        match limits.clock {
            Clock::Work { seconds_per_unit } => {
                Budget { work: Some((timeout / seconds_per_unit).floor() as u64), deadline: None, start }
            }
            Clock::Wall => Budget { work: None, deadline: Some(start + Duration::from_secs_f64(timeout)), start },
        }
    }

    fn runtime(&self, limits: &RunLimits, work: u64, timeout: f64) -> f64 {
        let t = match limits.clock {
            Clock::Work { seconds_per_unit } => work as f64 * seconds_per_unit,
            Clock::Wall => self.start.elapsed().as_secs_f64(),
        };
        t.min(timeout)
    }
}

fn run_csp_engine(
    instance: &CspInstance,
    engine: InternalEngine,
    limits: &RunLimits,
    timeout: f64,
) -> Result<Raw, RunnerError> {
    let propagation = if engine == InternalEngine::Mac { Propagation::Ac3 } else { Propagation::None };
    let budget = Budget::new(limits, timeout);
    let mut config = SearchConfig::new(propagation, Find::First);
    config.work_budget = budget.work;
    config.deadline = budget.deadline;
    let out = solve_backtracking(instance, &config)?;
    let work = out.work();
    Ok(match out.status {
        SearchStatus::BudgetExhausted => Raw::timeout(timeout, Some(work)),
        SearchStatus::Sat | SearchStatus::Unsat => Raw {
            status: RunStatus::Solved,
            runtime: budget.runtime(limits, work, timeout),
            answer: Some(if out.status == SearchStatus::Sat { Answer::Sat } else { Answer::Unsat }),
            work: Some(work),
            assignment: out.assignment,
            diagnostic: None,
        },
    })
}

fn run_sat_engine(
    instance: &CspInstance,
    approach: &ApproachId,
    engine: InternalEngine,
    limits: &RunLimits,
    timeout: f64,
) -> Result<Raw, RunnerError> {
    let enc = encode(instance, approach.encoding().expect("SAT approach"))?;
    let budget = Budget::new(limits, timeout);
    let config = DpllConfig {
        conflict_budget: None,
        work_budget: budget.work,
        deadline: budget.deadline,
        phase: if engine == InternalEngine::DpllNegative { Phase::Negative } else { Phase::Positive },
    };
    let out = solve_dpll(&enc.formula, &config);
    let work = out.work();
    let runtime = budget.runtime(limits, work, timeout);
    Ok(match out.status {
        SatStatus::BudgetExhausted => Raw::timeout(timeout, Some(work)),
        SatStatus::Unsat => Raw {
            status: RunStatus::Solved,
            runtime,
            answer: Some(Answer::Unsat),
            work: Some(work),
            assignment: None,
            diagnostic: None,
        },
        SatStatus::Sat => match decode_model(&enc, out.model.as_ref().expect("model of a SAT answer")) {
            Ok(a) => Raw {
                status: RunStatus::Solved,
                runtime,
                answer: Some(Answer::Sat),
                work: Some(work),
                assignment: Some(a),
                diagnostic: None,
            },
            Err(e) => Raw::error(runtime, format!("model does not decode: {e}")),
        },
    })
}

fn run_external(
    instance: &CspInstance,
    approach: &ApproachId,
    adapter: &SolverAdapter,
    limits: &RunLimits,
    timeout: f64,
) -> Result<Raw, RunnerError> {
    let dir = tempfile::Builder::new().prefix("csp-portfolio-").tempdir()?;
    let enc = match approach.encoding() {
        Some(kind) => {
            let enc = encode(instance, kind)?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.path().join("input.cnf"))?);
            write_dimacs(&enc.formula, &mut f)?;
            std::io::Write::flush(&mut f)?;
            Some(enc)
        }
        None => {
            std::fs::write(dir.path().join("input.csp"), write_csp(instance))?;
            None
        }
    };
    let input = dir.path().join(if enc.is_some() { "input.cnf" } else { "input.csp" });
    let argv = adapter.argv(&input, limits.seed)?;
    let memory = adapter.memory_mb.or(limits.memory_mb);
    let run = process::run_with_limit(&argv, dir.path(), timeout, memory)
        .map_err(|source| RunnerError::Spawn { program: argv[0].clone(), source })?;
    if run.timed_out {
        return Ok(Raw::timeout(timeout, None));
    }
    let runtime = run.elapsed.min(timeout);
    let describe = |msg: String| {
        let exit = run.exit.map(|e| e.to_string()).unwrap_or_default();
        if run.stderr_tail.is_empty() {
            format!("{msg} ({exit})")
        } else {
            format!("{msg} ({exit}; stderr: {})", run.stderr_tail)
        }
    };
    let parsed = match &enc {
        Some(enc) => parse_sat_output(&run.stdout, enc.formula.n_vars()).and_then(|(answer, model)| match model {
            None => Ok((answer, None)),
            Some(m) => {
                decode_model(enc, &m).map(|a| (answer, Some(a))).map_err(|e| format!("model does not decode: {e}"))
            }
        }),
        None => parse_csp_output(&run.stdout, instance),
    };
    Ok(match parsed {
        Ok((answer, assignment)) => {
            Raw { status: RunStatus::Solved, runtime, answer: Some(answer), work: None, assignment, diagnostic: None }
        }
        Err(msg) => Raw::error(runtime, describe(msg)),
    })
}

/// Runs one approach on one instance. Every satisfiable answer is checked
/// against the instance constraints; a wrong solution turns the run into an
/// `error` with a diagnostic, so no unverified solve is ever reported.
pub fn run_approach(
    instance: &CspInstance,
    instance_id: &str,
    approach: &ApproachId,
    registry: &Registry,
    limits: &RunLimits,
) -> Result<RunOutcome, RunnerError> {
    limits.validate()?;
    let adapter = registry.adapter_for(approach)?;
    let timeout = adapter.wall_seconds.map_or(limits.timeout, |w| w.min(limits.timeout));
    let mut raw = match adapter.engine() {
        Some(engine @ (InternalEngine::Dpll | InternalEngine::DpllNegative)) => {
            run_sat_engine(instance, approach, engine, limits, timeout)?
        }
        Some(engine) => run_csp_engine(instance, engine, limits, timeout)?,
        None => run_external(instance, approach, adapter, limits, timeout)?,
    };
    if raw.status == RunStatus::Solved && raw.answer == Some(Answer::Sat) {
        match &raw.assignment {
            Some(a) if instance.is_solution(a) => {}
            Some(_) => raw = Raw::error(raw.runtime, "reported solution violates the instance".into()),
            None => raw = Raw::error(raw.runtime, "satisfiable answer without a solution".into()),
        }
    }
    let mut record = PerformanceRecord::new(instance_id, approach.clone(), raw.status, raw.runtime, limits.timeout);
    if raw.status == RunStatus::Timeout {
        record.runtime = limits.timeout;
    }
    record.answer = raw.answer;
    record.work = raw.work;
    record.memory_mb = adapter.memory_mb.or(limits.memory_mb);
    Ok(RunOutcome { record, assignment: raw.assignment, diagnostic: raw.diagnostic })
}
