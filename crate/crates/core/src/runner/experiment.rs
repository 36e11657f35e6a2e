use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_approach, Clock, Registry, RunLimits, RunOutcome, RunnerError};
use crate::csp::format::read_csp_file;
use crate::csp::CspInstance;
use crate::encoder::EncodingKind;
use crate::features::{features_for, schema, FeatureSet, FeatureTable, FeatureVector, ProbeConfig};
use crate::generator::{generate_suite, splitmix64, UrbParams};
use crate::selector::{
    cross_validate, virtual_best, Answer, ApproachId, PerformanceRecord, RunMatrix, SelectorSpec, VbsResult,
};

#[derive(Clone, Debug)]
pub struct NamedInstance {
    pub id: String,
    pub instance: CspInstance,
    /// Generator parameters, for generated instances.
    pub params: Option<UrbParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InstanceSource {
    Files {
        paths: Vec<PathBuf>,
    },
    /// `replicas` instances per point, seeded from the master seed.
    Grid {
        points: Vec<UrbParams>,
        replicas: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    pub approaches: Vec<ApproachId>,
    /// Seconds.
    pub timeout: f64,
    #[serde(default)]
    pub memory_mb: Option<u64>,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub master_seed: u64,
    /// Parallel runs; 0 uses one per core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub clock: Clock,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(RunnerError::Config(format!("timeout must be positive, got {}", self.timeout)));
        }
        if self.approaches.is_empty() {
            return Err(RunnerError::Config("no approaches configured".into()));
        }
        if self.repetitions == 0 {
            return Err(RunnerError::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn limits(&self) -> RunLimits {
        RunLimits { timeout: self.timeout, memory_mb: self.memory_mb, seed: self.master_seed, clock: self.clock }
    }
}

/// Instances of a source; file instances are named by file stem.
pub fn load_instances(source: &InstanceSource, master_seed: u64) -> Result<Vec<NamedInstance>, RunnerError> {
    match source {
        InstanceSource::Files { paths } => {
            let mut seen = BTreeSet::new();
            paths
                .iter()
                .map(|p| {
                    let id = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .ok_or_else(|| RunnerError::Config(format!("no file name in {}", p.display())))?;
                    if !seen.insert(id.clone()) {
                        return Err(RunnerError::Config(format!("two instance files are named `{id}`")));
                    }
                    Ok(NamedInstance { id, instance: read_csp_file(p)?, params: None })
                })
                .collect()
        }
        InstanceSource::Grid { points, replicas } => Ok(generate_suite(points, *replicas, master_seed)?
            .into_iter()
            .map(|e| NamedInstance {
                id: format!("urb-p{:03}-r{:03}", e.point, e.replica),
                instance: e.instance,
                params: Some(e.params),
            })
            .collect()),
    }
}

fn cell_seed(master: u64, instance: usize, approach: usize, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(((instance as u64) << 40) ^ ((approach as u64) << 20) ^ rep as u64))
}

fn run_cell(
    inst: &NamedInstance,
    approach: &ApproachId,
    registry: &Registry,
    limits: &RunLimits,
    seeds: impl Iterator<Item = u64>,
) -> Result<RunOutcome, RunnerError> {
    let mut runs = Vec::new();
    for seed in seeds {
        let l = RunLimits { seed, ..limits.clone() };
        runs.push(run_approach(&inst.instance, &inst.id, approach, registry, &l)?);
    }
    runs.sort_by(|a, b| a.record.score().total_cmp(&b.record.score()));
    let mid = runs.len() / 2;
    Ok(runs.swap_remove(mid))
}

/// Runs every approach on every instance with up to `jobs` runs at once
/// (0: one per core). With several repetitions the run of median PAR10
/// score is kept. Finished records are appended to `log` as CSV, one row at
/// a time from a single writer. Outcomes come back instance-major in the
/// order of `approaches`.
#[allow(clippy::too_many_arguments)]
pub fn run_matrix(
    instances: &[NamedInstance],
    approaches: &[ApproachId],
    registry: &Registry,
    limits: &RunLimits,
    repetitions: usize,
    master_seed: u64,
    jobs: usize,
    log: Option<&mut dyn Write>,
) -> Result<Vec<RunOutcome>, RunnerError> {
    limits.validate()?;
    if approaches.is_empty() {
        return Err(RunnerError::Config("no approaches configured".into()));
    }
    for a in approaches {
        registry.adapter_for(a)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunnerError::Config(format!("thread pool: {e}")))?;
    let cells: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|i| (0..approaches.len()).map(move |a| (i, a))).collect();
    let reps = repetitions.max(1);
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunOutcome, RunnerError>)>();
    let mut slots: Vec<Option<RunOutcome>> = vec![None; cells.len()];
    let mut first_err: Option<RunnerError> = None;
    let mut writer = log.map(csv::Writer::from_writer);

    std::thread::scope(|s| {
        let cells = &cells;
        let cancel = &cancel;
        s.spawn(move || {
            pool.install(|| {
                cells.par_iter().enumerate().for_each_with(tx, |tx, (k, &(i, a))| {
                    if cancel.load(Ordering::Relaxed) {
                        return;
                    }
                    let seeds = (0..reps).map(|r| cell_seed(master_seed, i, a, r));
                    let res = run_cell(&instances[i], &approaches[a], registry, limits, seeds);
                    let _ = tx.send((k, res));
                });
            });
        });
        for (k, res) in rx {
            match res {
                Ok(o) => {
                    if let Some(w) = writer.as_mut() {
                        let written = w.serialize(&o.record).and_then(|_| w.flush().map_err(csv::Error::from));
                        if let Err(e) = written {
                            first_err.get_or_insert(e.into());
                            cancel.store(true, Ordering::Relaxed);
                        }
                    }
                    slots[k] = Some(o);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                    cancel.store(true, Ordering::Relaxed);
                }
            }
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(slots.into_iter().map(|o| o.expect("every cell ran")).collect())
}

/// One point of a phase-transition curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tightness: f64,
    pub approach: String,
    pub runs: usize,
    pub mean_runtime: f64,
    /// Mean engine work (nodes, decisions, propagations); empty when the
    /// solver does not report it.
    pub mean_work: Option<f64>,
    pub solved_fraction: f64,
    pub sat_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct PhaseSweep {
    pub instances: Vec<NamedInstance>,
    pub outcomes: Vec<RunOutcome>,
    pub rows: Vec<SweepRow>,
}

/// Groups records by the tightness of their generated instance; rows are
/// ordered by approach, then tightness.
pub fn aggregate_sweep(
    instances: &[NamedInstance],
    records: &[PerformanceRecord],
) -> Result<Vec<SweepRow>, RunnerError> {
    let tight: BTreeMap<&str, f64> = instances
        .iter()
        .map(|i| {
            i.params
                .map(|p| (i.id.as_str(), p.tightness))
                .ok_or_else(|| RunnerError::Config(format!("{} was not generated", i.id)))
        })
        .collect::<Result<_, _>>()?;
    let mut groups: BTreeMap<(String, u64), Vec<&PerformanceRecord>> = BTreeMap::new();
    for r in records {
        let t = *tight
            .get(r.instance.as_str())
            .ok_or_else(|| RunnerError::Config(format!("record for unknown instance {}", r.instance)))?;
        groups.entry((r.approach.to_string(), (t * 1e9).round() as u64)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((approach, t), rs)| {
            let n = rs.len() as f64;
            let works: Vec<f64> = rs.iter().filter_map(|r| r.work.map(|w| w as f64)).collect();
            SweepRow {
                tightness: t as f64 / 1e9,
                approach,
                runs: rs.len(),
                mean_runtime: rs.iter().map(|r| r.runtime).sum::<f64>() / n,
                mean_work: (works.len() == rs.len()).then(|| works.iter().sum::<f64>() / n),
                solved_fraction: rs.iter().filter(|r| r.solved()).count() as f64 / n,
                sat_fraction: rs.iter().filter(|r| r.answer == Some(Answer::Sat)).count() as f64 / n,
            }
        })
        .collect())
}

/// Generates `replicas` instances per grid point, runs every approach on
/// them and aggregates mean cost per tightness.
pub fn phase_transition_experiment(
    grid: &[UrbParams],
    replicas: usize,
    master_seed: u64,
    approaches: &[ApproachId],
    registry: &Registry,
    limits: &RunLimits,
    jobs: usize,
) -> Result<PhaseSweep, RunnerError> {
    let instances = load_instances(&InstanceSource::Grid { points: grid.to_vec(), replicas }, master_seed)?;
    let outcomes = run_matrix(&instances, approaches, registry, limits, 1, master_seed, jobs, None)?;
    let records: Vec<PerformanceRecord> = outcomes.iter().map(|o| o.record.clone()).collect();
    let rows = aggregate_sweep(&instances, &records)?;
    Ok(PhaseSweep { instances, outcomes, rows })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowGroup {
    Approach,
    SingleBest,
    Vbs,
    Selector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: RowGroup,
    pub name: String,
    pub par10: f64,
    pub n_solved: usize,
    pub n_instances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorDecision {
    pub selector: String,
    pub instance: String,
    pub fold: usize,
    pub approach: ApproachId,
    pub score: f64,
    pub solved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub rows: Vec<ReportRow>,
    pub decisions: Vec<SelectorDecision>,
}

impl PortfolioReport {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn write_decisions_csv<W: Write>(&self, sink: W) -> Result<(), RunnerError> {
        let mut w = csv::Writer::from_writer(sink);
        for d in &self.decisions {
            w.serialize(d)?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for PortfolioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:<12} {:<width$} {:>14} {:>10}", "group", "name", "par10", "solved")?;
        for r in &self.rows {
            let group =
                serde_json::to_value(r.group).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            writeln!(f, "{:<12} {:<width$} {:>14.6} {:>5}/{:<4}", group, r.name, r.par10, r.n_solved, r.n_instances)?;
        }
        Ok(())
    }
}

pub fn write_report_csv<W: Write>(report: &PortfolioReport, sink: W) -> Result<(), RunnerError> {
    let mut w = csv::Writer::from_writer(sink);
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-approach PAR10, the single best approach, virtual best solvers over
/// all approaches, CSP solvers, SAT approaches and each encoding, and the
/// cross-validated PAR10 of every selector.
pub fn evaluate_portfolio(
    matrix: &RunMatrix,
    selectors: &[(String, SelectorSpec)],
    folds: usize,
    seed: u64,
) -> Result<PortfolioReport, RunnerError> {
    let n = matrix.instances().len();
    let mut rows = Vec::new();
    for (a, id) in matrix.approaches().iter().enumerate() {
        let n_solved = (0..n).filter(|&i| matrix.record(i, a).solved()).count();
        rows.push(ReportRow {
            group: RowGroup::Approach,
            name: id.to_string(),
            par10: matrix.approach_par10(a),
            n_solved,
            n_instances: n,
        });
    }
    let (best, best_par10) = matrix.single_best();
    let best_idx = matrix.approach_index(&best).expect("single best is in the matrix");
    rows.push(ReportRow {
        group: RowGroup::SingleBest,
        name: format!("single best ({best})"),
        par10: best_par10,
        n_solved: (0..n).filter(|&i| matrix.record(i, best_idx).solved()).count(),
        n_instances: n,
    });

    let all = matrix.approaches().to_vec();
    let mut subsets: Vec<(String, Vec<ApproachId>)> = vec![
        ("VB all".into(), all.clone()),
        ("VB CSP".into(), all.iter().filter(|a| a.is_csp()).cloned().collect()),
        ("VB SAT".into(), all.iter().filter(|a| !a.is_csp()).cloned().collect()),
    ];
    for enc in EncodingKind::ALL {
        subsets.push((format!("VB {enc}"), all.iter().filter(|a| a.encoding() == Some(enc)).cloned().collect()));
    }
    for (name, subset) in subsets {
        if subset.is_empty() {
            continue;
        }
        let VbsResult { par10, n_solved, .. } = virtual_best(matrix, &subset)?;
        rows.push(ReportRow { group: RowGroup::Vbs, name, par10, n_solved, n_instances: n });
    }

    let mut decisions = Vec::new();
    for (name, spec) in selectors {
        let cv = cross_validate(matrix, spec, folds, seed)?;
        rows.push(ReportRow {
            group: RowGroup::Selector,
            name: name.clone(),
            par10: cv.par10,
            n_solved: cv.n_solved,
            n_instances: n,
        });
        decisions.extend(cv.decisions.into_iter().map(|d| SelectorDecision {
            selector: name.clone(),
            instance: d.instance,
            fold: d.fold,
            approach: d.approach,
            score: d.score,
            solved: d.solved,
        }));
    }
    Ok(PortfolioReport { rows, decisions })
}

/// Feature vectors of every instance in one set, computed in parallel.
pub fn feature_table(
    instances: &[NamedInstance],
    set: FeatureSet,
    probe: &ProbeConfig,
) -> Result<FeatureTable, RunnerError> {
    let vectors: Vec<FeatureVector> =
        instances.par_iter().map(|i| features_for(&i.instance, set, probe)).collect::<Result<_, _>>()?;
    let s = schema(set);
    let mut table = FeatureTable::new(s.id, s.names);
    for (i, fv) in instances.iter().zip(&vectors) {
        table.push(i.id.clone(), fv)?;
    }
    Ok(table)
}
