use std::fs::File;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use csp_portfolio::cnf::write_dimacs_with_comments;
use csp_portfolio::csp::format::{read_csp_file, write_csp};
use csp_portfolio::encoder::{encode_with, EncodeOptions, EncodingKind};
use csp_portfolio::features::{features_for, read_feature_csv, write_feature_csv, FeatureSet, ProbeConfig};
use csp_portfolio::generator::{generate_suite, linspace_step, tightness_grid, UrbParams};
use csp_portfolio::runner::{
    evaluate_portfolio, feature_table, load_instances, phase_transition_experiment, run_approach, run_matrix,
    write_report_csv, write_sweep_csv, Clock, ExperimentConfig, InstanceSource, NamedInstance, Registry, RunLimits,
};
use csp_portfolio::selector::{
    read_matrix_csv, write_matrix_csv, Answer, ApproachId, HierarchySpec, LearnerKind, NodeSpec, RunMatrix, RunStatus,
    Selector, SelectorSpec, TargetTransform,
};

#[derive(Parser)]
#[command(name = "csp-portfolio", version, about = "CSP-to-SAT encodings, features and solver selection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate uniform random binary CSPs and a manifest.
    Generate(GenerateArgs),
    /// Encode a CSP into DIMACS CNF.
    Encode(EncodeArgs),
    /// Run one approach on one instance.
    Solve(SolveArgs),
    /// Compute one feature set for a list of instances.
    Features(FeaturesArgs),
    /// Run approaches on instances and write the run matrix.
    RunMatrix(RunMatrixArgs),
    /// Train a selector on a run matrix and feature tables.
    Train(TrainArgs),
    /// Choose an approach for one instance with a trained selector.
    Select(SelectArgs),
    /// Compare approaches, virtual best solvers and cross-validated selectors.
    Evaluate(EvaluateArgs),
    /// Sweep constraint tightness and aggregate mean cost per point.
    PhaseSweep(PhaseSweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    m: usize,
    /// Tightness values, comma separated, or `start:end:step`.
    #[arg(long)]
    t: String,
    #[arg(long, default_value_t = 1)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for instance files and manifest.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    encoding: EncodingKind,
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave out at-most-one clauses in the support encoding.
    #[arg(long)]
    no_amo: bool,
}

#[derive(Args, Clone)]
struct LimitArgs {
    /// Seconds per run.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long)]
    memory_mb: Option<u64>,
    /// Time built-in engines with the wall clock instead of counted work.
    #[arg(long)]
    wall_clock: bool,
    /// Seconds charged per unit of engine work.
    #[arg(long, default_value_t = 1e-6)]
    seconds_per_unit: f64,
    /// JSON list of external solver adapters.
    #[arg(long)]
    solvers: Option<PathBuf>,
}

impl LimitArgs {
    fn limits(&self, seed: u64) -> RunLimits {
        let clock = if self.wall_clock { Clock::Wall } else { Clock::Work { seconds_per_unit: self.seconds_per_unit } };
        RunLimits { timeout: self.timeout, memory_mb: self.memory_mb, seed, clock }
    }

    fn registry(&self) -> Result<Registry> {
        let mut reg = Registry::internal();
        if let Some(p) = &self.solvers {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            reg.load_json(&text).with_context(|| format!("loading adapters from {}", p.display()))?;
        }
        Ok(reg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    approach: ApproachId,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Instance files.
    inputs: Vec<PathBuf>,
    /// A manifest written by `generate`; paths are relative to it.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Vec<NamedInstance>> {
        let mut paths = self.inputs.clone();
        if let Some(m) = &self.manifest {
            paths.extend(read_manifest(m)?);
        }
        if paths.is_empty() {
            bail!("no instances given");
        }
        Ok(load_instances(&InstanceSource::Files { paths }, 0)?)
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long, default_value = "csp")]
    set: FeatureSet,
    #[command(flatten)]
    instances: InstanceArgs,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunMatrixArgs {
    #[command(flatten)]
    instances: InstanceArgs,
    /// An experiment configuration file; replaces the other options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated approaches; defaults to every configured solver
    /// under every encoding.
    #[arg(long, value_delimiter = ',')]
    approaches: Vec<ApproachId>,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Parallel runs; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Run matrix CSV, appended to as runs finish.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectorSpecArgs {
    /// Selector specification as JSON; replaces the options below.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// `hierarchical` (default node learners) or `flat`.
    #[arg(long, default_value = "hierarchical")]
    kind: String,
    /// Learner for a flat selector, e.g. `tree`, `linear`, `knn:5`.
    #[arg(long, default_value = "tree")]
    learner: LearnerKind,
    /// Feature schema for a flat selector.
    #[arg(long, default_value = "csp/1")]
    schema: String,
    /// `log1p` or `identity`.
    #[arg(long, default_value = "log1p")]
    transform: String,
}

fn parse_transform(s: &str) -> Result<TargetTransform> {
    match s {
        "log1p" => Ok(TargetTransform::Log1p),
        "identity" => Ok(TargetTransform::Identity),
        other => bail!("unknown transform `{other}` (expected log1p or identity)"),
    }
}

impl SelectorSpecArgs {
    fn spec(&self) -> Result<SelectorSpec> {
        if let Some(p) = &self.spec {
            return read_spec(p);
        }
        let transform = parse_transform(&self.transform)?;
        match self.kind.as_str() {
            "hierarchical" => Ok(SelectorSpec::Hierarchical(HierarchySpec::standard().with_transform(transform))),
            "flat" => Ok(SelectorSpec::Flat { node: NodeSpec::new(self.learner.clone(), &self.schema), transform }),
            other => bail!("unknown selector kind `{other}` (expected hierarchical or flat)"),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Feature tables, one per schema.
    #[arg(long = "features", required = true)]
    features: Vec<PathBuf>,
    #[command(flatten)]
    spec: SelectorSpecArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    selector: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Also run the chosen approach.
    #[arg(long)]
    run: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    limits: LimitArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long = "features")]
    features: Vec<PathBuf>,
    /// `NAME=spec.json`, repeatable. Defaults to the hierarchical selector
    /// and a flat regression tree on CSP features.
    #[arg(long = "selector")]
    selectors: Vec<String>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV; the table is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance selector decisions CSV.
    #[arg(long)]
    decisions: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseSweepArgs {
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 60)]
    m: usize,
    #[arg(long, default_value_t = 0.05)]
    t_start: f64,
    #[arg(long, default_value_t = 0.95)]
    t_end: f64,
    #[arg(long, default_value_t = 0.05)]
    t_step: f64,
    #[arg(long, default_value_t = 25)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',')]
    approaches: Vec<ApproachId>,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn read_spec(path: &Path) -> Result<SelectorSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing selector spec {}", path.display()))
}

fn parse_tightness(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, c] => {
            let (a, b, c): (f64, f64, f64) = (a.parse()?, b.parse()?, c.parse()?);
            if !(c > 0.0) || b < a {
                bail!("tightness range needs start <= end and a positive step");
            }
            linspace_step(a, b, c)
        }
        [_] => s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>()?,
        _ => bail!("tightness must be a comma list or start:end:step"),
    };
    Ok(values)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ManifestRow {
    id: String,
    path: String,
    n: usize,
    d: usize,
    m: usize,
    t: f64,
    seed: u64,
}

fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading manifest {}", path.display()))?;
    r.deserialize::<ManifestRow>().map(|row| Ok(base.join(row?.path))).collect()
}

fn load_matrix(matrix: &Path, features: &[PathBuf]) -> Result<RunMatrix> {
    let file = File::open(matrix).with_context(|| format!("opening {}", matrix.display()))?;
    let records = read_matrix_csv(file).with_context(|| format!("reading {}", matrix.display()))?;
    let mut m = RunMatrix::from_records(records).context("building the run matrix")?;
    for f in features {
        let file = File::open(f).with_context(|| format!("opening {}", f.display()))?;
        let table = read_feature_csv(file).with_context(|| format!("reading {}", f.display()))?;
        m.attach_features(&table);
    }
    Ok(m)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let ts = parse_tightness(&a.t)?;
    let grid = tightness_grid(a.n, a.d, a.m, &ts);
    let suite = generate_suite(&grid, a.replicas, a.seed)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = csv::Writer::from_path(a.out.join("manifest.csv"))?;
    for e in &suite {
        let id = format!("urb-p{:03}-r{:03}", e.point, e.replica);
        let file = format!("{id}.csp");
        std::fs::write(a.out.join(&file), write_csp(&e.instance))?;
        let UrbParams { n_vars, domain_size, n_constraints, tightness, seed } = e.params;
        w.serialize(ManifestRow { id, path: file, n: n_vars, d: domain_size, m: n_constraints, t: tightness, seed })?;
    }
    w.flush()?;
    eprintln!("wrote {} instances to {}", suite.len(), a.out.display());
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let inst = read_csp_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let opts = EncodeOptions { support_amo: !a.no_amo, ..EncodeOptions::default() };
    let enc = encode_with(&inst, a.encoding, &opts)?;
    let mut out = sink(a.out.as_deref())?;
    write_dimacs_with_comments(&enc.formula, &enc.comments(&inst), &mut out)?;
    out.flush()?;
    Ok(())
}

fn print_outcome(inst: &csp_portfolio::csp::CspInstance, out: &csp_portfolio::runner::RunOutcome) -> Result<()> {
    let r = &out.record;
    let mut stdout = std::io::stdout().lock();
    match (r.status, r.answer) {
        (RunStatus::Solved, Some(Answer::Sat)) => {
            writeln!(stdout, "SAT")?;
            if let Some(a) = &out.assignment {
                for (var, value) in &a.0 {
                    writeln!(stdout, "{} = {value}", inst.variables[*var].name)?;
                }
            }
        }
        (RunStatus::Solved, _) => writeln!(stdout, "UNSAT")?,
        (RunStatus::Timeout, _) => writeln!(stdout, "TIMEOUT")?,
        (RunStatus::Error, _) => {
            writeln!(stdout, "ERROR")?;
            bail!("{} failed: {}", r.approach, out.diagnostic.as_deref().unwrap_or("unknown error"));
        }
    }
    eprintln!("runtime {:.6}s{}", r.runtime, r.work.map(|w| format!(", work {w}")).unwrap_or_default());
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let inst = read_csp_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let id = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let out = run_approach(&inst, &id, &a.approach, &a.limits.registry()?, &a.limits.limits(a.seed))?;
    print_outcome(&inst, &out)
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let insts = a.instances.load()?;
    let table = feature_table(&insts, a.set, &ProbeConfig::default())?;
    let mut out = sink(a.out.as_deref())?;
    write_feature_csv(&table, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_run_matrix(a: RunMatrixArgs) -> Result<()> {
    let reg = a.limits.registry()?;
    let (insts, approaches, limits, reps, seed, jobs, out) = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text).context("parsing experiment config")?;
            cfg.validate()?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let insts = load_instances(&cfg.source, cfg.master_seed)?;
            let out = cfg.output_dir.join("runs.csv");
            (insts, cfg.approaches.clone(), cfg.limits(), cfg.repetitions, cfg.master_seed, cfg.jobs, Some(out))
        }
        None => {
            let approaches =
                if a.approaches.is_empty() { reg.approaches(&EncodingKind::ALL) } else { a.approaches.clone() };
            let limits = a.limits.limits(a.seed);
            (a.instances.load()?, approaches, limits, a.repetitions, a.seed, a.jobs, a.out.clone())
        }
    };
    let outcomes = match &out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            run_matrix(&insts, &approaches, &reg, &limits, reps, seed, jobs, Some(&mut f))?
        }
        None => {
            let outcomes = run_matrix(&insts, &approaches, &reg, &limits, reps, seed, jobs, None)?;
            let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
            write_matrix_csv(&records, std::io::stdout().lock())?;
            outcomes
        }
    };
    let errors: Vec<_> = outcomes.iter().filter(|o| o.record.status == RunStatus::Error).collect();
    for o in &errors {
        eprintln!(
            "error: {} on {}: {}",
            o.record.approach,
            o.record.instance,
            o.diagnostic.as_deref().unwrap_or("unknown")
        );
    }
    eprintln!("{} runs, {} errors", outcomes.len(), errors.len());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let m = load_matrix(&a.matrix, &a.features)?;
    let selector = a.spec.spec()?.train(&m)?;
    std::fs::write(&a.out, selector.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!("trained on {} instances, {} approaches", m.instances().len(), m.approaches().len());
    Ok(())
}

fn cmd_select(a: SelectArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.selector).with_context(|| format!("reading {}", a.selector.display()))?;
    let selector = Selector::from_json(&text)?;
    let inst = read_csp_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let probe = ProbeConfig::default();
    let mut lookup = csp_portfolio::selector::FeatureLookup::new();
    for schema in selector.schemas() {
        let set: FeatureSet = schema
            .parse()
            .map_err(|e: String| anyhow!("selector needs features `{schema}` that cannot be computed here: {e}"))?;
        lookup.insert(schema, features_for(&inst, set, &probe)?.values);
    }
    let (approach, path) = selector.route(&lookup)?;
    writeln!(std::io::stdout(), "{approach}")?;
    eprintln!("route: {}", path.join(" > "));
    if a.run {
        let id = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let out = run_approach(&inst, &id, &approach, &a.limits.registry()?, &a.limits.limits(a.seed))?;
        print_outcome(&inst, &out)?;
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let m = load_matrix(&a.matrix, &a.features)?;
    let selectors: Vec<(String, SelectorSpec)> = if a.selectors.is_empty() {
        let mut out = Vec::new();
        let schemas: Vec<&str> = m.schemas().collect();
        if schemas.contains(&"csp/1") && schemas.contains(&"sat-directorder/1") {
            out.push(("hierarchical".into(), SelectorSpec::Hierarchical(HierarchySpec::standard())));
        }
        if schemas.contains(&"csp/1") {
            out.push((
                "flat-tree".into(),
                SelectorSpec::Flat {
                    node: NodeSpec::new(LearnerKind::tree(), "csp/1"),
                    transform: TargetTransform::Log1p,
                },
            ));
        }
        out
    } else {
        a.selectors
            .iter()
            .map(|s| {
                let (name, path) = s.split_once('=').ok_or_else(|| anyhow!("expected NAME=spec.json, got `{s}`"))?;
                Ok((name.to_string(), read_spec(Path::new(path))?))
            })
            .collect::<Result<_>>()?
    };
    let report = evaluate_portfolio(&m, &selectors, a.folds, a.seed)?;
    write!(std::io::stdout(), "{report}")?;
    if let Some(p) = &a.out {
        write_report_csv(&report, File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    if let Some(p) = &a.decisions {
        report.write_decisions_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?)?;
    }
    Ok(())
}

fn cmd_phase_sweep(a: PhaseSweepArgs) -> Result<()> {
    let reg = a.limits.registry()?;
    let approaches = if a.approaches.is_empty() { reg.approaches(&EncodingKind::ALL) } else { a.approaches.clone() };
    if !(a.t_step > 0.0) || a.t_end < a.t_start {
        bail!("tightness range needs t-start <= t-end and a positive step");
    }
    let grid = tightness_grid(a.n, a.d, a.m, &linspace_step(a.t_start, a.t_end, a.t_step));
    let sweep =
        phase_transition_experiment(&grid, a.replicas, a.seed, &approaches, &reg, &a.limits.limits(a.seed), a.jobs)?;
    let mut out = sink(a.out.as_deref())?;
    write_sweep_csv(&sweep.rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let result = match Cli::parse().command {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Encode(a) => cmd_encode(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Features(a) => cmd_features(a),
        Cmd::RunMatrix(a) => cmd_run_matrix(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Select(a) => cmd_select(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::PhaseSweep(a) => cmd_phase_sweep(a),
    };
    // A closed downstream pipe (`| head`) ends the output quietly.
    match result {
        Err(e)
            if e.chain()
                .any(|c| c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == ErrorKind::BrokenPipe)) =>
        {
            Ok(())
        }
        other => other,
    }
}
