//! Acceptance suite: one line per criterion, nonzero exit on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use common::golden::*;
use common::{planted_flat, planted_hierarchy, planted_matrix};
use csp_portfolio::cnf::{count_models, solve_dpll, unit_propagate, DpllConfig, PropagationStatus, SatStatus};
use csp_portfolio::csp::{ac3, alldifferent_example, Assignment, CspInstance, Domain, IntOp, Relation};
use csp_portfolio::encoder::{decode_model, encode, encode_with, ClauseCategory, EncodeOptions, EncodingKind};
use csp_portfolio::generator::{generate_urb, linspace_step, tightness_grid, UrbParams};
use csp_portfolio::runner::{
    phase_transition_experiment, run_approach, run_matrix, AdapterKind, NamedInstance, Registry, RunLimits, RunOutcome,
    SolverAdapter,
};
use csp_portfolio::selector::{
    cross_validate, fit_regressor, par10, train_learner, virtual_best, Answer, ApproachId, HierarchySpec, LearnerKind,
    NodeSpec, PerformanceRecord, Regressor, RunMatrix, RunStatus, SelectorSpec, TargetTransform,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Allowed-pair test written against the relation data, independent of the
/// library's own consistency check.
fn pair_ok(rel: &Relation, a: i64, b: i64) -> bool {
    match rel {
        Relation::Forbidden(set) => !set.contains(&(a, b)),
        Relation::Allowed(set) => set.contains(&(a, b)),
        Relation::Intensional { op, offset } => {
            let r = b + offset;
            match op {
                IntOp::Eq => a == r,
                IntOp::Neq => a != r,
                IntOp::Lt => a < r,
                IntOp::Leq => a <= r,
                IntOp::Gt => a > r,
                IntOp::Geq => a >= r,
                IntOp::AbsDiffEq => (a - b).abs() == *offset,
                IntOp::AbsDiffNeq => (a - b).abs() != *offset,
            }
        }
    }
}

fn satisfies(inst: &CspInstance, values: &[i64]) -> bool {
    values.len() == inst.n_vars()
        && values.iter().enumerate().all(|(v, x)| inst.domain(v).values().contains(x))
        && inst.constraints.iter().all(|c| pair_ok(&c.relation, values[c.scope.0], values[c.scope.1]))
        && inst.unary.iter().all(|u| u.allows(values[u.var]))
}

/// Exhaustive enumeration of every assignment.
fn brute_force_count(inst: &CspInstance) -> u64 {
    let n = inst.n_vars();
    let mut idx = vec![0usize; n];
    let mut count = 0;
    loop {
        let values: Vec<i64> = (0..n).map(|v| inst.domain(v).values()[idx[v]]).collect();
        if satisfies(inst, &values) {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == n {
                return count;
            }
            idx[k] += 1;
            if idx[k] < inst.domain(k).len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn assignment_values(inst: &CspInstance, a: &Assignment) -> Option<Vec<i64>> {
    (0..inst.n_vars()).map(|v| a.get(v)).collect()
}

/// Random instances with n <= 6, d <= 4, m <= 10 and uniform tightness.
fn small_corpus(count: usize, seed: u64) -> Vec<CspInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(2..=6usize);
            let d = rng.random_range(1..=4usize);
            let m = rng.random_range(0..=(n * (n - 1) / 2).min(10));
            let t = rng.random_range(0.0..=1.0);
            generate_urb(&UrbParams::new(n, d, m, t, rng.random())).unwrap()
        })
        .collect()
}

fn sorted(enc: &csp_portfolio::encoder::EncodedInstance, cat: ClauseCategory) -> BTreeSet<Vec<i32>> {
    category_set(enc, cat)
}

fn golden_encodings() -> Verdict {
    let inst = alldifferent_example();
    let direct = encode(&inst, EncodingKind::Direct).map_err(|e| e.to_string())?;
    let support = encode(&inst, EncodingKind::Support).map_err(|e| e.to_string())?;
    let order = encode(&inst, EncodingKind::Order).map_err(|e| e.to_string())?;
    let checks = [
        ("direct", &direct, 21, &DIRECT_DOMAIN[..], &DIRECT_CONSTRAINTS[..]),
        ("support", &support, 30, &DIRECT_DOMAIN[..], &SUPPORT_CONSTRAINTS[..]),
        ("order", &order, 18, &ORDER_DOMAIN[..], &ORDER_CONSTRAINTS[..]),
    ];
    for (name, enc, total, dom, cons) in checks {
        ensure(enc.formula.n_clauses() == total, || {
            format!("{name}: {} clauses, expected {total}", enc.formula.n_clauses())
        })?;
        ensure(sorted(enc, ClauseCategory::Domain) == clause_set(enc, dom), || {
            format!("{name}: domain clauses differ")
        })?;
        ensure(sorted(enc, ClauseCategory::Constraint) == clause_set(enc, cons), || {
            format!("{name}: constraint clauses differ")
        })?;
    }
    Ok("direct 21, support 30, order 18 clauses match the worked tables".into())
}

fn equivalence_oracle(corpus: &[CspInstance]) -> Verdict {
    let mut sat = 0;
    for (i, inst) in corpus.iter().enumerate() {
        let expected = brute_force_count(inst) > 0;
        sat += usize::from(expected);
        for kind in EncodingKind::ALL {
            let enc = encode(inst, kind).map_err(|e| e.to_string())?;
            let out = solve_dpll(&enc.formula, &DpllConfig::default());
            ensure(out.status != SatStatus::BudgetExhausted, || format!("instance {i}: {kind} exhausted"))?;
            ensure((out.status == SatStatus::Sat) == expected, || format!("instance {i}: {kind} status differs"))?;
            if let Some(model) = out.model {
                let a = decode_model(&enc, &model).map_err(|e| format!("instance {i}: {kind}: {e}"))?;
                let values = assignment_values(inst, &a).ok_or("partial decoded assignment")?;
                ensure(satisfies(inst, &values), || format!("instance {i}: {kind} model is not a solution"))?;
            }
        }
    }
    Ok(format!("{} instances x 4 encodings agree ({sat} satisfiable)", corpus.len()))
}

fn model_count_bijection(corpus: &[CspInstance]) -> Verdict {
    let mut total = 0u128;
    for (i, inst) in corpus.iter().enumerate() {
        let expected = brute_force_count(inst) as u128;
        total += expected;
        for kind in EncodingKind::ALL {
            let enc = encode(inst, kind).map_err(|e| e.to_string())?;
            let got = count_models(&enc.formula, u128::MAX);
            ensure(got.count == expected, || {
                format!("instance {i}: {kind} counts {} models, {expected} solutions", got.count)
            })?;
        }
    }
    Ok(format!("{} instances x 4 encodings, {total} solutions in total", corpus.len()))
}

fn ac_correspondence() -> Verdict {
    let corpus = small_corpus(200, 404);
    let (mut pruned, mut wipeouts) = (0usize, 0usize);
    for (i, inst) in corpus.iter().enumerate() {
        let opts = EncodeOptions { support_amo: false, ..EncodeOptions::default() };
        let enc = encode_with(inst, EncodingKind::Support, &opts).map_err(|e| e.to_string())?;
        let up = unit_propagate(&enc.formula, &[]);
        let ac = ac3(inst).map_err(|e| e.to_string())?;
        ensure((up.status == PropagationStatus::Conflict) == ac.wipeout, || format!("instance {i}: wipeout differs"))?;
        if ac.wipeout {
            wipeouts += 1;
            continue;
        }
        let mut by_up = BTreeSet::new();
        let mut by_ac = BTreeSet::new();
        for var in 0..inst.n_vars() {
            for (rank, v) in inst.domain(var).values().iter().enumerate() {
                if up.implied.contains(&-enc.map.value_lit(var, rank).unwrap()) {
                    by_up.insert((var, *v));
                }
                if !ac.domains[var].contains(v) {
                    by_ac.insert((var, *v));
                }
            }
        }
        pruned += by_ac.len();
        ensure(by_up == by_ac, || format!("instance {i}: pruned sets differ: {by_up:?} vs {by_ac:?}"))?;
    }
    Ok(format!("200 instances, {pruned} values pruned identically, {wipeouts} wipeouts on both sides"))
}

fn clause_count_formulas() -> Verdict {
    for d in 1..=12usize {
        let inst = CspInstance::with_variables([("X", Domain::range(1, d as i64))]);
        let direct = encode(&inst, EncodingKind::Direct).map_err(|e| e.to_string())?;
        let order = encode(&inst, EncodingKind::Order).map_err(|e| e.to_string())?;
        ensure(direct.stats.domain == 1 + d * (d - 1) / 2, || format!("d={d}: direct has {}", direct.stats.domain))?;
        ensure(order.stats.domain == d, || format!("d={d}: order has {}", order.stats.domain))?;
    }
    Ok("direct 1 + d(d-1)/2 and order d domain clauses for d = 1..12".into())
}

fn phase_transition(audit: &mut Vec<(NamedInstance, Vec<RunOutcome>)>) -> Verdict {
    let reg = Registry::internal();
    let approaches = reg.approaches(&EncodingKind::ALL);
    let grid = tightness_grid(15, 8, 60, &linspace_step(0.05, 0.95, 0.05));
    let sweep = phase_transition_experiment(&grid, 25, 2024, &approaches, &reg, &RunLimits::new(100.0), 0)
        .map_err(|e| e.to_string())?;
    let per = approaches.len();
    for (k, inst) in sweep.instances.iter().enumerate() {
        audit.push((inst.clone(), sweep.outcomes[k * per..(k + 1) * per].to_vec()));
    }
    let mut curves: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &sweep.rows {
        curves.entry(r.approach.clone()).or_default().push((r.tightness, r.mean_runtime));
    }
    let mut details = Vec::new();
    let mut failures = Vec::new();
    let mut min_ratio = f64::INFINITY;
    let sat_curves = curves.keys().filter(|a| a.starts_with("sat:")).count();
    if sat_curves != 8 {
        failures.push(format!("expected 8 DPLL curves, found {sat_curves}"));
    }
    for (approach, curve) in &curves {
        let (t_peak, peak) = curve.iter().copied().fold((0.0, f64::MIN), |b, p| if p.1 > b.1 { p } else { b });
        let first = curve.first().unwrap().1;
        let last = curve.last().unwrap().1;
        let ratio = (peak / first).min(peak / last);
        let interior = t_peak > curve.first().unwrap().0 && t_peak < curve.last().unwrap().0;
        let line = format!("{approach}: peak t={t_peak:.2}, {:.1}x / {:.1}x", peak / first, peak / last);
        if approach.starts_with("sat:") {
            min_ratio = min_ratio.min(ratio);
            if curve.len() != 19 || !interior || ratio < 10.0 {
                failures.push(line);
            }
        } else {
            details.push(format!("[info] {line}"));
        }
    }
    for d in &details {
        println!("      {d}");
    }
    if failures.is_empty() {
        Ok(format!("8 DPLL curves x 19 points peak inside the sweep, min ratio {min_ratio:.1}x"))
    } else {
        Err(failures.join("; "))
    }
}

fn par10_arithmetic() -> Verdict {
    let a = ApproachId::csp("x");
    let two = vec![
        PerformanceRecord::new("i0", a.clone(), RunStatus::Solved, 10.0, 3600.0),
        PerformanceRecord::new("i1", a.clone(), RunStatus::Timeout, 3600.0, 3600.0),
    ];
    let v = par10(&two).map_err(|e| e.to_string())?;
    ensure(v == 18005.0, || format!("par10 = {v}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut recs: Vec<PerformanceRecord> = (0..60)
        .map(|i| {
            let status = [RunStatus::Solved, RunStatus::Timeout, RunStatus::Error][i % 3];
            let runtime = if status == RunStatus::Timeout { 3600.0 } else { rng.random_range(0.0..3600.0) };
            PerformanceRecord::new(format!("i{i}"), a.clone(), status, runtime, 3600.0)
        })
        .collect();
    let base = par10(&recs).map_err(|e| e.to_string())?;
    for s in 0..100 {
        recs.shuffle(&mut rng);
        let v = par10(&recs).map_err(|e| e.to_string())?;
        ensure((v - base).abs() <= 1e-12 * base, || format!("shuffle {s}: {v} vs {base}"))?;
    }
    Ok("par10([10, timeout], 3600) = 18005; 100 shuffles agree to 1e-12".into())
}

fn synthetic_matrix(rng: &mut ChaCha8Rng, n: usize) -> RunMatrix {
    let mut approaches = vec![ApproachId::csp("a"), ApproachId::csp("b")];
    for enc in [EncodingKind::Direct, EncodingKind::Support, EncodingKind::Order, EncodingKind::DirectOrder] {
        approaches.push(ApproachId::sat(enc, "s"));
        approaches.push(ApproachId::sat(enc, "t"));
    }
    let timeout = 100.0;
    let mut recs = Vec::new();
    let mut feats = Vec::new();
    for i in 0..n {
        let id = format!("s{i:03}");
        for a in &approaches {
            let roll: f64 = rng.random();
            let (status, runtime) = if roll < 0.25 {
                (RunStatus::Timeout, timeout)
            } else if roll < 0.3 {
                (RunStatus::Error, rng.random_range(0.0..timeout))
            } else {
                (RunStatus::Solved, rng.random_range(0.0..timeout))
            };
            recs.push(PerformanceRecord::new(id.clone(), a.clone(), status, runtime, timeout));
        }
        feats.push((id, (0..3).map(|_| rng.random::<f64>()).collect::<Vec<_>>()));
    }
    let mut m = RunMatrix::from_records(recs).unwrap();
    for (id, x) in feats {
        m.add_features("syn", &id, x);
    }
    m
}

fn vbs_dominance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let specs = [
        SelectorSpec::Hierarchical(HierarchySpec::uniform(LearnerKind::linear(), "syn")),
        SelectorSpec::Hierarchical(HierarchySpec::uniform(LearnerKind::KnnClassification { k: 3 }, "syn")),
        SelectorSpec::Flat { node: NodeSpec::new(LearnerKind::tree(), "syn"), transform: TargetTransform::Log1p },
    ];
    for k in 0..50 {
        let m = synthetic_matrix(&mut rng, 20 + k % 20);
        let subset = |keep: &dyn Fn(&ApproachId) -> bool| -> Vec<ApproachId> {
            m.approaches().iter().filter(|a| keep(a)).cloned().collect()
        };
        let all = virtual_best(&m, m.approaches()).unwrap().par10;
        let csp = virtual_best(&m, &subset(&|a| a.is_csp())).unwrap().par10;
        ensure(all <= csp, || format!("matrix {k}: VB all {all} > VB CSP {csp}"))?;
        for enc in EncodingKind::ALL {
            let v = virtual_best(&m, &subset(&|a| a.encoding() == Some(enc))).unwrap().par10;
            ensure(all <= v, || format!("matrix {k}: VB all {all} > VB {enc} {v}"))?;
        }
        let cv = cross_validate(&m, &specs[k % specs.len()], 5, k as u64).map_err(|e| e.to_string())?;
        ensure(cv.par10 >= all, || format!("matrix {k}: selector {} < VB all {all}", cv.par10))?;
    }
    Ok("50 matrices: VB all <= VB CSP, <= VB per encoding, <= selector PAR10".into())
}

fn planted_selection() -> Verdict {
    let clean = planted_matrix(1000, 2024, 0.0);
    let vbs = virtual_best(&clean, clean.approaches()).unwrap().par10;
    let hier = cross_validate(&clean, &planted_hierarchy(), 10, 1).map_err(|e| e.to_string())?.par10;
    let flat = cross_validate(&clean, &planted_flat(), 10, 1).map_err(|e| e.to_string())?.par10;
    let noisy = planted_matrix(1000, 2024, 0.2);
    let noisy_hier = cross_validate(&noisy, &planted_hierarchy(), 10, 1).map_err(|e| e.to_string())?.par10;
    let (best, single) = noisy.single_best();
    let detail = format!(
        "hierarchical {:.4}x VBS, flat {:.4}x VBS; noisy hierarchical {noisy_hier:.2} vs single best {best} {single:.2}",
        hier / vbs,
        flat / vbs
    );
    ensure(hier <= 1.01 * vbs && flat <= 1.01 * vbs && noisy_hier <= single, || detail.clone())?;
    Ok(detail)
}

fn learner_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let w = [3.0, -2.0, 0.5, 7.25];
    let x: Vec<Vec<f64>> = (0..80).map(|_| (0..4).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| 1.5 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
    let Regressor::Linear { intercept, coef } =
        fit_regressor(&LearnerKind::linear(), &x, &y).map_err(|e| e.to_string())?
    else {
        return Err("ridge did not produce a linear model".into());
    };
    let err = coef.iter().zip(&w).map(|(c, t)| (c - t).abs()).fold((intercept - 1.5).abs(), f64::max);
    ensure(err <= 1e-6, || format!("ridge coefficient error {err:e}"))?;

    let knn = fit_regressor(&LearnerKind::KnnRegression { k: 1 }, &x, &y).map_err(|e| e.to_string())?;
    ensure(x.iter().zip(&y).all(|(r, t)| knn.predict(r) == *t), || "knn(k=1) does not reproduce its targets".into())?;

    // Two blobs; solver 0 is fast on the first, solver 1 on the second.
    let blob = |rng: &mut ChaCha8Rng, c: f64| vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)];
    let mut pts = Vec::new();
    let mut costs = Vec::new();
    for i in 0..60 {
        let first = i % 2 == 0;
        pts.push(blob(&mut rng, if first { 0.0 } else { 10.0 }));
        costs.push(if first { vec![1.0, 50.0] } else { vec![50.0, 1.0] });
    }
    let model = train_learner(&LearnerKind::ClusterBest { clusters: 2, seed: 3 }, &pts, &costs, TargetTransform::Log1p)
        .map_err(|e| e.to_string())?;
    for _ in 0..40 {
        let first: bool = rng.random();
        let p = blob(&mut rng, if first { 0.0 } else { 10.0 });
        ensure(model.choose(&p) == usize::from(!first), || "cluster-best picked the wrong solver".into())?;
    }
    Ok(format!("ridge max error {err:.1e}; knn(k=1) exact; cluster-best 40/40 held-out points"))
}

/// Every solved record must carry a verified answer: satisfiable answers an
/// assignment that passes the independent check, unsatisfiable answers
/// agreement with brute force (small instances) or every other solver.
fn verification_gate(audit: &[(NamedInstance, Vec<RunOutcome>)]) -> Verdict {
    let (mut solved, mut sat) = (0usize, 0usize);
    for (inst, outcomes) in audit {
        let small = inst.instance.search_space() <= 1 << 16;
        let truth = if small { Some(brute_force_count(&inst.instance) > 0) } else { None };
        let answers: HashSet<Answer> =
            outcomes.iter().filter(|o| o.record.solved()).filter_map(|o| o.record.answer).collect();
        ensure(answers.len() <= 1, || format!("{}: solvers disagree", inst.id))?;
        for o in outcomes.iter().filter(|o| o.record.solved()) {
            solved += 1;
            match o.record.answer {
                Some(Answer::Sat) => {
                    sat += 1;
                    let a = o.assignment.as_ref().ok_or_else(|| format!("{}: solved without assignment", inst.id))?;
                    let values = assignment_values(&inst.instance, a).ok_or("partial assignment")?;
                    ensure(satisfies(&inst.instance, &values), || {
                        format!("{} {}: wrong solution", inst.id, o.record.approach)
                    })?;
                    ensure(truth != Some(false), || format!("{}: SAT on an unsatisfiable instance", inst.id))?;
                }
                Some(Answer::Unsat) => {
                    ensure(truth != Some(true), || {
                        format!("{} {}: UNSAT on a satisfiable instance", inst.id, o.record.approach)
                    })?;
                }
                None => return Err(format!("{}: solved without answer", inst.id)),
            }
        }
    }
    ensure(solved > 0, || "no solved records to audit".into())?;
    Ok(format!("{solved} solved records audited ({sat} with solutions), 0 failures"))
}

fn matrix_runs(corpus: &[CspInstance], audit: &mut Vec<(NamedInstance, Vec<RunOutcome>)>) -> Result<(), String> {
    let reg = Registry::internal();
    let approaches = reg.approaches(&EncodingKind::ALL);
    let named: Vec<NamedInstance> = corpus
        .iter()
        .enumerate()
        .map(|(i, inst)| NamedInstance { id: format!("small-{i:03}"), instance: inst.clone(), params: None })
        .collect();
    let out =
        run_matrix(&named, &approaches, &reg, &RunLimits::new(100.0), 1, 1, 0, None).map_err(|e| e.to_string())?;
    let per = approaches.len();
    for (k, inst) in named.into_iter().enumerate() {
        audit.push((inst, out[k * per..(k + 1) * per].to_vec()));
    }
    Ok(())
}

/// Solvers that claim satisfiability with a wrong answer must end in `error`.
fn corrupting_solvers() -> Result<(), String> {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fakes = [
        ("clash", AdapterKind::SatExternal, "printf 's SATISFIABLE\\nv 1 -2 -3 4 -5 -6 7 -8 -9 0\\n'"),
        ("equal", AdapterKind::CspExternal, "printf 's SATISFIABLE\\nv X=2 Y=2 Z=1\\n'"),
    ];
    let mut reg = Registry::empty();
    for (name, kind, body) in fakes {
        let path = dir.path().join(name);
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).map_err(|e| e.to_string())?;
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).map_err(|e| e.to_string())?;
        reg.add(SolverAdapter::external(name, kind, vec![path.to_string_lossy().into(), "{input}".into()]))
            .map_err(|e| e.to_string())?;
        let approach = if kind.is_sat() { ApproachId::sat(EncodingKind::Direct, name) } else { ApproachId::csp(name) };
        let out = run_approach(&alldifferent_example(), "ex1", &approach, &reg, &RunLimits::new(5.0))
            .map_err(|e| e.to_string())?;
        ensure(out.record.status == RunStatus::Error && !out.record.solved(), || {
            format!("corrupting solver `{name}` was recorded as {:?}", out.record.status)
        })?;
    }
    Ok(())
}

fn main() {
    let corpus = small_corpus(500, 2);
    let mut audit = Vec::new();
    let mut results: Vec<(&str, Verdict, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        results.push((name, v, start.elapsed().as_secs_f64()));
        let (name, v, secs) = results.last().unwrap();
        match v {
            Ok(d) => println!("PASS {name} ({secs:.1}s): {d}"),
            Err(e) => println!("FAIL {name} ({secs:.1}s): {e}"),
        }
    };
    run("1 golden encodings", &mut golden_encodings);
    run("2 equivalence oracle", &mut || equivalence_oracle(&corpus));
    run("3 model-count bijection", &mut || model_count_bijection(&corpus[..200]));
    run("4 AC correspondence", &mut ac_correspondence);
    run("5 clause-count formulas", &mut clause_count_formulas);
    run("6 phase-transition shape", &mut || phase_transition(&mut audit));
    run("7 PAR10 arithmetic", &mut par10_arithmetic);
    run("8 VBS dominance", &mut vbs_dominance);
    run("9 planted-signal selection", &mut planted_selection);
    run("10 learner unit checks", &mut learner_checks);
    run("11 verification gate", &mut || {
        matrix_runs(&corpus, &mut audit)?;
        corrupting_solvers()?;
        verification_gate(&audit).map(|d| format!("{d}; corrupting solvers recorded as errors"))
    });
    let failed = results.iter().filter(|r| r.1.is_err()).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
