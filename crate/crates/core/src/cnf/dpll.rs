use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::{CnfFormula, Lit, SatModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationStatus {
    Ok,
    Conflict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropagationResult {
    pub status: PropagationStatus,
    /// Every literal true at the fixpoint, assumptions included.
    pub implied: BTreeSet<Lit>,
}

/// Unit resolution to fixpoint under `assumptions`.
pub fn unit_propagate(f: &CnfFormula, assumptions: &[Lit]) -> PropagationResult {
    let mut e = Engine::new(f);
    let mut ok = !e.root_conflict;
    for &a in assumptions {
        ok &= e.enqueue(a);
    }
    ok = ok && e.propagate();
    PropagationResult {
        status: if ok { PropagationStatus::Ok } else { PropagationStatus::Conflict },
        implied: e.trail.iter().copied().collect(),
    }
}

/// Which polarity a decision tries first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[default]
    Positive,
    Negative,
}

#[derive(Clone, Debug, Default)]
pub struct DpllConfig {
    /// Maximum number of backtracks (flipped decisions).
    pub conflict_budget: Option<u64>,
    /// Maximum decisions + propagated literals.
    pub work_budget: Option<u64>,
    pub deadline: Option<Instant>,
    pub phase: Phase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatStatus {
    Sat,
    Unsat,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct DpllOutcome {
    pub status: SatStatus,
    pub model: Option<SatModel>,
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub backtracks: u64,
}

impl DpllOutcome {
    pub fn work(&self) -> u64 {
        self.decisions + self.propagations
    }
}

struct Level {
    trail_len: usize,
    decision: Lit,
    flipped: bool,
}

/// Complete DPLL with chronological backtracking. Branches on the lowest
/// unassigned variable, trying `config.phase` first. Deterministic.
pub fn solve_dpll(f: &CnfFormula, config: &DpllConfig) -> DpllOutcome {
    let mut e = Engine::new(f);
    let mut out = DpllOutcome {
        status: SatStatus::Unsat,
        model: None,
        decisions: 0,
        propagations: 0,
        conflicts: 0,
        backtracks: 0,
    };
    if e.root_conflict {
        return out;
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut hint = 1;
    let mut steps = 0u64;

    let status = loop {
        steps += 1;
        if let Some(w) = config.work_budget {
            if out.decisions + e.propagations >= w {
                break SatStatus::BudgetExhausted;
            }
        }
        if let Some(deadline) = config.deadline {
            if steps % 256 == 0 && Instant::now() >= deadline {
                break SatStatus::BudgetExhausted;
            }
        }

        if !e.propagate() {
            out.conflicts += 1;
            let mut resumed = false;
            while let Some(level) = levels.pop() {
                e.backtrack_to(level.trail_len);
                if !level.flipped {
                    let var = level.decision.unsigned_abs() as usize;
                    hint = var;
                    out.backtracks += 1;
                    levels.push(Level { trail_len: level.trail_len, decision: -level.decision, flipped: true });
                    let fresh = e.enqueue(-level.decision);
                    debug_assert!(fresh);
                    resumed = true;
                    break;
                }
            }
            if !resumed {
                break SatStatus::Unsat;
            }
            if let Some(b) = config.conflict_budget {
                if out.backtracks > b {
                    break SatStatus::BudgetExhausted;
                }
            }
            continue;
        }

        match e.next_unassigned(hint) {
            None => break SatStatus::Sat,
            Some(var) => {
                hint = var;
                out.decisions += 1;
                let lit = match config.phase {
                    Phase::Positive => var as Lit,
                    Phase::Negative => -(var as Lit),
                };
                levels.push(Level { trail_len: e.trail.len(), decision: lit, flipped: false });
                e.enqueue(lit);
            }
        }
    };

    out.propagations = e.propagations;
    out.status = status;
    if status == SatStatus::Sat {
        let model = SatModel(e.model());
        assert!(f.is_satisfied_by(&model), "DPLL produced a model violating the formula");
        out.model = Some(model);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelCount {
    /// Exact count, or `cap` when `capped` is set.
    pub count: u128,
    pub capped: bool,
}

/// Exact number of satisfying assignments over all `n_vars` variables,
/// stopping once `cap` is reached.
pub fn count_models(f: &CnfFormula, cap: u128) -> ModelCount {
    let mut e = Engine::new(f);
    if e.root_conflict {
        return ModelCount { count: 0, capped: false };
    }
    let mut count = 0u128;
    count_rec(&mut e, 1, cap, &mut count);
    if count >= cap {
        ModelCount { count: cap, capped: true }
    } else {
        ModelCount { count, capped: false }
    }
}

fn count_rec(e: &mut Engine, hint: usize, cap: u128, count: &mut u128) {
    if *count >= cap {
        return;
    }
    let mark = e.trail.len();
    if !e.propagate() {
        e.backtrack_to(mark);
        return;
    }
    if e.all_satisfied() {
        let free = e.unassigned_count() as u32;
        *count = count.saturating_add(1u128.checked_shl(free).unwrap_or(u128::MAX));
        return;
    }
    let var = e.next_unassigned(hint).expect("unsatisfied clause with every variable assigned");
    for lit in [var as Lit, -(var as Lit)] {
        let before = e.trail.len();
        e.enqueue(lit);
        count_rec(e, var, cap, count);
        e.backtrack_to(before);
        if *count >= cap {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(f: &CnfFormula) -> u64 {
        let n = f.n_vars();
        (0u64..1 << n)
            .filter(|bits| {
                let model = SatModel((0..n).map(|i| bits >> i & 1 == 1).collect());
                f.is_satisfied_by(&model)
            })
            .count() as u64
    }

    /// PHP(4,3): var p(i,h) = 3*i + h + 1 for pigeon i in 0..4, hole h in 0..3.
    fn pigeonhole_4_3() -> CnfFormula {
        let p = |i: i32, h: i32| 3 * i + h + 1;
        let mut clauses: Vec<Vec<Lit>> = (0..4).map(|i| (0..3).map(|h| p(i, h)).collect()).collect();
        for h in 0..3 {
            for i in 0..4 {
                for j in i + 1..4 {
                    clauses.push(vec![-p(i, h), -p(j, h)]);
                }
            }
        }
        CnfFormula::from_clauses(12, clauses).unwrap()
    }

    #[test]
    fn chain_of_units() {
        // a=1, b=2, c=3
        let f = CnfFormula::from_clauses(3, [vec![-1, 2], vec![-2, 3]]).unwrap();
        let r = unit_propagate(&f, &[1]);
        assert_eq!(r.status, PropagationStatus::Ok);
        assert_eq!(r.implied, [1, 2, 3].into_iter().collect());
    }

    #[test]
    fn complementary_units_conflict() {
        let f = CnfFormula::from_clauses(1, [vec![1], vec![-1]]).unwrap();
        assert_eq!(unit_propagate(&f, &[]).status, PropagationStatus::Conflict);
    }

    #[test]
    fn textbook_formula_is_sat() {
        let f = CnfFormula::from_clauses(4, [vec![1, 2, -4], vec![-2, -3], vec![3, 4]]).unwrap();
        let out = solve_dpll(&f, &DpllConfig::default());
        assert_eq!(out.status, SatStatus::Sat);
        assert!(f.is_satisfied_by(out.model.as_ref().unwrap()));
    }

    #[test]
    fn empty_clause_is_unsat() {
        let f = CnfFormula::from_clauses(2, [vec![1, 2], vec![]]).unwrap();
        assert_eq!(solve_dpll(&f, &DpllConfig::default()).status, SatStatus::Unsat);
    }

    #[test]
    fn pigeonhole_is_unsat_and_agrees_with_brute_force() {
        let f = pigeonhole_4_3();
        assert_eq!(brute_force(&f), 0);
        for phase in [Phase::Positive, Phase::Negative] {
            let out = solve_dpll(&f, &DpllConfig { phase, ..Default::default() });
            assert_eq!(out.status, SatStatus::Unsat);
        }
        assert_eq!(count_models(&f, u128::MAX).count, 0);
    }

    #[test]
    fn conflict_budget_is_distinct_from_unsat() {
        let f = pigeonhole_4_3();
        let out = solve_dpll(&f, &DpllConfig { conflict_budget: Some(2), ..Default::default() });
        assert_eq!(out.status, SatStatus::BudgetExhausted);
        assert!(out.model.is_none());
    }

    #[test]
    fn model_counts() {
        assert_eq!(count_models(&CnfFormula::new(3), 1000).count, 8);
        let exactly_one =
            CnfFormula::from_clauses(3, [vec![1, 2, 3], vec![-1, -2], vec![-1, -3], vec![-2, -3]]).unwrap();
        assert_eq!(brute_force(&exactly_one), 3);
        assert_eq!(count_models(&exactly_one, 1000), ModelCount { count: 3, capped: false });
        assert_eq!(count_models(&exactly_one, 2), ModelCount { count: 2, capped: true });
    }

    #[test]
    fn unit_propagation_is_monotone_and_idempotent() {
        let f = CnfFormula::from_clauses(5, [vec![-1, 2], vec![-2, -3, 4], vec![-4, 5], vec![-1, 3]]).unwrap();
        let small = unit_propagate(&f, &[1]);
        let large = unit_propagate(&f, &[1, -5]);
        assert_eq!(large.status, PropagationStatus::Conflict);
        let again = unit_propagate(&f, &small.implied.iter().copied().collect::<Vec<_>>());
        assert_eq!(again, small);
        let bigger = unit_propagate(&f, &[1, 2]);
        assert!(small.implied.is_subset(&bigger.implied));
    }
}
