mod common;

use std::collections::BTreeSet;

use common::golden::*;
use csp_portfolio::cnf::{count_models, solve_dpll, unit_propagate, DpllConfig, PropagationStatus, SatStatus};
use csp_portfolio::csp::{
    ac3, alldifferent_example, solve_backtracking, CspInstance, Domain, Find, IntOp, Propagation, Relation,
    SearchConfig, SearchStatus,
};
use csp_portfolio::encoder::{decode_model, encode, encode_with, ClauseCategory, EncodeOptions, EncodingKind};
use csp_portfolio::generator::{generate_urb, UrbParams};
use proptest::prelude::*;

#[test]
fn direct_encoding_matches_worked_table() {
    let enc = encode(&alldifferent_example(), EncodingKind::Direct).unwrap();
    assert_eq!(enc.formula.n_vars(), 9);
    assert_eq!(enc.formula.n_clauses(), 21);
    assert_eq!(category_set(&enc, ClauseCategory::Domain), clause_set(&enc, &DIRECT_DOMAIN));
    assert_eq!(category_set(&enc, ClauseCategory::Constraint), clause_set(&enc, &DIRECT_CONSTRAINTS));
    assert_eq!((enc.stats.domain, enc.stats.constraint, enc.stats.channel), (12, 9, 0));
}

#[test]
fn support_encoding_matches_worked_table() {
    let enc = encode(&alldifferent_example(), EncodingKind::Support).unwrap();
    assert_eq!(enc.formula.n_clauses(), 30);
    assert_eq!(category_set(&enc, ClauseCategory::Domain), clause_set(&enc, &DIRECT_DOMAIN));
    assert_eq!(category_set(&enc, ClauseCategory::Constraint), clause_set(&enc, &SUPPORT_CONSTRAINTS));
}

#[test]
fn order_encoding_matches_worked_table() {
    let enc = encode(&alldifferent_example(), EncodingKind::Order).unwrap();
    assert_eq!(enc.formula.n_clauses(), 18);
    assert_eq!(category_set(&enc, ClauseCategory::Domain), clause_set(&enc, &ORDER_DOMAIN));
    assert_eq!(category_set(&enc, ClauseCategory::Constraint), clause_set(&enc, &ORDER_CONSTRAINTS));
}

#[test]
fn direct_order_channels_every_value() {
    let mut inst = CspInstance::with_variables([("X", Domain::range(1, 3))]);
    inst.add_unary(0, IntOp::Leq, 2);
    let enc = encode(&inst, EncodingKind::DirectOrder).unwrap();
    let channel = [
        "-x1 | x<=1",
        "x1 | -x<=1",
        "-x2 | x<=2",
        "-x2 | -x<=1",
        "x2 | -x<=2 | x<=1",
        "-x3 | x<=3",
        "-x3 | -x<=2",
        "x3 | -x<=3 | x<=2",
    ];
    assert_eq!(category_set(&enc, ClauseCategory::Channel), clause_set(&enc, &channel));
    assert_eq!(category_set(&enc, ClauseCategory::Constraint), clause_set(&enc, &["x<=2"]));
    assert_eq!(count_models(&enc.formula, 100).count, 2);
}

#[test]
fn clause_count_formulas() {
    for d in 1..=7i64 {
        let inst = CspInstance::with_variables([("X", Domain::range(1, d)), ("Y", Domain::range(1, d))]);
        let du = d as usize;
        assert_eq!(encode(&inst, EncodingKind::Direct).unwrap().stats.domain, 2 * (1 + du * (du - 1) / 2));
        assert_eq!(encode(&inst, EncodingKind::Order).unwrap().stats.domain, 2 * du);
        let dord = encode(&inst, EncodingKind::DirectOrder).unwrap();
        assert_eq!(dord.stats.channel, 2 * (3 * du - 1));
    }
}

fn oracle_count(inst: &CspInstance) -> u64 {
    let out = solve_backtracking(inst, &SearchConfig::new(Propagation::None, Find::CountAll)).unwrap();
    out.solution_count.unwrap()
}

fn random_instance() -> impl Strategy<Value = CspInstance> {
    (2usize..6, 1usize..5, 0.0f64..1.0, any::<u64>()).prop_map(|(n, d, t, seed)| {
        let max = n * (n - 1) / 2;
        let m = (seed as usize % (max + 1)).max(1).min(max);
        generate_urb(&UrbParams::new(n, d, m, t, seed)).unwrap()
    })
}

/// Instances with intensional relations of every kind, unary bounds and
/// non-contiguous domains.
fn mixed_instance() -> impl Strategy<Value = CspInstance> {
    let domain = proptest::collection::btree_set(-3i64..6, 1..4);
    let op = proptest::sample::select(IntOp::ALL.to_vec());
    (
        proptest::collection::vec(domain, 2..5),
        proptest::collection::vec((0usize..4, 0usize..4, op.clone(), -2i64..3), 0..5),
        proptest::collection::vec((0usize..4, proptest::sample::select(IntOp::ALL[..6].to_vec()), -2i64..5), 0..3),
    )
        .prop_map(|(domains, cons, unary)| {
            let n = domains.len();
            let mut inst = CspInstance::with_variables(
                domains.into_iter().enumerate().map(|(i, d)| (format!("V{i}"), Domain::new(d).unwrap())),
            );
            for (a, b, op, offset) in cons {
                let (a, b) = (a % n, b % n);
                if a != b {
                    inst.add_constraint(a, b, Relation::Intensional { op, offset });
                }
            }
            for (v, op, bound) in unary {
                inst.add_unary(v % n, op, bound);
            }
            inst
        })
}

fn check_against_oracle(inst: &CspInstance) -> Result<(), TestCaseError> {
    prop_assume!(inst.validate().is_empty());
    let expected = oracle_count(inst) as u128;
    for kind in EncodingKind::ALL {
        let enc = encode(inst, kind).unwrap();
        prop_assert_eq!(enc.stats.total(), enc.formula.n_clauses());
        prop_assert_eq!(count_models(&enc.formula, u128::MAX).count, expected, "{}", kind);
        let out = solve_dpll(&enc.formula, &DpllConfig::default());
        prop_assert_eq!(out.status == SatStatus::Sat, expected > 0, "{}", kind);
        if let Some(model) = out.model {
            let a = decode_model(&enc, &model).unwrap();
            prop_assert!(inst.is_solution(&a), "{}", kind);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn model_counts_equal_solution_counts(inst in random_instance()) {
        check_against_oracle(&inst)?;
    }

    #[test]
    fn mixed_relations_keep_model_counts(inst in mixed_instance()) {
        check_against_oracle(&inst)?;
    }

    #[test]
    fn support_propagation_equals_arc_consistency(inst in random_instance(), amo in any::<bool>()) {
        let enc = encode_with(&inst, EncodingKind::Support, &EncodeOptions { support_amo: amo, ..Default::default() }).unwrap();
        let up = unit_propagate(&enc.formula, &[]);
        let ac = ac3(&inst).unwrap();
        prop_assert_eq!(up.status == PropagationStatus::Conflict, ac.wipeout);
        if !ac.wipeout {
            let mut removed_by_up = BTreeSet::new();
            let mut removed_by_ac = BTreeSet::new();
            for var in 0..inst.n_vars() {
                for (rank, v) in inst.domain(var).values().iter().enumerate() {
                    let l = enc.map.value_lit(var, rank).unwrap();
                    if up.implied.contains(&-l) {
                        removed_by_up.insert((var, *v));
                    }
                    if !ac.domains[var].contains(v) {
                        removed_by_ac.insert((var, *v));
                    }
                }
            }
            prop_assert_eq!(removed_by_up, removed_by_ac);
        }
    }
}

#[test]
fn example_has_six_solutions_everywhere() {
    let inst = alldifferent_example();
    assert_eq!(oracle_count(&inst), 6);
    for kind in EncodingKind::ALL {
        assert_eq!(count_models(&encode(&inst, kind).unwrap().formula, 100).count, 6);
    }
    let mac = solve_backtracking(&inst, &SearchConfig::new(Propagation::Ac3, Find::First)).unwrap();
    assert_eq!(mac.status, SearchStatus::Sat);
}
