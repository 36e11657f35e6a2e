#![allow(dead_code)]

pub mod golden;

use csp_portfolio::encoder::EncodingKind;
use csp_portfolio::selector::{ApproachId, PerformanceRecord, RunMatrix, RunStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const PLANTED_SCHEMA: &str = "planted";

/// Two CSP solvers and two SAT solvers under each of three encodings.
pub fn planted_approaches() -> Vec<ApproachId> {
    let mut out = vec![ApproachId::csp("alpha"), ApproachId::csp("beta")];
    for enc in [EncodingKind::Direct, EncodingKind::Support, EncodingKind::DirectOrder] {
        for s in ["s1", "s2"] {
            out.push(ApproachId::sat(enc, s));
        }
    }
    out
}

/// Runtime of approach `j` is `base_j + slope_j * x_j`, where feature `j`
/// is uniform on [0, 1]. `noise` is the standard deviation of additive
/// Gaussian noise as a fraction of the runtime scale (the slope); features
/// do not depend on it.
pub fn planted_matrix(n: usize, seed: u64, noise: f64) -> RunMatrix {
    let approaches = planted_approaches();
    let base = [5.0, 5.0, 10.0, 12.0, 8.0, 12.0, 10.0, 11.0];
    let slope = 100.0;
    let timeout = 1000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let normal = Normal::new(0.0, noise * slope).unwrap();
    let mut recs = Vec::new();
    let mut feats = Vec::new();
    for i in 0..n {
        let x: Vec<f64> = (0..approaches.len()).map(|_| rng.random::<f64>()).collect();
        for (j, a) in approaches.iter().enumerate() {
            let mut t = base[j] + slope * x[j];
            if noise > 0.0 {
                t = (t + normal.sample(&mut noise_rng)).max(0.01);
            }
            recs.push(PerformanceRecord::new(format!("p{i:04}"), a.clone(), RunStatus::Solved, t, timeout));
        }
        feats.push(x);
    }
    let mut m = RunMatrix::from_records(recs).unwrap();
    for (i, x) in feats.into_iter().enumerate() {
        m.add_features(PLANTED_SCHEMA, &format!("p{i:04}"), x);
    }
    m
}

/// Regression trees where the target is a minimum over branches, linear
/// models at the solver leaves.
pub fn planted_hierarchy() -> csp_portfolio::selector::SelectorSpec {
    use csp_portfolio::selector::{HierarchySpec, LearnerKind, NodeSpec, SelectorSpec};
    let tree = NodeSpec::new(LearnerKind::RegressionTree { min_leaf: 2, max_depth: 16 }, PLANTED_SCHEMA);
    let mut h = HierarchySpec::uniform(LearnerKind::linear(), PLANTED_SCHEMA);
    h.root = tree.clone();
    h.encoding = tree;
    SelectorSpec::Hierarchical(h)
}

pub fn planted_flat() -> csp_portfolio::selector::SelectorSpec {
    use csp_portfolio::selector::{LearnerKind, NodeSpec, SelectorSpec, TargetTransform};
    SelectorSpec::Flat {
        node: NodeSpec::new(LearnerKind::RegressionTree { min_leaf: 2, max_depth: 16 }, PLANTED_SCHEMA),
        transform: TargetTransform::default(),
    }
}
