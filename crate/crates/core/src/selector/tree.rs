use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::learners::{train_learner, LearnerKind, TargetTransform, TrainedLearner};
use super::{ApproachId, RunMatrix, SelectorError};
use crate::encoder::EncodingKind;

pub const SELECTOR_FORMAT_VERSION: u32 = 1;

/// Feature vectors of one instance keyed by schema id.
pub type FeatureLookup = BTreeMap<String, Vec<f64>>;

pub type NodeModel = TrainedLearner;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub learner: LearnerKind,
    pub schema: String,
}

impl NodeSpec {
    pub fn new(learner: LearnerKind, schema: impl Into<String>) -> NodeSpec {
        NodeSpec { learner, schema: schema.into() }
    }
}

/// Learner and feature schema for every node of the selection tree: root
/// (CSP or SAT), CSP solver, encoding, and one SAT solver node per encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub root: NodeSpec,
    pub csp_solver: NodeSpec,
    pub encoding: NodeSpec,
    /// Default for the per-encoding SAT solver nodes.
    pub sat_solver: NodeSpec,
    #[serde(default)]
    pub sat_solver_by_encoding: BTreeMap<EncodingKind, NodeSpec>,
    #[serde(default)]
    pub transform: TargetTransform,
}

impl HierarchySpec {
    pub fn uniform(learner: LearnerKind, schema: &str) -> HierarchySpec {
        let node = NodeSpec::new(learner, schema);
        HierarchySpec {
            root: node.clone(),
            csp_solver: node.clone(),
            encoding: node.clone(),
            sat_solver: node,
            sat_solver_by_encoding: BTreeMap::new(),
            transform: TargetTransform::default(),
        }
    }

    /// Regression trees on CSP features for the root and CSP solver nodes,
    /// linear regression on CSP features for the encoding and SAT solver
    /// nodes, except direct-order features for the support solver node.
    pub fn standard() -> HierarchySpec {
        let csp = "csp/1";
        let mut spec = HierarchySpec::uniform(LearnerKind::linear(), csp);
        spec.root = NodeSpec::new(LearnerKind::tree(), csp);
        spec.csp_solver = NodeSpec::new(LearnerKind::tree(), csp);
        spec.sat_solver_by_encoding
            .insert(EncodingKind::Support, NodeSpec::new(LearnerKind::linear(), "sat-directorder/1"));
        spec
    }

    pub fn with_transform(mut self, transform: TargetTransform) -> HierarchySpec {
        self.transform = transform;
        self
    }

    fn sat_node(&self, enc: EncodingKind) -> &NodeSpec {
        self.sat_solver_by_encoding.get(&enc).unwrap_or(&self.sat_solver)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SelectorSpec {
    Hierarchical(HierarchySpec),
    Flat {
        node: NodeSpec,
        #[serde(default)]
        transform: TargetTransform,
    },
}

impl SelectorSpec {
    pub fn train(&self, matrix: &RunMatrix) -> Result<Selector, SelectorError> {
        match self {
            SelectorSpec::Hierarchical(h) => train_hierarchy(matrix, h),
            SelectorSpec::Flat { node, transform } => train_flat(matrix, node, *transform),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SelectorNode {
    Leaf {
        approach: ApproachId,
    },
    Decision {
        name: String,
        learner: LearnerKind,
        schema: String,
        n_features: usize,
        labels: Vec<String>,
        branches: Vec<SelectorNode>,
        model: NodeModel,
        /// Some branch never wins on the training data.
        degenerate: bool,
    },
}

impl SelectorNode {
    fn collect_leaves(&self, out: &mut Vec<ApproachId>) {
        match self {
            SelectorNode::Leaf { approach } => out.push(approach.clone()),
            SelectorNode::Decision { branches, .. } => branches.iter().for_each(|b| b.collect_leaves(out)),
        }
    }

    fn collect_schemas(&self, out: &mut BTreeSet<String>) {
        if let SelectorNode::Decision { schema, branches, .. } = self {
            out.insert(schema.clone());
            branches.iter().for_each(|b| b.collect_schemas(out));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectorKind {
    Hierarchical,
    Flat,
}

/// A trained selector, serializable as a versioned JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selector {
    pub version: u32,
    pub kind: SelectorKind,
    pub root: SelectorNode,
}

impl Selector {
    /// Routes an instance to a leaf, returning the approach and the labels
    /// of the branches taken.
    pub fn route(&self, features: &FeatureLookup) -> Result<(ApproachId, Vec<String>), SelectorError> {
        let mut node = &self.root;
        let mut path = Vec::new();
        loop {
            match node {
                SelectorNode::Leaf { approach } => return Ok((approach.clone(), path)),
                SelectorNode::Decision { schema, n_features, labels, branches, model, .. } => {
                    let x = features.get(schema).ok_or_else(|| SelectorError::MissingFeatures {
                        instance: "<query>".into(),
                        schema: schema.clone(),
                    })?;
                    if x.len() != *n_features {
                        return Err(SelectorError::FeatureLength { expected: *n_features, got: x.len() });
                    }
                    let b = model.choose(x);
                    path.push(labels[b].clone());
                    node = &branches[b];
                }
            }
        }
    }

    pub fn select(&self, features: &FeatureLookup) -> Result<ApproachId, SelectorError> {
        self.route(features).map(|(a, _)| a)
    }

    pub fn leaves(&self) -> Vec<ApproachId> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Feature schemas needed to route an instance.
    pub fn schemas(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.root.collect_schemas(&mut out);
        out
    }

    pub fn to_json(&self) -> Result<String, SelectorError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Selector, SelectorError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != SELECTOR_FORMAT_VERSION {
            return Err(SelectorError::Version(header.version));
        }
        Ok(serde_json::from_str(text)?)
    }
}

struct Branch {
    label: String,
    /// Approach indices under this branch.
    members: Vec<usize>,
    node: SelectorNode,
}

fn feature_rows(matrix: &RunMatrix, schema: &str) -> Result<Vec<Vec<f64>>, SelectorError> {
    matrix
        .instances()
        .iter()
        .map(|id| {
            matrix
                .features(schema, id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| SelectorError::MissingFeatures { instance: id.clone(), schema: schema.to_string() })
        })
        .collect()
}

/// Trains a decision node over `branches`, each scored per instance by the
/// best performance among its members. A single branch collapses into its
/// child.
fn train_node(
    matrix: &RunMatrix,
    name: &str,
    spec: &NodeSpec,
    transform: TargetTransform,
    mut branches: Vec<Branch>,
) -> Result<SelectorNode, SelectorError> {
    branches.sort_by(|a, b| a.label.cmp(&b.label));
    if branches.len() == 1 {
        return Ok(branches.pop().unwrap().node);
    }
    let x = feature_rows(matrix, &spec.schema)?;
    let n_features = x.first().map_or(0, Vec::len);
    let costs: Vec<Vec<f64>> = (0..matrix.instances().len())
        .map(|i| {
            branches
                .iter()
                .map(|b| b.members.iter().map(|&a| matrix.score(i, a)).fold(f64::INFINITY, f64::min))
                .collect()
        })
        .collect();
    let winners: BTreeSet<usize> = costs
        .iter()
        .map(|c| c.iter().enumerate().fold(0, |best, (j, &v)| if v < c[best] { j } else { best }))
        .collect();
    let degenerate = winners.len() < branches.len();
    let model = if winners.len() == 1 && !spec.learner.is_regression() {
        TrainedLearner::Constant { branch: *winners.first().unwrap() }
    } else {
        train_learner(&spec.learner, &x, &costs, transform)?
    };
    let labels = branches.iter().map(|b| b.label.clone()).collect();
    Ok(SelectorNode::Decision {
        name: name.to_string(),
        learner: spec.learner,
        schema: spec.schema.clone(),
        n_features,
        labels,
        branches: branches.into_iter().map(|b| b.node).collect(),
        model,
        degenerate,
    })
}

fn leaf_branch(matrix: &RunMatrix, a: usize) -> Branch {
    let approach = matrix.approaches()[a].clone();
    Branch { label: approach.to_string(), members: vec![a], node: SelectorNode::Leaf { approach } }
}

/// Root chooses CSP or SAT; below it a CSP solver node, an encoding node and
/// one SAT solver node per encoding.
pub fn train_hierarchy(matrix: &RunMatrix, spec: &HierarchySpec) -> Result<Selector, SelectorError> {
    let approaches = matrix.approaches();
    let csp: Vec<usize> = (0..approaches.len()).filter(|&a| approaches[a].is_csp()).collect();
    let mut by_enc: BTreeMap<EncodingKind, Vec<usize>> = BTreeMap::new();
    for (a, id) in approaches.iter().enumerate() {
        if let Some(enc) = id.encoding() {
            by_enc.entry(enc).or_default().push(a);
        }
    }

    let mut top = Vec::new();
    if !csp.is_empty() {
        let leaves = csp.iter().map(|&a| leaf_branch(matrix, a)).collect();
        let node = train_node(matrix, "csp-solver", &spec.csp_solver, spec.transform, leaves)?;
        top.push(Branch { label: "csp".into(), members: csp, node });
    }
    if !by_enc.is_empty() {
        let mut enc_branches = Vec::new();
        for (enc, members) in by_enc {
            let leaves = members.iter().map(|&a| leaf_branch(matrix, a)).collect();
            let name = format!("sat-solver/{enc}");
            let node = train_node(matrix, &name, spec.sat_node(enc), spec.transform, leaves)?;
            enc_branches.push(Branch { label: enc.keyword().into(), members, node });
        }
        let members = enc_branches.iter().flat_map(|b| b.members.iter().copied()).collect();
        let node = train_node(matrix, "encoding", &spec.encoding, spec.transform, enc_branches)?;
        top.push(Branch { label: "sat".into(), members, node });
    }
    let root = train_node(matrix, "root", &spec.root, spec.transform, top)?;
    Ok(Selector { version: SELECTOR_FORMAT_VERSION, kind: SelectorKind::Hierarchical, root })
}

/// One decision over every approach in the matrix.
pub fn train_flat(matrix: &RunMatrix, spec: &NodeSpec, transform: TargetTransform) -> Result<Selector, SelectorError> {
    let leaves = (0..matrix.approaches().len()).map(|a| leaf_branch(matrix, a)).collect();
    let root = train_node(matrix, "flat", spec, transform, leaves)?;
    Ok(Selector { version: SELECTOR_FORMAT_VERSION, kind: SelectorKind::Flat, root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::{PerformanceRecord, RunStatus};

    fn matrix(rows: &[(f64, [f64; 3])]) -> RunMatrix {
        let approaches = [
            ApproachId::csp("bt"),
            ApproachId::sat(EncodingKind::Direct, "dpll"),
            ApproachId::sat(EncodingKind::Order, "dpll"),
        ];
        let mut recs = Vec::new();
        for (i, (_, times)) in rows.iter().enumerate() {
            for (a, &t) in approaches.iter().zip(times) {
                recs.push(PerformanceRecord::new(format!("i{i}"), a.clone(), RunStatus::Solved, t, 100.0));
            }
        }
        let mut m = RunMatrix::from_records(recs).unwrap();
        for (i, (f, _)) in rows.iter().enumerate() {
            m.add_features("f", &format!("i{i}"), vec![*f, 1.0]);
        }
        m
    }

    #[test]
    fn hierarchy_shape_and_routing() {
        let rows: Vec<(f64, [f64; 3])> =
            (0..12).map(|i| (i as f64, if i < 6 { [1.0, 5.0, 9.0] } else { [9.0, 5.0, 1.0] })).collect();
        let m = matrix(&rows);
        let sel = train_hierarchy(&m, &HierarchySpec::uniform(LearnerKind::KnnClassification { k: 1 }, "f")).unwrap();
        let SelectorNode::Decision { labels, .. } = &sel.root else { panic!() };
        assert_eq!(labels, &vec!["csp".to_string(), "sat".to_string()]);
        let q = |v: f64| FeatureLookup::from([("f".to_string(), vec![v, 1.0])]);
        assert_eq!(sel.select(&q(1.0)).unwrap(), ApproachId::csp("bt"));
        let (a, path) = sel.route(&q(10.0)).unwrap();
        assert_eq!(a, ApproachId::sat(EncodingKind::Order, "dpll"));
        assert_eq!(path, vec!["sat".to_string(), "order".to_string()]);
        assert_eq!(sel.leaves().len(), 3);
        assert!(matches!(sel.select(&FeatureLookup::new()), Err(SelectorError::MissingFeatures { .. })));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let rows: Vec<(f64, [f64; 3])> = (0..8).map(|i| (i as f64, [i as f64 + 1.0, 4.0, 9.0])).collect();
        let m = matrix(&rows);
        let sel = train_hierarchy(&m, &HierarchySpec::uniform(LearnerKind::linear(), "f")).unwrap();
        let text = sel.to_json().unwrap();
        assert_eq!(Selector::from_json(&text).unwrap(), sel);
        let bumped = text.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(Selector::from_json(&bumped), Err(SelectorError::Version(9))));
    }

    #[test]
    fn dominant_approach_everywhere() {
        let rows: Vec<(f64, [f64; 3])> = (0..10).map(|i| (i as f64, [50.0, 2.0, 60.0])).collect();
        let m = matrix(&rows);
        let flat = train_flat(&m, &NodeSpec::new(LearnerKind::KnnClassification { k: 3 }, "f"), TargetTransform::Log1p)
            .unwrap();
        let SelectorNode::Decision { degenerate, model, .. } = &flat.root else { panic!() };
        assert!(*degenerate);
        assert!(matches!(model, TrainedLearner::Constant { .. }));
        for v in [0.0, 3.0, 100.0] {
            let q = FeatureLookup::from([("f".to_string(), vec![v, 1.0])]);
            assert_eq!(flat.select(&q).unwrap(), ApproachId::sat(EncodingKind::Direct, "dpll"));
        }
    }
}
