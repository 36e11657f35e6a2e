use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SelectorError;

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-8;

fn default_lambda() -> f64 {
    DEFAULT_RIDGE_LAMBDA
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LearnerKind {
    /// Ridge least squares on standardized features. `lambda` is relative to
    /// the sample count.
    LinearRegression {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    KnnRegression {
        k: usize,
    },
    /// Greedy variance-reduction binary tree.
    RegressionTree {
        min_leaf: usize,
        max_depth: usize,
    },
    KnnClassification {
        k: usize,
    },
    /// k-means on standardized features; each cluster picks the branch with
    /// the lowest mean score among its members.
    ClusterBest {
        clusters: usize,
        seed: u64,
    },
}

impl LearnerKind {
    pub fn linear() -> LearnerKind {
        LearnerKind::LinearRegression { lambda: DEFAULT_RIDGE_LAMBDA }
    }

    pub fn tree() -> LearnerKind {
        LearnerKind::RegressionTree { min_leaf: 3, max_depth: 10 }
    }

    pub fn is_regression(&self) -> bool {
        matches!(
            self,
            LearnerKind::LinearRegression { .. }
                | LearnerKind::KnnRegression { .. }
                | LearnerKind::RegressionTree { .. }
        )
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::LinearRegression { lambda } => write!(f, "linear:{lambda}"),
            LearnerKind::KnnRegression { k } => write!(f, "knn-regression:{k}"),
            LearnerKind::RegressionTree { min_leaf, max_depth } => write!(f, "tree:{min_leaf}:{max_depth}"),
            LearnerKind::KnnClassification { k } => write!(f, "knn:{k}"),
            LearnerKind::ClusterBest { clusters, seed } => write!(f, "cluster:{clusters}:{seed}"),
        }
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    /// `linear[:lambda]`, `knn-regression:k`, `tree[:min_leaf:max_depth]`,
    /// `knn:k`, `cluster:k[:seed]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<usize, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("`{s}` needs a parameter"))?
                .parse()
                .map_err(|_| format!("bad number in `{s}`"))
        };
        Ok(match parts[0] {
            "linear" => LearnerKind::LinearRegression {
                lambda: match parts.get(1) {
                    Some(l) => l.parse().map_err(|_| format!("bad lambda in `{s}`"))?,
                    None => DEFAULT_RIDGE_LAMBDA,
                },
            },
            "knn-regression" => LearnerKind::KnnRegression { k: num(1)? },
            "tree" if parts.len() == 1 => LearnerKind::tree(),
            "tree" => LearnerKind::RegressionTree { min_leaf: num(1)?, max_depth: num(2)? },
            "knn" => LearnerKind::KnnClassification { k: num(1)? },
            "cluster" => {
                LearnerKind::ClusterBest { clusters: num(1)?, seed: if parts.len() > 2 { num(2)? as u64 } else { 0 } }
            }
            other => return Err(format!("unknown learner `{other}`")),
        })
    }
}

/// Transform applied to scores before regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetTransform {
    #[default]
    Log1p,
    Identity,
}

impl TargetTransform {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            TargetTransform::Log1p => y.ln_1p(),
            TargetTransform::Identity => y,
        }
    }

    pub fn invert(self, y: f64) -> f64 {
        match self {
            TargetTransform::Log1p => y.exp_m1(),
            TargetTransform::Identity => y,
        }
    }
}

/// Z-scoring fitted on training data; constant columns are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub n_features: usize,
    pub keep: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let p = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let (mut keep, mut mean, mut std) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..p {
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let s = (x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
            if s > 1e-12 * m.abs().max(1.0) {
                keep.push(j);
                mean.push(m);
                std.push(s);
            }
        }
        Standardizer { n_features: p, keep, mean, std }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        self.keep.iter().enumerate().map(|(k, &j)| (x[j] - self.mean[k]) / self.std[k]).collect()
    }
}

fn check_data(x: &[Vec<f64>], n_targets: usize) -> Result<usize, SelectorError> {
    if x.len() < 2 || x.len() != n_targets {
        return Err(SelectorError::TooFewSamples(x.len().min(n_targets)));
    }
    let p = x[0].len();
    for row in x {
        if row.len() != p {
            return Err(SelectorError::FeatureLength { expected: p, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SelectorError::Parse("non-finite feature value".into()));
        }
    }
    Ok(p)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` nearest points, ties to the lowest index.
fn nearest(points: &[Vec<f64>], q: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (sq_dist(p, q), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Regressor {
    Linear { intercept: f64, coef: Vec<f64> },
    Knn { k: usize, scaler: Standardizer, points: Vec<Vec<f64>>, targets: Vec<f64> },
    Tree { nodes: Vec<TreeNode> },
}

impl Regressor {
    pub fn n_features(&self) -> usize {
        match self {
            Regressor::Linear { coef, .. } => coef.len(),
            Regressor::Knn { scaler, .. } => scaler.n_features,
            Regressor::Tree { nodes } => nodes
                .iter()
                .filter_map(|n| match n {
                    TreeNode::Split { feature, .. } => Some(feature + 1),
                    TreeNode::Leaf { .. } => None,
                })
                .max()
                .unwrap_or(0),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Regressor::Linear { intercept, coef } => intercept + coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>(),
            Regressor::Knn { k, scaler, points, targets } => {
                let q = scaler.transform(x);
                let idx = nearest(points, &q, *k);
                idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
            }
            Regressor::Tree { nodes } => {
                let mut at = 0;
                loop {
                    match &nodes[at] {
                        TreeNode::Leaf { value } => return *value,
                        TreeNode::Split { feature, threshold, left, right } => {
                            at = if x[*feature] <= *threshold { *left } else { *right };
                        }
                    }
                }
            }
        }
    }
}

fn fit_ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Regressor {
    let n = x.len();
    let scaler = Standardizer::fit(x);
    let q = scaler.keep.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut coef = vec![0.0; scaler.n_features];
    let mut intercept = y_mean;
    if q > 0 {
        let z = DMatrix::from_fn(n, q, |i, j| (x[i][scaler.keep[j]] - scaler.mean[j]) / scaler.std[j]);
        let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let mut a = z.transpose() * &z;
        for j in 0..q {
            a[(j, j)] += lambda * n as f64;
        }
        let b = z.transpose() * yc;
        let w = match a.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => a.svd(true, true).solve(&b, 1e-12).expect("svd solve with both factors"),
        };
        for (k, &j) in scaler.keep.iter().enumerate() {
            coef[j] = w[k] / scaler.std[k];
            intercept -= coef[j] * scaler.mean[k];
        }
    }
    Regressor::Linear { intercept, coef }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean });
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return at;
        }
        let sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let p = self.x[idx[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        for j in 0..p {
            let mut order = idx.clone();
            order.sort_by(|&a, &b| self.x[a][j].total_cmp(&self.x[b][j]).then(a.cmp(&b)));
            let total: f64 = order.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = order.iter().map(|&i| self.y[i].powi(2)).sum();
            let (mut s, mut s2) = (0.0, 0.0);
            for cut in 1..order.len() {
                let yi = self.y[order[cut - 1]];
                s += yi;
                s2 += yi * yi;
                let (lo, hi) = (self.x[order[cut - 1]][j], self.x[order[cut]][j]);
                if cut < self.min_leaf || order.len() - cut < self.min_leaf || lo == hi {
                    continue;
                }
                let (nl, nr) = (cut as f64, (order.len() - cut) as f64);
                let left = s2 - s * s / nl;
                let right = (total_sq - s2) - (total - s).powi(2) / nr;
                let gain = sse - left - right;
                if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                    best = Some((gain, j, lo + (hi - lo) / 2.0));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else { return at };
        if gain <= 1e-12 * sse.max(1.0) {
            return at;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = TreeNode::Split { feature, threshold, left, right };
        at
    }
}

/// Fits a regression learner on rows `x` and targets `y`.
pub fn fit_regressor(kind: &LearnerKind, x: &[Vec<f64>], y: &[f64]) -> Result<Regressor, SelectorError> {
    check_data(x, y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SelectorError::Parse("non-finite target".into()));
    }
    Ok(match *kind {
        LearnerKind::LinearRegression { lambda } => fit_ridge(x, y, lambda),
        LearnerKind::KnnRegression { k } => {
            if k == 0 || k > x.len() {
                return Err(SelectorError::KTooLarge { k, n: x.len() });
            }
            let scaler = Standardizer::fit(x);
            let points = x.iter().map(|r| scaler.transform(r)).collect();
            Regressor::Knn { k, scaler, points, targets: y.to_vec() }
        }
        LearnerKind::RegressionTree { min_leaf, max_depth } => {
            let mut b = TreeBuilder { x, y, min_leaf: min_leaf.max(1), max_depth, nodes: Vec::new() };
            b.build((0..x.len()).collect(), 0);
            Regressor::Tree { nodes: b.nodes }
        }
        other => return Err(SelectorError::Parse(format!("{other} is not a regression learner"))),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn closest(centroids: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(cen, p);
        if d < bd {
            bd = d;
            best = c;
        }
    }
    best
}

/// Seeded k-means (k-means++ seeding, Lloyd iterations, best of 4 starts).
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans, SelectorError> {
    if k == 0 || k > points.len() {
        return Err(SelectorError::KTooLarge { k, n: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..4 {
        let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
        while centroids.len() < k {
            let d: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[closest(&centroids, p)])).collect();
            let total: f64 = d.iter().sum();
            let pick = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                d.iter()
                    .position(|&w| {
                        r -= w;
                        r < 0.0
                    })
                    .unwrap_or(points.len() - 1)
            } else {
                rng.random_range(0..points.len())
            };
            centroids.push(points[pick].clone());
        }
        let mut assignment = vec![usize::MAX; points.len()];
        for _ in 0..100 {
            let next: Vec<usize> = points.iter().map(|p| closest(&centroids, p)).collect();
            if next == assignment {
                break;
            }
            assignment = next;
            for (c, cen) in centroids.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> =
                    points.iter().zip(&assignment).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
                if members.is_empty() {
                    continue;
                }
                for (j, v) in cen.iter_mut().enumerate() {
                    *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        let inertia = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeans { centroids, assignment, inertia });
        }
    }
    Ok(best.unwrap())
}

/// A trained decision model choosing among `n_branches` options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TrainedLearner {
    /// One regressor per branch predicting its transformed score; argmin.
    PerBranch {
        transform: TargetTransform,
        models: Vec<Regressor>,
    },
    KnnVote {
        k: usize,
        scaler: Standardizer,
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_branches: usize,
    },
    Clusters {
        scaler: Standardizer,
        centroids: Vec<Vec<f64>>,
        branch: Vec<usize>,
    },
    Constant {
        branch: usize,
    },
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v < xs[best] {
            best = i;
        }
    }
    best
}

impl TrainedLearner {
    pub fn choose(&self, x: &[f64]) -> usize {
        match self {
            TrainedLearner::PerBranch { models, .. } => {
                let preds: Vec<f64> = models.iter().map(|m| m.predict(x)).collect();
                argmin(&preds)
            }
            TrainedLearner::KnnVote { k, scaler, points, labels, n_branches } => {
                let q = scaler.transform(x);
                let mut votes = vec![0usize; *n_branches];
                for i in nearest(points, &q, *k) {
                    votes[labels[i]] += 1;
                }
                let max = *votes.iter().max().unwrap();
                votes.iter().position(|&v| v == max).unwrap()
            }
            TrainedLearner::Clusters { scaler, centroids, branch } => branch[closest(centroids, &scaler.transform(x))],
            TrainedLearner::Constant { branch } => *branch,
        }
    }

    /// Predicted score of every branch, for per-branch regression models.
    pub fn predicted_scores(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            TrainedLearner::PerBranch { transform, models } => {
                Some(models.iter().map(|m| transform.invert(m.predict(x))).collect())
            }
            _ => None,
        }
    }
}

/// Trains a node model from rows `x` and a per-row score for each branch
/// (`costs[i][b]`). Regression learners fit one model per branch on the
/// transformed score; classifiers learn the per-row argmin label (ties to
/// the lowest branch); cluster-best assigns each cluster its branch of lowest
/// mean score.
pub fn train_learner(
    kind: &LearnerKind,
    x: &[Vec<f64>],
    costs: &[Vec<f64>],
    transform: TargetTransform,
) -> Result<TrainedLearner, SelectorError> {
    check_data(x, costs.len())?;
    let nb = costs[0].len();
    if nb == 1 {
        return Ok(TrainedLearner::Constant { branch: 0 });
    }
    let labels: Vec<usize> = costs.iter().map(|c| argmin(c)).collect();
    match *kind {
        LearnerKind::LinearRegression { .. }
        | LearnerKind::KnnRegression { .. }
        | LearnerKind::RegressionTree { .. } => {
            let models = (0..nb)
                .map(|b| {
                    let y: Vec<f64> = costs.iter().map(|c| transform.apply(c[b])).collect();
                    fit_regressor(kind, x, &y)
                })
                .collect::<Result<_, _>>()?;
            Ok(TrainedLearner::PerBranch { transform, models })
        }
        LearnerKind::KnnClassification { k } => {
            if k == 0 || k > x.len() {
                return Err(SelectorError::KTooLarge { k, n: x.len() });
            }
            let scaler = Standardizer::fit(x);
            let points = x.iter().map(|r| scaler.transform(r)).collect();
            Ok(TrainedLearner::KnnVote { k, scaler, points, labels, n_branches: nb })
        }
        LearnerKind::ClusterBest { clusters, seed } => {
            let scaler = Standardizer::fit(x);
            let points: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
            let km = kmeans(&points, clusters, seed)?;
            let overall: Vec<f64> = (0..nb).map(|b| costs.iter().map(|c| c[b]).sum::<f64>()).collect();
            let branch = (0..km.centroids.len())
                .map(|c| {
                    let members: Vec<&Vec<f64>> =
                        costs.iter().zip(&km.assignment).filter(|(_, &a)| a == c).map(|(r, _)| r).collect();
                    if members.is_empty() {
                        return argmin(&overall);
                    }
                    let mean: Vec<f64> = (0..nb).map(|b| members.iter().map(|r| r[b]).sum::<f64>()).collect();
                    argmin(&mean)
                })
                .collect();
            Ok(TrainedLearner::Clusters { scaler, centroids: km.centroids, branch })
        }
    }
}
