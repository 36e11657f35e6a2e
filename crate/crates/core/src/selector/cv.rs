use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::SelectorSpec;
use super::{ApproachId, RunMatrix, SelectorError};

/// Splits instances into `folds` test sets that preserve the label
/// distribution: each label group is shuffled, groups are concatenated in
/// label order and dealt round-robin. Fold sizes differ by at most one, and
/// so do per-fold counts of any label.
pub fn stratified_folds(labels: &[String], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, SelectorError> {
    if folds == 0 || labels.len() < folds {
        return Err(SelectorError::TooFewInstances { n: labels.len(), folds });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut k = 0;
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            out[k % folds].push(i);
            k += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_test: usize,
    pub par10: f64,
    pub n_solved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub instance: String,
    pub fold: usize,
    pub approach: ApproachId,
    pub score: f64,
    pub solved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    /// Mean PAR10 over all test predictions.
    pub par10: f64,
    pub n_solved: usize,
    /// Decisions in matrix instance order.
    pub decisions: Vec<Decision>,
}

impl CvReport {
    pub fn write_decisions_csv<W: Write>(&self, sink: W) -> Result<(), SelectorError> {
        let mut w = csv::Writer::from_writer(sink);
        for d in &self.decisions {
            w.serialize(d)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains on all but one fold and predicts the held-out fold, for every fold.
pub fn cross_validate(
    matrix: &RunMatrix,
    spec: &SelectorSpec,
    folds: usize,
    seed: u64,
) -> Result<CvReport, SelectorError> {
    let labels: Vec<String> = matrix.best_labels().iter().map(ToString::to_string).collect();
    let test_sets = stratified_folds(&labels, folds, seed)?;
    let n = matrix.instances().len();

    let per_fold: Vec<Result<Vec<(usize, usize)>, SelectorError>> = test_sets
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let selector = spec.train(&matrix.select_instances(&train))?;
            test.iter()
                .map(|&i| {
                    let id = &matrix.instances()[i];
                    let choice = selector.select(&matrix.feature_lookup(id)).map_err(|e| match e {
                        SelectorError::MissingFeatures { schema, .. } => {
                            SelectorError::MissingFeatures { instance: id.clone(), schema }
                        }
                        other => other,
                    })?;
                    let a = matrix
                        .approach_index(&choice)
                        .ok_or_else(|| SelectorError::UnknownApproach(choice.to_string()))?;
                    Ok((i, a))
                })
                .collect()
        })
        .collect();

    let mut decisions: Vec<Option<Decision>> = vec![None; n];
    let mut fold_results = Vec::with_capacity(folds);
    for (fold, res) in per_fold.into_iter().enumerate() {
        let picks = res?;
        let mut total = 0.0;
        let mut solved = 0;
        for &(i, a) in &picks {
            let r = matrix.record(i, a);
            total += r.score();
            solved += usize::from(r.solved());
            decisions[i] = Some(Decision {
                instance: matrix.instances()[i].clone(),
                fold,
                approach: matrix.approaches()[a].clone(),
                score: r.score(),
                solved: r.solved(),
            });
        }
        fold_results.push(FoldResult {
            fold,
            n_test: picks.len(),
            par10: total / picks.len() as f64,
            n_solved: solved,
        });
    }
    let decisions: Vec<Decision> = decisions.into_iter().map(|d| d.expect("every instance is tested once")).collect();
    let par10 = decisions.iter().map(|d| d.score).sum::<f64>() / n as f64;
    let n_solved = decisions.iter().filter(|d| d.solved).count();
    Ok(CvReport { folds: fold_results, par10, n_solved, decisions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_and_stratify() {
        let labels: Vec<String> = (0..100).map(|i| ["a", "b", "c"][(i * 7) % 3].to_string()).collect();
        let folds = stratified_folds(&labels, 10, 3).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.len(), 10);
            for l in ["a", "b", "c"] {
                let global = labels.iter().filter(|x| *x == l).count() as f64 / 10.0;
                let here = f.iter().filter(|&&i| labels[i] == l).count() as f64;
                assert!((here - global).abs() <= 1.0, "{l}: {here} vs {global}");
            }
        }
    }

    #[test]
    fn too_few_instances() {
        let labels = vec!["a".to_string(); 3];
        assert!(matches!(stratified_folds(&labels, 10, 0), Err(SelectorError::TooFewInstances { n: 3, folds: 10 })));
    }
}
