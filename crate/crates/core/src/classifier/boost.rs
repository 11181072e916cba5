//! Multi-class adaptive boosting of shallow trees (the SAMME weight
//! scheme): each round fits a weighted tree, reweights toward its
//! mistakes, and votes trees by quality.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::row_slice;
use crate::error::{IflError, Result};

use super::tree::{argmax, DecisionTree};

/// Weighted error floor: a zero-error learner would get infinite vote
/// weight, so its error is clamped here (and boosting stops, since the
/// sample weights cannot move any further).
const ERR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTree {
    pub tree: DecisionTree,
    /// Vote weight `alpha = ln((1 - err) / err) + ln(m - 1)`.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    trees: Vec<BoostedTree>,
    n_classes: usize,
    n_features: usize,
    /// Training class frequencies; the prediction when no round produced a
    /// usable learner.
    priors: Vec<f64>,
}

/// Boost `n_learners` trees of depth `max_depth`.
///
/// A round whose weighted error reaches `1 - 1/m` (no better than chance)
/// is rejected and boosting stops. A perfect round is accepted with clamped
/// error and stops boosting. `y` must contain at least two distinct
/// classes.
pub fn fit_boosted(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    n_learners: usize,
    max_depth: usize,
    min_leaf: usize,
) -> Result<BoostedEnsemble> {
    let n = x.nrows();
    if n_learners < 1 {
        return Err(IflError::invalid_parameter("n_learners must be >= 1"));
    }
    if y.len() != n || n == 0 {
        return Err(IflError::invalid_parameter(
            "one label per sample is required and samples must be non-empty",
        ));
    }
    {
        let first = y[0];
        if y.iter().all(|&c| c == first) {
            return Err(IflError::validation(
                "boosting needs at least two distinct classes in y",
            ));
        }
    }

    let m = n_classes as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();

    for _round in 0..n_learners {
        let tree = DecisionTree::fit_weighted(x, y, n_classes, max_depth, min_leaf, Some(&w))?;
        let preds = tree.predict(x)?;
        let err: f64 = preds
            .iter()
            .zip(y)
            .zip(&w)
            .filter(|((p, t), _)| p != t)
            .map(|(_, wi)| wi)
            .sum();

        if err >= 1.0 - 1.0 / m {
            // No better than chance: reject the learner and stop.
            break;
        }
        let clamped = err.max(ERR_FLOOR);
        let alpha = ((1.0 - clamped) / clamped).ln() + (m - 1.0).ln();
        trees.push(BoostedTree { tree, alpha });
        if err <= 0.0 {
            break;
        }

        for (wi, (p, t)) in w.iter_mut().zip(preds.iter().zip(y)) {
            if p != t {
                *wi *= alpha.exp();
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(IflError::validation(
                "sample weights degenerated during boosting",
            ));
        }
        for wi in &mut w {
            *wi /= total;
        }
    }

    let mut priors = vec![0.0; n_classes];
    for &c in y {
        priors[c] += 1.0;
    }
    for p in &mut priors {
        *p /= n as f64;
    }
    if trees.is_empty() {
        log::warn!("boosting accepted no learners; falling back to class priors");
    }

    Ok(BoostedEnsemble {
        trees,
        n_classes,
        n_features: x.ncols(),
        priors,
    })
}

impl BoostedEnsemble {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn votes(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; self.n_classes];
        if self.trees.is_empty() {
            scores.copy_from_slice(&self.priors);
            return Ok(scores);
        }
        for bt in &self.trees {
            let dist = bt.tree.predict_row(row)?;
            scores[argmax(dist)] += bt.alpha;
        }
        Ok(scores)
    }

    /// Weighted-vote argmax per row, ties to the lowest class id.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .map(|i| Ok(argmax(&self.votes(row_slice(x, i))?)))
            .collect()
    }

    /// Vote shares per class (normalized to sum 1 per row).
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for i in 0..x.nrows() {
            let scores = self.votes(row_slice(x, i))?;
            let total: f64 = scores.iter().sum();
            for (c, v) in scores.iter().enumerate() {
                out[[i, c]] = if total > 0.0 {
                    v / total
                } else {
                    self.priors[c]
                };
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn xor_data() -> (Array2<f64>, Vec<usize>) {
        let x = arr2(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        let y = vec![0, 1, 1, 0];
        (x, y)
    }

    fn accuracy(preds: &[usize], y: &[usize]) -> f64 {
        preds.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64
    }

    #[test]
    fn separable_data_is_learned_by_one_accepted_round() {
        let x = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
        let y = vec![0, 0, 1, 1];
        let ens = fit_boosted(&x, &y, 2, 25, 1, 1).unwrap();
        // The first tree is perfect, so boosting stops after accepting it.
        assert_eq!(ens.n_trees(), 1);
        assert_eq!(ens.predict(&x).unwrap(), y);
    }

    #[test]
    fn single_stump_cannot_solve_xor_but_depth_two_trees_can() {
        let (x, y) = xor_data();
        // Depth-1 learners: the best stump gets half the points. For two
        // classes a chance-level round is rejected outright, so the
        // ensemble stays at prior-level performance.
        let stumps = fit_boosted(&x, &y, 2, 50, 1, 1).unwrap();
        let acc = accuracy(&stumps.predict(&x).unwrap(), &y);
        assert!(
            acc <= 0.75,
            "stump ensembles cannot represent xor, got accuracy {acc}"
        );
        // Depth-2 learners represent xor exactly.
        let deep = fit_boosted(&x, &y, 2, 50, 2, 1).unwrap();
        let acc = accuracy(&deep.predict(&x).unwrap(), &y);
        assert!(acc > 0.9, "depth-2 boosting should fit xor, got {acc}");
    }

    #[test]
    fn one_learner_degenerates_to_its_tree() {
        let x = arr2(&[[0.0], [1.0], [5.0], [10.0], [11.0], [6.0]]);
        let y = vec![0, 0, 1, 1, 1, 0];
        let ens = fit_boosted(&x, &y, 2, 1, 3, 1).unwrap();
        assert_eq!(ens.n_trees(), 1);
        let tree = DecisionTree::fit(&x, &y, 2, 3, 1).unwrap();
        assert_eq!(
            ens.predict(&x).unwrap(),
            tree.predict(&x).unwrap(),
            "a single accepted round must predict like the bare tree"
        );
    }

    #[test]
    fn three_class_boosting_uses_the_multiclass_alpha() {
        // Three 1-D clumps; depth-1 trees can only carve two regions, so
        // several rounds are needed and the multi-class offset ln(m-1)
        // keeps mediocre-but-useful learners in play.
        let x = arr2(&[
            [0.0],
            [1.0],
            [2.0],
            [10.0],
            [11.0],
            [12.0],
            [20.0],
            [21.0],
            [22.0],
        ]);
        let y = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let ens = fit_boosted(&x, &y, 3, 40, 1, 1).unwrap();
        assert!(ens.n_trees() > 1);
        assert_eq!(ens.predict(&x).unwrap(), y);
        let proba = ens.predict_proba(&x).unwrap();
        for i in 0..x.nrows() {
            let row_sum: f64 = (0..3).map(|c| proba[[i, c]]).sum();
            assert!((row_sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let x = arr2(&[[0.0], [1.0]]);
        let err = fit_boosted(&x, &[1, 1], 2, 5, 1, 1).unwrap_err();
        assert!(matches!(err, IflError::Validation(_)));
    }

    #[test]
    fn boosting_is_deterministic() {
        let x = arr2(&[
            [0.1, 1.0],
            [0.9, 0.2],
            [0.4, 0.6],
            [1.2, 0.3],
            [0.3, 1.4],
            [1.1, 1.2],
        ]);
        let y = vec![0, 1, 0, 1, 0, 1];
        let a = fit_boosted(&x, &y, 2, 10, 2, 1).unwrap();
        let b = fit_boosted(&x, &y, 2, 10, 2, 1).unwrap();
        assert_eq!(a, b);
    }
}
