//! Brute-force k-nearest-neighbor voting with a configurable metric.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::row_slice;
use crate::error::{IflError, Result};
use crate::metric::MetricKind;

use super::tree::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    train: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
    metric: MetricKind,
    n_classes: usize,
}

/// Store the training data; all work happens at prediction time.
pub fn fit_knn(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    k: usize,
    metric: MetricKind,
) -> Result<KnnModel> {
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(IflError::invalid_parameter(
            "knn needs at least one sample and one feature",
        ));
    }
    if y.len() != n {
        return Err(IflError::invalid_parameter(
            "one label per sample is required",
        ));
    }
    if n_classes < 2 {
        return Err(IflError::invalid_parameter("n_classes must be >= 2"));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(IflError::invalid_parameter(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if k < 1 {
        return Err(IflError::invalid_parameter("neighbor count must be >= 1"));
    }
    Ok(KnnModel {
        train: x.clone(),
        labels: y.to_vec(),
        k,
        metric,
        n_classes,
    })
}

impl KnnModel {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.train.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Vote counts over the `min(k, n)` nearest training rows. Neighbor
    /// order is by (distance, training index), so ties are deterministic.
    fn votes(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.train.ncols() {
            return Err(IflError::invalid_parameter(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.train.ncols()
            )));
        }
        let n = self.train.nrows();
        let mut dist: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                (
                    self.metric
                        .distance_unchecked(row, row_slice(&self.train, i)),
                    i,
                )
            })
            .collect();
        let k = self.k.min(n);
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0.0; self.n_classes];
        for &(_, i) in &dist[..k] {
            votes[self.labels[i]] += 1.0;
        }
        Ok(votes)
    }

    /// Majority vote per row, vote ties to the lowest class id.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .map(|i| Ok(argmax(&self.votes(row_slice(x, i))?)))
            .collect()
    }

    /// Neighbor vote shares.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let k = self.k.min(self.train.nrows()) as f64;
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for i in 0..x.nrows() {
            let votes = self.votes(row_slice(x, i))?;
            for (c, v) in votes.iter().enumerate() {
                out[[i, c]] = v / k;
            }
        }
        Ok(out)
    }
}
