//! Layer 1: the per-class cluster structure.

use std::cmp::Reverse;

use ndarray::Array2;

use crate::cluster::kmeans;
use crate::dataset::row_slice;
use crate::error::{IflError, Result};

use super::IflConfig;

/// One cluster of a class structure, in size-sorted position.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    /// Row indices into the class group matrix, ascending.
    pub members: Vec<usize>,
    /// The k-means centroid.
    pub centroid: Vec<f64>,
    /// Coordinate-wise member mean. Coincides with the centroid at
    /// convergence; kept separate because the iteration cap can stop the
    /// clustering early.
    pub mean: Vec<f64>,
    /// Member share of the group: `members.len() / s`.
    pub confidence: f64,
    /// Cluster id in the underlying k-means result; stable tie-break for
    /// the size sort.
    pub origin: usize,
}

impl ClusterSummary {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// The clustered structure of one class group.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub class_id: usize,
    /// Group size `s` (rows of the group matrix).
    pub group_size: usize,
    /// Coordinate-wise mean of the whole group.
    pub group_mean: Vec<f64>,
    /// Clusters sorted by descending size, ties by ascending `origin`.
    pub clusters: Vec<ClusterSummary>,
}

/// Coordinate-wise mean of the given rows, accumulated row by row in the
/// order given. The summation order is part of the determinism contract.
pub fn mean_of_rows(matrix: &Array2<f64>, rows: &[usize]) -> Vec<f64> {
    let h = matrix.ncols();
    let mut acc = vec![0.0; h];
    for &i in rows {
        for (a, v) in acc.iter_mut().zip(row_slice(matrix, i)) {
            *a += v;
        }
    }
    let count = rows.len() as f64;
    for a in &mut acc {
        *a /= count;
    }
    acc
}

/// Build the layer-1 structure for one class group: k-means with
/// `min(cfg.k, s)` clusters under `cfg.metric_l1`, summarized and sorted by
/// descending size (ties toward the lower original cluster id).
pub fn build_class_model(
    group_rows: &Array2<f64>,
    class_id: usize,
    cfg: &IflConfig,
    seed: u64,
) -> Result<ClassModel> {
    let s = group_rows.nrows();
    if s == 0 {
        return Err(IflError::validation(format!(
            "class {class_id} has no rows to cluster"
        )));
    }
    let clustering = kmeans(group_rows, cfg.k, cfg.metric_l1, seed, cfg.kmeans_max_iter)?;
    let mut clusters: Vec<ClusterSummary> = clustering
        .members()
        .into_iter()
        .enumerate()
        .map(|(origin, members)| {
            let mean = mean_of_rows(group_rows, &members);
            let confidence = members.len() as f64 / s as f64;
            ClusterSummary {
                mean,
                centroid: clustering.centroids[origin].clone(),
                confidence,
                members,
                origin,
            }
        })
        .collect();
    clusters.sort_by_key(|c| (Reverse(c.size()), c.origin));

    let all_rows: Vec<usize> = (0..s).collect();
    Ok(ClassModel {
        class_id,
        group_size: s,
        group_mean: mean_of_rows(group_rows, &all_rows),
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricKind;
    use ndarray::arr2;

    fn cfg(k: usize) -> IflConfig {
        IflConfig::new(2, k)
    }

    #[test]
    fn eight_point_model_matches_hand_computation() {
        // Two tight groups of unequal size on a line: sizes 5 and 3, so the
        // five-point cluster must sort first.
        let rows = arr2(&[[0.0], [1.0], [2.0], [3.0], [4.0], [100.0], [101.0], [102.0]]);
        let model = build_class_model(&rows, 0, &cfg(2), 7).unwrap();
        assert_eq!(model.group_size, 8);
        assert_eq!(model.clusters.len(), 2);
        assert_eq!(model.clusters[0].members, vec![0, 1, 2, 3, 4]);
        assert_eq!(model.clusters[0].mean, vec![2.0]);
        assert_eq!(model.clusters[0].centroid, vec![2.0]);
        assert_eq!(model.clusters[0].confidence, 5.0 / 8.0);
        assert_eq!(model.clusters[1].members, vec![5, 6, 7]);
        assert_eq!(model.clusters[1].mean, vec![101.0]);
        assert_eq!(model.clusters[1].confidence, 3.0 / 8.0);
        let expected_group_mean = (0.0 + 1.0 + 2.0 + 3.0 + 4.0 + 100.0 + 101.0 + 102.0) / 8.0;
        assert_eq!(model.group_mean, vec![expected_group_mean]);
    }

    #[test]
    fn single_row_group_collapses_to_one_cluster() {
        let rows = arr2(&[[3.0, 4.0]]);
        let model = build_class_model(&rows, 1, &cfg(5), 0).unwrap();
        assert_eq!(model.clusters.len(), 1);
        assert_eq!(model.clusters[0].members, vec![0]);
        assert_eq!(model.clusters[0].confidence, 1.0);
        assert_eq!(model.clusters[0].mean, vec![3.0, 4.0]);
        assert_eq!(model.group_mean, vec![3.0, 4.0]);
    }

    #[test]
    fn confidences_sum_to_one_and_sizes_descend() {
        let rows = arr2(&[
            [0.0, 0.0],
            [0.1, 0.0],
            [0.2, 0.1],
            [5.0, 5.0],
            [5.1, 5.2],
            [9.0, 0.0],
        ]);
        let model = build_class_model(&rows, 0, &cfg(3), 13).unwrap();
        let total: f64 = model.clusters.iter().map(|c| c.confidence).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for pair in model.clusters.windows(2) {
            assert!(pair[0].size() >= pair[1].size());
        }
        let mut members: Vec<usize> = model
            .clusters
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect();
        members.sort_unstable();
        assert_eq!(members, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn size_ties_break_toward_lower_origin() {
        // Four points, two clusters of two; whatever the kmeans labels, the
        // summary order must follow ascending origin on the tie.
        let rows = arr2(&[[0.0], [1.0], [10.0], [11.0]]);
        let model = build_class_model(&rows, 0, &cfg(2), 3).unwrap();
        assert_eq!(model.clusters[0].size(), model.clusters[1].size());
        assert!(model.clusters[0].origin < model.clusters[1].origin);
    }

    #[test]
    fn metric_l1_drives_the_clustering() {
        // Direction-separated points that euclidean would split by length.
        let rows = arr2(&[[1.0, 0.0], [10.0, 0.1], [0.0, 1.0], [0.1, 12.0]]);
        let mut with_cosine = cfg(2);
        with_cosine.metric_l1 = MetricKind::Cosine;
        let model = build_class_model(&rows, 0, &with_cosine, 5).unwrap();
        let find = |i: usize| {
            model
                .clusters
                .iter()
                .position(|c| c.members.contains(&i))
                .unwrap()
        };
        assert_eq!(find(0), find(1));
        assert_eq!(find(2), find(3));
        assert_ne!(find(0), find(2));
    }

    #[test]
    fn empty_group_is_an_error() {
        let rows = Array2::<f64>::zeros((0, 2));
        assert!(build_class_model(&rows, 0, &cfg(2), 0).is_err());
    }
}
