//! Seeded k-means with a pluggable assignment metric.
//!
//! Centroid updates are always coordinate-wise means and the reported
//! objective is always the summed squared euclidean distance to assigned
//! centroids, whatever metric drives the assignments. With the euclidean
//! metric this is Lloyd's algorithm and the objective is non-increasing
//! across iterations; other metrics keep the same update rule by design.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::row_slice;
use crate::error::{IflError, Result};
use crate::metric::MetricKind;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Completed assign-update iterations.
    pub iterations: usize,
    /// Final value of the squared-euclidean objective.
    pub objective: f64,
    /// Objective after each centroid update, in iteration order.
    pub objective_history: Vec<f64>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Member row indices per cluster, ascending within each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Index of the centroid closest to `x` under `metric`; ties go to the
/// lowest index.
pub fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>], metric: MetricKind) -> Result<usize> {
    if centroids.is_empty() {
        return Err(IflError::invalid_parameter(
            "nearest_centroid needs at least one centroid",
        ));
    }
    let mut best = 0usize;
    let mut best_d = metric.distance(x, &centroids[0])?;
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = metric.distance(x, c)?;
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Summed squared euclidean distance from each point to its assigned
/// centroid.
pub fn objective(
    points: &Array2<f64>,
    assignments: &[usize],
    centroids: &[Vec<f64>],
) -> Result<f64> {
    if assignments.len() != points.nrows() {
        return Err(IflError::invalid_parameter(
            "one assignment per point is required",
        ));
    }
    let mut total = 0.0;
    for (i, &c) in assignments.iter().enumerate() {
        let centroid = centroids.get(c).ok_or_else(|| {
            IflError::invalid_parameter(format!("assignment {c} has no centroid"))
        })?;
        if centroid.len() != points.ncols() {
            return Err(IflError::invalid_parameter(
                "centroid dimension does not match points",
            ));
        }
        total += sq_euclidean(row_slice(points, i), centroid);
    }
    Ok(total)
}

#[inline]
fn sq_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// K-means over the rows of `points`.
///
/// `k` is clamped to the row count. Initial centroids are chosen by
/// distance-weighted seeding from the given RNG seed; assignment ties and
/// all other ties resolve to the lowest index, so the result is a pure
/// function of `(points, k, metric, seed, max_iter)`. Iteration stops when
/// assignments repeat or `max_iter` is hit. Every returned cluster is
/// non-empty: an empty cluster steals the point farthest from its own
/// centroid among clusters that can spare one.
pub fn kmeans(
    points: &Array2<f64>,
    k: usize,
    metric: MetricKind,
    seed: u64,
    max_iter: usize,
) -> Result<Clustering> {
    let s = points.nrows();
    if s == 0 {
        return Err(IflError::invalid_parameter("kmeans needs at least one row"));
    }
    if k == 0 {
        return Err(IflError::invalid_parameter("kmeans needs k >= 1"));
    }
    if max_iter == 0 {
        return Err(IflError::invalid_parameter("kmeans needs max_iter >= 1"));
    }
    for i in 0..s {
        for v in row_slice(points, i) {
            if !v.is_finite() {
                return Err(IflError::validation(format!(
                    "non-finite value in kmeans input row {i}"
                )));
            }
        }
    }
    let k = k.min(s);
    let mut centroids = seed_centroids(points, k, metric, seed);

    let mut assignments: Option<Vec<usize>> = None;
    let mut iterations = 0usize;
    let mut history = Vec::new();
    loop {
        let mut next = Vec::with_capacity(s);
        for i in 0..s {
            next.push(nearest_centroid(row_slice(points, i), &centroids, metric)?);
        }
        repair_empty_clusters(points, &mut next, &centroids, metric, k);
        if assignments.as_ref() == Some(&next) {
            break;
        }
        update_centroids(points, &next, k, &mut centroids);
        history.push(objective(points, &next, &centroids)?);
        assignments = Some(next);
        iterations += 1;
        if iterations >= max_iter {
            break;
        }
    }

    let assignments = assignments.expect("at least one iteration runs");
    let objective = *history.last().expect("history has one entry per iteration");
    Ok(Clustering {
        assignments,
        centroids,
        iterations,
        objective,
        objective_history: history,
    })
}

/// Distance-weighted seeding: first centroid uniform, each further centroid
/// drawn with probability proportional to squared distance (under `metric`)
/// to the nearest centroid chosen so far. When all weights vanish
/// (duplicates), the lowest-index unchosen row is taken.
fn seed_centroids(points: &Array2<f64>, k: usize, metric: MetricKind, seed: u64) -> Vec<Vec<f64>> {
    let s = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; s];
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);

    let first = rng.random_range(0..s);
    chosen[first] = true;
    centroids.push(row_slice(points, first).to_vec());

    let mut weight: Vec<f64> = (0..s)
        .map(|i| {
            let d = metric.distance_unchecked(row_slice(points, i), &centroids[0]);
            d * d
        })
        .collect();

    while centroids.len() < k {
        let total: f64 = weight.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weight.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    pick = Some(i);
                    break;
                }
                target -= w;
            }
            // Rounding can step past the last positive weight.
            pick.unwrap_or_else(|| {
                weight
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total > 0 implies a positive weight")
            })
        } else {
            (0..s).find(|&i| !chosen[i]).expect("k <= s leaves a row")
        };
        chosen[pick] = true;
        weight[pick] = 0.0;
        let centroid = row_slice(points, pick).to_vec();
        for (i, w) in weight.iter_mut().enumerate() {
            let d = metric.distance_unchecked(row_slice(points, i), &centroid);
            *w = w.min(d * d);
        }
        centroids.push(centroid);
    }
    centroids
}

fn update_centroids(
    points: &Array2<f64>,
    assignments: &[usize],
    k: usize,
    centroids: &mut [Vec<f64>],
) {
    let h = points.ncols();
    let mut counts = vec![0usize; k];
    for c in centroids.iter_mut() {
        c.iter_mut().for_each(|v| *v = 0.0);
        c.resize(h, 0.0);
    }
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        for (acc, v) in centroids[c].iter_mut().zip(row_slice(points, i)) {
            *acc += v;
        }
    }
    for (c, count) in centroids.iter_mut().zip(counts) {
        debug_assert!(count > 0, "empty clusters are repaired before updating");
        for v in c.iter_mut() {
            *v /= count as f64;
        }
    }
}

/// Give every empty cluster one point: the point farthest from its own
/// centroid (under `metric`) among clusters that keep >= 2 members, ties to
/// the lowest point index.
fn repair_empty_clusters(
    points: &Array2<f64>,
    assignments: &mut [usize],
    centroids: &[Vec<f64>],
    metric: MetricKind,
    k: usize,
) {
    let mut counts = vec![0usize; k];
    for &c in assignments.iter() {
        counts[c] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut donor: Option<(usize, f64)> = None;
        for (i, &c) in assignments.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = metric.distance_unchecked(row_slice(points, i), &centroids[c]);
            let better = match donor {
                None => true,
                Some((_, best)) => d > best,
            };
            if better {
                donor = Some((i, d));
            }
        }
        if let Some((i, _)) = donor {
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    /// Brute-force best 2-clustering of 4 points by squared-euclidean
    /// objective, for checking kmeans output against ground truth.
    fn best_two_cluster_objective(points: &Array2<f64>) -> f64 {
        let n = points.nrows();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    a.push(i);
                } else {
                    b.push(i);
                }
            }
            let mut total = 0.0;
            for group in [&a, &b] {
                let h = points.ncols();
                let mut mean = vec![0.0; h];
                for &i in group {
                    for (c, v) in row_slice(points, i).iter().enumerate() {
                        mean[c] += v;
                    }
                }
                mean.iter_mut().for_each(|v| *v /= group.len() as f64);
                for &i in group {
                    total += sq_euclidean(row_slice(points, i), &mean);
                }
            }
            best = best.min(total);
        }
        best
    }

    #[test]
    fn separates_two_obvious_groups() {
        // 1-D points {0, 2, 10, 12}: optimum is {0,2} | {10,12} with
        // objective (1+1) + (1+1) = 4.
        let points = arr2(&[[0.0], [2.0], [10.0], [12.0]]);
        assert_eq!(best_two_cluster_objective(&points), 4.0);
        for seed in 0..10 {
            let c = kmeans(&points, 2, MetricKind::Euclidean, seed, 100).unwrap();
            assert_eq!(c.objective, 4.0, "seed {seed}");
            assert_eq!(c.assignments[0], c.assignments[1]);
            assert_eq!(c.assignments[2], c.assignments[3]);
            assert_ne!(c.assignments[0], c.assignments[2]);
            let mut sorted: Vec<f64> = c.centroids.iter().map(|c| c[0]).collect();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted, vec![1.0, 11.0]);
        }
    }

    #[test]
    fn k_equals_one_gives_the_mean() {
        let points = arr2(&[[1.0, 0.0], [3.0, 4.0], [5.0, 2.0]]);
        let c = kmeans(&points, 1, MetricKind::CityBlock, 9, 100).unwrap();
        assert_eq!(c.centroids.len(), 1);
        assert_eq!(c.centroids[0], vec![3.0, 2.0]);
        assert_eq!(c.assignments, vec![0, 0, 0]);
    }

    #[test]
    fn k_is_clamped_to_the_row_count() {
        let points = arr2(&[[0.0], [5.0], [9.0]]);
        let c = kmeans(&points, 5, MetricKind::Euclidean, 3, 100).unwrap();
        assert_eq!(c.k(), 3);
        assert_eq!(c.objective, 0.0);
        let mut seen = c.assignments.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn duplicate_points_still_fill_all_clusters() {
        let points = arr2(&[[1.0], [1.0], [1.0], [1.0]]);
        let c = kmeans(&points, 3, MetricKind::Euclidean, 0, 100).unwrap();
        let members = c.members();
        assert_eq!(members.len(), 3);
        assert!(members.iter().all(|m| !m.is_empty()));
        assert_eq!(c.objective, 0.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let points = arr2(&[[0.0], [1.0]]);
        assert!(kmeans(&points, 0, MetricKind::Euclidean, 0, 100).is_err());
        assert!(kmeans(&points, 1, MetricKind::Euclidean, 0, 0).is_err());
        let empty = Array2::<f64>::zeros((0, 3));
        assert!(kmeans(&empty, 1, MetricKind::Euclidean, 0, 100).is_err());
        let bad = arr2(&[[f64::NAN], [1.0]]);
        assert!(kmeans(&bad, 1, MetricKind::Euclidean, 0, 100).is_err());
    }

    #[test]
    fn nearest_centroid_breaks_ties_low() {
        let centroids = vec![vec![0.0], vec![2.0], vec![0.0]];
        // Equidistant between centroids 0 and 1; centroid 2 duplicates 0.
        assert_eq!(
            nearest_centroid(&[1.0], &centroids, MetricKind::Euclidean).unwrap(),
            0
        );
        assert!(nearest_centroid(&[1.0], &[], MetricKind::Euclidean).is_err());
    }

    #[test]
    fn objective_checks_shapes() {
        let points = arr2(&[[0.0], [4.0]]);
        let cents = vec![vec![1.0]];
        assert_eq!(objective(&points, &[0, 0], &cents).unwrap(), 1.0 + 9.0);
        assert!(objective(&points, &[0], &cents).is_err());
        assert!(objective(&points, &[0, 1], &cents).is_err());
    }

    #[test]
    fn same_seed_same_result_different_seed_may_differ() {
        let points = arr2(&[
            [0.0, 0.1],
            [0.2, 0.0],
            [5.0, 5.2],
            [5.1, 4.9],
            [9.0, 0.0],
            [9.2, 0.3],
        ]);
        let a = kmeans(&points, 3, MetricKind::Euclidean, 11, 100).unwrap();
        let b = kmeans(&points, 3, MetricKind::Euclidean, 11, 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_metric_clusters_by_direction() {
        let points = arr2(&[[1.0, 0.0], [2.0, 0.1], [0.0, 1.0], [0.1, 2.0]]);
        let c = kmeans(&points, 2, MetricKind::Cosine, 4, 100).unwrap();
        assert_eq!(c.assignments[0], c.assignments[1]);
        assert_eq!(c.assignments[2], c.assignments[3]);
        assert_ne!(c.assignments[0], c.assignments[2]);
    }

    proptest! {
        #[test]
        fn objective_history_is_monotone_under_euclidean(
            rows in proptest::collection::vec(
                proptest::collection::vec(-10.0f64..10.0, 3), 3..12),
            k in 1usize..4,
            seed in 0u64..500,
        ) {
            let mut points = Array2::zeros((rows.len(), 3));
            for (i, r) in rows.iter().enumerate() {
                for (j, v) in r.iter().enumerate() {
                    points[[i, j]] = *v;
                }
            }
            let c = kmeans(&points, k, MetricKind::Euclidean, seed, 100).unwrap();
            for pair in c.objective_history.windows(2) {
                prop_assert!(
                    pair[1] <= pair[0] + 1e-9,
                    "objective rose: {} -> {}", pair[0], pair[1]
                );
            }
            // No empty clusters, assignments in range.
            let members = c.members();
            prop_assert!(members.iter().all(|m| !m.is_empty()));
            prop_assert!(c.assignments.iter().all(|&a| a < c.k()));
        }
    }
}
