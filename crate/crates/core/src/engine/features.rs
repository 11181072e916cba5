//! Layer 3: turning a trial outcome into a feature vector.

use ndarray::Array2;

use crate::dataset::row_slice;
use crate::error::{IflError, Result};
use crate::metric::scalar_distance;

use super::model::ClassModel;
use super::trial::TrialOutcome;
use super::{FeatureId, IflConfig};

/// Measure the configured displacements for one trial.
///
/// The result always has [`IflConfig::feature_len`] entries: per-rank
/// blocks are exactly `cfg.k` wide, and ranks beyond the actual cluster
/// count (clamped k, or a structure with fewer clusters) contribute 0.
/// Rank alignment is positional: rank `a` of the original structure is
/// compared with rank `a` of the updated one, both size-sorted.
pub fn compute_error_features(
    model: &ClassModel,
    outcome: &TrialOutcome,
    group_rows: &Array2<f64>,
    x: &[f64],
    cfg: &IflConfig,
) -> Result<Vec<f64>> {
    if model.class_id != outcome.class_id {
        return Err(IflError::invalid_parameter(format!(
            "model is for class {}, outcome for class {}",
            model.class_id, outcome.class_id
        )));
    }
    let metric = cfg.metric_l3;
    let k = cfg.k;
    let mut out = Vec::with_capacity(cfg.feature_len());
    let mut padded = false;

    for feature in &cfg.features {
        match feature {
            FeatureId::NearestMemberDist => {
                let members = outcome.receiving_member_rows(model)?;
                let mut best: Option<f64> = None;
                for &row in members {
                    let d = metric.distance(x, row_slice(group_rows, row))?;
                    if best.is_none_or(|b| d < b) {
                        best = Some(d);
                    }
                }
                out.push(best.unwrap_or(0.0));
            }
            FeatureId::UpdatedMeanDist => {
                out.push(metric.distance(x, &outcome.updated_mean)?);
            }
            FeatureId::CentroidDists => {
                for a in 0..k {
                    match outcome.updated_clusters.get(a) {
                        Some(c) => out.push(metric.distance(x, &c.centroid)?),
                        None => {
                            padded = true;
                            out.push(0.0);
                        }
                    }
                }
            }
            FeatureId::ClusterMeanDists => {
                for a in 0..k {
                    match outcome.updated_clusters.get(a) {
                        Some(c) => out.push(metric.distance(x, &c.mean)?),
                        None => {
                            padded = true;
                            out.push(0.0);
                        }
                    }
                }
            }
            FeatureId::GroupMeanShift => {
                out.push(metric.distance(&model.group_mean, &outcome.updated_mean)?);
            }
            FeatureId::CentroidShifts => {
                for a in 0..k {
                    match (model.clusters.get(a), outcome.updated_clusters.get(a)) {
                        (Some(orig), Some(upd)) => {
                            out.push(metric.distance(&orig.centroid, &upd.centroid)?)
                        }
                        _ => {
                            padded = true;
                            out.push(0.0);
                        }
                    }
                }
            }
            FeatureId::ConfidenceShifts => {
                for a in 0..k {
                    match (model.clusters.get(a), outcome.updated_clusters.get(a)) {
                        (Some(orig), Some(upd)) => {
                            out.push(scalar_distance(orig.confidence, upd.confidence))
                        }
                        _ => {
                            padded = true;
                            out.push(0.0);
                        }
                    }
                }
            }
            FeatureId::ClusterMeanShifts => {
                for a in 0..k {
                    match (model.clusters.get(a), outcome.updated_clusters.get(a)) {
                        (Some(orig), Some(upd)) => {
                            out.push(metric.distance(&orig.mean, &upd.mean)?)
                        }
                        _ => {
                            padded = true;
                            out.push(0.0);
                        }
                    }
                }
            }
        }
    }
    if padded {
        log::debug!(
            "class {}: fewer than k={k} clusters; per-rank blocks zero-padded",
            model.class_id
        );
    }
    debug_assert_eq!(out.len(), cfg.feature_len());
    Ok(out)
}

/// Concatenate per-class vectors, scaling class `i` by `multipliers[i]`.
pub fn embed_class(per_class: &[Vec<f64>], multipliers: &[f64]) -> Result<Vec<f64>> {
    if per_class.len() != multipliers.len() {
        return Err(IflError::invalid_parameter(format!(
            "{} class vectors but {} multipliers",
            per_class.len(),
            multipliers.len()
        )));
    }
    if let Some(first) = per_class.first() {
        if per_class.iter().any(|v| v.len() != first.len()) {
            return Err(IflError::invalid_parameter(
                "class vectors must all have equal length",
            ));
        }
    }
    let mut out = Vec::with_capacity(per_class.iter().map(Vec::len).sum());
    for (vec, mult) in per_class.iter().zip(multipliers) {
        for v in vec {
            out.push(mult * v);
        }
    }
    Ok(out)
}

/// Column names for the learned features, in emission order. Class and rank
/// are 1-based: `ifl_c<class>_<feature>` for scalars,
/// `ifl_c<class>_<feature>_<rank>` for per-rank blocks.
pub fn augmented_feature_names(m: usize, cfg: &IflConfig) -> Vec<String> {
    let mut names = Vec::with_capacity(m * cfg.feature_len());
    for class in 1..=m {
        for feature in &cfg.features {
            if feature.per_rank() {
                for rank in 1..=cfg.k {
                    names.push(format!("ifl_c{class}_{feature}_{rank}"));
                }
            } else {
                names.push(format!("ifl_c{class}_{feature}"));
            }
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::super::model::build_class_model;
    use super::super::trial::trial_strategy1;
    use super::super::Strategy;
    use super::*;
    use ndarray::arr2;

    /// 1-D fixture with known structure: cluster A = {0..4} (mean 2),
    /// cluster B = {100, 101, 102} (mean 101); s = 8.
    fn fixture() -> (Array2<f64>, ClassModel, IflConfig) {
        let rows = arr2(&[[0.0], [1.0], [2.0], [3.0], [4.0], [100.0], [101.0], [102.0]]);
        let cfg = IflConfig::new(2, 2);
        let model = build_class_model(&rows, 0, &cfg, 7).unwrap();
        assert_eq!(model.clusters[0].members, vec![0, 1, 2, 3, 4]);
        (rows, model, cfg)
    }

    #[test]
    fn full_feature_vector_matches_hand_computation() {
        let (rows, model, cfg) = fixture();
        let x = [6.0];
        let outcome = trial_strategy1(&model, &rows, &x, &cfg).unwrap();
        let got = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();

        // Insertion lands in cluster A (centroid 2 vs 101). Updated mean of
        // A = (5*2 + 6)/6 = 8/3; updated sizes 6 and 3, order unchanged.
        let mean_a: f64 = (5.0 * 2.0 + 6.0) / 6.0;
        let expected = vec![
            // 1.0: nearest original member of A to x=6 is 4.
            2.0,
            // 1.1: |6 - 8/3|
            6.0 - mean_a,
            // 1.2: |6 - 8/3|, |6 - 101|
            6.0 - mean_a,
            95.0,
            // 1.3: same as 1.2 (centroid == mean after the patch; B untouched)
            6.0 - mean_a,
            95.0,
            // 2.1: |group_mean - mu'|; group mean = 313/8
            (313.0 / 8.0 - mean_a).abs(),
            // 2.2: |2 - 8/3|, |101 - 101|
            mean_a - 2.0,
            0.0,
            // 2.3: |5/8 - 6/9|, |3/8 - 3/9|
            scalar_distance(5.0 / 8.0, 6.0 / 9.0),
            scalar_distance(3.0 / 8.0, 3.0 / 9.0),
            // 2.4: same as 2.2 here
            mean_a - 2.0,
            0.0,
        ];
        assert_eq!(got.len(), cfg.feature_len());
        for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
            assert!(
                (g - e).abs() < 1e-12,
                "feature slot {i}: got {g}, expected {e}"
            );
        }
    }

    #[test]
    fn confidence_shift_block_alone() {
        let (rows, model, cfg) = fixture();
        let cfg = cfg.with_features(vec![FeatureId::ConfidenceShifts]);
        let x = [2.5];
        let outcome = trial_strategy1(&model, &rows, &x, &cfg).unwrap();
        let got = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();
        // 5/8 -> 6/9 is a shift of 1/24 ~ 0.0417; 3/8 -> 3/9 is 1/24 too.
        assert_eq!(got.len(), 2);
        assert!((got[0] - 1.0 / 24.0).abs() < 1e-12);
        assert!((got[1] - 1.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn per_rank_blocks_pad_with_zeros_when_clusters_run_out() {
        // Group of 2 rows with k = 3: only 2 clusters can exist.
        let rows = arr2(&[[0.0], [10.0]]);
        let cfg = IflConfig::new(2, 3)
            .with_features(vec![FeatureId::CentroidDists, FeatureId::CentroidShifts]);
        let model = build_class_model(&rows, 0, &cfg, 1).unwrap();
        assert_eq!(model.clusters.len(), 2);
        let x = [1.0];
        let outcome = trial_strategy1(&model, &rows, &x, &cfg).unwrap();
        let got = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();
        assert_eq!(got.len(), 6);
        assert_eq!(got[2], 0.0, "1.2 rank 3 is padding");
        assert_eq!(got[5], 0.0, "2.2 rank 3 is padding");
        // Real ranks are not padding: the receiving centroid moved.
        assert!(got[0] > 0.0 || got[1] > 0.0);
    }

    #[test]
    fn lone_insertion_makes_nearest_member_zero() {
        // Singleton group: the instance lands in a cluster where it is the
        // only... the cluster has one original member. Use strategy 2 with
        // k big enough that the instance gets its own cluster.
        let rows = arr2(&[[0.0], [100.0]]);
        let mut cfg = IflConfig::new(2, 3).with_features(vec![FeatureId::NearestMemberDist]);
        cfg.strategy = Strategy::Recluster;
        let model = build_class_model(&rows, 0, &cfg, 5).unwrap();
        let x = [50.0];
        let outcome = super::super::trial::trial_strategy2(&rows, &x, 0, &cfg, 9).unwrap();
        let recv = &outcome.updated_clusters[outcome.closest_index];
        assert_eq!(recv.size, 1, "x should sit alone among 3 singletons");
        let got = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();
        assert_eq!(got, vec![0.0]);
    }

    #[test]
    fn metric_l3_is_used_for_distances() {
        let (rows, model, mut cfg) = fixture();
        cfg = cfg.with_features(vec![FeatureId::UpdatedMeanDist]);
        cfg.metric_l3 = crate::metric::MetricKind::CityBlock;
        let x = [6.0];
        let outcome = trial_strategy1(&model, &rows, &x, &cfg).unwrap();
        let cb = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();
        cfg.metric_l3 = crate::metric::MetricKind::Jaccard;
        let ja = compute_error_features(&model, &outcome, &rows, &x, &cfg).unwrap();
        assert!((cb[0] - (6.0 - 8.0 / 3.0)).abs() < 1e-12);
        assert_eq!(ja[0], 1.0, "jaccard sees one differing supported coord");
    }

    #[test]
    fn embed_class_scales_and_concatenates() {
        let per_class = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let out = embed_class(&per_class, &[1.0, 10.0, 20.0]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 30.0, 40.0, 100.0, 120.0]);
        assert!(embed_class(&per_class, &[1.0, 10.0]).is_err());
        let ragged = vec![vec![1.0], vec![2.0, 3.0]];
        assert!(embed_class(&ragged, &[1.0, 10.0]).is_err());
    }

    #[test]
    fn column_names_follow_the_contract() {
        let cfg = IflConfig::new(2, 2)
            .with_features(vec![FeatureId::NearestMemberDist, FeatureId::CentroidDists]);
        let names = augmented_feature_names(2, &cfg);
        assert_eq!(
            names,
            vec![
                "ifl_c1_1.0",
                "ifl_c1_1.2_1",
                "ifl_c1_1.2_2",
                "ifl_c2_1.0",
                "ifl_c2_1.2_1",
                "ifl_c2_1.2_2",
            ]
        );
        assert_eq!(names.len(), 2 * cfg.feature_len());
    }
}
