//! Layer 2: trial insertion of one instance into a class structure.

use std::cmp::Reverse;

use ndarray::Array2;

use crate::cluster::kmeans;
use crate::error::{IflError, Result};

use super::model::{mean_of_rows, ClassModel};
use super::{IflConfig, MuScope, Strategy};

/// Post-insertion view of one cluster. Deliberately carries no membership
/// list: under strategy 1 only the receiving cluster's membership changes
/// (it is recoverable from the model), and copying every list per trial
/// would make a trial cost grow with the group size.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatedCluster {
    pub size: usize,
    pub centroid: Vec<f64>,
    pub mean: Vec<f64>,
    /// Re-based on `s + 1`.
    pub confidence: f64,
    /// Identity tie-break, consistent with the model's `origin`.
    pub origin: usize,
}

/// Where the receiving cluster's pre-insertion members live.
#[derive(Debug, Clone, PartialEq)]
enum Receiving {
    /// Strategy 1: index into `model.clusters`.
    FromModel(usize),
    /// Strategy 2: fresh membership from re-clustering, the inserted row
    /// already excluded. Row ids into the group matrix.
    Owned(Vec<usize>),
}

/// Result of inserting one instance into one class structure.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub class_id: usize,
    pub strategy: Strategy,
    /// The updated mean `mu'` (scope per [`IflConfig::mu_scope`]).
    pub updated_mean: Vec<f64>,
    /// Clusters after insertion, re-sorted by descending size with ties
    /// toward the lower origin.
    pub updated_clusters: Vec<UpdatedCluster>,
    /// Position in `updated_clusters` of the cluster holding the instance.
    pub closest_index: usize,
    /// The instance's local row id inside the updated group (= group size).
    pub inserted_local_index: usize,
    receiving: Receiving,
}

impl TrialOutcome {
    /// Row ids (into the class group matrix) of the receiving cluster's
    /// members other than the inserted instance. Empty when the instance
    /// sits alone. `model` must be the structure the trial ran against.
    pub fn receiving_member_rows<'a>(&'a self, model: &'a ClassModel) -> Result<&'a [usize]> {
        if model.class_id != self.class_id {
            return Err(IflError::invalid_parameter(format!(
                "trial ran against class {}, got model for class {}",
                self.class_id, model.class_id
            )));
        }
        match &self.receiving {
            Receiving::FromModel(i) => Ok(&model.clusters[*i].members),
            Receiving::Owned(members) => Ok(members),
        }
    }
}

fn check_dims(group_rows: &Array2<f64>, x: &[f64]) -> Result<()> {
    if x.len() != group_rows.ncols() {
        return Err(IflError::invalid_parameter(format!(
            "instance has {} features, group has {}",
            x.len(),
            group_rows.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(IflError::validation("instance contains a non-finite value"));
    }
    Ok(())
}

/// Strategy 1: attach `x` to the nearest layer-1 cluster (by
/// `cfg.metric_l2` against centroids, ties toward the lower sorted index)
/// and patch only that cluster.
///
/// The receiving cluster's updated mean is computed incrementally as
/// `(size * mean + x) / (size + 1)` elementwise, and its centroid is set to
/// that mean. All confidences are re-based on `s + 1`. Under the
/// `group-with-instance` scope the updated mean is likewise
/// `(s * group_mean + x) / (s + 1)`.
pub fn trial_strategy1(
    model: &ClassModel,
    group_rows: &Array2<f64>,
    x: &[f64],
    cfg: &IflConfig,
) -> Result<TrialOutcome> {
    check_dims(group_rows, x)?;
    if group_rows.nrows() != model.group_size {
        return Err(IflError::invalid_parameter(format!(
            "group matrix has {} rows, model was built on {}",
            group_rows.nrows(),
            model.group_size
        )));
    }
    let s = model.group_size;
    let denom = (s + 1) as f64;

    let mut nearest = 0usize;
    let mut best = f64::INFINITY;
    for (i, c) in model.clusters.iter().enumerate() {
        let d = cfg.metric_l2.distance(x, &c.centroid)?;
        if d < best {
            best = d;
            nearest = i;
        }
    }

    let mut updated: Vec<UpdatedCluster> = model
        .clusters
        .iter()
        .map(|c| UpdatedCluster {
            size: c.size(),
            centroid: c.centroid.clone(),
            mean: c.mean.clone(),
            confidence: c.size() as f64 / denom,
            origin: c.origin,
        })
        .collect();

    let recv_origin = {
        let recv = &mut updated[nearest];
        let old_size = recv.size as f64;
        for (mv, xv) in recv.mean.iter_mut().zip(x) {
            *mv = (old_size * *mv + xv) / (old_size + 1.0);
        }
        recv.centroid = recv.mean.clone();
        recv.size += 1;
        recv.confidence = recv.size as f64 / denom;
        recv.origin
    };

    let updated_mean = match cfg.mu_scope {
        MuScope::ReceivingCluster => updated[nearest].mean.clone(),
        MuScope::GroupWithInstance => model
            .group_mean
            .iter()
            .zip(x)
            .map(|(gm, xv)| (s as f64 * gm + xv) / denom)
            .collect(),
    };

    updated.sort_by_key(|c| (Reverse(c.size), c.origin));
    let closest_index = updated
        .iter()
        .position(|c| c.origin == recv_origin)
        .expect("receiving cluster survives the sort");

    Ok(TrialOutcome {
        class_id: model.class_id,
        strategy: Strategy::NearestCluster,
        updated_mean,
        updated_clusters: updated,
        closest_index,
        inserted_local_index: s,
        receiving: Receiving::FromModel(nearest),
    })
}

/// Strategy 2: re-cluster the group with `x` appended as the last row,
/// using `min(cfg.k, s + 1)` clusters under `cfg.metric_l2`.
///
/// Cluster means are recomputed from members (the appended row included);
/// centroids come from the clustering. `seed` should be a per-trial seed,
/// see [`super::trial_seed`].
pub fn trial_strategy2(
    group_rows: &Array2<f64>,
    x: &[f64],
    class_id: usize,
    cfg: &IflConfig,
    seed: u64,
) -> Result<TrialOutcome> {
    check_dims(group_rows, x)?;
    let s = group_rows.nrows();
    if s == 0 {
        return Err(IflError::validation(format!(
            "class {class_id} has no rows to re-cluster"
        )));
    }
    let h = group_rows.ncols();
    let mut stacked = Array2::zeros((s + 1, h));
    for i in 0..s {
        stacked.row_mut(i).assign(&group_rows.row(i));
    }
    for (c, v) in x.iter().enumerate() {
        stacked[[s, c]] = *v;
    }

    let clustering = kmeans(&stacked, cfg.k, cfg.metric_l2, seed, cfg.kmeans_max_iter)?;
    let denom = (s + 1) as f64;
    let member_lists = clustering.members();

    let mut updated = Vec::with_capacity(member_lists.len());
    let mut receiving_origin = 0usize;
    let mut receiving_members = Vec::new();
    for (origin, members) in member_lists.into_iter().enumerate() {
        if members.contains(&s) {
            receiving_origin = origin;
            receiving_members = members.iter().copied().filter(|&i| i != s).collect();
        }
        updated.push(UpdatedCluster {
            size: members.len(),
            centroid: clustering.centroids[origin].clone(),
            mean: mean_of_rows(&stacked, &members),
            confidence: members.len() as f64 / denom,
            origin,
        });
    }

    let updated_mean = match cfg.mu_scope {
        MuScope::ReceivingCluster => updated
            .iter()
            .find(|c| c.origin == receiving_origin)
            .expect("some cluster holds the inserted row")
            .mean
            .clone(),
        MuScope::GroupWithInstance => {
            let all: Vec<usize> = (0..=s).collect();
            mean_of_rows(&stacked, &all)
        }
    };

    updated.sort_by_key(|c| (Reverse(c.size), c.origin));
    let closest_index = updated
        .iter()
        .position(|c| c.origin == receiving_origin)
        .expect("receiving cluster survives the sort");

    Ok(TrialOutcome {
        class_id,
        strategy: Strategy::Recluster,
        updated_mean,
        updated_clusters: updated,
        closest_index,
        inserted_local_index: s,
        receiving: Receiving::Owned(receiving_members),
    })
}
