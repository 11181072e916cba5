//! Naive reference implementation of the feature learner, used by the
//! integration suite to cross-check the engine.
//!
//! It shares the crate's k-means, distance metrics, fold planner and seed
//! derivation (their exact outputs are pinned contracts) and recomputes
//! everything layered on top of them from scratch: per instance, per class,
//! with no caching, no parallelism and no incremental shortcuts beyond the
//! documented update formulas. Slow on purpose; keep inputs small.

use ndarray::Array2;

use ifl_core::cluster::kmeans;
use ifl_core::dataset::{stratified_folds, Dataset};
use ifl_core::engine::{
    layer1_seed, trial_seed, FeatureId, IflConfig, MuScope, Strategy, TEST_PHASE_FOLD,
};

struct Cluster {
    members: Vec<usize>,
    centroid: Vec<f64>,
    mean: Vec<f64>,
    confidence: f64,
    origin: usize,
}

struct Structure {
    group_mean: Vec<f64>,
    clusters: Vec<Cluster>,
}

struct Updated {
    size: usize,
    centroid: Vec<f64>,
    mean: Vec<f64>,
    confidence: f64,
    origin: usize,
}

struct Insertion {
    updated_mean: Vec<f64>,
    clusters: Vec<Updated>,
    /// Rows of the group matrix sharing a cluster with the inserted point,
    /// the point itself excluded.
    receiving_members: Vec<usize>,
}

/// Coordinate-wise mean over the given rows, accumulated in row order.
fn column_mean(matrix: &Array2<f64>, rows: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; matrix.ncols()];
    for &r in rows {
        for (a, v) in acc.iter_mut().zip(matrix.row(r)) {
            *a += *v;
        }
    }
    for a in &mut acc {
        *a /= rows.len() as f64;
    }
    acc
}

fn structure(group: &Array2<f64>, cfg: &IflConfig, seed: u64) -> Structure {
    let s = group.nrows();
    let clustering = kmeans(group, cfg.k, cfg.metric_l1, seed, cfg.kmeans_max_iter).unwrap();
    let mut clusters: Vec<Cluster> = clustering
        .members()
        .into_iter()
        .enumerate()
        .map(|(origin, members)| Cluster {
            centroid: clustering.centroids[origin].clone(),
            mean: column_mean(group, &members),
            confidence: members.len() as f64 / s as f64,
            members,
            origin,
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then(a.origin.cmp(&b.origin))
    });
    let all: Vec<usize> = (0..s).collect();
    Structure {
        group_mean: column_mean(group, &all),
        clusters,
    }
}

fn insert_nearest(st: &Structure, x: &[f64], s: usize, cfg: &IflConfig) -> Insertion {
    let mut nearest = 0usize;
    let mut best = f64::INFINITY;
    for (i, c) in st.clusters.iter().enumerate() {
        let d = cfg.metric_l2.distance(x, &c.centroid).unwrap();
        if d < best {
            best = d;
            nearest = i;
        }
    }
    let denom = (s + 1) as f64;
    let mut clusters: Vec<Updated> = Vec::with_capacity(st.clusters.len());
    for (i, c) in st.clusters.iter().enumerate() {
        if i == nearest {
            let old = c.members.len() as f64;
            let mean: Vec<f64> = c
                .mean
                .iter()
                .zip(x)
                .map(|(mv, xv)| (old * *mv + *xv) / (old + 1.0))
                .collect();
            clusters.push(Updated {
                size: c.members.len() + 1,
                centroid: mean.clone(),
                mean,
                confidence: (c.members.len() + 1) as f64 / denom,
                origin: c.origin,
            });
        } else {
            clusters.push(Updated {
                size: c.members.len(),
                centroid: c.centroid.clone(),
                mean: c.mean.clone(),
                confidence: c.members.len() as f64 / denom,
                origin: c.origin,
            });
        }
    }
    let updated_mean = match cfg.mu_scope {
        MuScope::ReceivingCluster => clusters[nearest].mean.clone(),
        MuScope::GroupWithInstance => st
            .group_mean
            .iter()
            .zip(x)
            .map(|(gm, xv)| (s as f64 * *gm + *xv) / denom)
            .collect(),
    };
    let receiving_members = st.clusters[nearest].members.clone();
    clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.origin.cmp(&b.origin)));
    Insertion {
        updated_mean,
        clusters,
        receiving_members,
    }
}

fn insert_recluster(group: &Array2<f64>, x: &[f64], cfg: &IflConfig, seed: u64) -> Insertion {
    let s = group.nrows();
    let h = group.ncols();
    let mut stacked = Array2::zeros((s + 1, h));
    for r in 0..s {
        for c in 0..h {
            stacked[[r, c]] = group[[r, c]];
        }
    }
    for (c, v) in x.iter().enumerate() {
        stacked[[s, c]] = *v;
    }
    let clustering = kmeans(&stacked, cfg.k, cfg.metric_l2, seed, cfg.kmeans_max_iter).unwrap();
    let denom = (s + 1) as f64;
    let mut clusters = Vec::new();
    let mut receiving_origin = 0usize;
    let mut receiving_members = Vec::new();
    for (origin, members) in clustering.members().into_iter().enumerate() {
        if members.contains(&s) {
            receiving_origin = origin;
            receiving_members = members.iter().copied().filter(|&r| r != s).collect();
        }
        clusters.push(Updated {
            size: members.len(),
            centroid: clustering.centroids[origin].clone(),
            mean: column_mean(&stacked, &members),
            confidence: members.len() as f64 / denom,
            origin,
        });
    }
    let updated_mean = match cfg.mu_scope {
        // Before the sort, position equals origin.
        MuScope::ReceivingCluster => clusters[receiving_origin].mean.clone(),
        MuScope::GroupWithInstance => {
            let all: Vec<usize> = (0..=s).collect();
            column_mean(&stacked, &all)
        }
    };
    clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.origin.cmp(&b.origin)));
    Insertion {
        updated_mean,
        clusters,
        receiving_members,
    }
}

fn displacement_features(
    st: &Structure,
    ins: &Insertion,
    group: &Array2<f64>,
    x: &[f64],
    cfg: &IflConfig,
) -> Vec<f64> {
    let metric = cfg.metric_l3;
    let mut out = Vec::new();
    for feature in &cfg.features {
        match feature {
            FeatureId::NearestMemberDist => {
                let mut best: Option<f64> = None;
                for &r in &ins.receiving_members {
                    let row: Vec<f64> = group.row(r).to_vec();
                    let d = metric.distance(x, &row).unwrap();
                    if best.is_none_or(|b| d < b) {
                        best = Some(d);
                    }
                }
                out.push(best.unwrap_or(0.0));
            }
            FeatureId::UpdatedMeanDist => {
                out.push(metric.distance(x, &ins.updated_mean).unwrap());
            }
            FeatureId::CentroidDists => {
                for a in 0..cfg.k {
                    out.push(match ins.clusters.get(a) {
                        Some(c) => metric.distance(x, &c.centroid).unwrap(),
                        None => 0.0,
                    });
                }
            }
            FeatureId::ClusterMeanDists => {
                for a in 0..cfg.k {
                    out.push(match ins.clusters.get(a) {
                        Some(c) => metric.distance(x, &c.mean).unwrap(),
                        None => 0.0,
                    });
                }
            }
            FeatureId::GroupMeanShift => {
                out.push(metric.distance(&st.group_mean, &ins.updated_mean).unwrap());
            }
            FeatureId::CentroidShifts => {
                for a in 0..cfg.k {
                    out.push(match (st.clusters.get(a), ins.clusters.get(a)) {
                        (Some(o), Some(u)) => metric.distance(&o.centroid, &u.centroid).unwrap(),
                        _ => 0.0,
                    });
                }
            }
            FeatureId::ConfidenceShifts => {
                for a in 0..cfg.k {
                    out.push(match (st.clusters.get(a), ins.clusters.get(a)) {
                        (Some(o), Some(u)) => (o.confidence - u.confidence).abs(),
                        _ => 0.0,
                    });
                }
            }
            FeatureId::ClusterMeanShifts => {
                for a in 0..cfg.k {
                    out.push(match (st.clusters.get(a), ins.clusters.get(a)) {
                        (Some(o), Some(u)) => metric.distance(&o.mean, &u.mean).unwrap(),
                        _ => 0.0,
                    });
                }
            }
        }
    }
    out
}

fn block_width(cfg: &IflConfig) -> usize {
    cfg.features
        .iter()
        .map(|f| {
            if matches!(
                f,
                FeatureId::CentroidDists
                    | FeatureId::ClusterMeanDists
                    | FeatureId::CentroidShifts
                    | FeatureId::ConfidenceShifts
                    | FeatureId::ClusterMeanShifts
            ) {
                cfg.k
            } else {
                1
            }
        })
        .sum()
}

/// The learned vector for one instance: build every class structure from
/// scratch off `training_rows`, insert, measure, scale, concatenate.
fn instance_vector(
    ds: &Dataset,
    x: &[f64],
    training_rows: &[usize],
    cfg: &IflConfig,
    fold_tag: u64,
    instance_tag: usize,
) -> Vec<f64> {
    let m = ds.m();
    let multipliers: Vec<f64> = match &cfg.multipliers {
        Some(v) => v.clone(),
        None => (0..m)
            .map(|i| if i == 0 { 1.0 } else { 10.0 * i as f64 })
            .collect(),
    };
    let width = block_width(cfg);
    let mut out = Vec::with_capacity(m * width);
    assert_eq!(multipliers.len(), m, "one multiplier per class");
    for (class, &mult) in multipliers.iter().enumerate() {
        let members: Vec<usize> = training_rows
            .iter()
            .copied()
            .filter(|&r| ds.labels()[r] == class)
            .collect();
        if members.is_empty() {
            out.extend(std::iter::repeat_n(0.0, width));
            continue;
        }
        let mut group = Array2::zeros((members.len(), ds.h()));
        for (o, &r) in members.iter().enumerate() {
            for c in 0..ds.h() {
                group[[o, c]] = ds.features()[[r, c]];
            }
        }
        let st = structure(&group, cfg, layer1_seed(cfg.seed, fold_tag, class));
        let ins = match cfg.strategy {
            Strategy::NearestCluster => insert_nearest(&st, x, members.len(), cfg),
            Strategy::Recluster => insert_recluster(
                &group,
                x,
                cfg,
                trial_seed(cfg.seed, fold_tag, class, instance_tag),
            ),
        };
        for v in displacement_features(&st, &ins, &group, x, cfg) {
            out.push(mult * v);
        }
    }
    out
}

/// Reference for `learn_train_features`: original columns, then the learned
/// vector computed with the instance's own inner fold held out.
pub fn oracle_train(ds: &Dataset, cfg: &IflConfig) -> Array2<f64> {
    let plan = stratified_folds(ds, cfg.r, cfg.seed).unwrap();
    let width = ds.h() + ds.m() * block_width(cfg);
    let mut out = Array2::zeros((ds.n(), width));
    for (fold, rows) in plan.folds().iter().enumerate() {
        let training: Vec<usize> = (0..ds.n()).filter(|i| !rows.contains(i)).collect();
        for &i in rows {
            let x: Vec<f64> = ds.features().row(i).to_vec();
            let learned = instance_vector(ds, &x, &training, cfg, fold as u64, i);
            for (c, v) in x.iter().chain(learned.iter()).enumerate() {
                out[[i, c]] = *v;
            }
        }
    }
    out
}

/// Reference for `learn_test_features`: structures built from the whole
/// training set, one row per test row.
pub fn oracle_test(train: &Dataset, test: &Array2<f64>, cfg: &IflConfig) -> Array2<f64> {
    let all: Vec<usize> = (0..train.n()).collect();
    let width = train.h() + train.m() * block_width(cfg);
    let mut out = Array2::zeros((test.nrows(), width));
    for t in 0..test.nrows() {
        let x: Vec<f64> = test.row(t).to_vec();
        let learned = instance_vector(train, &x, &all, cfg, TEST_PHASE_FOLD, t);
        for (c, v) in x.iter().chain(learned.iter()).enumerate() {
            out[[t, c]] = *v;
        }
    }
    out
}
