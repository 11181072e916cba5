//! The feature learner.
//!
//! Training instances are split into `r` inner folds. For each fold, the
//! complement rows are grouped by class and each group is k-means clustered
//! ("layer 1"). Every fold instance is then trial-inserted into every class
//! structure ("layer 2", two strategies) and the displacement it causes is
//! measured as a feature vector ("layer 3"). Per-class vectors are scaled by
//! class multipliers and concatenated, yielding `m * feature_len` new
//! features per instance. At prediction time the same trials run against
//! structures built from the full training set.
//!
//! Everything downstream of a seed is deterministic; the exact floating
//! point recipes (summation order, the incremental mean update) are part of
//! the contract and documented where they happen.

mod features;
mod learn;
mod model;
mod trial;

pub use features::{augmented_feature_names, compute_error_features, embed_class};
pub use learn::{augment_with_plan, learn_test_features, learn_train_features};
pub use model::{build_class_model, mean_of_rows, ClassModel, ClusterSummary};
pub use trial::{trial_strategy1, trial_strategy2, TrialOutcome, UpdatedCluster};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{IflError, Result};
use crate::metric::MetricKind;

/// One measurable displacement, identified by its wire code.
///
/// Codes starting with `1.` relate the inserted instance to the updated
/// structure; codes starting with `2.` relate the updated structure to the
/// original one. Per-rank features produce one value per cluster rank
/// (`k` values); the rest are scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureId {
    /// `1.0`: distance from the instance to the closest original member of
    /// the cluster that received it (0 when it sits alone).
    NearestMemberDist,
    /// `1.1`: distance from the instance to the updated mean.
    UpdatedMeanDist,
    /// `1.2`: distances from the instance to each updated centroid.
    CentroidDists,
    /// `1.3`: distances from the instance to each updated cluster mean.
    ClusterMeanDists,
    /// `2.1`: distance from the original group mean to the updated mean.
    GroupMeanShift,
    /// `2.2`: per-rank centroid displacement.
    CentroidShifts,
    /// `2.3`: per-rank absolute confidence change.
    ConfidenceShifts,
    /// `2.4`: per-rank cluster-mean displacement.
    ClusterMeanShifts,
}

impl FeatureId {
    pub const ALL: [FeatureId; 8] = [
        FeatureId::NearestMemberDist,
        FeatureId::UpdatedMeanDist,
        FeatureId::CentroidDists,
        FeatureId::ClusterMeanDists,
        FeatureId::GroupMeanShift,
        FeatureId::CentroidShifts,
        FeatureId::ConfidenceShifts,
        FeatureId::ClusterMeanShifts,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            FeatureId::NearestMemberDist => "1.0",
            FeatureId::UpdatedMeanDist => "1.1",
            FeatureId::CentroidDists => "1.2",
            FeatureId::ClusterMeanDists => "1.3",
            FeatureId::GroupMeanShift => "2.1",
            FeatureId::CentroidShifts => "2.2",
            FeatureId::ConfidenceShifts => "2.3",
            FeatureId::ClusterMeanShifts => "2.4",
        }
    }

    /// True for features that emit one value per cluster rank.
    pub fn per_rank(&self) -> bool {
        matches!(
            self,
            FeatureId::CentroidDists
                | FeatureId::ClusterMeanDists
                | FeatureId::CentroidShifts
                | FeatureId::ConfidenceShifts
                | FeatureId::ClusterMeanShifts
        )
    }

    /// Width of this feature's block for a configured cluster count `k`.
    pub fn block_len(&self, k: usize) -> usize {
        if self.per_rank() {
            k
        } else {
            1
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for FeatureId {
    type Err = IflError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        FeatureId::ALL
            .iter()
            .copied()
            .find(|f| f.code() == t)
            .ok_or_else(|| {
                IflError::invalid_parameter(format!(
                    "unknown feature id {t:?}; expected one of 1.0, 1.1, 1.2, 1.3, 2.1, 2.2, 2.3, 2.4"
                ))
            })
    }
}

impl Serialize for FeatureId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How an instance is inserted into a class structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Attach to the nearest existing cluster and patch that cluster only.
    NearestCluster,
    /// Re-cluster the whole group with the instance included. Slower but
    /// lets the structure reorganize.
    Recluster,
}

impl Strategy {
    pub fn from_number(n: u64) -> Result<Strategy> {
        match n {
            1 => Ok(Strategy::NearestCluster),
            2 => Ok(Strategy::Recluster),
            other => Err(IflError::invalid_parameter(format!(
                "strategy must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn number(&self) -> u64 {
        match self {
            Strategy::NearestCluster => 1,
            Strategy::Recluster => 2,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.number())
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let n = u64::deserialize(deserializer)?;
        Strategy::from_number(n).map_err(serde::de::Error::custom)
    }
}

/// What the "updated mean" compares against after a trial insertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuScope {
    /// Mean of the cluster that received the instance (the default).
    #[default]
    ReceivingCluster,
    /// Mean of the whole group including the instance.
    GroupWithInstance,
}

impl fmt::Display for MuScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuScope::ReceivingCluster => write!(f, "receiving-cluster"),
            MuScope::GroupWithInstance => write!(f, "group-with-instance"),
        }
    }
}

impl FromStr for MuScope {
    type Err = IflError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "receiving-cluster" => Ok(MuScope::ReceivingCluster),
            "group-with-instance" => Ok(MuScope::GroupWithInstance),
            other => Err(IflError::invalid_parameter(format!(
                "unknown mean scope {other:?}; expected receiving-cluster or group-with-instance"
            ))),
        }
    }
}

impl Serialize for MuScope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MuScope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Full parameter set for the feature learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IflConfig {
    /// Inner fold count (>= 2).
    pub r: usize,
    /// Clusters per class group; clamped per group to the group size.
    pub k: usize,
    /// Requested features, kept sorted in canonical code order.
    pub features: Vec<FeatureId>,
    /// Metric for layer-1 clustering.
    pub metric_l1: MetricKind,
    /// Metric for layer-2 insertion (nearest-cluster choice, or the
    /// re-clustering metric under strategy 2).
    pub metric_l2: MetricKind,
    /// Metric for layer-3 feature distances.
    pub metric_l3: MetricKind,
    pub strategy: Strategy,
    pub seed: u64,
    /// Per-class scale factors; `None` means 1, 10, 20, 30, ...
    pub multipliers: Option<Vec<f64>>,
    pub mu_scope: MuScope,
    /// Iteration cap for every k-means run.
    pub kmeans_max_iter: usize,
}

impl IflConfig {
    pub fn new(r: usize, k: usize) -> IflConfig {
        IflConfig {
            r,
            k,
            features: FeatureId::ALL.to_vec(),
            metric_l1: MetricKind::Euclidean,
            metric_l2: MetricKind::Euclidean,
            metric_l3: MetricKind::Euclidean,
            strategy: Strategy::NearestCluster,
            seed: 42,
            multipliers: None,
            mu_scope: MuScope::ReceivingCluster,
            kmeans_max_iter: 100,
        }
    }

    /// Replace the feature list, sorting and deduplicating into canonical
    /// order.
    pub fn with_features(mut self, mut features: Vec<FeatureId>) -> IflConfig {
        features.sort();
        features.dedup();
        self.features = features;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(IflError::invalid_parameter(format!(
                "inner fold count must be at least 2, got {}",
                self.r
            )));
        }
        if self.k < 1 {
            return Err(IflError::invalid_parameter("cluster count must be >= 1"));
        }
        if self.kmeans_max_iter < 1 {
            return Err(IflError::invalid_parameter("kmeans_max_iter must be >= 1"));
        }
        if self.features.is_empty() {
            return Err(IflError::invalid_parameter(
                "at least one feature id is required",
            ));
        }
        let mut sorted = self.features.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != self.features {
            return Err(IflError::invalid_parameter(
                "feature ids must be unique and in canonical order (use with_features)",
            ));
        }
        if let Some(mult) = &self.multipliers {
            validate_multipliers(mult)?;
        }
        Ok(())
    }

    /// Learned-vector length per class: sum of the block widths.
    pub fn feature_len(&self) -> usize {
        self.features.iter().map(|f| f.block_len(self.k)).sum()
    }

    /// Width of an augmented row: original features plus one block of
    /// [`IflConfig::feature_len`] per class.
    pub fn augmented_width(&self, h: usize, m: usize) -> usize {
        h + m * self.feature_len()
    }

    /// Class multipliers to apply, resolving the default ramp when none are
    /// configured. Errors if a configured list does not match `m`.
    pub fn resolved_multipliers(&self, m: usize) -> Result<Vec<f64>> {
        match &self.multipliers {
            Some(mult) => {
                if mult.len() != m {
                    return Err(IflError::invalid_parameter(format!(
                        "{} multipliers configured for {m} classes",
                        mult.len()
                    )));
                }
                validate_multipliers(mult)?;
                Ok(mult.clone())
            }
            None => Ok((0..m)
                .map(|i| if i == 0 { 1.0 } else { 10.0 * i as f64 })
                .collect()),
        }
    }
}

fn validate_multipliers(mult: &[f64]) -> Result<()> {
    for (i, v) in mult.iter().enumerate() {
        if !v.is_finite() || *v <= 0.0 {
            return Err(IflError::invalid_parameter(format!(
                "multiplier {i} must be positive and finite, got {v}"
            )));
        }
        if mult[..i].contains(v) {
            return Err(IflError::invalid_parameter(format!(
                "multipliers must be pairwise distinct; {v} repeats"
            )));
        }
    }
    Ok(())
}

/// Fold tag used for structures built from the full training set (the
/// prediction phase has no inner fold).
pub const TEST_PHASE_FOLD: u64 = u64::MAX;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic seed derivation: folds the parts into the base with a
/// splitmix-style mixer. Exposed so external recomputations can reproduce
/// the exact per-clustering seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = mix(base);
    for &p in parts {
        acc = mix(acc ^ mix(p));
    }
    acc
}

/// Seed for the layer-1 clustering of one class group. `fold` is the inner
/// fold index, or [`TEST_PHASE_FOLD`] for full-training structures.
pub fn layer1_seed(base: u64, fold: u64, class: usize) -> u64 {
    derive_seed(base, &[1, fold, class as u64])
}

/// Seed for one strategy-2 re-clustering trial. `instance` is the row index
/// being inserted (training row id, or test row id in the test phase).
pub fn trial_seed(base: u64, fold: u64, class: usize, instance: usize) -> u64 {
    derive_seed(base, &[2, fold, class as u64, instance as u64])
}
