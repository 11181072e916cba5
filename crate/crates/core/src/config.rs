//! TOML run configuration: one file describes a dataset, the feature
//! learner, the classifier, and the evaluation protocol, optionally with
//! published reference scores to compare against.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, ClassifierKind};
use crate::dataset::{CsvOptions, LabelColumn};
use crate::engine::{FeatureId, IflConfig, MuScope, Strategy};
use crate::error::{IflError, Result};
use crate::metric::MetricKind;

fn default_folds() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_strategy() -> Strategy {
    Strategy::NearestCluster
}

fn default_metric() -> MetricKind {
    MetricKind::Euclidean
}

fn default_kmeans_max_iter() -> usize {
    100
}

/// `[ifl]` section: feature-learning parameters. Omitting the whole
/// section means "baselines only".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IflSection {
    /// Inner fold count.
    pub r: usize,
    /// Clusters per class group.
    pub k: usize,
    /// Learned-feature codes, e.g. `["1.0", "2.2"]`.
    pub features: Vec<FeatureId>,
    #[serde(default = "default_metric")]
    pub metric_l1: MetricKind,
    #[serde(default = "default_metric")]
    pub metric_l2: MetricKind,
    #[serde(default = "default_metric")]
    pub metric_l3: MetricKind,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Overrides the run seed for feature learning when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub multipliers: Option<Vec<f64>>,
    #[serde(default)]
    pub mu_scope: Option<MuScope>,
    #[serde(default = "default_kmeans_max_iter")]
    pub kmeans_max_iter: usize,
}

impl IflSection {
    pub fn to_config(&self, default_seed: u64) -> Result<IflConfig> {
        let cfg = IflConfig {
            r: self.r,
            k: self.k,
            features: Vec::new(),
            metric_l1: self.metric_l1,
            metric_l2: self.metric_l2,
            metric_l3: self.metric_l3,
            strategy: self.strategy,
            seed: self.seed.unwrap_or(default_seed),
            multipliers: self.multipliers.clone(),
            mu_scope: self.mu_scope.unwrap_or_default(),
            kmeans_max_iter: self.kmeans_max_iter,
        }
        .with_features(self.features.clone());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `[classifier]` section; every field optional, falling back to the
/// boosted-ensemble defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    #[serde(default)]
    pub kind: Option<ClassifierKind>,
    #[serde(default)]
    pub learners: Option<usize>,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub tree_max_depth: Option<usize>,
    #[serde(default)]
    pub min_leaf: Option<usize>,
    #[serde(default)]
    pub knn_k: Option<usize>,
    #[serde(default)]
    pub knn_metric: Option<MetricKind>,
}

impl ClassifierSection {
    pub fn to_config(&self) -> Result<ClassifierConfig> {
        let mut cfg = ClassifierConfig::new(self.kind.unwrap_or(ClassifierKind::Ensemble));
        if let Some(v) = self.learners {
            cfg.learners = v;
        }
        if let Some(v) = self.max_depth {
            cfg.max_depth = v;
        }
        if let Some(v) = self.tree_max_depth {
            cfg.tree_max_depth = v;
        }
        if let Some(v) = self.min_leaf {
            cfg.min_leaf = v;
        }
        if let Some(v) = self.knn_k {
            cfg.knn_k = v;
        }
        if let Some(v) = self.knn_metric {
            cfg.knn_metric = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The same hyperparameters with a different classifier family, used
    /// when one config drives several baseline runs.
    pub fn to_config_for(&self, kind: ClassifierKind) -> Result<ClassifierConfig> {
        let mut cfg = self.to_config()?;
        cfg.kind = kind;
        Ok(cfg)
    }
}

/// `[eval]` section: outer cross-validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Standardize features per training fold before anything else runs.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            folds: default_folds(),
            normalize: true,
        }
    }
}

/// Published scores to compare a reproduction run against: `[f1, accuracy]`
/// per method, plus the expected dataset shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub naive_bayes: Option<[f64; 2]>,
    #[serde(default)]
    pub knn: Option<[f64; 2]>,
    #[serde(default)]
    pub tree: Option<[f64; 2]>,
    #[serde(default)]
    pub ensemble: Option<[f64; 2]>,
    #[serde(default)]
    pub ifl: Option<[f64; 2]>,
    /// Strongest published deep-model accuracy on the same dataset, where
    /// one exists.
    #[serde(default)]
    pub deep_baseline_accuracy: Option<f64>,
}

impl ReferenceSection {
    /// `[f1, accuracy]` for a baseline method.
    pub fn baseline(&self, kind: ClassifierKind) -> Option<[f64; 2]> {
        match kind {
            ClassifierKind::NaiveBayes => self.naive_bayes,
            ClassifierKind::Knn => self.knn,
            ClassifierKind::Tree => self.tree,
            ClassifierKind::Ensemble => self.ensemble,
        }
    }
}

/// One complete run description, loaded from TOML. Unknown keys anywhere
/// are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// CSV path; relative paths resolve against the config file's
    /// directory (or a caller-supplied data directory).
    pub data: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    /// "last", a 0-based index, or a header name.
    #[serde(default)]
    pub label_column: Option<String>,
    /// Single-character field delimiter, default ",".
    #[serde(default)]
    pub delimiter: Option<String>,
    /// Pinned class order; also makes runs independent of row order.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub ifl: Option<IflSection>,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| IflError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml_str(&text, path)
    }

    fn validate(&self, origin: &Path) -> Result<()> {
        let fail = |message: String| IflError::Config {
            path: origin.to_path_buf(),
            message,
        };
        if self.name.trim().is_empty() {
            return Err(fail("name must not be empty".into()));
        }
        if let Some(d) = &self.delimiter {
            if d.len() != 1 {
                return Err(fail(format!("delimiter must be one byte, got {d:?}")));
            }
        }
        if self.eval.folds < 2 {
            return Err(fail("eval.folds must be at least 2".into()));
        }
        if let Some(col) = &self.label_column {
            col.parse::<LabelColumn>()
                .map_err(|e| fail(format!("label_column: {e}")))?;
        }
        // Surface section-level mistakes at load time, not mid-run.
        self.classifier
            .to_config()
            .map_err(|e| fail(e.to_string()))?;
        if let Some(ifl) = &self.ifl {
            ifl.to_config(0).map_err(|e| fail(e.to_string()))?;
        }
        Ok(())
    }

    /// The data path, resolved against `data_dir` when relative.
    pub fn data_path(&self, data_dir: &Path) -> PathBuf {
        if self.data.is_absolute() {
            self.data.clone()
        } else {
            data_dir.join(&self.data)
        }
    }

    pub fn csv_options(&self) -> Result<CsvOptions> {
        let label_column = match &self.label_column {
            Some(col) => col.parse::<LabelColumn>()?,
            None => LabelColumn::Last,
        };
        let delimiter = match &self.delimiter {
            Some(d) if d.len() == 1 => d.as_bytes()[0],
            Some(d) => {
                return Err(IflError::invalid_parameter(format!(
                    "delimiter must be one byte, got {d:?}"
                )))
            }
            None => b',',
        };
        Ok(CsvOptions {
            has_header: self.has_header,
            label_column,
            delimiter,
            label_order: self.labels.clone(),
        })
    }

    /// Feature-learner config, when the `[ifl]` section is present.
    /// `default_seed` applies unless the section pins its own seed.
    pub fn ifl_config(&self, default_seed: u64) -> Result<Option<IflConfig>> {
        self.ifl
            .as_ref()
            .map(|section| section.to_config(default_seed))
            .transpose()
    }

    pub fn classifier_config(&self) -> Result<ClassifierConfig> {
        self.classifier.to_config()
    }
}
