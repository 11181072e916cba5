//! Classifiers used on plain and augmented feature matrices.
//!
//! Four families are provided: a Gaussian naive Bayes, brute-force
//! k-nearest-neighbor, a CART-style decision tree, and a boosted ensemble
//! of shallow trees. All of them consume an `Array2<f64>` of row-major
//! samples plus `usize` labels in `0..n_classes` and share the same
//! predict/predict_proba surface, so evaluation code can treat them
//! uniformly through the [`Model`] enum.

mod boost;
mod knn;
mod nb;
mod tree;

pub use boost::{fit_boosted, BoostedEnsemble};
pub use knn::{fit_knn, KnnModel};
pub use nb::{fit_gaussian_nb, GaussianNb};
pub use tree::{DecisionTree, TreeNode};

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{IflError, Result};
use crate::metric::MetricKind;

/// Bumped whenever the serialized model layout changes.
const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    NaiveBayes,
    Knn,
    Tree,
    Ensemble,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::Knn,
        ClassifierKind::Tree,
        ClassifierKind::Ensemble,
    ];
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ClassifierKind::NaiveBayes => "naive_bayes",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Tree => "tree",
            ClassifierKind::Ensemble => "ensemble",
        };
        f.write_str(name)
    }
}

impl FromStr for ClassifierKind {
    type Err = IflError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive_bayes" | "nb" => Ok(ClassifierKind::NaiveBayes),
            "knn" => Ok(ClassifierKind::Knn),
            "tree" | "cart" => Ok(ClassifierKind::Tree),
            "ensemble" | "boost" => Ok(ClassifierKind::Ensemble),
            other => Err(IflError::invalid_parameter(format!(
                "unknown classifier '{other}' (expected naive_bayes, knn, tree or ensemble)"
            ))),
        }
    }
}

/// Hyperparameters for every classifier family in one bag; each family
/// reads only the fields it cares about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Boosting rounds for the ensemble.
    pub learners: usize,
    /// Depth cap for each boosted tree.
    pub max_depth: usize,
    /// Depth cap for the standalone tree.
    pub tree_max_depth: usize,
    /// Minimum samples per leaf for any tree.
    pub min_leaf: usize,
    pub knn_k: usize,
    pub knn_metric: MetricKind,
}

impl ClassifierConfig {
    pub fn new(kind: ClassifierKind) -> Self {
        ClassifierConfig {
            kind,
            learners: 100,
            max_depth: 5,
            tree_max_depth: 20,
            min_leaf: 1,
            knn_k: 5,
            knn_metric: MetricKind::Euclidean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners == 0 {
            return Err(IflError::invalid_parameter("learners must be >= 1"));
        }
        if self.max_depth == 0 || self.tree_max_depth == 0 {
            return Err(IflError::invalid_parameter("tree depth must be >= 1"));
        }
        if self.min_leaf == 0 {
            return Err(IflError::invalid_parameter("min_leaf must be >= 1"));
        }
        if self.knn_k == 0 {
            return Err(IflError::invalid_parameter("knn_k must be >= 1"));
        }
        Ok(())
    }
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::new(ClassifierKind::Ensemble)
    }
}

/// A fitted classifier of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    NaiveBayes(GaussianNb),
    Knn(KnnModel),
    Tree(DecisionTree),
    Ensemble(BoostedEnsemble),
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    schema_version: u32,
    model: Model,
}

/// Train the classifier selected by `config`.
pub fn fit(
    config: &ClassifierConfig,
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
) -> Result<Model> {
    config.validate()?;
    match config.kind {
        ClassifierKind::NaiveBayes => Ok(Model::NaiveBayes(fit_gaussian_nb(x, y, n_classes)?)),
        ClassifierKind::Knn => Ok(Model::Knn(fit_knn(
            x,
            y,
            n_classes,
            config.knn_k,
            config.knn_metric,
        )?)),
        ClassifierKind::Tree => Ok(Model::Tree(DecisionTree::fit(
            x,
            y,
            n_classes,
            config.tree_max_depth,
            config.min_leaf,
        )?)),
        ClassifierKind::Ensemble => Ok(Model::Ensemble(fit_boosted(
            x,
            y,
            n_classes,
            config.learners,
            config.max_depth,
            config.min_leaf,
        )?)),
    }
}

impl Model {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Model::Knn(_) => ClassifierKind::Knn,
            Model::Tree(_) => ClassifierKind::Tree,
            Model::Ensemble(_) => ClassifierKind::Ensemble,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Model::NaiveBayes(m) => m.n_classes(),
            Model::Knn(m) => m.n_classes(),
            Model::Tree(m) => m.n_classes(),
            Model::Ensemble(m) => m.n_classes(),
        }
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        match self {
            Model::NaiveBayes(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::Tree(m) => m.predict(x),
            Model::Ensemble(m) => m.predict(x),
        }
    }

    /// Per-class scores in [0, 1] summing to 1 per row.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Model::NaiveBayes(m) => m.predict_proba(x),
            Model::Knn(m) => m.predict_proba(x),
            Model::Tree(m) => m.predict_proba(x),
            Model::Ensemble(m) => m.predict_proba(x),
        }
    }

    /// Serialize to pretty JSON under a schema-version envelope.
    pub fn save(&self, path: &Path) -> Result<()> {
        let envelope = ModelEnvelope {
            schema_version: MODEL_SCHEMA_VERSION,
            model: self.clone(),
        };
        let file = File::create(path)?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut writer, &envelope)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        let file = File::open(path)?;
        let envelope: ModelEnvelope = serde_json::from_reader(BufReader::new(file))?;
        if envelope.schema_version != MODEL_SCHEMA_VERSION {
            return Err(IflError::validation(format!(
                "model file {} has schema version {}, this build reads {}",
                path.display(),
                envelope.schema_version,
                MODEL_SCHEMA_VERSION
            )));
        }
        Ok(envelope.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn toy() -> (Array2<f64>, Vec<usize>) {
        let x = arr2(&[
            [0.0, 0.1],
            [0.2, 0.0],
            [0.1, 0.3],
            [5.0, 5.2],
            [5.1, 4.9],
            [4.8, 5.0],
        ]);
        (x, vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn kind_strings_round_trip() {
        for kind in ClassifierKind::ALL {
            assert_eq!(kind.to_string().parse::<ClassifierKind>().unwrap(), kind);
        }
        assert!("forest".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn every_family_fits_and_predicts_through_the_enum() {
        let (x, y) = toy();
        for kind in ClassifierKind::ALL {
            let model = fit(&ClassifierConfig::new(kind), &x, &y, 2).unwrap();
            assert_eq!(model.kind(), kind);
            assert_eq!(model.predict(&x).unwrap(), y, "{kind} misfit");
            let proba = model.predict_proba(&x).unwrap();
            for row in proba.rows() {
                let total: f64 = row.sum();
                assert!((total - 1.0).abs() < 1e-9, "{kind} rows must sum to 1");
            }
        }
    }

    #[test]
    fn save_and_load_round_trips_every_family() {
        let (x, y) = toy();
        let dir = tempfile::tempdir().unwrap();
        for kind in ClassifierKind::ALL {
            let model = fit(&ClassifierConfig::new(kind), &x, &y, 2).unwrap();
            let path = dir.path().join(format!("{kind}.json"));
            model.save(&path).unwrap();
            let back = Model::load(&path).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
    }

    #[test]
    fn schema_version_mismatch_is_rejected() {
        let (x, y) = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = fit(&ClassifierConfig::new(ClassifierKind::Tree), &x, &y, 2).unwrap();
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"schema_version\": 1", "\"schema_version\": 999");
        std::fs::write(&path, text).unwrap();
        let err = Model::load(&path).unwrap_err();
        assert!(err.to_string().contains("schema version"));
    }

    #[test]
    fn config_validation_catches_zeros() {
        let cfg = ClassifierConfig {
            learners: 0,
            ..ClassifierConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ClassifierConfig {
            min_leaf: 0,
            ..ClassifierConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ClassifierConfig {
            knn_k: 0,
            ..ClassifierConfig::new(ClassifierKind::Knn)
        };
        assert!(cfg.validate().is_err());
    }
}
