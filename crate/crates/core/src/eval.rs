//! Cross-validation driver and classification metrics.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{fit, ClassifierConfig, ClassifierKind};
use crate::dataset::{gather_rows, stratified_folds, Dataset, Standardizer};
use crate::engine::{learn_test_features, learn_train_features, IflConfig};
use crate::error::{IflError, Result};

/// Bumped whenever the persisted result layout changes.
const EVAL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 (unweighted mean of per-class F1 over all
/// `n_classes` classes; a class with no true and no predicted instances
/// contributes an F1 of 0).
pub fn score(predictions: &[usize], truth: &[usize], n_classes: usize) -> Result<Scores> {
    if predictions.len() != truth.len() {
        return Err(IflError::invalid_parameter(format!(
            "{} predictions for {} truth labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(IflError::invalid_parameter(
            "scoring needs at least one prediction",
        ));
    }
    if n_classes < 1 {
        return Err(IflError::invalid_parameter("n_classes must be >= 1"));
    }
    if let Some(bad) = predictions.iter().chain(truth).find(|&&c| c >= n_classes) {
        return Err(IflError::invalid_parameter(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }

    let mut correct = 0usize;
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p == t {
            correct += 1;
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }

    let mut f1_sum = 0.0;
    for c in 0..n_classes {
        let precision_den = tp[c] + fp[c];
        let recall_den = tp[c] + fn_[c];
        let precision = if precision_den == 0 {
            0.0
        } else {
            tp[c] as f64 / precision_den as f64
        };
        let recall = if recall_den == 0 {
            0.0
        } else {
            tp[c] as f64 / recall_den as f64
        };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }

    Ok(Scores {
        accuracy: correct as f64 / truth.len() as f64,
        macro_f1: f1_sum / n_classes as f64,
    })
}

/// One evaluated outer fold. Indices refer to rows of the full dataset,
/// so the metrics can be recomputed from this record alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<usize>,
    pub truth: Vec<usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Outcome of one cross-validated run.
///
/// `wall_time_seconds` is measured for console reporting but intentionally
/// not serialized and not part of equality, so persisted artifacts are
/// byte-stable for a given seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub schema_version: u32,
    pub dataset: String,
    /// Classifier kind, prefixed with `ifl+` when features were learned.
    pub method: String,
    pub n: usize,
    pub h: usize,
    pub m: usize,
    pub label_names: Vec<String>,
    pub folds: usize,
    pub seed: u64,
    pub normalize: bool,
    pub classifier: ClassifierConfig,
    pub ifl: Option<IflConfig>,
    pub fold_outcomes: Vec<FoldOutcome>,
    pub skipped_folds: Vec<usize>,
    /// Mean of per-fold accuracies.
    pub accuracy: f64,
    /// Mean of per-fold macro-F1 scores.
    pub macro_f1: f64,
    #[serde(skip, default)]
    pub wall_time_seconds: f64,
}

impl PartialEq for EvalResult {
    fn eq(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version
            && self.dataset == other.dataset
            && self.method == other.method
            && self.n == other.n
            && self.h == other.h
            && self.m == other.m
            && self.label_names == other.label_names
            && self.folds == other.folds
            && self.seed == other.seed
            && self.normalize == other.normalize
            && self.classifier == other.classifier
            && self.ifl == other.ifl
            && self.fold_outcomes == other.fold_outcomes
            && self.skipped_folds == other.skipped_folds
            && self.accuracy == other.accuracy
            && self.macro_f1 == other.macro_f1
    }
}

impl EvalResult {
    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<EvalResult> {
        let result: EvalResult = serde_json::from_str(text)?;
        if result.schema_version != EVAL_SCHEMA_VERSION {
            return Err(IflError::validation(format!(
                "result has schema version {}, this build reads {}",
                result.schema_version, EVAL_SCHEMA_VERSION
            )));
        }
        Ok(result)
    }
}

fn method_name(kind: ClassifierKind, with_ifl: bool) -> String {
    if with_ifl {
        format!("ifl+{kind}")
    } else {
        kind.to_string()
    }
}

/// Evaluate one fold; `None` means the fold was skipped because its
/// training part cannot support the run.
#[allow(clippy::too_many_arguments)]
fn run_fold(
    ds: &Dataset,
    fold: usize,
    test_rows: &[usize],
    train_rows: &[usize],
    ifl: Option<&IflConfig>,
    clf: &ClassifierConfig,
    normalize: bool,
) -> Result<Option<FoldOutcome>> {
    // Feature learning splits each class again internally, so it needs at
    // least 2 instances of every class; plain classifiers need 1.
    let needed = if ifl.is_some() { 2 } else { 1 };
    let mut counts = vec![0usize; ds.m()];
    for &i in train_rows {
        counts[ds.labels()[i]] += 1;
    }
    if let Some(class) = counts.iter().position(|&c| c < needed) {
        log::warn!(
            "fold {fold}: class {:?} has {} training instance(s), needs {needed}; fold skipped",
            ds.label_names()[class],
            counts[class]
        );
        return Ok(None);
    }

    let train = ds.subset(train_rows)?;
    let test_x = gather_rows(ds.features(), test_rows);
    let (train, test_x) = if normalize {
        let scaler = Standardizer::fit(train.features())?;
        let scaled_train = scaler.transform(train.features())?;
        let scaled_test = scaler.transform(&test_x)?;
        (train.with_features(scaled_train)?, scaled_test)
    } else {
        (train, test_x)
    };

    let (fit_x, predict_x): (Array2<f64>, Array2<f64>) = match ifl {
        Some(cfg) => {
            let augmented = learn_train_features(&train, cfg)?;
            let test_aug = learn_test_features(&train, &test_x, cfg)?;
            (augmented.features().clone(), test_aug)
        }
        None => (train.features().clone(), test_x),
    };

    let model = fit(clf, &fit_x, train.labels(), ds.m())?;
    let predictions = model.predict(&predict_x)?;
    let truth: Vec<usize> = test_rows.iter().map(|&i| ds.labels()[i]).collect();
    let scores = score(&predictions, &truth, ds.m())?;
    Ok(Some(FoldOutcome {
        fold,
        test_indices: test_rows.to_vec(),
        predictions,
        truth,
        accuracy: scores.accuracy,
        macro_f1: scores.macro_f1,
    }))
}

/// Stratified k-fold cross-validation.
///
/// With `ifl` present, each fold learns features on its training part and
/// projects its test part through the same structures before fitting the
/// classifier; otherwise the raw columns are used. `normalize` fits a
/// standardizer on each fold's training part only. Folds run in parallel;
/// outcomes are ordered by fold index, so results depend only on the
/// inputs and `seed`.
pub fn cross_validate(
    ds: &Dataset,
    ifl: Option<&IflConfig>,
    clf: &ClassifierConfig,
    folds: usize,
    seed: u64,
    normalize: bool,
) -> Result<EvalResult> {
    let start = Instant::now();
    clf.validate()?;
    if let Some(cfg) = ifl {
        cfg.validate()?;
    }
    if ds.m() < 2 {
        return Err(IflError::validation(
            "cross-validation needs at least two classes",
        ));
    }
    let plan = stratified_folds(ds, folds, seed)?;

    // Outcomes carry their fold index: collecting a parallel Result stream
    // does not preserve order, so it is restored by sorting.
    let mut per_fold: Vec<(usize, Option<FoldOutcome>)> = plan
        .folds()
        .par_iter()
        .enumerate()
        .map(|(fold, test_rows)| {
            let train_rows = plan.complement(fold);
            run_fold(ds, fold, test_rows, &train_rows, ifl, clf, normalize)
                .map(|outcome| (fold, outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    per_fold.sort_by_key(|(fold, _)| *fold);

    let mut fold_outcomes = Vec::new();
    let mut skipped_folds = Vec::new();
    for (fold, outcome) in per_fold {
        match outcome {
            Some(o) => fold_outcomes.push(o),
            None => skipped_folds.push(fold),
        }
    }
    if fold_outcomes.is_empty() {
        return Err(IflError::validation(
            "every fold was skipped; no class has enough instances for this split",
        ));
    }

    let count = fold_outcomes.len() as f64;
    let accuracy = fold_outcomes.iter().map(|o| o.accuracy).sum::<f64>() / count;
    let macro_f1 = fold_outcomes.iter().map(|o| o.macro_f1).sum::<f64>() / count;

    Ok(EvalResult {
        schema_version: EVAL_SCHEMA_VERSION,
        dataset: ds.name().to_string(),
        method: method_name(clf.kind, ifl.is_some()),
        n: ds.n(),
        h: ds.h(),
        m: ds.m(),
        label_names: ds.label_names().to_vec(),
        folds,
        seed,
        normalize,
        classifier: clf.clone(),
        ifl: ifl.cloned(),
        fold_outcomes,
        skipped_folds,
        accuracy,
        macro_f1,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}
