//! Orchestration: learning the new features for a training set (via inner
//! folds) and for unseen rows (via full-training structures).

use ndarray::Array2;
use rayon::prelude::*;

use crate::dataset::{gather_rows, row_slice, stratified_folds, CsvHeader, Dataset, FoldPlan};
use crate::error::{IflError, Result};

use super::features::{augmented_feature_names, compute_error_features, embed_class};
use super::model::{build_class_model, ClassModel};
use super::trial::{trial_strategy1, trial_strategy2};
use super::{layer1_seed, trial_seed, IflConfig, Strategy, TEST_PHASE_FOLD};

/// Per-class structure plus the matrix it was built from.
struct ClassContext {
    matrix: Array2<f64>,
    model: ClassModel,
}

/// Build one context per class from the given rows (`None` for classes with
/// no rows there). `rows` must be ascending so group matrices are too.
fn build_contexts(
    ds: &Dataset,
    rows: &[usize],
    cfg: &IflConfig,
    fold_tag: u64,
) -> Result<Vec<Option<ClassContext>>> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.m()];
    for &i in rows {
        per_class[ds.labels()[i]].push(i);
    }
    per_class
        .into_iter()
        .enumerate()
        .map(|(class, members)| {
            if members.is_empty() {
                return Ok(None);
            }
            let matrix = gather_rows(ds.features(), &members);
            let model =
                build_class_model(&matrix, class, cfg, layer1_seed(cfg.seed, fold_tag, class))?;
            Ok(Some(ClassContext { matrix, model }))
        })
        .collect()
}

/// Learned features for one instance: trial it against every class and
/// embed. Classes without a structure contribute zeros.
fn features_for_instance(
    x: &[f64],
    contexts: &[Option<ClassContext>],
    cfg: &IflConfig,
    multipliers: &[f64],
    fold_tag: u64,
    instance_tag: usize,
) -> Result<Vec<f64>> {
    let ell = cfg.feature_len();
    let mut per_class = Vec::with_capacity(contexts.len());
    for (class, ctx) in contexts.iter().enumerate() {
        match ctx {
            None => per_class.push(vec![0.0; ell]),
            Some(ctx) => {
                let outcome = match cfg.strategy {
                    Strategy::NearestCluster => trial_strategy1(&ctx.model, &ctx.matrix, x, cfg)?,
                    Strategy::Recluster => trial_strategy2(
                        &ctx.matrix,
                        x,
                        class,
                        cfg,
                        trial_seed(cfg.seed, fold_tag, class, instance_tag),
                    )?,
                };
                per_class.push(compute_error_features(
                    &ctx.model,
                    &outcome,
                    &ctx.matrix,
                    x,
                    cfg,
                )?);
            }
        }
    }
    embed_class(&per_class, multipliers)
}

/// Learn features for every training row and return the augmented dataset
/// (original columns first, then `m * feature_len` learned columns).
///
/// Rows are split into `cfg.r` stratified inner folds (seeded by
/// `cfg.seed`); each row's trials run against structures built from the
/// folds it is *not* in. Requires at least 2 instances per class so no
/// inner training set can lose a class entirely.
pub fn learn_train_features(train: &Dataset, cfg: &IflConfig) -> Result<Dataset> {
    cfg.validate()?;
    for class in 0..train.m() {
        let count = train.labels().iter().filter(|&&y| y == class).count();
        if count < 2 {
            return Err(IflError::validation(format!(
                "class {:?} has {count} instance(s); feature learning needs at least 2 per class",
                train.label_names()[class]
            )));
        }
    }
    let plan = stratified_folds(train, cfg.r, cfg.seed)?;
    augment_with_plan(train, &plan, cfg)
}

/// [`learn_train_features`] with a caller-supplied fold plan. The plan is
/// the source of truth for the inner split (its fold count may differ from
/// `cfg.r`); it must partition exactly the rows of `train`.
pub fn augment_with_plan(train: &Dataset, plan: &FoldPlan, cfg: &IflConfig) -> Result<Dataset> {
    cfg.validate()?;
    if plan.n() != train.n() {
        return Err(IflError::validation(format!(
            "fold plan covers {} rows, dataset has {}",
            plan.n(),
            train.n()
        )));
    }
    let m = train.m();
    let ell = cfg.feature_len();
    let multipliers = cfg.resolved_multipliers(m)?;

    let mut learned: Vec<Vec<f64>> = vec![Vec::new(); train.n()];
    for (fold, fold_rows) in plan.folds().iter().enumerate() {
        let inner = plan.complement(fold);
        let contexts = build_contexts(train, &inner, cfg, fold as u64)?;
        for (class, ctx) in contexts.iter().enumerate() {
            if ctx.is_none() {
                log::warn!(
                    "inner fold {fold}: class {:?} absent from its training part; \
                     its feature block is zeros for this fold",
                    train.label_names()[class]
                );
            }
        }
        let results: Vec<(usize, Vec<f64>)> = fold_rows
            .par_iter()
            .map(|&idx| {
                let vec = features_for_instance(
                    train.row(idx),
                    &contexts,
                    cfg,
                    &multipliers,
                    fold as u64,
                    idx,
                )?;
                Ok((idx, vec))
            })
            .collect::<Result<Vec<_>>>()?;
        for (idx, vec) in results {
            learned[idx] = vec;
        }
    }

    let width = cfg.augmented_width(train.h(), m);
    let mut features = Array2::zeros((train.n(), width));
    for (i, extra) in learned.iter().enumerate() {
        debug_assert_eq!(extra.len(), m * ell);
        let row = train.row(i);
        let mut out = features.row_mut(i);
        for (c, v) in row.iter().chain(extra.iter()).enumerate() {
            out[c] = *v;
        }
    }

    let header = train.header().map(|hd| {
        let mut feature_names = hd.feature_names.clone();
        feature_names.extend(augmented_feature_names(m, cfg));
        CsvHeader {
            feature_names,
            label_name: hd.label_name.clone(),
        }
    });

    Dataset::new(
        train.name().to_string(),
        features,
        train.labels().to_vec(),
        train.label_names().to_vec(),
        header,
    )
}

/// Learn features for unseen rows against structures built from the full
/// training set, returning `original columns + learned columns`.
///
/// Row `t` of the result corresponds to row `t` of `test`. A zero-row
/// `test` yields a zero-row matrix of the right width.
pub fn learn_test_features(
    train: &Dataset,
    test: &Array2<f64>,
    cfg: &IflConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if test.ncols() != train.h() {
        return Err(IflError::invalid_parameter(format!(
            "test rows have {} features, training data has {}",
            test.ncols(),
            train.h()
        )));
    }
    for ((r, c), v) in test.indexed_iter() {
        if !v.is_finite() {
            return Err(IflError::validation(format!(
                "non-finite test value {v} at row {r}, column {c}"
            )));
        }
    }
    let m = train.m();
    let multipliers = cfg.resolved_multipliers(m)?;
    let all_rows: Vec<usize> = (0..train.n()).collect();
    let contexts = build_contexts(train, &all_rows, cfg, TEST_PHASE_FOLD)?;

    let width = cfg.augmented_width(train.h(), m);
    // Rows carry their own index: collecting a parallel Result stream does
    // not preserve order.
    let rows: Vec<(usize, Vec<f64>)> = (0..test.nrows())
        .into_par_iter()
        .map(|t| {
            let x = row_slice(test, t);
            let learned =
                features_for_instance(x, &contexts, cfg, &multipliers, TEST_PHASE_FOLD, t)?;
            let mut row = Vec::with_capacity(width);
            row.extend_from_slice(x);
            row.extend(learned);
            Ok((t, row))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Array2::zeros((test.nrows(), width));
    for (i, row) in rows {
        for (c, v) in row.into_iter().enumerate() {
            out[[i, c]] = v;
        }
    }
    Ok(out)
}
