//! Error-representation feature learning.
//!
//! The core idea: to describe an instance, trial-insert it into the cluster
//! structure of *every* class and record how much each structure has to move
//! to accommodate it. An instance perturbs its own class little and foreign
//! classes a lot, so the perturbation profile is a discriminative feature
//! vector in its own right. The learned vectors are appended to the original
//! features and fed to ordinary classifiers.
//!
//! Modules:
//! - [`dataset`]: tabular container, CSV ingestion, stratified fold planning
//! - [`metric`]: pluggable distance metrics (one per pipeline layer)
//! - [`cluster`]: seeded k-means with configurable assignment metric
//! - [`engine`]: the three-layer feature learner itself
//! - [`classifier`]: CART, boosted trees, Gaussian naive Bayes, KNN
//! - [`eval`]: cross-validated scoring and result persistence
//! - [`report`]: multi-dataset comparison reports
//! - [`config`]: TOML run configuration

pub mod classifier;
pub mod cluster;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod eval;
pub mod metric;
pub mod report;

pub use error::{IflError, Result};
