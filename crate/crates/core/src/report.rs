//! Batch reproduction runs: evaluate every config in a directory and
//! render the outcomes next to their published reference scores.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierKind;
use crate::config::RunConfig;
use crate::dataset::Dataset;
use crate::error::{IflError, Result};
use crate::eval::cross_validate;

/// Bumped whenever the persisted report layout changes.
const REPORT_SCHEMA_VERSION: u32 = 1;

/// One method's cross-validated scores, with the published `[f1, accuracy]`
/// pair when the config carries one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub f1: f64,
    pub accuracy: f64,
    pub reference: Option<[f64; 2]>,
}

impl MethodRow {
    /// `[measured f1 - reference f1, measured accuracy - reference accuracy]`.
    pub fn deltas(&self) -> Option<[f64; 2]> {
        self.reference
            .map(|[f1, acc]| [self.f1 - f1, self.accuracy - acc])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub config_file: String,
    pub evaluated: bool,
    /// `[n, h, m]` of the loaded data; absent when the dataset was skipped.
    pub shape: Option<[usize; 3]>,
    pub folds: usize,
    pub normalize: bool,
    /// Skip reasons and informational mismatches.
    pub notes: Vec<String>,
    pub methods: Vec<MethodRow>,
    pub deep_baseline_accuracy: Option<f64>,
}

/// Every dataset's outcome, ordered by name.
///
/// `wall_time_seconds` is measured for console reporting but not serialized
/// and not part of equality, so persisted reports are byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub datasets: Vec<DatasetReport>,
    #[serde(skip, default)]
    pub wall_time_seconds: f64,
}

impl PartialEq for Report {
    fn eq(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version
            && self.seed == other.seed
            && self.datasets == other.datasets
    }
}

fn run_one(config_path: &Path, data_dir: &Path, seed: u64) -> Result<DatasetReport> {
    let cfg = RunConfig::load(config_path)?;
    let config_file = config_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| config_path.display().to_string());
    let mut report = DatasetReport {
        name: cfg.name.clone(),
        config_file,
        evaluated: false,
        shape: None,
        folds: cfg.eval.folds,
        normalize: cfg.eval.normalize,
        notes: Vec::new(),
        methods: Vec::new(),
        deep_baseline_accuracy: cfg
            .reference
            .as_ref()
            .and_then(|r| r.deep_baseline_accuracy),
    };

    let data_path = cfg.data_path(data_dir);
    if !data_path.is_file() {
        log::warn!(
            "{}: data file {} missing, skipped",
            cfg.name,
            data_path.display()
        );
        report.notes.push(format!(
            "data file {} not found; dataset skipped",
            data_path.display()
        ));
        return Ok(report);
    }

    let ds = Dataset::from_csv_path(&data_path, &cfg.csv_options()?)?;
    report.shape = Some([ds.n(), ds.h(), ds.m()]);
    if let Some(reference) = &cfg.reference {
        let expected = [reference.n, reference.h, reference.m];
        let actual = [ds.n(), ds.h(), ds.m()];
        for (axis, (exp, act)) in expected.iter().zip(actual).enumerate() {
            if let Some(exp) = exp {
                if *exp != act {
                    report.notes.push(format!(
                        "shape mismatch: expected {exp} {}, loaded {act}",
                        ["rows", "features", "classes"][axis]
                    ));
                }
            }
        }
    }

    let ifl = cfg.ifl_config(seed)?;
    for kind in ClassifierKind::ALL {
        let clf = cfg.classifier.to_config_for(kind)?;
        let result = cross_validate(&ds, None, &clf, cfg.eval.folds, seed, cfg.eval.normalize)?;
        report.methods.push(MethodRow {
            method: result.method,
            f1: result.macro_f1,
            accuracy: result.accuracy,
            reference: cfg.reference.as_ref().and_then(|r| r.baseline(kind)),
        });
    }
    if let Some(ifl) = &ifl {
        let clf = cfg.classifier_config()?;
        let result = cross_validate(
            &ds,
            Some(ifl),
            &clf,
            cfg.eval.folds,
            seed,
            cfg.eval.normalize,
        )?;
        report.methods.push(MethodRow {
            method: result.method,
            f1: result.macro_f1,
            accuracy: result.accuracy,
            reference: cfg.reference.as_ref().and_then(|r| r.ifl),
        });
    }
    report.evaluated = true;
    Ok(report)
}

/// Evaluate every `*.toml` under `configs_dir` (data paths resolved against
/// `data_dir`) and collect the outcomes. Missing data files skip their
/// dataset with a note; malformed configs or data files are hard errors.
pub fn reproduce(configs_dir: &Path, data_dir: &Path, seed: u64) -> Result<Report> {
    let start = Instant::now();
    let mut config_paths: Vec<PathBuf> = std::fs::read_dir(configs_dir)
        .map_err(|e| IflError::Config {
            path: configs_dir.to_path_buf(),
            message: format!("cannot list config directory: {e}"),
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
        .collect();
    config_paths.sort();
    if config_paths.is_empty() {
        log::warn!("no .toml configs under {}", configs_dir.display());
    }

    // Parallel collection arrives in nondeterministic order; the sort key
    // includes the config file so equal names cannot flip between runs.
    let mut datasets: Vec<DatasetReport> = config_paths
        .par_iter()
        .map(|path| run_one(path, data_dir, seed))
        .collect::<Result<Vec<_>>>()?;
    datasets.sort_by(|a, b| (&a.name, &a.config_file).cmp(&(&b.name, &b.config_file)));

    Ok(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        seed,
        datasets,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

fn fmt_score(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_delta(v: f64) -> String {
    format!("{v:+.4}")
}

impl Report {
    pub fn to_json_string(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json_str(text: &str) -> Result<Report> {
        let report: Report = serde_json::from_str(text)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(IflError::validation(format!(
                "report has schema version {}, this build reads {}",
                report.schema_version, REPORT_SCHEMA_VERSION
            )));
        }
        Ok(report)
    }

    /// Deterministic markdown rendering: a section per dataset with one
    /// row per method, reference scores and deltas beside the measurements.
    pub fn render_markdown(&self) -> String {
        let mut out = String::new();
        let evaluated = self.datasets.iter().filter(|d| d.evaluated).count();
        let _ = writeln!(out, "# Reproduction report");
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Seed {}. {evaluated} of {} dataset(s) evaluated.",
            self.seed,
            self.datasets.len()
        );

        for ds in &self.datasets {
            let _ = writeln!(out);
            match ds.shape {
                Some([n, h, m]) => {
                    let _ = writeln!(
                        out,
                        "## {} (n={n}, h={h}, m={m}; {}-fold{})",
                        ds.name,
                        ds.folds,
                        if ds.normalize { ", standardized" } else { "" }
                    );
                }
                None => {
                    let _ = writeln!(out, "## {} (skipped)", ds.name);
                }
            }
            for note in &ds.notes {
                let _ = writeln!(out);
                let _ = writeln!(out, "- {note}");
            }
            if !ds.methods.is_empty() {
                let _ = writeln!(out);
                let _ = writeln!(
                    out,
                    "| method | F1 | accuracy | ref F1 | ref accuracy | dF1 | daccuracy |"
                );
                let _ = writeln!(out, "|---|---|---|---|---|---|---|");
                for row in &ds.methods {
                    let (rf, ra, df, da) = match (row.reference, row.deltas()) {
                        (Some([f1, acc]), Some([df, da])) => {
                            (fmt_score(f1), fmt_score(acc), fmt_delta(df), fmt_delta(da))
                        }
                        _ => ("-".into(), "-".into(), "-".into(), "-".into()),
                    };
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {rf} | {ra} | {df} | {da} |",
                        row.method,
                        fmt_score(row.f1),
                        fmt_score(row.accuracy)
                    );
                }
            }
            if let Some(deep) = ds.deep_baseline_accuracy {
                let _ = writeln!(out);
                let _ = writeln!(
                    out,
                    "Strongest published deep-model accuracy on this dataset: {}.",
                    fmt_score(deep)
                );
            }
        }
        out
    }
}
