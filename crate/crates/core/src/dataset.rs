//! Tabular dataset container, CSV ingestion, stratified fold planning and
//! label grouping.
//!
//! Labels are stored as dense 0-based class ids; `label_names` maps ids back
//! to the strings found in the source file (first-appearance order unless an
//! explicit order is supplied).

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{IflError, Result};

/// Column names preserved from (or destined for) a CSV header line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvHeader {
    pub feature_names: Vec<String>,
    pub label_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    header: Option<CsvHeader>,
}

impl Dataset {
    /// Validating constructor. Checks: finite features, labels in range,
    /// every class id used, `n >= m >= 2`, `h >= 1`, header width matches.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        header: Option<CsvHeader>,
    ) -> Result<Self> {
        let (n, h) = (features.nrows(), features.ncols());
        let m = label_names.len();
        if h < 1 {
            return Err(IflError::validation("dataset needs at least one feature"));
        }
        if m < 2 {
            return Err(IflError::validation(format!(
                "dataset needs at least two classes, found {m}"
            )));
        }
        if n < m {
            return Err(IflError::validation(format!(
                "dataset needs at least as many rows ({n}) as classes ({m})"
            )));
        }
        if labels.len() != n {
            return Err(IflError::validation(format!(
                "label count {} does not match row count {n}",
                labels.len()
            )));
        }
        let mut seen = vec![false; m];
        for (i, &y) in labels.iter().enumerate() {
            if y >= m {
                return Err(IflError::validation(format!(
                    "row {i} has label id {y}, but only {m} classes are declared"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(IflError::validation(format!(
                "class {:?} has no instances",
                label_names[missing]
            )));
        }
        for ((r, c), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(IflError::validation(format!(
                    "non-finite feature value {v} at row {r}, column {c}"
                )));
            }
        }
        if let Some(hd) = &header {
            if hd.feature_names.len() != h {
                return Err(IflError::validation(format!(
                    "header declares {} feature names for {h} columns",
                    hd.feature_names.len()
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            label_names,
            header,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Instance count.
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// Feature count.
    pub fn h(&self) -> usize {
        self.features.ncols()
    }

    /// Class count.
    pub fn m(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        row_slice(&self.features, i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn header(&self) -> Option<&CsvHeader> {
        self.header.as_ref()
    }

    /// Row subset. Keeps the full class list (and hence class ids), so a
    /// subset may legitimately lack instances of some class; callers that
    /// care must check. Indices must be in range.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Array2::zeros((indices.len(), self.h()));
        let mut labels = Vec::with_capacity(indices.len());
        for (out, &idx) in indices.iter().enumerate() {
            if idx >= self.n() {
                return Err(IflError::invalid_parameter(format!(
                    "subset index {idx} out of range for {} rows",
                    self.n()
                )));
            }
            features.row_mut(out).assign(&self.features.row(idx));
            labels.push(self.labels[idx]);
        }
        Ok(Dataset {
            name: self.name.clone(),
            features,
            labels,
            label_names: self.label_names.clone(),
            header: self.header.clone(),
        })
    }

    /// Replace the feature matrix (same row count), e.g. after scaling.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.nrows() != self.n() {
            return Err(IflError::invalid_parameter(format!(
                "replacement features have {} rows, dataset has {}",
                features.nrows(),
                self.n()
            )));
        }
        let header = match (&self.header, features.ncols() == self.h()) {
            (Some(hd), true) => Some(hd.clone()),
            _ => None,
        };
        Ok(Dataset {
            name: self.name.clone(),
            features,
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
            header,
        })
    }

    pub fn from_csv_path(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string());
        let file = File::open(path)?;
        Dataset::from_csv_reader(name, file, opts)
    }

    pub fn from_csv_str(name: impl Into<String>, text: &str, opts: &CsvOptions) -> Result<Dataset> {
        Dataset::from_csv_reader(name, text.as_bytes(), opts)
    }

    pub fn from_csv_reader<R: Read>(
        name: impl Into<String>,
        reader: R,
        opts: &CsvOptions,
    ) -> Result<Dataset> {
        read_csv(name.into(), reader, opts)
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path)?;
        self.write_csv(file)
    }

    /// Writes features then the label column. A header line is emitted iff
    /// the dataset carries one. Floats use shortest-round-trip formatting,
    /// so writing is deterministic and lossless.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if let Some(hd) = &self.header {
            let mut rec: Vec<&str> = hd.feature_names.iter().map(String::as_str).collect();
            rec.push(&hd.label_name);
            w.write_record(&rec).map_err(csv_io_error)?;
        }
        let mut buf: Vec<String> = Vec::with_capacity(self.h() + 1);
        for i in 0..self.n() {
            buf.clear();
            for v in self.row(i) {
                buf.push(format!("{v}"));
            }
            buf.push(self.label_names[self.labels[i]].clone());
            w.write_record(buf.iter().map(String::as_str))
                .map_err(csv_io_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Borrow row `i` of a standard-layout matrix as a slice.
pub fn row_slice(matrix: &Array2<f64>, i: usize) -> &[f64] {
    matrix
        .row(i)
        .to_slice()
        .expect("feature matrices are row-major")
}

/// Copy the given rows into a new matrix, in the order given.
pub fn gather_rows(matrix: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), matrix.ncols()));
    for (o, &i) in rows.iter().enumerate() {
        out.row_mut(o).assign(&matrix.row(i));
    }
    out
}

fn csv_io_error(e: csv::Error) -> IflError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IflError::Io(io),
        other => IflError::Serialization(format!("csv write: {other:?}")),
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    /// 0-based position.
    Index(usize),
    /// Header name; requires `has_header`.
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = IflError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else if let Ok(i) = t.parse::<usize>() {
            Ok(LabelColumn::Index(i))
        } else if t.is_empty() {
            Err(IflError::invalid_parameter("empty label-column selector"))
        } else {
            Ok(LabelColumn::Name(t.to_string()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label_column: LabelColumn,
    pub delimiter: u8,
    /// Pins class ids to this order instead of first appearance. Labels in
    /// the file but not in the list are an error.
    pub label_order: Option<Vec<String>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: false,
            label_column: LabelColumn::Last,
            delimiter: b',',
            label_order: None,
        }
    }
}

fn read_csv<R: Read>(name: String, reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_reader(reader);

    // 1-based line number of the current record, counting any header.
    let mut line = 0usize;
    let mut records = rdr.records();

    let header_record: Option<csv::StringRecord> = if opts.has_header {
        line += 1;
        match records.next() {
            Some(rec) => Some(rec.map_err(|e| csv_read_error(e, line))?),
            None => {
                return Err(IflError::MalformedInput {
                    row: 1,
                    column: 1,
                    message: "expected a header line, file is empty".into(),
                })
            }
        }
    } else {
        None
    };

    let mut width: Option<usize> = header_record.as_ref().map(|h| h.len());
    let mut label_at: Option<usize> = None;
    let mut feature_cols: Vec<usize> = Vec::new();

    let mut features: Vec<f64> = Vec::new();
    let mut labels_raw: Vec<String> = Vec::new();
    let mut rows = 0usize;

    for rec in records {
        line += 1;
        let rec = rec.map_err(|e| csv_read_error(e, line))?;
        if rec.len() == 1 && rec.get(0).map(str::trim) == Some("") {
            // Trailing blank line.
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(IflError::MalformedInput {
                row: line,
                column: rec.len(),
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        if label_at.is_none() {
            let at = resolve_label_column(&opts.label_column, w, header_record.as_ref())?;
            feature_cols = (0..w).filter(|&c| c != at).collect();
            if feature_cols.is_empty() {
                return Err(IflError::validation(
                    "dataset needs at least one feature column besides the label",
                ));
            }
            label_at = Some(at);
        }
        let at = label_at.unwrap();
        for &c in &feature_cols {
            let cell = rec.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| IflError::MalformedInput {
                row: line,
                column: c + 1,
                message: format!("expected a number in a feature column, found {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(IflError::validation(format!(
                    "non-finite feature value {cell:?} at row {line}, column {}",
                    c + 1
                )));
            }
            features.push(v);
        }
        labels_raw.push(rec.get(at).unwrap_or("").trim().to_string());
        rows += 1;
    }

    if rows == 0 {
        return Err(IflError::validation("no data rows"));
    }

    let h = feature_cols.len();
    let mut label_names: Vec<String> = opts.label_order.clone().unwrap_or_default();
    let pinned = opts.label_order.is_some();
    let mut labels = Vec::with_capacity(rows);
    for (i, raw) in labels_raw.iter().enumerate() {
        match label_names.iter().position(|l| l == raw) {
            Some(id) => labels.push(id),
            None if !pinned => {
                label_names.push(raw.clone());
                labels.push(label_names.len() - 1);
            }
            None => {
                return Err(IflError::validation(format!(
                    "row {} has label {raw:?} which is not in the configured label list",
                    i + 1
                )));
            }
        }
    }
    if pinned {
        // Every declared class must actually occur.
        let mut seen = vec![false; label_names.len()];
        for &y in &labels {
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(IflError::validation(format!(
                "configured label {:?} never occurs in the file",
                label_names[missing]
            )));
        }
    }

    let header = header_record.map(|rec| {
        let at = label_at.unwrap();
        CsvHeader {
            feature_names: feature_cols
                .iter()
                .map(|&c| rec.get(c).unwrap_or("").trim().to_string())
                .collect(),
            label_name: rec.get(at).unwrap_or("").trim().to_string(),
        }
    });

    let matrix = Array2::from_shape_vec((rows, h), features)
        .map_err(|e| IflError::validation(format!("shape error assembling features: {e}")))?;
    Dataset::new(name, matrix, labels, label_names, header)
}

fn resolve_label_column(
    sel: &LabelColumn,
    width: usize,
    header: Option<&csv::StringRecord>,
) -> Result<usize> {
    match sel {
        LabelColumn::Last => Ok(width - 1),
        LabelColumn::Index(i) => {
            if *i < width {
                Ok(*i)
            } else {
                Err(IflError::invalid_parameter(format!(
                    "label column index {i} out of range for {width} columns"
                )))
            }
        }
        LabelColumn::Name(name) => {
            let header = header.ok_or_else(|| {
                IflError::invalid_parameter(
                    "label column selected by name but the file has no header",
                )
            })?;
            header.iter().position(|c| c.trim() == name).ok_or_else(|| {
                IflError::invalid_parameter(format!("no header column named {name:?}"))
            })
        }
    }
}

fn csv_read_error(e: csv::Error, line: usize) -> IflError {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                IflError::Io(io)
            } else {
                unreachable!()
            }
        }
        other => IflError::MalformedInput {
            row: line,
            column: 1,
            message: format!("{other:?}"),
        },
    }
}

/// A disjoint partition of `0..n` produced by [`stratified_folds`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    seed: u64,
}

impl FoldPlan {
    /// Construct from raw parts; used by callers that persist plans.
    /// Validates that the folds partition `0..n` for some `n`.
    pub fn from_folds(folds: Vec<Vec<usize>>, seed: u64) -> Result<FoldPlan> {
        let n: usize = folds.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for fold in &folds {
            for &i in fold {
                if i >= n || seen[i] {
                    return Err(IflError::validation(
                        "folds must partition 0..n with no repeats",
                    ));
                }
                seen[i] = true;
            }
        }
        Ok(FoldPlan { folds, seed })
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn r(&self) -> usize {
        self.folds.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// All indices not in fold `j`, ascending.
    pub fn complement(&self, j: usize) -> Vec<usize> {
        let n = self.n();
        let mut in_fold = vec![false; n];
        for &i in &self.folds[j] {
            in_fold[i] = true;
        }
        (0..n).filter(|&i| !in_fold[i]).collect()
    }

    /// Map from instance index to fold index.
    pub fn assignments(&self) -> Vec<usize> {
        let mut out = vec![0usize; self.n()];
        for (j, fold) in self.folds.iter().enumerate() {
            for &i in fold {
                out[i] = j;
            }
        }
        out
    }
}

/// Stratified partition into `r` folds.
///
/// Per class, instance indices are shuffled (seeded) and dealt one at a time
/// to the currently smallest fold (ties resolved toward the lowest fold
/// index). This keeps per-class counts within +/-1 across folds and total
/// sizes within +/-1, and guarantees any class with at least 2 members spans
/// at least 2 folds. Fold contents are sorted ascending.
pub fn stratified_folds(ds: &Dataset, r: usize, seed: u64) -> Result<FoldPlan> {
    let n = ds.n();
    if r < 2 {
        return Err(IflError::invalid_parameter(format!(
            "fold count must be at least 2, got {r}"
        )));
    }
    if r > n {
        return Err(IflError::invalid_parameter(format!(
            "fold count {r} exceeds instance count {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); r];
    let mut sizes = vec![0usize; r];
    for class in 0..ds.m() {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == class).collect();
        if members.len() == 1 {
            log::warn!(
                "dataset {:?}: class {:?} has a single instance; it cannot span multiple folds",
                ds.name,
                ds.label_names[class]
            );
        }
        members.shuffle(&mut rng);
        for idx in members {
            let target = (0..r).min_by_key(|&j| (sizes[j], j)).unwrap();
            folds[target].push(idx);
            sizes[target] += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}

/// Stratified subsample of `size` rows, returned as ascending indices.
///
/// Class quotas are proportional (largest remainder, ties toward the lower
/// class id) but never below 2, so the subsample can still be split per
/// class downstream; rows within a class are chosen by a seeded shuffle.
/// Requires every class to have at least 2 instances and `size >= 2m`.
pub fn stratified_sample(ds: &Dataset, size: usize, seed: u64) -> Result<Vec<usize>> {
    let n = ds.n();
    let m = ds.m();
    if size > n {
        return Err(IflError::invalid_parameter(format!(
            "sample size {size} exceeds instance count {n}"
        )));
    }
    if size < 2 * m {
        return Err(IflError::invalid_parameter(format!(
            "sample size {size} cannot give {m} classes 2 rows each"
        )));
    }
    let groups: Vec<Vec<usize>> = (0..m)
        .map(|class| (0..n).filter(|&i| ds.labels[i] == class).collect())
        .collect();
    if let Some(class) = groups.iter().position(|g| g.len() < 2) {
        return Err(IflError::validation(format!(
            "class {:?} has {} instance(s); sampling keeps at least 2 per class",
            ds.label_names[class],
            groups[class].len()
        )));
    }

    let mut quota: Vec<usize> = Vec::with_capacity(m);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(m);
    for (class, group) in groups.iter().enumerate() {
        let exact = size as f64 * group.len() as f64 / n as f64;
        quota.push(exact.floor() as usize);
        remainders.push((exact - exact.floor(), class));
    }
    let mut short = size - quota.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut cursor = remainders.iter().cycle();
    while short > 0 {
        // Some class is always below capacity while short > 0, since the
        // quotas sum to less than size <= n.
        let &(_, class) = cursor.next().unwrap();
        if quota[class] < groups[class].len() {
            quota[class] += 1;
            short -= 1;
        }
    }
    // Lift starved classes to 2 rows, taking from the currently largest
    // quota that can spare one.
    for class in 0..m {
        while quota[class] < 2 {
            let donor = (0..m)
                .filter(|&d| quota[d] > 2)
                .max_by_key(|&d| (quota[d], std::cmp::Reverse(d)))
                .ok_or_else(|| {
                    IflError::invalid_parameter(format!(
                        "sample size {size} cannot give {m} classes 2 rows each"
                    ))
                })?;
            quota[donor] -= 1;
            quota[class] += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(size);
    for (group, &take) in groups.iter().zip(&quota) {
        let mut members = group.clone();
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..take]);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Group `indices` by class. Returns `(class_id, members)` pairs ordered by
/// class id; classes with no members among `indices` are omitted, so the
/// result has q <= m entries. Member order follows the input order.
pub fn group_by_label(ds: &Dataset, indices: &[usize]) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ds.m()];
    for &i in indices {
        if i >= ds.n() {
            return Err(IflError::invalid_parameter(format!(
                "index {i} out of range for {} rows",
                ds.n()
            )));
        }
        groups[ds.labels[i]].push(i);
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .collect())
}

/// Per-column z-score parameters fitted on one set of rows and applied to
/// others. Constant columns get scale 1 (they map to 0, not NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Array2<f64>) -> Result<Standardizer> {
        let n = features.nrows();
        if n == 0 {
            return Err(IflError::invalid_parameter(
                "cannot fit a standardizer on zero rows",
            ));
        }
        let h = features.ncols();
        let mut mean = vec![0.0; h];
        for i in 0..n {
            for (c, v) in row_slice(features, i).iter().enumerate() {
                mean[c] += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; h];
        for i in 0..n {
            for (c, v) in row_slice(features, i).iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(IflError::invalid_parameter(format!(
                "standardizer fitted on {} columns, input has {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        let mut out = features.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} rows, {} features, {} classes)",
            self.name,
            self.n(),
            self.h(),
            self.m()
        )
    }
}
