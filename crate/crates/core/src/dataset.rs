//! Loading, standardizing, subsampling and splitting binary classification data.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense feature matrix (row-major, `m x n`) with labels in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    source_id: String,
    n: usize,
}

impl Dataset {
    /// Builds a dataset from rows, checking every invariant: labels are exactly
    /// `+-1`, both classes are present, all values are finite, `m >= 2`, `n >= 1`.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let m = rows.len();
        if m != labels.len() {
            return Err(Error::domain(format!(
                "{} feature rows but {} labels",
                m,
                labels.len()
            )));
        }
        if m < 2 {
            return Err(Error::domain("a dataset needs at least two samples"));
        }
        let n = feature_names.len();
        if n == 0 {
            return Err(Error::domain("a dataset needs at least one feature"));
        }
        let mut features = Vec::with_capacity(m * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::domain(format!(
                    "row {} has {} values, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::domain(format!("row {i} holds non-finite value {v}")));
            }
            features.extend(row);
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::domain(format!("label {l} is not -1 or +1")));
        }
        if !labels.contains(&1.0) || !labels.contains(&-1.0) {
            return Err(Error::domain("both classes must be present"));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            source_id: source_id.into(),
            n,
        })
    }

    /// Same as [`Dataset::new`] with generated names `f0, f1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let names = (0..n).map(|j| format!("f{j}")).collect();
        Self::new(rows, labels, names, "inline")
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n + j]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices.iter().map(|&i| self.row(i).to_vec()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(
            rows,
            labels,
            self.feature_names.clone(),
            self.source_id.clone(),
        )
    }

    /// Returns a copy with a new leading feature column.
    pub(crate) fn prepend_column(&self, name: &str, values: &[f64]) -> Result<Dataset> {
        let rows = self
            .rows()
            .zip(values)
            .map(|(r, &v)| {
                let mut out = Vec::with_capacity(self.n + 1);
                out.push(v);
                out.extend_from_slice(r);
                out
            })
            .collect();
        let mut names = Vec::with_capacity(self.n + 1);
        names.push(name.to_string());
        names.extend(self.feature_names.iter().cloned());
        Dataset::new(rows, self.labels.clone(), names, self.source_id.clone())
    }

    fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.n_samples()).partition(|&i| self.labels[i] > 0.0)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "?" | "NA" | "NaN" | "nan")
}

/// Reads a headered CSV file. The label column may hold arbitrary strings but
/// exactly two distinct values; `positive_label` maps to `+1`. Rows with a
/// missing cell (empty, `?`, `NA`) are dropped.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    positive_label: &str,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::format(1, format!("no column named `{label_column}`")))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_error(e, line))?;
        if record.len() != header.len() {
            return Err(Error::format(
                line,
                format!("{} cells, header has {}", record.len(), header.len()),
            ));
        }
        if record.iter().any(is_missing) {
            continue;
        }
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(line, format!("non-numeric value `{cell}` in column `{}`", &header[j]))
            })?;
            if !v.is_finite() {
                return Err(Error::format(line, format!("non-finite value `{cell}`")));
            }
            row.push(v);
        }
        rows.push(row);
        raw_labels.push(record[label_idx].to_string());
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if distinct.len() > 2 {
        return Err(Error::domain(format!(
            "label column `{label_column}` has {} classes, expected 2",
            distinct.len()
        )));
    }
    if !distinct.contains(positive_label) {
        return Err(Error::domain(format!(
            "positive label `{positive_label}` does not occur in column `{label_column}`"
        )));
    }
    let labels = raw_labels
        .iter()
        .map(|l| if l == positive_label { 1.0 } else { -1.0 })
        .collect();
    Dataset::new(rows, labels, names, source_name(path))
}

/// The two label values of a CSV column, sorted. Useful for picking a default
/// positive label.
pub fn csv_label_values(path: impl AsRef<Path>, label_column: &str) -> Result<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| csv_error(e, 1))?;
    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::format(1, format!("no column named `{label_column}`")))?;
    let mut values = BTreeSet::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, k + 2))?;
        if let Some(v) = record.get(idx).filter(|v| !is_missing(v)) {
            values.insert(v.to_string());
        }
    }
    Ok(values.into_iter().collect())
}

fn csv_error(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::format(line, format!("{kind:?}")),
    }
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads the sparse `label index:value ...` format with 1-based indices.
/// Labels are numeric; positive values map to `+1`, everything else to `-1`.
/// When `n_hint` is given it fixes the feature count and larger indices are
/// rejected; otherwise the largest index seen defines it.
pub fn load_sparse(path: impl AsRef<Path>, n_hint: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| Error::format(lineno, format!("bad label `{label_tok}`")))?;
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| Error::format(lineno, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad index `{idx}`")))?;
            if idx == 0 {
                return Err(Error::format(lineno, "indices are 1-based"));
            }
            if let Some(n) = n_hint {
                if idx > n {
                    return Err(Error::format(
                        lineno,
                        format!("index {idx} exceeds feature count {n}"),
                    ));
                }
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::format(lineno, format!("bad value `{val}`")))?;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        entries.push(row);
        labels.push(if label > 0.0 { 1.0 } else { -1.0 });
    }

    let n = n_hint.unwrap_or(max_index);
    let rows = entries
        .into_iter()
        .map(|sparse| {
            let mut dense = vec![0.0; n];
            for (j, v) in sparse {
                dense[j] = v;
            }
            dense
        })
        .collect();
    let names = (1..=n).map(|j| format!("x{j}")).collect();
    Dataset::new(rows, labels, names, source_name(path))
}

/// Per-column z-score parameters fitted on one dataset and applicable to another
/// with the same columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    /// Zero marks a constant column, which maps to all zeros.
    scales: Vec<f64>,
}

impl Standardizer {
    /// Column means and sample standard deviations (`m - 1` denominator).
    pub fn fit(d: &Dataset) -> Self {
        let m = d.n_samples() as f64;
        let n = d.n_features();
        let mut means = vec![0.0; n];
        for row in d.rows() {
            for (mu, &v) in means.iter_mut().zip(row) {
                *mu += v;
            }
        }
        means.iter_mut().for_each(|mu| *mu /= m);
        let mut scales = vec![0.0; n];
        for row in d.rows() {
            for j in 0..n {
                let c = row[j] - means[j];
                scales[j] += c * c;
            }
        }
        for (j, s) in scales.iter_mut().enumerate() {
            let sd = (*s / (m - 1.0)).sqrt();
            // relative threshold: a column of identical large values can pick up rounding noise
            *s = if sd > 1e-12 * means[j].abs().max(1.0) { sd } else { 0.0 };
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        if d.n_features() != self.means.len() {
            return Err(Error::domain(format!(
                "standardizer fitted on {} features, dataset has {}",
                self.means.len(),
                d.n_features()
            )));
        }
        let rows = d
            .rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if self.scales[j] == 0.0 {
                            0.0
                        } else {
                            (v - self.means[j]) / self.scales[j]
                        }
                    })
                    .collect()
            })
            .collect();
        Dataset::new(
            rows,
            d.labels.clone(),
            d.feature_names.clone(),
            d.source_id.clone(),
        )
    }
}

/// Rescales every column to zero mean and unit sample variance.
pub fn standardize(d: &Dataset) -> Dataset {
    Standardizer::fit(d)
        .transform(d)
        .expect("standardizer fitted on the same dataset")
}

/// Splits `total` draws between the two classes in proportion to their sizes,
/// keeping at least one of each.
fn stratified_counts(total: usize, n_pos: usize, n_neg: usize) -> Result<(usize, usize)> {
    if total < 2 {
        return Err(Error::domain(format!(
            "cannot keep both classes with only {total} samples"
        )));
    }
    let m = n_pos + n_neg;
    let ideal = (total as f64 * n_pos as f64 / m as f64).round() as usize;
    let lo = 1.max(total.saturating_sub(n_neg));
    let hi = n_pos.min(total - 1);
    if lo > hi {
        return Err(Error::domain(format!(
            "cannot draw {total} samples from {n_pos} positive and {n_neg} negative"
        )));
    }
    let pos = ideal.clamp(lo, hi);
    Ok((pos, total - pos))
}

fn draw(indices: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v = indices.to_vec();
    v.shuffle(rng);
    v.truncate(k);
    v
}

/// Stratified random subset of `m_target` rows. Rows keep their original
/// relative order; identical seeds give identical subsets.
pub fn subsample(d: &Dataset, m_target: usize, seed: u64) -> Result<Dataset> {
    let m = d.n_samples();
    if m_target > m {
        return Err(Error::domain(format!(
            "requested {m_target} samples from a dataset of {m}"
        )));
    }
    if m_target == m {
        return Ok(d.clone());
    }
    let (pos, neg) = d.class_indices();
    let (k_pos, k_neg) = stratified_counts(m_target, pos.len(), neg.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = draw(&pos, k_pos, &mut rng);
    keep.extend(draw(&neg, k_neg, &mut rng));
    keep.sort_unstable();
    d.select_rows(&keep)
}

/// Stratified train/test split; `test_fraction` of the rows (at least one per
/// class) go to the test set.
pub fn train_test_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let m = d.n_samples();
    let n_test = ((m as f64 * test_fraction).round() as usize).clamp(2, m.saturating_sub(2));
    let (pos, neg) = d.class_indices();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::domain("each class needs two samples to split"));
    }
    let (t_pos, t_neg) = stratified_counts(n_test, pos.len() - 1, neg.len() - 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = draw(&pos, t_pos, &mut rng);
    test.extend(draw(&neg, t_neg, &mut rng));
    test.sort_unstable();
    let train: Vec<usize> = (0..m).filter(|i| test.binary_search(i).is_err()).collect();
    Ok((d.select_rows(&train)?, d.select_rows(&test)?))
}
