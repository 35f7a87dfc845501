//! Tabular binary-classification datasets and seeded train/test splits.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sign::Sign;

/// Dense `N x D` feature matrix with `{+1, -1}` labels.
///
/// Both classes are present, all features are finite, `N >= 2` and `D >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<Sign>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<Sign>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_features) {
            return Err(Error::InvalidData(format!(
                "row {i} has {} features, expected {n_features}",
                r.len()
            )));
        }
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(features, n_features, labels, None)
    }

    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<Sign>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("need at least 2 samples, got {n}")));
        }
        if n_features == 0 {
            return Err(Error::InvalidData("need at least one feature".into()));
        }
        if features.len() != n * n_features {
            return Err(Error::InvalidData(format!(
                "feature buffer has {} values, expected {n} x {n_features}",
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        if !labels.contains(&Sign::Pos) || !labels.contains(&Sign::Neg) {
            return Err(Error::InvalidData("both classes must be present".into()));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(Error::InvalidData(format!(
                    "{} feature names for {n_features} features",
                    names.len()
                )));
            }
        }
        Ok(Self {
            features,
            n_features,
            labels,
            feature_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Sign {
        self.labels[i]
    }

    pub fn feature(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_features + col]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows picked by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::from_flat(features, self.n_features, labels, self.feature_names.clone())
    }
}

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    /// Purely numeric strings are taken as 0-based indices.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: ColumnRef,
    pub positive_label: String,
    /// Dropped if present in the header.
    pub id_column: Option<String>,
}

impl CsvOptions {
    pub fn new(label_column: impl Into<ColumnRef>, positive_label: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            positive_label: positive_label.into(),
            id_column: Some("id".to_string()),
        }
    }
}

impl From<String> for ColumnRef {
    fn from(s: String) -> Self {
        ColumnRef::from(s.as_str())
    }
}

/// Reads a headed, comma-separated file.
///
/// The positive label maps to `+1`, the other label value to `-1`. Every
/// column other than the label and id columns must be numeric.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &path.display().to_string(), opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, source: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = match &opts.label_column {
        ColumnRef::Index(i) if *i < header.len() => *i,
        ColumnRef::Index(i) => {
            return Err(Error::InvalidData(format!(
                "{source}: label column index {i} out of range ({} columns)",
                header.len()
            )))
        }
        ColumnRef::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("{source}: no column named '{name}'")))?,
    };
    let id_idx = opts
        .id_column
        .as_ref()
        .and_then(|id| header.iter().position(|h| h == id))
        .filter(|&i| i != label_idx);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != label_idx && Some(c) != id_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidData(format!("{source}: no feature columns")));
    }

    let mut features = Vec::new();
    let mut raw_labels = Vec::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let line = row_no + 2;
        if record.len() != header.len() {
            return Err(Error::Parse {
                path: source.to_string(),
                line,
                message: format!("{} fields, header has {}", record.len(), header.len()),
            });
        }
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: source.to_string(),
                line,
                message: format!("column '{}': cannot parse '{cell}' as a number", header[c]),
            })?;
            features.push(v);
        }
        raw_labels.push(record[label_idx].trim().to_string());
    }
    if raw_labels.is_empty() {
        return Err(Error::InvalidData(format!("{source}: no data rows")));
    }

    let distinct: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(Error::InvalidData(format!(
            "{source}: label column must have exactly two values, found {}: {:?}",
            distinct.len(),
            distinct
        )));
    }
    if !distinct.contains(opts.positive_label.as_str()) {
        return Err(Error::InvalidData(format!(
            "{source}: positive label '{}' not among {:?}",
            opts.positive_label, distinct
        )));
    }
    let labels = raw_labels
        .iter()
        .map(|l| {
            if *l == opts.positive_label {
                Sign::Pos
            } else {
                Sign::Neg
            }
        })
        .collect();
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::from_flat(features, feature_cols.len(), labels, Some(names))
}

/// Seeded hold-out split; the test part gets `round(test_fraction * N)` rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        Ok(Self { test_fraction, seed })
    }

    pub fn test_size(&self, n: usize) -> usize {
        // f64::round breaks .5 away from zero, i.e. toward the test part
        (self.test_fraction * n as f64).round() as usize
    }
}

/// Shuffles row indices with ChaCha8 keyed by the seed and partitions them.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let spec = SplitSpec::new(spec.test_fraction, spec.seed)?;
    let n = ds.n_samples();
    let n_test = spec.test_size(n);
    if n_test == 0 || n_test >= n {
        return Err(Error::DegenerateSplit(format!(
            "test size {n_test} of {n} leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let (test_idx, train_idx) = idx.split_at(n_test);
    let part = |ix: &[usize], which: &str| {
        ds.subset(ix)
            .map_err(|_| Error::DegenerateSplit(format!("{which} part lacks one of the classes")))
    };
    Ok((part(train_idx, "train")?, part(test_idx, "test")?))
}
