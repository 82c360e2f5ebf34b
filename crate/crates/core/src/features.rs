//! Leakage-safe feature engineering: median imputation, one-hot encoding and
//! optional standardization, all fitted on training rows only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CellValue, Column, ColumnKind, LabeledTable};
use crate::rng;

/// Dense row-major feature matrix plus labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    matrix: Vec<f64>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    n_rows: usize,
    n_features: usize,
}

impl Dataset {
    pub fn new(
        matrix: Vec<f64>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        let n_features = feature_names.len();
        if matrix.len() != n_rows * n_features {
            return Err(Error::Shape(format!(
                "matrix has {} values, expected {} x {}",
                matrix.len(),
                n_rows,
                n_features
            )));
        }
        if let Some(i) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite value at row {}, column {}",
                i / n_features.max(1),
                i % n_features.max(1)
            )));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite label".into()));
        }
        let mut names: Vec<&String> = feature_names.iter().collect();
        names.sort();
        names.dedup();
        if names.len() != n_features {
            return Err(Error::Shape("duplicate feature names".into()));
        }
        Ok(Dataset {
            matrix,
            labels,
            feature_names,
            n_rows,
            n_features,
        })
    }

    /// Builds a dataset from rows, naming features `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("rows have different widths".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let names = (0..width).map(|j| format!("x{j}")).collect();
        Dataset::new(rows.concat(), labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.matrix[row * self.n_features + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut matrix = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            matrix.extend_from_slice(self.row(r));
        }
        Dataset {
            matrix,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
            n_rows: rows.len(),
            n_features: self.n_features,
        }
    }

    /// Copy with column `j` replaced by `values`.
    pub fn with_column(&self, j: usize, values: &[f64]) -> Dataset {
        assert_eq!(values.len(), self.n_rows);
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate() {
            out.matrix[i * self.n_features + j] = *v;
        }
        out
    }

    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Dataset> {
        if labels.len() != self.n_rows {
            return Err(Error::Shape("label length mismatch".into()));
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericImputer {
    pub name: String,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryLevels {
    pub name: String,
    pub categories: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

/// Train-fitted transform, serializable for reuse across runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub numeric: Vec<NumericImputer>,
    pub categorical: Vec<CategoryLevels>,
    pub standardize: bool,
    /// One entry per output column when `standardize` is set.
    pub scaling: Vec<ColumnScale>,
    /// Encoded columns removed for having zero training variance.
    pub dropped_constant: Vec<String>,
    pub feature_names: Vec<String>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn category_key(cell: &CellValue) -> Option<String> {
    match cell {
        CellValue::Text(s) => Some(s.clone()),
        CellValue::Numeric(v) => Some(v.to_string()),
        CellValue::Missing { .. } => None,
    }
}

/// Fits imputation medians, category levels and (optionally) scaling on
/// `train_rows`.
pub fn fit_transform_spec(train_rows: &LabeledTable, standardize: bool) -> Result<FittedTransform> {
    if train_rows.n_rows() == 0 {
        return Err(Error::Fit("no training rows".into()));
    }
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    for col in &train_rows.table.columns {
        match col.kind {
            ColumnKind::Numeric => {
                let mut observed: Vec<f64> = col.cells.iter().filter_map(CellValue::as_f64).collect();
                let median = median(&mut observed).ok_or_else(|| {
                    Error::Fit(format!("numeric column {} has no observed values", col.name))
                })?;
                numeric.push(NumericImputer {
                    name: col.name.clone(),
                    median,
                });
            }
            ColumnKind::Categorical => {
                let mut cats: Vec<String> = col.cells.iter().filter_map(category_key).collect();
                cats.sort();
                cats.dedup();
                if cats.is_empty() {
                    return Err(Error::Fit(format!(
                        "categorical column {} has no observed values",
                        col.name
                    )));
                }
                categorical.push(CategoryLevels {
                    name: col.name.clone(),
                    categories: cats,
                });
            }
        }
    }

    let mut spec = FittedTransform {
        numeric,
        categorical,
        standardize: false,
        scaling: Vec::new(),
        dropped_constant: Vec::new(),
        feature_names: Vec::new(),
    };
    spec.feature_names = spec.encoded_names();
    if !standardize {
        return Ok(spec);
    }

    let encoded = spec.encode(train_rows)?;
    let width = spec.feature_names.len();
    let n = encoded.len() as f64;
    let mut keep = Vec::with_capacity(width);
    let mut scaling = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..width {
        let mean = encoded.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = encoded.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let name = spec.feature_names[j].clone();
        if std <= 1e-12 * mean.abs().max(1.0) {
            log::warn!("dropping zero-variance column {name} before standardization");
            dropped.push(name);
        } else {
            keep.push(name.clone());
            scaling.push(ColumnScale { name, mean, std });
        }
    }
    spec.standardize = true;
    spec.scaling = scaling;
    spec.dropped_constant = dropped;
    spec.feature_names = keep;
    Ok(spec)
}

impl FittedTransform {
    fn encoded_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numeric.iter().map(|c| c.name.clone()).collect();
        for c in &self.categorical {
            names.extend(c.categories.iter().map(|v| format!("{}={}", c.name, v)));
        }
        names
    }

    fn lookup<'a>(&self, rows: &'a LabeledTable, name: &str, kind: ColumnKind) -> Result<&'a Column> {
        let col = rows
            .table
            .column(name)
            .ok_or_else(|| Error::Schema(format!("column {name} missing from rows")))?;
        if col.kind != kind {
            return Err(Error::Schema(format!(
                "column {name} is {:?}, transform expects {:?}",
                col.kind, kind
            )));
        }
        Ok(col)
    }

    /// Imputed + one-hot rows, before scaling and constant-column removal.
    fn encode(&self, rows: &LabeledTable) -> Result<Vec<Vec<f64>>> {
        let numeric: Vec<(&Column, f64)> = self
            .numeric
            .iter()
            .map(|c| Ok((self.lookup(rows, &c.name, ColumnKind::Numeric)?, c.median)))
            .collect::<Result<_>>()?;
        let categorical: Vec<(&Column, &[String])> = self
            .categorical
            .iter()
            .map(|c| {
                Ok((
                    self.lookup(rows, &c.name, ColumnKind::Categorical)?,
                    c.categories.as_slice(),
                ))
            })
            .collect::<Result<_>>()?;
        let width: usize =
            numeric.len() + categorical.iter().map(|(_, cats)| cats.len()).sum::<usize>();

        Ok((0..rows.n_rows())
            .into_par_iter()
            .map(|r| {
                let mut out = Vec::with_capacity(width);
                for (col, fill) in &numeric {
                    out.push(col.cells[r].as_f64().unwrap_or(*fill));
                }
                for (col, cats) in &categorical {
                    let hot = category_key(&col.cells[r])
                        .and_then(|k| cats.binary_search(&k).ok());
                    out.extend((0..cats.len()).map(|i| if Some(i) == hot { 1.0 } else { 0.0 }));
                }
                out
            })
            .collect())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Applies a train-fitted transform. Missing numerics take the training
/// median; unseen or missing categories encode as all zeros.
pub fn apply_transform(spec: &FittedTransform, rows: &LabeledTable) -> Result<Dataset> {
    let encoded = spec.encode(rows)?;
    let matrix: Vec<f64> = if spec.standardize {
        let all = spec.encoded_names();
        let index: Vec<usize> = spec
            .scaling
            .iter()
            .map(|s| all.iter().position(|n| *n == s.name).expect("scaled column is encoded"))
            .collect();
        encoded
            .iter()
            .flat_map(|r| {
                index
                    .iter()
                    .zip(&spec.scaling)
                    .map(move |(&j, s)| (r[j] - s.mean) / s.std)
            })
            .collect()
    } else {
        encoded.concat()
    };
    Dataset::new(matrix, rows.label.clone(), spec.feature_names.clone())
}

/// Train-side size under round-half-up of `ratio * n`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    (ratio * n as f64 + 0.5).floor() as usize
}

/// Seeded shuffle of `0..n` cut into (first, second) partitions.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Split(format!("ratio {ratio} not in (0, 1)")));
    }
    let k = train_size(n, ratio);
    if k == 0 || k >= n {
        return Err(Error::Split(format!(
            "ratio {ratio} on {n} rows leaves an empty partition"
        )));
    }
    let perm = rng::permutation(n, seed);
    let (a, b) = perm.split_at(k);
    Ok((a.to_vec(), b.to_vec()))
}

/// Outer train/test partition of labeled rows, before any transform.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSplit {
    pub train: LabeledTable,
    pub test: LabeledTable,
    pub ratio: f64,
    pub seed: u64,
}

pub fn train_test_split(data: &LabeledTable, ratio: f64, seed: u64) -> Result<RowSplit> {
    if data.n_rows() < 2 {
        return Err(Error::Split(format!("need at least 2 rows, have {}", data.n_rows())));
    }
    let (train, test) = split_indices(data.n_rows(), ratio, seed)?;
    Ok(RowSplit {
        train: data.select_rows(&train),
        test: data.select_rows(&test),
        ratio,
        seed,
    })
}

/// Train/test datasets sharing one transform fitted on the train side.
#[derive(Clone, Debug)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub transform: FittedTransform,
    pub ratio: f64,
    pub seed: u64,
}

impl RowSplit {
    pub fn encode(&self, standardize: bool) -> Result<SplitPair> {
        let transform = fit_transform_spec(&self.train, standardize)?;
        Ok(SplitPair {
            train: apply_transform(&transform, &self.train)?,
            test: apply_transform(&transform, &self.test)?,
            transform,
            ratio: self.ratio,
            seed: self.seed,
        })
    }
}
