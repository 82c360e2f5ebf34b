//! Regression metrics, permutation feature importance and the
//! train-vs-test overfitting diagnostic.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::models::FittedModel;
use crate::rng;

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "{} labels vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Shape("no rows to score".into()));
    }
    Ok(())
}

fn sum_squared_error(y: &[f64], yhat: &[f64]) -> f64 {
    compensated_sum(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)))
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok((sum_squared_error(y, yhat) / y.len() as f64).sqrt())
}

/// `1 - SS_res / SS_tot`; an error when the labels are constant.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let n = y.len() as f64;
    let mean = compensated_sum(y.iter().copied()) / n;
    let ss_tot = compensated_sum(y.iter().map(|v| (v - mean) * (v - mean)));
    if ss_tot == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok(1.0 - sum_squared_error(y, yhat) / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub rmse: f64,
    pub r2: f64,
    pub n: usize,
}

impl MetricPair {
    pub fn compute(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(MetricPair {
            rmse: rmse(y, yhat)?,
            r2: r2(y, yhat)?,
            n: y.len(),
        })
    }

    pub fn of_model(model: &FittedModel, data: &Dataset) -> Result<Self> {
        let yhat = model.predict_dataset(data)?;
        Self::compute(data.labels(), &yhat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    pub index: usize,
    /// Mean RMSE increase over repeats.
    pub importance: f64,
    pub stddev: f64,
    /// RMSE increase of each repeat, in draw order.
    pub repeat_deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_rmse: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Sorted by descending importance, ties by feature index.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Names of features whose importance is strictly positive, in ranked order.
    pub fn retained(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.importance > 0.0)
            .map(|f| f.name.as_str())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let width = self
            .features
            .iter()
            .map(|f| f.name.chars().count())
            .max()
            .unwrap_or(7)
            .max(7);
        let mut out = format!(
            "{:>4}  {:<width$}  {:>14}  {:>12}\n",
            "Rank", "Feature", "RMSE increase", "Std dev"
        );
        for (i, f) in self.features.iter().enumerate() {
            out.push_str(&format!(
                "{:>4}  {:<width$}  {:>14.4}  {:>12.4}\n",
                i + 1,
                f.name,
                f.importance,
                f.stddev
            ));
        }
        out.push_str(&format!(
            "baseline RMSE {:.4}, {} repeats, seed {}\n",
            self.baseline_rmse, self.repeats, self.seed
        ));
        out
    }
}

/// Permutation importance: for each feature, shuffle its column `repeats`
/// times with a per-feature seeded stream and record the RMSE increase over
/// the unpermuted baseline.
pub fn permutation_importance(
    model: &FittedModel,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::Config("importance repeats must be >= 1".into()));
    }
    if data.n_rows() == 0 {
        return Err(Error::Shape("no rows to score".into()));
    }
    let baseline = rmse(data.labels(), &model.predict_dataset(data)?)?;

    let mut features: Vec<FeatureImportance> = (0..data.n_features())
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(seed, j as u64);
            let mut column = data.column(j);
            let deltas: Vec<f64> = (0..repeats)
                .map(|_| {
                    column.shuffle(&mut rng);
                    let permuted = data.with_column(j, &column);
                    let yhat = model.predict_dataset(&permuted)?;
                    Ok(rmse(data.labels(), &yhat)? - baseline)
                })
                .collect::<Result<_>>()?;
            let mean = deltas.iter().sum::<f64>() / repeats as f64;
            let stddev = if repeats > 1 {
                (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(FeatureImportance {
                name: data.feature_names()[j].clone(),
                index: j,
                importance: mean,
                stddev,
                repeat_deltas: deltas,
            })
        })
        .collect::<Result<_>>()?;
    features.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.index.cmp(&b.index)));
    Ok(ImportanceReport {
        baseline_rmse: baseline,
        repeats,
        seed,
        features,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverfitReport {
    pub train: MetricPair,
    pub test: MetricPair,
    pub r2_gap: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Flags the model when train R² exceeds test R² by more than `threshold`.
pub fn overfit_check(
    model: &FittedModel,
    train: &Dataset,
    test: &Dataset,
    threshold: f64,
) -> Result<OverfitReport> {
    if train.n_rows() == 0 || test.n_rows() == 0 {
        return Err(Error::Shape("overfit check needs non-empty train and test".into()));
    }
    if train.n_features() != test.n_features() {
        return Err(Error::Shape("train and test widths differ".into()));
    }
    let train_m = MetricPair::of_model(model, train)?;
    let test_m = MetricPair::of_model(model, test)?;
    let gap = train_m.r2 - test_m.r2;
    Ok(OverfitReport {
        train: train_m,
        test: test_m,
        r2_gap: gap,
        threshold,
        flagged: gap > threshold,
    })
}
