//! Per-(algorithm, validator) evaluation rows and the comparison table with
//! accuracy, RMSE and fit-time rankings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::OverfitReport;
use crate::models::{EstimatorKind, ParamMap};
use crate::tuning::Validator;

/// One cell of the estimator × validator matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub algorithm: EstimatorKind,
    pub validator: Validator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub test_r2: Option<f64>,
    #[serde(default)]
    pub test_rmse: Option<f64>,
    #[serde(default)]
    pub fit_time_secs: Option<f64>,
    #[serde(default)]
    pub best_params: Option<ParamMap>,
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub k_or_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overfit: Option<OverfitReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<String>,
}

impl EvalRow {
    /// Row carrying only the three headline numbers.
    pub fn metrics(
        algorithm: EstimatorKind,
        validator: Validator,
        r2: f64,
        rmse: f64,
        fit_time_secs: f64,
    ) -> Self {
        EvalRow {
            algorithm,
            validator,
            error: None,
            test_r2: Some(r2),
            test_rmse: Some(rmse),
            fit_time_secs: Some(fit_time_secs),
            best_params: None,
            grid_size: None,
            k_or_ratio: None,
            overfit: None,
            model_file: None,
        }
    }

    pub fn failed(algorithm: EstimatorKind, validator: Validator, error: String) -> Self {
        EvalRow {
            algorithm,
            validator,
            error: Some(error),
            test_r2: None,
            test_rmse: None,
            fit_time_secs: None,
            best_params: None,
            grid_size: None,
            k_or_ratio: None,
            overfit: None,
            model_file: None,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
            && self.test_r2.is_some_and(f64::is_finite)
            && self.test_rmse.is_some_and(f64::is_finite)
            && self.fit_time_secs.is_some_and(f64::is_finite)
    }

    pub fn key(&self) -> RowKey {
        RowKey {
            algorithm: self.algorithm,
            validator: self.validator,
        }
    }

    fn r2(&self) -> f64 {
        self.test_r2.unwrap_or(f64::NAN)
    }

    fn rmse(&self) -> f64 {
        self.test_rmse.unwrap_or(f64::NAN)
    }

    fn time(&self) -> f64 {
        self.fit_time_secs.unwrap_or(f64::NAN)
    }
}

/// Output of `train`: the evaluation matrix plus run context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub split_ratio: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub feature_names: Vec<String>,
    pub rows: Vec<EvalRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub algorithm: EstimatorKind,
    pub validator: Validator,
}

impl std::fmt::Display for RowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.algorithm, self.validator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Successful rows in fixed (algorithm, validator) order.
    pub rows: Vec<EvalRow>,
    pub failed: Vec<RowKey>,
    /// Descending test R², ties broken by lower RMSE.
    pub r2_ranking: Vec<RowKey>,
    /// Ascending test RMSE.
    pub rmse_ranking: Vec<RowKey>,
    /// Ascending fit time.
    pub time_ranking: Vec<RowKey>,
    /// Algorithms in order of their best row under each ranking.
    pub r2_algorithm_order: Vec<EstimatorKind>,
    pub rmse_algorithm_order: Vec<EstimatorKind>,
    pub time_algorithm_order: Vec<EstimatorKind>,
    pub lowest_rmse: RowKey,
}

fn algorithm_order(ranking: &[RowKey]) -> Vec<EstimatorKind> {
    let mut out = Vec::new();
    for k in ranking {
        if !out.contains(&k.algorithm) {
            out.push(k.algorithm);
        }
    }
    out
}

/// Ranks the successful rows. Errors when none succeeded.
pub fn compare(rows: &[EvalRow]) -> Result<ComparisonReport> {
    let mut ok: Vec<EvalRow> = rows.iter().filter(|r| r.succeeded()).cloned().collect();
    if ok.is_empty() {
        return Err(Error::NoSuccessfulRows);
    }
    ok.sort_by_key(EvalRow::key);
    let failed = rows.iter().filter(|r| !r.succeeded()).map(EvalRow::key).collect();

    let mut by_r2: Vec<&EvalRow> = ok.iter().collect();
    by_r2.sort_by(|a, b| b.r2().total_cmp(&a.r2()).then(a.rmse().total_cmp(&b.rmse())));
    let mut by_rmse: Vec<&EvalRow> = ok.iter().collect();
    by_rmse.sort_by(|a, b| a.rmse().total_cmp(&b.rmse()).then(b.r2().total_cmp(&a.r2())));
    let mut by_time: Vec<&EvalRow> = ok.iter().collect();
    by_time.sort_by(|a, b| a.time().total_cmp(&b.time()));

    let keys = |v: Vec<&EvalRow>| -> Vec<RowKey> { v.into_iter().map(EvalRow::key).collect() };
    let r2_ranking = keys(by_r2);
    let rmse_ranking = keys(by_rmse);
    let time_ranking = keys(by_time);
    Ok(ComparisonReport {
        r2_algorithm_order: algorithm_order(&r2_ranking),
        rmse_algorithm_order: algorithm_order(&rmse_ranking),
        time_algorithm_order: algorithm_order(&time_ranking),
        lowest_rmse: rmse_ranking[0],
        r2_ranking,
        rmse_ranking,
        time_ranking,
        failed,
        rows: ok,
    })
}

fn join(order: &[EstimatorKind], sep: &str) -> String {
    order.iter().map(|k| k.code()).collect::<Vec<_>>().join(sep)
}

impl ComparisonReport {
    /// Aligned-column table (metrics to 4 decimals, seconds to 2) followed
    /// by the rankings.
    pub fn to_text(&self) -> String {
        let header = ["Algorithm", "Validator", "R²", "RMSE", "Fit time (s)"];
        let body: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.algorithm.long_name().to_owned(),
                    r.validator.code().to_owned(),
                    format!("{:.4}", r.r2()),
                    format!("{:.4}", r.rmse()),
                    format!("{:.2}", r.time()),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                let pad = w - cell.chars().count();
                if i > 0 {
                    s.push_str("  ");
                }
                if i < 2 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
            }
            s.trim_end().to_owned() + "\n"
        };

        let mut out = line(&header.map(str::to_owned));
        let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &body {
            out.push_str(&line(row));
        }
        out.push('\n');
        out.push_str(&format!(
            "Accuracy (R², best first):    {}\n",
            join(&self.r2_algorithm_order, " > ")
        ));
        out.push_str(&format!(
            "Accuracy (RMSE, best first):  {}\n",
            join(&self.rmse_algorithm_order, " > ")
        ));
        out.push_str(&format!(
            "Fit time (fastest first):     {}\n",
            join(&self.time_algorithm_order, " < ")
        ));
        out.push_str(&format!("Lowest RMSE: {}\n", self.lowest_rmse));
        if !self.failed.is_empty() {
            let f: Vec<String> = self.failed.iter().map(RowKey::to_string).collect();
            out.push_str(&format!("Failed: {}\n", f.join(", ")));
        }
        out
    }
}
