//! Grid search under train-validation split (TVS) or k-fold
//! cross-validation (CV), with whole-procedure wall-clock timing.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::features::{split_indices, Dataset};
use crate::models::{EstimatorKind, FittedModel, ParamMap, ParamValue, Params};
use crate::rng;

/// Candidate values per hyperparameter key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid(pub BTreeMap<String, Vec<ParamValue>>);

impl ParamGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, values: Vec<ParamValue>) -> Self {
        self.0.insert(key.to_owned(), values);
        self
    }

    pub fn size(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }
}

/// Cartesian product of the grid. Keys are visited in sorted order with the
/// last key varying fastest; values keep their declared order.
pub fn expand_grid(grid: &ParamGrid) -> Result<Vec<ParamMap>> {
    if let Some((key, _)) = grid.0.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Grid(format!("no candidate values for {key:?}")));
    }
    let mut out = vec![ParamMap::new()];
    for (key, values) in &grid.0 {
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut m = base.clone();
                    m.insert(key, v.clone());
                    m
                })
            })
            .collect();
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Validator {
    #[serde(rename = "TVS")]
    TrainValidationSplit,
    #[serde(rename = "CV")]
    CrossValidation,
}

impl Validator {
    pub const ALL: [Validator; 2] = [Validator::TrainValidationSplit, Validator::CrossValidation];

    pub fn code(self) -> &'static str {
        match self {
            Validator::TrainValidationSplit => "TVS",
            Validator::CrossValidation => "CV",
        }
    }
}

impl fmt::Display for Validator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: ParamMap,
    /// Validation RMSE (mean over folds under CV).
    pub rmse: f64,
    pub fold_rmse: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunedResult {
    pub estimator: EstimatorKind,
    pub validator: Validator,
    /// Inner ratio for TVS, k for CV.
    pub k_or_ratio: f64,
    pub best_params: ParamMap,
    /// Winner refit on the whole training partition.
    pub best_model: FittedModel,
    pub scores: Vec<CandidateScore>,
    pub grid_size: usize,
    pub fit_time_secs: f64,
}

fn candidates(kind: EstimatorKind, grid: &ParamGrid) -> Result<Vec<ParamMap>> {
    let maps = expand_grid(grid)?;
    for m in &maps {
        Params::resolve(m, kind)?;
    }
    Ok(maps)
}

/// Index of the lowest score; ties keep the earliest, NaN never wins.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *s < scores[b]) {
            best = Some(i);
        }
    }
    best.or(if scores.is_empty() { None } else { Some(0) })
}

fn holdout_rmse(kind: EstimatorKind, params: &ParamMap, fit_on: &Dataset, score_on: &Dataset) -> Result<f64> {
    let model = kind.fit(fit_on, params)?;
    rmse(score_on.labels(), &model.predict_dataset(score_on)?)
}

fn finish(
    kind: EstimatorKind,
    validator: Validator,
    k_or_ratio: f64,
    train: &Dataset,
    scores: Vec<CandidateScore>,
    started: Instant,
) -> Result<TunedResult> {
    let overall: Vec<f64> = scores.iter().map(|s| s.rmse).collect();
    let best = select_best(&overall).ok_or_else(|| Error::Grid("empty grid".into()))?;
    let best_params = scores[best].params.clone();
    let best_model = kind.fit(train, &best_params)?;
    let grid_size = scores.len();
    Ok(TunedResult {
        estimator: kind,
        validator,
        k_or_ratio,
        best_params,
        best_model,
        scores,
        grid_size,
        fit_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// Train-validation split: one seeded inner split of `train`, every
/// candidate scored on the inner validation rows, winner refit on `train`.
pub fn tvs_fit(
    kind: EstimatorKind,
    grid: &ParamGrid,
    train: &Dataset,
    inner_ratio: f64,
    seed: u64,
) -> Result<TunedResult> {
    let started = Instant::now();
    let maps = candidates(kind, grid)?;
    let (fit_idx, val_idx) = split_indices(train.n_rows(), inner_ratio, seed)?;
    let inner_train = train.select_rows(&fit_idx);
    let inner_val = train.select_rows(&val_idx);
    let scores = maps
        .into_par_iter()
        .map(|params| {
            let r = holdout_rmse(kind, &params, &inner_train, &inner_val)?;
            Ok(CandidateScore {
                params,
                rmse: r,
                fold_rmse: vec![r],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    finish(kind, Validator::TrainValidationSplit, inner_ratio, train, scores, started)
}

/// Seeded fold assignment: position `p` of a permutation of `0..n` goes to
/// fold `p mod k`, so fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Fold(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Fold(format!("k = {k} exceeds {n} rows")));
    }
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (p, row) in rng::permutation(n, seed).into_iter().enumerate() {
        folds[p % k].push(row);
    }
    Ok(folds)
}

/// k-fold CV: a candidate's score is the mean held-out RMSE over the folds.
pub fn cv_fit(
    kind: EstimatorKind,
    grid: &ParamGrid,
    train: &Dataset,
    k: usize,
    seed: u64,
) -> Result<TunedResult> {
    let started = Instant::now();
    let maps = candidates(kind, grid)?;
    let folds = kfold_indices(train.n_rows(), k, seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| {
            let rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            (train.select_rows(&rest), train.select_rows(&folds[f]))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..maps.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let fold_scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| holdout_rmse(kind, &maps[c], &splits[f].0, &splits[f].1))
        .collect::<Result<_>>()?;

    let scores = maps
        .into_iter()
        .enumerate()
        .map(|(c, params)| {
            let fold_rmse = fold_scores[c * k..(c + 1) * k].to_vec();
            CandidateScore {
                params,
                rmse: mean(&fold_rmse),
                fold_rmse,
            }
        })
        .collect();
    finish(kind, Validator::CrossValidation, k as f64, train, scores, started)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MAX_BINS, MAX_DEPTH, N_ESTIMATORS};

    fn ints(v: &[i64]) -> Vec<ParamValue> {
        v.iter().map(|&i| ParamValue::Int(i)).collect()
    }

    #[test]
    fn grid_expansion_sizes_and_order() {
        let g = ParamGrid::new()
            .with(MAX_DEPTH, ints(&[3, 5]))
            .with(N_ESTIMATORS, ints(&[10]));
        assert_eq!(expand_grid(&g).unwrap().len(), 2);

        let g = ParamGrid::new().with("a", ints(&[1])).with("b", ints(&[1]));
        assert_eq!(expand_grid(&g).unwrap().len(), 1);

        let g = ParamGrid::new()
            .with(MAX_DEPTH, ints(&[3, 5]))
            .with(MAX_BINS, ints(&[16, 32, 64]));
        let maps = expand_grid(&g).unwrap();
        assert_eq!(maps.len(), 6);
        // "maxBins" sorts before "max_depth", so max_depth varies fastest
        let pairs: Vec<(String, String)> = maps
            .iter()
            .map(|m| (m.get(MAX_BINS).unwrap().to_string(), m.get(MAX_DEPTH).unwrap().to_string()))
            .collect();
        let expect: Vec<(String, String)> = [(16, 3), (16, 5), (32, 3), (32, 5), (64, 3), (64, 5)]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(pairs, expect);

        assert_eq!(expand_grid(&ParamGrid::new()).unwrap(), vec![ParamMap::new()]);
        let bad = ParamGrid::new().with(MAX_DEPTH, vec![]);
        assert!(matches!(expand_grid(&bad), Err(Error::Grid(_))));
    }

    #[test]
    fn folds_partition_rows() {
        let folds = kfold_indices(9, 3, 1).unwrap();
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());

        let folds = kfold_indices(10, 3, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        assert!(matches!(kfold_indices(2, 3, 1), Err(Error::Fold(_))));
        assert!(matches!(kfold_indices(5, 1, 1), Err(Error::Fold(_))));
    }

    #[test]
    fn fold_mean_and_selection() {
        assert_eq!(mean(&[2.0, 4.0]), 3.0);
        assert_eq!(select_best(&[3.0, 1.0, 1.0]), Some(1));
        assert_eq!(select_best(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    fn line_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let y = (0..n).map(|i| 3.0 * i as f64 + 1.0).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn singleton_grid_refits_on_full_train() {
        let data = line_data(40);
        let grid = ParamGrid::new().with(MAX_DEPTH, ints(&[3]));
        let r = tvs_fit(EstimatorKind::DecisionTree, &grid, &data, 0.75, 1).unwrap();
        let direct = EstimatorKind::DecisionTree
            .fit(&data, &ParamMap::new().with(MAX_DEPTH, 3))
            .unwrap();
        assert_eq!(r.best_model, direct);
        assert_eq!(r.grid_size, 1);
        assert!(r.fit_time_secs > 0.0);
    }

    #[test]
    fn tvs_and_cv_agree_when_winner_matches() {
        let data = line_data(60);
        let grid = ParamGrid::new().with(MAX_DEPTH, ints(&[1, 6]));
        let a = tvs_fit(EstimatorKind::DecisionTree, &grid, &data, 0.75, 3).unwrap();
        let b = cv_fit(EstimatorKind::DecisionTree, &grid, &data, 3, 3).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.best_model, b.best_model);
        assert_eq!(b.scores[0].fold_rmse.len(), 3);
    }

    #[test]
    fn invalid_candidate_is_rejected_up_front() {
        let grid = ParamGrid::new().with(MAX_BINS, ints(&[1]));
        assert!(matches!(
            tvs_fit(EstimatorKind::DecisionTree, &grid, &line_data(10), 0.75, 1),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn inner_split_errors() {
        let grid = ParamGrid::new();
        assert!(matches!(
            tvs_fit(EstimatorKind::Linear, &grid, &line_data(2), 0.99, 1),
            Err(Error::Split(_))
        ));
        assert!(matches!(
            cv_fit(EstimatorKind::Linear, &grid, &line_data(2), 3, 1),
            Err(Error::Fold(_))
        ));
    }
}
