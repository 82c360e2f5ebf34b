use serde::{Deserialize, Serialize};

use super::binning::{compute_bins, BinnedData};
use super::tree::{grow, GrowConfig, TreeModel};
use super::{ParamMap, Params};
use crate::error::Result;
use crate::features::Dataset;
use crate::EstimatorKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtStage {
    pub tree: TreeModel,
    pub learning_rate: f64,
}

/// Squared-error gradient boosting:
/// `F(x) = base_prediction + Σ learning_rate · tree_m(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_prediction: f64,
    pub stages: Vec<GbtStage>,
    n_features: usize,
}

impl GbtModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_stages(row, self.stages.len())
    }

    /// Prediction using only the first `m` stages.
    pub fn predict_stages(&self, row: &[f64], m: usize) -> f64 {
        self.stages
            .iter()
            .take(m)
            .fold(self.base_prediction, |acc, s| acc + s.learning_rate * s.tree.predict_row(row))
    }
}

pub fn fit_gbt(train: &Dataset, params: &ParamMap) -> Result<GbtModel> {
    let p = Params::resolve(params, EstimatorKind::GradientBoosted)?;
    Ok(fit_gbt_resolved(train, &p))
}

/// Boosting stops early once a stage tree cannot split, or when a stage
/// would raise training MSE; on converged residuals that can only come from
/// rounding.
pub(crate) fn fit_gbt_resolved(train: &Dataset, p: &Params) -> GbtModel {
    let y = train.labels();
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let bins = compute_bins(train, p.max_bins);
    let binned = BinnedData::new(train, &bins);
    let cfg = GrowConfig {
        max_depth: p.max_depth,
        min_info_gain: p.min_info_gain,
        max_features: None,
    };

    let sse = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut fitted = vec![base; n];
    let mut current_sse = sse(&fitted);
    let mut residuals = vec![0.0; n];
    let mut stages = Vec::with_capacity(p.max_iter);
    for _ in 0..p.max_iter {
        for i in 0..n {
            residuals[i] = y[i] - fitted[i];
        }
        let tree = grow(&binned, &bins, &residuals, None, &cfg, None);
        if tree.nodes().len() == 1 {
            break;
        }
        let next: Vec<f64> = fitted
            .iter()
            .enumerate()
            .map(|(i, f)| f + p.learning_rate * tree.predict_row(train.row(i)))
            .collect();
        let next_sse = sse(&next);
        if next_sse > current_sse {
            break;
        }
        fitted = next;
        current_sse = next_sse;
        stages.push(GbtStage {
            tree,
            learning_rate: p.learning_rate,
        });
    }
    GbtModel {
        base_prediction: base,
        stages,
        n_features: train.n_features(),
    }
}
