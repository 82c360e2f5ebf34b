use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{compute_bins, BinnedData};
use super::tree::{grow, GrowConfig, TreeModel};
use super::{FeatureSubset, ParamMap, Params};
use crate::error::Result;
use crate::features::Dataset;
use crate::rng;
use crate::EstimatorKind;

/// Bagged trees; predicts the arithmetic mean of its members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub tree_seeds: Vec<u64>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.trees.first().map_or(0, TreeModel::n_features)
    }

    /// Running mean of member predictions; exact when all members agree.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees
            .iter()
            .enumerate()
            .fold(0.0, |mean, (i, t)| mean + (t.predict_row(row) - mean) / (i + 1) as f64)
    }
}

pub fn fit_forest(train: &Dataset, params: &ParamMap) -> Result<ForestModel> {
    let p = Params::resolve(params, EstimatorKind::RandomForest)?;
    Ok(fit_forest_resolved(train, &p))
}

/// Tree `i` draws from its own stream `derive_seed(seed, i)`, so the forest
/// is identical however the trees are scheduled.
pub(crate) fn fit_forest_resolved(train: &Dataset, p: &Params) -> ForestModel {
    let bins = compute_bins(train, p.max_bins);
    let binned = BinnedData::new(train, &bins);
    let n = train.n_rows();
    let d = train.n_features();
    let max_features = match p.feature_subset {
        FeatureSubset::All => None,
        subset => Some(subset.count(d)),
    };
    let cfg = GrowConfig {
        max_depth: p.max_depth,
        min_info_gain: p.min_info_gain,
        max_features,
    };

    let tree_seeds: Vec<u64> = (0..p.n_estimators as u64)
        .map(|i| rng::derive_seed(p.seed, i))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = rng::seeded(seed);
            let weights = p.bootstrap.then(|| {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts
            });
            grow(
                &binned,
                &bins,
                train.labels(),
                weights.as_deref(),
                &cfg,
                Some(&mut rng),
            )
        })
        .collect();
    ForestModel { trees, tree_seeds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::fit_tree_default_bins;
    use crate::models::{BOOTSTRAP, FEATURE_SUBSET, N_ESTIMATORS, SEED};

    fn noisy(n: usize, d: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        let y = rows.iter().map(|x| x[0] * 3.0 + x[1] + r.random_range(-0.1..0.1)).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let data = noisy(80, 3, 1);
        let params = ParamMap::new()
            .with(N_ESTIMATORS, 3)
            .with(BOOTSTRAP, false)
            .with(FEATURE_SUBSET, "all");
        let forest = fit_forest(&data, &params).unwrap();
        let p = Params::resolve(&params, EstimatorKind::DecisionTree).unwrap();
        let tree = fit_tree_default_bins(&data, &p);
        for t in &forest.trees {
            assert_eq!(t, &tree);
        }
        for row in data.rows() {
            assert_eq!(forest.predict_row(row), tree.predict_row(row));
        }
    }

    #[test]
    fn prediction_is_member_mean() {
        let data = noisy(60, 3, 2);
        let forest = fit_forest(&data, &ParamMap::new().with(N_ESTIMATORS, 3)).unwrap();
        for row in data.rows().take(10) {
            let mean = forest.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / 3.0;
            assert!((forest.predict_row(row) - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn seed_contract() {
        let data = noisy(60, 4, 3);
        let a = fit_forest(&data, &ParamMap::new().with(SEED, 5)).unwrap();
        let b = fit_forest(&data, &ParamMap::new().with(SEED, 5)).unwrap();
        let c = fit_forest(&data, &ParamMap::new().with(SEED, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tree_seeds, c.tree_seeds);
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let data = noisy(100, 4, 4);
        let params = ParamMap::new().with(N_ESTIMATORS, 8);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| fit_forest(&data, &params).unwrap());
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| fit_forest(&data, &params).unwrap());
        assert_eq!(one, many);
    }
}
