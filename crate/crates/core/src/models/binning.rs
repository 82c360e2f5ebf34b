use serde::{Deserialize, Serialize};

use crate::features::Dataset;

/// Candidate split thresholds per feature. A split sends `x <= t` left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub thresholds: Vec<Vec<f64>>,
}

impl BinningSpec {
    pub fn n_features(&self) -> usize {
        self.thresholds.len()
    }

    /// Number of thresholds strictly below `x`; `x <= t_b` iff `bin_of <= b`.
    #[inline]
    pub fn bin_of(&self, feature: usize, x: f64) -> usize {
        self.thresholds[feature].partition_point(|&t| t < x)
    }
}

/// Thresholds from an equal-frequency quantile sketch with at most
/// `max_bins` bins per feature.
///
/// Features with no more than `max_bins` distinct values get every midpoint
/// between consecutive distinct values. Otherwise the `k/max_bins` sample
/// quantiles (k = 1..max_bins-1) are located and each cut is placed halfway
/// between the quantile value and the next larger distinct value.
pub fn compute_bins(train: &Dataset, max_bins: usize) -> BinningSpec {
    let max_bins = max_bins.max(2);
    let thresholds = (0..train.n_features())
        .map(|j| {
            let mut values = train.column(j);
            values.sort_by(f64::total_cmp);
            feature_thresholds(&values, max_bins)
        })
        .collect();
    BinningSpec { thresholds }
}

fn feature_thresholds(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let n = sorted.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let pos = (k * n).div_ceil(max_bins) - 1;
        let v = sorted[pos];
        let next = distinct.partition_point(|&d| d <= v);
        if next == distinct.len() {
            continue;
        }
        let t = 0.5 * (v + distinct[next]);
        if out.last().is_none_or(|&last| t > last) {
            out.push(t);
        }
    }
    out
}

/// Column-major bin indices of a dataset, shared by every tree grown on it.
#[derive(Clone, Debug)]
pub struct BinnedData {
    bins: Vec<u16>,
    n_rows: usize,
    n_bins: Vec<usize>,
}

impl BinnedData {
    pub fn new(data: &Dataset, spec: &BinningSpec) -> Self {
        assert_eq!(data.n_features(), spec.n_features());
        let n_rows = data.n_rows();
        let mut bins = Vec::with_capacity(n_rows * spec.n_features());
        for j in 0..spec.n_features() {
            assert!(spec.thresholds[j].len() < u16::MAX as usize);
            bins.extend((0..n_rows).map(|i| spec.bin_of(j, data.value(i, j)) as u16));
        }
        BinnedData {
            bins,
            n_rows,
            n_bins: spec.thresholds.iter().map(|t| t.len() + 1).collect(),
        }
    }

    #[inline]
    pub fn bin(&self, row: usize, feature: usize) -> usize {
        self.bins[feature * self.n_rows + row] as usize
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.n_bins[feature]
    }

    pub fn n_features(&self) -> usize {
        self.n_bins.len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
}
