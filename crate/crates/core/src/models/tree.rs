use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::binning::{BinnedData, BinningSpec};
use super::{ParamMap, Params};
use crate::error::Result;
use crate::features::Dataset;
use crate::rng::Rng;
use crate::EstimatorKind;

/// Gains at or below this fraction of the node variance count as zero, so
/// rounding noise never produces a split.
pub(crate) const MIN_RELATIVE_GAIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Variance reduction realized by this split.
        gain: f64,
    },
    Leaf {
        value: f64,
        n_train: u64,
    },
}

/// Regression tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_features: usize,
    depth: usize,
}

impl TreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Index of the leaf `row` falls into.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Fits one tree on the dataset labels. `row_weights` are integer
/// multiplicities (bootstrap counts); rows with weight 0 are ignored.
pub fn fit_tree(
    train: &Dataset,
    params: &ParamMap,
    bins: &BinningSpec,
    row_weights: Option<&[u32]>,
) -> Result<TreeModel> {
    let p = Params::resolve(params, EstimatorKind::DecisionTree)?;
    Ok(fit_tree_resolved(train, &p, bins, row_weights))
}

pub(crate) fn fit_tree_resolved(
    train: &Dataset,
    p: &Params,
    bins: &BinningSpec,
    row_weights: Option<&[u32]>,
) -> TreeModel {
    let binned = BinnedData::new(train, bins);
    let cfg = GrowConfig {
        max_depth: p.max_depth,
        min_info_gain: p.min_info_gain,
        max_features: None,
    };
    grow(&binned, bins, train.labels(), row_weights, &cfg, None)
}

#[derive(Clone, Debug)]
pub(crate) struct GrowConfig {
    pub max_depth: usize,
    pub min_info_gain: f64,
    /// Features drawn per node; `None` means all of them.
    pub max_features: Option<usize>,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    w: f64,
    s: f64,
    q: f64,
}

impl Acc {
    #[inline]
    fn add(&mut self, w: f64, d: f64) {
        self.w += w;
        self.s += w * d;
        self.q += w * d * d;
    }

    #[inline]
    fn sse(&self) -> f64 {
        if self.w > 0.0 {
            (self.q - self.s * self.s / self.w).max(0.0)
        } else {
            0.0
        }
    }
}

struct Best {
    feature: usize,
    bin: usize,
    gain: f64,
}

/// Greedy depth-first growth over binned candidates.
///
/// Each node picks the (feature, threshold) with the largest variance gain
/// `Var(node) - (w_L/w Var(L) + w_R/w Var(R))`; ties keep the lowest feature
/// index, then the lowest threshold. Growth stops at `max_depth`, at pure
/// nodes, when no candidate separates the rows, or when the best gain is
/// below `min_info_gain`.
pub(crate) fn grow(
    binned: &BinnedData,
    bins: &BinningSpec,
    targets: &[f64],
    weights: Option<&[u32]>,
    cfg: &GrowConfig,
    mut rng: Option<&mut Rng>,
) -> TreeModel {
    let n_features = binned.n_features();
    let weight = |r: usize| weights.map_or(1, |w| w[r]);
    let root_rows: Vec<usize> = (0..binned.n_rows()).filter(|&r| weight(r) > 0).collect();

    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        n_train: 0,
    }];
    let mut depth_reached = 0;
    let mut stack = vec![(0usize, root_rows, 0usize)];
    let mut hist: Vec<Acc> = Vec::new();

    while let Some((id, rows, depth)) = stack.pop() {
        depth_reached = depth_reached.max(depth);
        let mut total_w = 0.0;
        let mut total_s = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &rows {
            let w = weight(r) as f64;
            total_w += w;
            total_s += w * targets[r];
            lo = lo.min(targets[r]);
            hi = hi.max(targets[r]);
        }
        let n_train: u64 = rows.iter().map(|&r| weight(r) as u64).sum();
        let mean = if total_w > 0.0 { total_s / total_w } else { 0.0 };
        let leaf = Node::Leaf {
            value: mean,
            n_train,
        };

        if depth >= cfg.max_depth || rows.len() < 2 || lo == hi {
            nodes[id] = leaf;
            continue;
        }

        let features: Vec<usize> = match (cfg.max_features, rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < n_features => {
                let mut f = index::sample(rng, n_features, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..n_features).collect(),
        };

        let mut parent = Acc::default();
        for &r in &rows {
            parent.add(weight(r) as f64, targets[r] - mean);
        }
        let parent_sse = parent.sse();
        let parent_var = parent_sse / total_w;

        let mut best: Option<Best> = None;
        for &f in &features {
            let nb = binned.n_bins(f);
            if nb < 2 {
                continue;
            }
            hist.clear();
            hist.resize(nb, Acc::default());
            for &r in &rows {
                hist[binned.bin(r, f)].add(weight(r) as f64, targets[r] - mean);
            }
            let mut left = Acc::default();
            for (b, h) in hist.iter().take(nb - 1).enumerate() {
                left.w += h.w;
                left.s += h.s;
                left.q += h.q;
                let right = Acc {
                    w: parent.w - left.w,
                    s: parent.s - left.s,
                    q: parent.q - left.q,
                };
                if left.w <= 0.0 || right.w <= 0.0 {
                    continue;
                }
                let gain = (parent_sse - left.sse() - right.sse()) / total_w;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Best {
                        feature: f,
                        bin: b,
                        gain,
                    });
                }
            }
        }

        match best {
            Some(b) if b.gain > MIN_RELATIVE_GAIN * parent_var && b.gain >= cfg.min_info_gain => {
                let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| binned.bin(r, b.feature) <= b.bin);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf {
                    value: 0.0,
                    n_train: 0,
                });
                nodes.push(Node::Leaf {
                    value: 0.0,
                    n_train: 0,
                });
                nodes[id] = Node::Split {
                    feature: b.feature,
                    threshold: bins.thresholds[b.feature][b.bin],
                    left,
                    right,
                    gain: b.gain,
                };
                stack.push((right, r_rows, depth + 1));
                stack.push((left, l_rows, depth + 1));
            }
            _ => nodes[id] = leaf,
        }
    }

    TreeModel {
        nodes,
        n_features,
        depth: depth_reached,
    }
}

#[cfg(test)]
pub(crate) fn fit_tree_default_bins(train: &Dataset, p: &Params) -> TreeModel {
    let bins = super::compute_bins(train, p.max_bins);
    fit_tree_resolved(train, p, &bins, None)
}
