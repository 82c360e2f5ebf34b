//! Test-side oracles and generators shared by the integration suites.
#![allow(dead_code, clippy::needless_range_loop)]

use netprice::models::BinningSpec;
use netprice::Dataset;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain left-to-right RMSE.
pub fn rmse_oracle(y: &[f64], yhat: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        let e = y[i] - yhat[i];
        s += e * e;
    }
    (s / y.len() as f64).sqrt()
}

/// Two-pass R² from direct sums.
pub fn r2_oracle(y: &[f64], yhat: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut res = 0.0;
    let mut tot = 0.0;
    for i in 0..y.len() {
        res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        tot += (y[i] - mean) * (y[i] - mean);
    }
    1.0 - res / tot
}

fn sse(y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Greedy exhaustive-search tree that partitions rows on raw values at each
/// candidate threshold. Returns the training SSE of its leaves.
///
/// Ties keep the first candidate in (feature, threshold) order; a split needs
/// gain above `1e-12 * node variance` and at least `min_gain`.
pub fn tree_oracle_sse(
    data: &Dataset,
    bins: &BinningSpec,
    max_depth: usize,
    min_gain: f64,
) -> f64 {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    oracle_node(data, bins, &rows, 0, max_depth, min_gain)
}

fn oracle_node(
    data: &Dataset,
    bins: &BinningSpec,
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    min_gain: f64,
) -> f64 {
    let y: Vec<f64> = rows.iter().map(|&i| data.labels()[i]).collect();
    let parent = sse(&y);
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if depth >= max_depth || lo == hi {
        return parent;
    }
    let n = rows.len() as f64;
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for f in 0..data.n_features() {
        for &t in &bins.thresholds[f] {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| data.value(i, f) <= t);
            if l.is_empty() || r.is_empty() {
                continue;
            }
            let yl: Vec<f64> = l.iter().map(|&i| data.labels()[i]).collect();
            let yr: Vec<f64> = r.iter().map(|&i| data.labels()[i]).collect();
            let gain = (parent - sse(&yl) - sse(&yr)) / n;
            if best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, l, r));
            }
        }
    }
    match best {
        Some((gain, l, r)) if gain > 1e-12 * (parent / n) && gain >= min_gain => {
            oracle_node(data, bins, &l, depth + 1, max_depth, min_gain)
                + oracle_node(data, bins, &r, depth + 1, max_depth, min_gain)
        }
        _ => parent,
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Ridge on centered data: `(XcᵀXc + nλI) w = Xcᵀ yc`, intercept from means.
pub fn ridge_oracle(data: &Dataset, lambda: f64) -> (Vec<f64>, f64) {
    let n = data.n_rows();
    let d = data.n_features();
    let xm: Vec<f64> = (0..d)
        .map(|j| data.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let ym = data.labels().iter().sum::<f64>() / n as f64;
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for i in 0..n {
        let x = data.row(i);
        for j in 0..d {
            b[j] += (x[j] - xm[j]) * (data.labels()[i] - ym);
            for k in 0..d {
                a[j][k] += (x[j] - xm[j]) * (x[k] - xm[k]);
            }
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[j] += n as f64 * lambda;
    }
    let w = solve(a, b);
    let intercept = ym - w.iter().zip(&xm).map(|(w, m)| w * m).sum::<f64>();
    (w, intercept)
}

/// Random regression data: uniform features, some integer-valued to force
/// ties, continuous labels.
pub fn random_dataset(r: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let integer: Vec<bool> = (0..d).map(|_| r.random_bool(0.4)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            integer
                .iter()
                .map(|&int| {
                    if int {
                        r.random_range(0..6) as f64
                    } else {
                        r.random_range(-5.0..5.0)
                    }
                })
                .collect()
        })
        .collect();
    let y = rows
        .iter()
        .map(|x| x.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.0)).sum::<f64>() + r.random_range(-2.0..2.0))
        .collect();
    Dataset::from_rows(&rows, y).unwrap()
}
