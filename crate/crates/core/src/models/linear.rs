use serde::{Deserialize, Serialize};

use super::{ParamMap, Params};
use crate::error::Result;
use crate::features::Dataset;
use crate::EstimatorKind;

pub(crate) const CONVERGENCE_TOL: f64 = 1e-7;

/// Affine model `intercept + Σ weights_j x_j`, weights in original feature
/// units even when fitted on standardized coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub standardized_fit: bool,
    /// False when `maxIter` sweeps ended before the coefficient change fell
    /// below tolerance.
    pub converged: bool,
    pub sweeps: usize,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

pub fn fit_linear(train: &Dataset, params: &ParamMap) -> Result<LinearModel> {
    let p = Params::resolve(params, EstimatorKind::Linear)?;
    Ok(fit_linear_resolved(train, &p))
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on
/// `(1/2n) Σ (y_i - b - w·x_i)² + λ [α ‖w‖₁ + (1-α)/2 ‖w‖₂²]`.
///
/// The intercept is unpenalized and eliminated by centering. Each sweep
/// updates `w_j ← S(ρ_j, λα) / (z_j + λ(1-α))` where `z_j = mean(x_j²)` and
/// `ρ_j` is the partial-residual correlation.
pub(crate) fn fit_linear_resolved(train: &Dataset, p: &Params) -> LinearModel {
    let n = train.n_rows();
    let d = train.n_features();
    let nf = n as f64;
    let y = train.labels();
    let y_mean = y.iter().sum::<f64>() / nf;

    // column-major centered (and optionally scaled) design
    let mut means = vec![0.0; d];
    let mut scales = vec![1.0; d];
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut c = train.column(j);
        let mean = c.iter().sum::<f64>() / nf;
        for v in &mut c {
            *v -= mean;
        }
        means[j] = mean;
        if p.standardization {
            let sd = (c.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
            if sd > 0.0 {
                for v in &mut c {
                    *v /= sd;
                }
                scales[j] = sd;
            }
        }
        cols.push(c);
    }
    let z: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();

    let l1 = p.reg_param * p.elastic_net_param;
    let l2 = p.reg_param * (1.0 - p.elastic_net_param);
    let mut w = vec![0.0; d];
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < p.max_iter {
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if z[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() / nf + z[j] * w[j];
            let updated = soft_threshold(rho, l1) / (z[j] + l2);
            let delta = updated - w[j];
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                w[j] = updated;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }

    if !converged {
        log::warn!("coordinate descent stopped after {sweeps} sweeps without converging");
    }
    let weights: Vec<f64> = w.iter().zip(&scales).map(|(w, s)| w / s).collect();
    let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    LinearModel {
        weights,
        intercept,
        standardized_fit: p.standardization,
        converged,
        sweeps,
    }
}
