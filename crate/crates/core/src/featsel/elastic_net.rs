//! Elastic-net regression by cyclic coordinate descent.
//!
//! Minimises `(1/2n)‖y − Xβ‖² + l1·‖β‖₁ + (l2/2)·‖β‖²` on internally
//! standardized columns, so coefficients are comparable across regulators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetConfig {
    pub l1: f64,
    pub l2: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self { l1: 0.5, l2: 0.5, tol: 1e-6, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    /// Coefficients on the standardized scale, one per predictor column.
    pub coef: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn standardized(col: &[f64]) -> Option<Vec<f64>> {
    let n = col.len() as f64;
    let m = col.iter().sum::<f64>() / n;
    let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return None;
    }
    Some(col.iter().map(|v| (v - m) / sd).collect())
}

/// Fit `y` on the predictor columns. Constant predictors keep a zero coefficient.
pub fn fit(predictors: &[Vec<f64>], y: &[f64], cfg: &ElasticNetConfig) -> ElasticNetFit {
    let p = predictors.len();
    let n = y.len() as f64;
    let Some(y) = standardized(y) else {
        return ElasticNetFit { coef: vec![0.0; p], sweeps: 0, converged: true };
    };
    let xs: Vec<Option<Vec<f64>>> = predictors.iter().map(|c| standardized(c)).collect();
    let mut beta = vec![0.0; p];
    let mut resid = y;
    // standardized columns have ‖x‖²/n = 1
    let denom = 1.0 + cfg.l2;
    for sweep in 1..=cfg.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let Some(x) = &xs[j] else { continue };
            let old = beta[j];
            let rho = x.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n + old;
            let new = soft_threshold(rho, cfg.l1) / denom;
            if new != old {
                let d = new - old;
                for (r, a) in resid.iter_mut().zip(x) {
                    *r -= d * a;
                }
                beta[j] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        if max_delta < cfg.tol {
            return ElasticNetFit { coef: beta, sweeps: sweep, converged: true };
        }
    }
    ElasticNetFit { coef: beta, sweeps: cfg.max_sweeps, converged: false }
}
