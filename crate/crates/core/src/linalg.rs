//! Small dense least-squares helpers shared by discovery, fitting and falsification.

use nalgebra::{DMatrix, DVector};

pub(crate) const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual sum of squares divided by n.
    pub resid_var: f64,
    /// The design was singular: constant regressors were pinned to zero or a
    /// ridge jitter was added.
    pub singular: bool,
}

/// Ordinary least squares of column `y` of `data` on columns `xs` plus an intercept.
///
/// The regression is solved on centred columns, so the intercept equals
/// `mean(y) - mean(X)·coef` and residuals have mean zero.
pub(crate) fn ols(data: &DMatrix<f64>, y: usize, xs: &[usize]) -> OlsFit {
    let n = data.nrows();
    let nf = n as f64;
    let ycol = data.column(y);
    let ymean = ycol.sum() / nf;
    if xs.is_empty() {
        let residuals: Vec<f64> = ycol.iter().map(|v| v - ymean).collect();
        let resid_var = residuals.iter().map(|r| r * r).sum::<f64>() / nf;
        return OlsFit { intercept: ymean, coef: vec![], residuals, resid_var, singular: false };
    }
    let means: Vec<f64> = xs.iter().map(|&j| data.column(j).sum() / nf).collect();
    let live: Vec<usize> = (0..xs.len()).filter(|&a| !is_constant(data.column(xs[a]).as_slice(), means[a])).collect();
    let k = live.len();
    let xc = DMatrix::from_fn(n, k, |i, a| data[(i, xs[live[a]])] - means[live[a]]);
    let yc = DVector::from_fn(n, |i, _| data[(i, y)] - ymean);
    let gram = xc.tr_mul(&xc);
    let rhs = xc.tr_mul(&yc);
    let (beta, jittered) = if k == 0 {
        (DVector::zeros(0), false)
    } else {
        match gram.clone().cholesky() {
            Some(ch) if min_pivot_ok(&gram, ch.l_dirty()) => (ch.solve(&rhs), false),
            _ => {
                let scale = gram.trace() / k as f64;
                let jitter = RIDGE_JITTER * scale.max(1.0);
                let mut g = gram;
                for a in 0..k {
                    g[(a, a)] += jitter;
                }
                let beta = match g.clone().cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => g.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(k)),
                };
                (beta, true)
            }
        }
    };
    let fitted = &xc * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| yc[i] - fitted[i]).collect();
    let resid_var = residuals.iter().map(|r| r * r).sum::<f64>() / nf;
    let mut coef = vec![0.0; xs.len()];
    for (a, &j) in live.iter().enumerate() {
        coef[j] = beta[a];
    }
    let intercept = ymean - means.iter().zip(&coef).map(|(m, b)| m * b).sum::<f64>();
    OlsFit { intercept, coef, residuals, resid_var, singular: jittered || k < xs.len() }
}

/// A column whose spread is at the level of floating-point noise around its
/// magnitude. Centring such a column leaves only rounding error, and any slope
/// fitted on it is arbitrary.
pub(crate) fn is_constant(col: &[f64], mean: f64) -> bool {
    let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / col.len() as f64).sqrt() <= 1e-10 * scale
}

// Cholesky succeeds on some numerically singular Gram matrices; reject pivots
// that are tiny relative to the diagonal scale.
fn min_pivot_ok(gram: &DMatrix<f64>, l: &DMatrix<f64>) -> bool {
    let maxd = gram.diagonal().iter().fold(0.0f64, |a, b| a.max(*b));
    l.diagonal().iter().all(|d| d * d > 1e-12 * maxd.max(1e-300))
}

/// Residuals of `y` on `xs` (with intercept); used for partial correlations.
pub(crate) fn residualize(data: &DMatrix<f64>, y: usize, xs: &[usize]) -> Vec<f64> {
    ols(data, y, xs).residuals
}

pub(crate) fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 || is_constant(a, ma) || is_constant(b, mb) {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}
