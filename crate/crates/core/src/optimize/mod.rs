//! Sparse shift-intervention design.
//!
//! The smooth part of the objective is
//! `‖ẋ̄ˢ(α) − x̄ᵀ‖² + γ‖ẋ̄ᵀ(α) − x̄ᵀ‖² + ρ·(range and relative-change hinges)`,
//! and the weighted ℓ1 term `λ Σ wᵢ|αᵢ|` is handled by a proximal step. Linear
//! models use `ẋ̄ = x̄ + T·α` with the empirical baselines; otherwise the shift
//! effect is simulated with common random numbers.

mod persistence;
mod screening;
mod solver;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use persistence::{persistence, rank_targets, NodePersistence, PersistenceReport, SetPersistence};
pub use screening::{prioritize_and_solve, screen_single_targets, RankedSubset, ScreeningReport, StageTwo, SUBSET_CAP, TOP_SINGLES};
pub use solver::{solve, solve_path, Feasibility, RegPath, Solution};

use crate::data::StatePair;
use crate::error::{Error, Result};
use crate::rng;
use crate::scm::{mc_mean, Scm};

/// |α| below this counts as zero.
pub const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Closed form for linear models, simulation otherwise.
    #[default]
    Auto,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub theta: usize,
    /// Global (min, max) for post-intervention means.
    pub box_bounds: Option<[f64; 2]>,
    /// Per-node (min, max), overriding `box_bounds`.
    pub node_bounds: BTreeMap<String, [f64; 2]>,
    /// Relative-change cap: `|ẋ̄ᵢ| ≤ RC·|x̄ᵢ|` in both states.
    pub rc_bound: Option<f64>,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Rows simulated for transition percentages and feasibility checks.
    pub mc_n: usize,
    /// Rows per evaluation when the objective itself is simulated.
    pub mc_eval_n: usize,
    pub mean_mode: MeanMode,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            gamma: 0.0,
            epsilon: 1e-3,
            theta: 30,
            box_bounds: None,
            node_bounds: BTreeMap::new(),
            rc_bound: None,
            rho: 1e3,
            tol: 1e-8,
            max_iter: 10_000,
            mc_n: 20_000,
            mc_eval_n: 5000,
            mean_mode: MeanMode::Auto,
            seed: 0,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if !(1e-4..=1e-3).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [1e-4, 1e-3]"));
        }
        if self.theta < 2 {
            return Err(Error::invalid("theta must be at least 2"));
        }
        for b in self.box_bounds.iter().chain(self.node_bounds.values()) {
            if !(b[0] <= b[1]) {
                return Err(Error::invalid(format!("empty range [{}, {}]", b[0], b[1])));
            }
        }
        if let Some(rc) = self.rc_bound {
            if !(rc >= 0.0) {
                return Err(Error::invalid("rc_bound must be >= 0"));
            }
        }
        if !(self.rho > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 || self.mc_n < 2 || self.mc_eval_n < 2 {
            return Err(Error::invalid("rho, tol, max_iter, mc_n and mc_eval_n must be positive"));
        }
        Ok(())
    }
}

/// `wᵢ = (1/max(uᵢ, 1e-6·max u))`, rescaled so the largest weight is 1.
pub fn weights_from_attributions(u: &[f64]) -> Result<Vec<f64>> {
    let umax = u.iter().fold(0.0f64, |a, b| a.max(*b));
    if !(umax > 0.0) || u.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::AllZeroScores);
    }
    let floor = 1e-6 * umax;
    let r: Vec<f64> = u.iter().map(|v| 1.0 / v.max(floor)).collect();
    let rmax = r.iter().fold(0.0f64, |a, b| a.max(*b));
    Ok(r.iter().map(|v| v / rmax).collect())
}

/// `s = (1 − d_res/d_total)·100`.
pub fn transition_percentage(xbar_s: &[f64], xbar_t: &[f64], xdot: &[f64]) -> Result<f64> {
    if xbar_s.len() != xbar_t.len() || xdot.len() != xbar_t.len() {
        return Err(Error::invalid("mean vectors differ in length"));
    }
    let d_total: f64 = xbar_s.iter().zip(xbar_t).map(|(s, t)| (s - t).powi(2)).sum();
    if d_total == 0.0 {
        return Err(Error::IdenticalStates);
    }
    let d_res: f64 = xdot.iter().zip(xbar_t).map(|(d, t)| (d - t).powi(2)).sum();
    Ok((1.0 - d_res / d_total) * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub theta: usize,
    pub epsilon: f64,
    pub values: Vec<f64>,
}

/// `λ_max = maxᵢ |gᵢ|/wᵢ`, then `Θ` geometric steps down to `ε·λ_max`.
pub fn lambda_grid(g: &[f64], w: &[f64], epsilon: f64, theta: usize) -> Result<LambdaGrid> {
    if g.len() != w.len() {
        return Err(Error::invalid("gradient and weights differ in length"));
    }
    if theta < 2 {
        return Err(Error::invalid("theta must be at least 2"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon must lie in (0, 1)"));
    }
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::invalid("weights must be positive"));
    }
    let lambda_max = g.iter().zip(w).map(|(g, w)| g.abs() / w).fold(0.0f64, f64::max);
    if lambda_max == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let lambda_min = epsilon * lambda_max;
    let mut values: Vec<f64> = (0..theta).map(|k| lambda_max * epsilon.powf(k as f64 / (theta - 1) as f64)).collect();
    values[0] = lambda_max;
    values[theta - 1] = lambda_min;
    Ok(LambdaGrid { lambda_max, lambda_min, theta, epsilon, values })
}

/// One evaluation of the smooth objective and its pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub alignment: f64,
    pub stability: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct InterventionProblem {
    scm_s: Scm,
    scm_t: Scm,
    xbar_s: DVector<f64>,
    xbar_t: DVector<f64>,
    candidates: Vec<usize>,
    actionable: Vec<bool>,
    weights: Vec<f64>,
    config: OptimizeConfig,
    lower: Vec<f64>,
    upper: Vec<f64>,
    // columns of the total-effect matrices for the candidates (linear mode)
    a_s: DMatrix<f64>,
    a_t: DMatrix<f64>,
    linear: bool,
}

impl InterventionProblem {
    /// `candidates` index model nodes; `weights` follow `candidates`.
    /// `actionable` defaults to every candidate.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scm_s: Scm,
        scm_t: Scm,
        xbar_s: Vec<f64>,
        xbar_t: Vec<f64>,
        candidates: Vec<usize>,
        actionable: Option<Vec<usize>>,
        weights: Vec<f64>,
        config: OptimizeConfig,
    ) -> Result<Self> {
        config.validate()?;
        let q = scm_s.len();
        if scm_s.names() != scm_t.names() || scm_s.dag().edges() != scm_t.dag().edges() {
            return Err(Error::DagMismatch("source and target models must share one graph".into()));
        }
        if xbar_s.len() != q || xbar_t.len() != q {
            return Err(Error::invalid("baseline means must have one entry per node"));
        }
        if xbar_s == xbar_t {
            return Err(Error::IdenticalStates);
        }
        if candidates.is_empty() || candidates.iter().any(|&c| c >= q) {
            return Err(Error::invalid("candidate set must be nonempty and index model nodes"));
        }
        let mut seen = vec![false; q];
        for &c in &candidates {
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::invalid(format!("duplicate candidate {}", scm_s.names()[c])));
            }
        }
        if weights.len() != candidates.len() || weights.iter().any(|w| !(*w > 0.0 && *w <= 1.0)) {
            return Err(Error::invalid("weights must lie in (0, 1], one per candidate"));
        }
        let act = match actionable {
            None => vec![true; candidates.len()],
            Some(m) => {
                let mut act = vec![false; candidates.len()];
                for node in m {
                    let k = candidates.iter().position(|&c| c == node).ok_or_else(|| Error::invalid("actionable nodes must be candidates"))?;
                    act[k] = true;
                }
                act
            }
        };
        let mut lower = vec![f64::NEG_INFINITY; q];
        let mut upper = vec![f64::INFINITY; q];
        if let Some([lo, hi]) = config.box_bounds {
            lower.iter_mut().for_each(|v| *v = lo);
            upper.iter_mut().for_each(|v| *v = hi);
        }
        for (name, [lo, hi]) in &config.node_bounds {
            let i = scm_s.dag().index_of(name).ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            lower[i] = *lo;
            upper[i] = *hi;
        }
        let linear = config.mean_mode == MeanMode::Auto && scm_s.is_linear() && scm_t.is_linear();
        let (a_s, a_t) = if linear {
            let (ts, tt) = (scm_s.total_effect_matrix(), scm_t.total_effect_matrix());
            (ts.select_columns(&candidates), tt.select_columns(&candidates))
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        };
        Ok(InterventionProblem {
            scm_s,
            scm_t,
            xbar_s: DVector::from_vec(xbar_s),
            xbar_t: DVector::from_vec(xbar_t),
            candidates,
            actionable: act,
            weights,
            config,
            lower,
            upper,
            a_s,
            a_t,
            linear,
        })
    }

    /// Baselines taken from the (standardized) data pair.
    pub fn from_pair(pair: &StatePair, scm_s: Scm, scm_t: Scm, candidates: Vec<usize>, weights: Vec<f64>, config: OptimizeConfig) -> Result<Self> {
        if pair.names() != scm_s.names() {
            return Err(Error::DagMismatch("model nodes differ from the data features".into()));
        }
        let xs = pair.source.feature_means().iter().copied().collect();
        let xt = pair.target.feature_means().iter().copied().collect();
        Self::new(scm_s, scm_t, xs, xt, candidates, None, weights, config)
    }

    /// Same problem with C2 restricted to `nodes`.
    pub fn with_actionable(&self, nodes: &[usize]) -> Result<Self> {
        let mut p = self.clone();
        p.actionable = vec![false; self.candidates.len()];
        for &node in nodes {
            let k = self.candidates.iter().position(|&c| c == node).ok_or_else(|| Error::invalid("actionable nodes must be candidates"))?;
            p.actionable[k] = true;
        }
        Ok(p)
    }

    pub fn scm_source(&self) -> &Scm {
        &self.scm_s
    }

    pub fn scm_target(&self) -> &Scm {
        &self.scm_t
    }

    pub fn names(&self) -> &[String] {
        self.scm_s.names()
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn candidate_names(&self) -> Vec<String> {
        self.candidates.iter().map(|&c| self.names()[c].clone()).collect()
    }

    pub fn actionable(&self) -> Vec<usize> {
        self.candidates.iter().zip(&self.actionable).filter(|(_, a)| **a).map(|(c, _)| *c).collect()
    }

    pub(crate) fn actionable_mask(&self) -> &[bool] {
        &self.actionable
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn config(&self) -> &OptimizeConfig {
        &self.config
    }

    pub fn xbar_source(&self) -> &[f64] {
        self.xbar_s.as_slice()
    }

    pub fn xbar_target(&self) -> &[f64] {
        self.xbar_t.as_slice()
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    pub fn has_constraints(&self) -> bool {
        self.config.rc_bound.is_some() || self.lower.iter().any(|v| v.is_finite()) || self.upper.iter().any(|v| v.is_finite())
    }

    /// Candidate vector α embedded in node space.
    pub fn full_alpha(&self, alpha: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.names().len()];
        for (k, &c) in self.candidates.iter().enumerate() {
            full[c] = alpha[k];
        }
        full
    }

    /// Identity-Jacobian gradient at the origin, `2(x̄ˢ − x̄ᵀ)` on the candidates.
    pub fn gradient_at_zero(&self) -> Vec<f64> {
        self.candidates.iter().map(|&c| 2.0 * (self.xbar_s[c] - self.xbar_t[c])).collect()
    }

    /// λ grid from the configured `ε` and `Θ`; non-actionable candidates do not set `λ_max`.
    pub fn lambda_grid(&self) -> Result<LambdaGrid> {
        let g: Vec<f64> = self.gradient_at_zero().iter().zip(&self.actionable).map(|(g, a)| if *a { *g } else { 0.0 }).collect();
        lambda_grid(&g, &self.weights, self.config.epsilon, self.config.theta)
    }

    fn mc_seed(&self) -> u64 {
        rng::derive_seed(self.config.seed, "optimize.objective")
    }

    /// Expected post-intervention means in both states.
    pub fn post_means(&self, alpha: &[f64]) -> (DVector<f64>, DVector<f64>) {
        if self.linear {
            let a = DVector::from_column_slice(alpha);
            (&self.xbar_s + &self.a_s * &a, &self.xbar_t + &self.a_t * &a)
        } else {
            let full = self.full_alpha(alpha);
            let zero = vec![0.0; full.len()];
            let seed = self.mc_seed();
            let n = self.config.mc_eval_n;
            let ds = mc_mean(&self.scm_s, &full, n, seed).0 - mc_mean(&self.scm_s, &zero, n, seed).0;
            let dt = mc_mean(&self.scm_t, &full, n, seed).0 - mc_mean(&self.scm_t, &zero, n, seed).0;
            (&self.xbar_s + ds, &self.xbar_t + dt)
        }
    }

    fn range_violation(&self, i: usize, x: f64) -> f64 {
        (x - self.upper[i]).max(self.lower[i] - x).max(0.0)
    }

    fn rc_violation(&self, x: f64, base: f64) -> f64 {
        match self.config.rc_bound {
            Some(rc) => (x.abs() - rc * base.abs()).max(0.0),
            None => 0.0,
        }
    }

    /// Worst C1 and C3 violations over both states for given post-intervention means.
    pub fn violations(&self, xs: &[f64], xt: &[f64]) -> (f64, f64) {
        let mut c1 = 0.0f64;
        let mut c3 = 0.0f64;
        for i in 0..xs.len() {
            c1 = c1.max(self.range_violation(i, xs[i])).max(self.range_violation(i, xt[i]));
            c3 = c3.max(self.rc_violation(xs[i], self.xbar_s[i])).max(self.rc_violation(xt[i], self.xbar_t[i]));
        }
        (c1, c3)
    }

    // penalty value and its derivative with respect to each mean
    fn penalty_terms(&self, x: &DVector<f64>, base: &DVector<f64>) -> (f64, DVector<f64>) {
        let rho = self.config.rho;
        let mut val = 0.0;
        let mut d = DVector::zeros(x.len());
        for i in 0..x.len() {
            let over = (x[i] - self.upper[i]).max(0.0);
            let under = (self.lower[i] - x[i]).max(0.0);
            val += rho * (over * over + under * under);
            d[i] += 2.0 * rho * (over - under);
            let v = self.rc_violation(x[i], base[i]);
            if v > 0.0 {
                val += rho * v * v;
                d[i] += 2.0 * rho * v * x[i].signum();
            }
        }
        (val, d)
    }

    fn value_parts(&self, alpha: &[f64]) -> (f64, f64, f64) {
        let (xs, xt) = self.post_means(alpha);
        let alignment = (&xs - &self.xbar_t).norm_squared();
        let stability = (&xt - &self.xbar_t).norm_squared();
        let constrained = self.has_constraints();
        let penalty = if constrained { self.penalty_terms(&xs, &self.xbar_s).0 + self.penalty_terms(&xt, &self.xbar_t).0 } else { 0.0 };
        (alignment, stability, penalty)
    }

    /// Smooth objective value only.
    pub fn smooth_value(&self, alpha: &[f64]) -> f64 {
        let (a, s, p) = self.value_parts(alpha);
        a + self.config.gamma * s + p
    }

    /// Smooth objective and gradient over the candidates. Coordinates outside
    /// the actionable set get a zero gradient.
    pub fn smooth_loss(&self, alpha: &[f64]) -> SmoothEval {
        let k = self.candidates.len();
        let (alignment, stability, penalty) = self.value_parts(alpha);
        let value = alignment + self.config.gamma * stability + penalty;
        let mut gradient = vec![0.0; k];
        if self.linear {
            let (xs, xt) = self.post_means(alpha);
            let mut ds = 2.0 * (&xs - &self.xbar_t);
            let mut dt = 2.0 * self.config.gamma * (&xt - &self.xbar_t);
            if self.has_constraints() {
                ds += self.penalty_terms(&xs, &self.xbar_s).1;
                dt += self.penalty_terms(&xt, &self.xbar_t).1;
            }
            let g = self.a_s.tr_mul(&ds) + self.a_t.tr_mul(&dt);
            for j in 0..k {
                if self.actionable[j] {
                    gradient[j] = g[j];
                }
            }
        } else {
            let mut x = alpha.to_vec();
            for j in 0..k {
                if !self.actionable[j] {
                    continue;
                }
                let h = 1e-5 * (1.0 + alpha[j].abs());
                x[j] = alpha[j] + h;
                let up = self.smooth_value(&x);
                x[j] = alpha[j] - h;
                let down = self.smooth_value(&x);
                x[j] = alpha[j];
                gradient[j] = (up - down) / (2.0 * h);
            }
        }
        SmoothEval { value, gradient, alignment, stability, penalty }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::data::StateLabel;
    use crate::graph::Dag;
    use crate::scm::{Mechanism, NoiseModel};

    pub(crate) fn names(q: usize) -> Vec<String> {
        (0..q).map(|i| format!("x{}", i + 1)).collect()
    }

    pub(crate) fn linear_scm(dag: &Dag, intercepts: &[f64], coefs: &[f64], var: f64, state: StateLabel) -> Scm {
        let mut mechs: Vec<Mechanism> = (0..dag.len())
            .map(|i| Mechanism::linear(i, vec![], intercepts[i], vec![], NoiseModel::Gaussian { mean: 0.0, variance: var }))
            .collect();
        for (k, (p, c)) in dag.edges().into_iter().enumerate() {
            mechs[c].parents.push(p);
            mechs[c].coefficients.push(coefs[k]);
        }
        Scm::new(dag.clone(), mechs, state).unwrap()
    }

    /// Empty graph with independent nodes: T = I.
    pub(crate) fn empty_problem(xs: &[f64], xt: &[f64], cfg: OptimizeConfig) -> InterventionProblem {
        let q = xs.len();
        let dag = Dag::empty(names(q));
        let s = linear_scm(&dag, xs, &[], 1.0, StateLabel::Source);
        let t = linear_scm(&dag, xt, &[], 1.0, StateLabel::Target);
        InterventionProblem::new(s, t, xs.to_vec(), xt.to_vec(), (0..q).collect(), None, vec![1.0; q], cfg).unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weights_from_attributions(&[4.0, 1.0]).unwrap(), vec![0.25, 1.0]);
        assert_eq!(weights_from_attributions(&[2.0, 2.0, 2.0]).unwrap(), vec![1.0; 3]);
        let w = weights_from_attributions(&[1.0, 0.0]).unwrap();
        assert_eq!(w[1], 1.0);
        assert!((w[0] - 1e-6).abs() < 1e-18);
        assert!(matches!(weights_from_attributions(&[0.0, 0.0]), Err(Error::AllZeroScores)));
    }

    #[test]
    fn gradient_at_zero_examples() {
        let p = empty_problem(&[0.0, 0.0], &[-1.0, 2.0], OptimizeConfig::default());
        assert_eq!(p.gradient_at_zero(), vec![2.0, -4.0]);
        let p = empty_problem(&[0.0, 0.0], &[-1.0, 2.0], OptimizeConfig { gamma: 0.7, ..Default::default() });
        assert_eq!(p.gradient_at_zero(), vec![2.0, -4.0]);
        // and the full gradient agrees at the origin on an identity Jacobian
        assert_eq!(p.smooth_loss(&[0.0, 0.0]).gradient, vec![2.0, -4.0]);
    }

    #[test]
    fn grid_examples() {
        let g = lambda_grid(&[2.0, -4.0], &[1.0, 0.5], 1e-3, 30).unwrap();
        assert_eq!(g.lambda_max, 8.0);
        assert_eq!(g.values.len(), 30);
        let g2 = lambda_grid(&[2.0, -4.0], &[1.0, 0.5], 1e-3, 2).unwrap();
        assert_eq!(g2.values, vec![8.0, 8.0 * 1e-3]);
        let g4 = lambda_grid(&[1.0], &[1.0], 1e-3, 4).unwrap();
        for w in g4.values.windows(2) {
            assert!((w[1] / w[0] - 0.1).abs() < 1e-14);
        }
        assert!(matches!(lambda_grid(&[0.0, 0.0], &[1.0, 1.0], 1e-3, 5), Err(Error::ZeroGradient)));
    }

    #[test]
    fn transition_examples() {
        let (s, t) = ([0.0, 0.0], [2.0, 0.0]);
        assert_eq!(transition_percentage(&s, &t, &t).unwrap(), 100.0);
        assert_eq!(transition_percentage(&s, &t, &s).unwrap(), 0.0);
        assert_eq!(transition_percentage(&s, &t, &[1.0, 0.0]).unwrap(), 75.0);
        assert!(matches!(transition_percentage(&s, &s, &t), Err(Error::IdenticalStates)));
    }

    #[test]
    fn loss_at_origin_and_minimizer() {
        let xs = [0.5, -1.0, 2.0];
        let xt = [1.0, 1.0, 1.5];
        let p = empty_problem(&xs, &xt, OptimizeConfig::default());
        let d: f64 = xs.iter().zip(&xt).map(|(a, b)| (a - b) * (a - b)).sum();
        assert_eq!(p.smooth_loss(&[0.0; 3]).value, d);
        let opt: Vec<f64> = xs.iter().zip(&xt).map(|(a, b)| b - a).collect();
        let e = p.smooth_loss(&opt);
        assert!(e.value < 1e-24);
        assert!(e.gradient.iter().all(|g| g.abs() < 1e-12));
    }

    fn fd_check(p: &InterventionProblem, alpha: &[f64]) -> f64 {
        let g = p.smooth_loss(alpha).gradient;
        let mut worst = 0.0f64;
        let mut x = alpha.to_vec();
        for j in 0..alpha.len() {
            let h = 1e-6 * (1.0 + alpha[j].abs());
            x[j] = alpha[j] + h;
            let up = p.smooth_value(&x);
            x[j] = alpha[j] - h;
            let dn = p.smooth_value(&x);
            x[j] = alpha[j];
            let fd = (up - dn) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1.0));
        }
        worst
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let dag = Dag::new(names(4), &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let s = linear_scm(&dag, &[0.0; 4], &[0.8, -1.2, 0.5], 1.0, StateLabel::Source);
        let t = linear_scm(&dag, &[0.0; 4], &[0.6, -1.0, 0.9], 1.0, StateLabel::Target);
        let cfg = OptimizeConfig { gamma: 0.4, box_bounds: Some([-0.8, 1.2]), rc_bound: Some(1.5), ..Default::default() };
        let xs = vec![0.3, -0.4, 0.9, 0.2];
        let xt = vec![1.0, 0.5, -0.3, 0.6];
        let p = InterventionProblem::new(s, t, xs, xt, vec![0, 1, 3], None, vec![1.0, 0.5, 0.8], cfg).unwrap();
        let alpha = [0.7, -0.5, 0.9];
        assert!(p.smooth_loss(&alpha).penalty > 0.0);
        assert!(fd_check(&p, &alpha) < 1e-5);
    }

    #[test]
    fn monte_carlo_mode_tracks_linear_mode() {
        let dag = Dag::new(names(3), &[(0, 1), (1, 2)]).unwrap();
        let s = linear_scm(&dag, &[0.0; 3], &[1.5, -0.5], 1.0, StateLabel::Source);
        let t = linear_scm(&dag, &[0.0; 3], &[1.0, -0.7], 1.0, StateLabel::Target);
        let xs = vec![0.0, 0.0, 0.0];
        let xt = vec![1.0, 1.0, -0.5];
        let lin = InterventionProblem::new(s.clone(), t.clone(), xs.clone(), xt.clone(), vec![0, 1], None, vec![1.0, 1.0], OptimizeConfig { gamma: 0.3, ..Default::default() }).unwrap();
        let mc = InterventionProblem::new(s, t, xs, xt, vec![0, 1], None, vec![1.0, 1.0], OptimizeConfig { gamma: 0.3, mean_mode: MeanMode::MonteCarlo, mc_eval_n: 2000, ..Default::default() })
            .unwrap();
        assert!(!mc.is_linear());
        let alpha = [0.4, -0.2];
        let (a, b) = (lin.smooth_loss(&alpha), mc.smooth_loss(&alpha));
        // common random numbers make linear shift effects exact
        assert!((a.value - b.value).abs() < 1e-9);
        for j in 0..2 {
            assert!((a.gradient[j] - b.gradient[j]).abs() < 1e-4 * (1.0 + a.gradient[j].abs()));
        }
    }

    #[test]
    fn constructor_validation() {
        let dag = Dag::empty(names(2));
        let s = linear_scm(&dag, &[0.0, 0.0], &[], 1.0, StateLabel::Source);
        let mk = |c: Vec<usize>, act: Option<Vec<usize>>, w: Vec<f64>, xt: Vec<f64>| {
            InterventionProblem::new(s.clone(), s.clone(), vec![0.0, 0.0], xt, c, act, w, OptimizeConfig::default())
        };
        assert!(mk(vec![0], None, vec![1.0], vec![1.0, 0.0]).is_ok());
        assert!(matches!(mk(vec![0], None, vec![1.0], vec![0.0, 0.0]), Err(Error::IdenticalStates)));
        assert!(mk(vec![0], Some(vec![1]), vec![1.0], vec![1.0, 0.0]).is_err());
        assert!(mk(vec![0, 0], None, vec![1.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(mk(vec![0], None, vec![0.0], vec![1.0, 0.0]).is_err());
        let bad = OptimizeConfig { gamma: 2.0, ..Default::default() };
        assert!(InterventionProblem::new(s.clone(), s, vec![0.0; 2], vec![1.0, 0.0], vec![0], None, vec![1.0], bad).is_err());
    }
}
