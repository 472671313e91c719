use serde::{Deserialize, Serialize};

use super::{transition_percentage, InterventionProblem, LambdaGrid, SUPPORT_TOL};
use crate::error::{Error, Result};
use crate::rng;
use crate::scm::mc_mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub constrained: bool,
    /// Worst range violation of the simulated means over both states.
    pub c1_violation: f64,
    /// Worst relative-change violation of the simulated means over both states.
    pub c3_violation: f64,
    pub c1_ok: bool,
    pub c3_ok: bool,
    pub feasible: bool,
    /// Largest Monte-Carlo standard error among the simulated means.
    pub max_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub lambda: f64,
    /// Shift per candidate, in candidate order.
    pub alpha: Vec<f64>,
    pub support: Vec<usize>,
    pub support_names: Vec<String>,
    /// From simulated post-intervention source means.
    pub transition_pct: f64,
    /// From the expected (closed-form or common-random-number) means.
    pub transition_pct_expected: f64,
    pub objective_value: f64,
    pub alignment_term: f64,
    pub stability_term: f64,
    pub penalty: f64,
    pub feasibility: Feasibility,
    pub iterations: usize,
    pub converged: bool,
    pub mc_seed: u64,
}

impl Solution {
    pub fn support_size(&self) -> usize {
        self.support.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegPath {
    pub candidates: Vec<String>,
    pub weights: Vec<f64>,
    pub grid: LambdaGrid,
    /// One entry per grid value, in grid order (descending λ).
    pub solutions: Vec<Solution>,
}

impl RegPath {
    pub fn support_sizes(&self) -> Vec<usize> {
        self.solutions.iter().map(Solution::support_size).collect()
    }

    /// `lambda,support_size,transition_pct` per path entry.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("lambda,support_size,transition_pct\n");
        for s in &self.solutions {
            out.push_str(&format!("{},{},{}\n", s.lambda, s.support_size(), s.transition_pct));
        }
        out
    }

    /// Solutions × candidates matrix of shift values.
    pub fn heatmap_csv(&self) -> String {
        let mut out = String::from("lambda");
        for c in &self.candidates {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for s in &self.solutions {
            out.push_str(&s.lambda.to_string());
            for a in &s.alpha {
                out.push_str(&format!(",{a}"));
            }
            out.push('\n');
        }
        out
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn l1(p: &InterventionProblem, x: &[f64]) -> f64 {
    x.iter().zip(p.weights()).map(|(a, w)| w * a.abs()).sum()
}

fn initial_step(p: &InterventionProblem) -> f64 {
    if !p.is_linear() {
        return 1.0;
    }
    // Frobenius bound on the curvature of the unpenalized loss
    let mask = p.actionable_mask();
    let mut l = 0.0;
    for (j, &on) in mask.iter().enumerate() {
        if on {
            l += p.a_s.column(j).norm_squared() + p.config().gamma * p.a_t.column(j).norm_squared();
        }
    }
    if l > 0.0 {
        1.0 / (2.0 * l)
    } else {
        1.0
    }
}

/// Accelerated proximal gradient with backtracking and adaptive restart.
/// Returns the iterate, iterations used and whether the update tolerance was met.
fn minimize(p: &InterventionProblem, lambda: f64, start: Vec<f64>) -> (Vec<f64>, usize, bool) {
    let cfg = p.config();
    let mask = p.actionable_mask().to_vec();
    let w = p.weights().to_vec();
    let k = start.len();
    let prox = |v: &[f64], step: f64| -> Vec<f64> { (0..k).map(|j| if mask[j] { soft(v[j], step * lambda * w[j]) } else { 0.0 }).collect() };
    let mut x: Vec<f64> = start.iter().zip(&mask).map(|(a, m)| if *m { *a } else { 0.0 }).collect();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut step = initial_step(p);
    let mut best = (p.smooth_value(&x) + lambda * l1(p, &x), x.clone());
    for it in 1..=cfg.max_iter {
        let e = p.smooth_loss(&y);
        let mut z;
        loop {
            let v: Vec<f64> = (0..k).map(|j| y[j] - step * e.gradient[j]).collect();
            z = prox(&v, step);
            let fz = p.smooth_value(&z);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for j in 0..k {
                let d = z[j] - y[j];
                lin += e.gradient[j] * d;
                quad += d * d;
            }
            if fz <= e.value + lin + quad / (2.0 * step) + 1e-12 * (1.0 + e.value.abs()) || step < 1e-30 {
                break;
            }
            step *= 0.5;
        }
        let delta = (0..k).map(|j| (z[j] - x[j]).abs()).fold(0.0, f64::max);
        let uphill: f64 = (0..k).map(|j| (y[j] - z[j]) * (z[j] - x[j])).sum();
        if uphill > 0.0 {
            t = 1.0;
            y = z.clone();
        } else {
            let tn = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = (0..k).map(|j| z[j] + (t - 1.0) / tn * (z[j] - x[j])).collect();
            t = tn;
        }
        x = z;
        let f = p.smooth_value(&x) + lambda * l1(p, &x);
        if f <= best.0 {
            best = (f, x.clone());
        }
        if delta < cfg.tol {
            return (x, it, true);
        }
    }
    (best.1, cfg.max_iter, false)
}

fn finish(p: &InterventionProblem, lambda: f64, mut alpha: Vec<f64>, iterations: usize, converged: bool) -> Result<Solution> {
    for a in alpha.iter_mut() {
        if a.abs() < SUPPORT_TOL {
            *a = 0.0;
        }
    }
    let cfg = p.config();
    let support: Vec<usize> = p.candidates().iter().zip(&alpha).filter(|(_, a)| **a != 0.0).map(|(c, _)| *c).collect();
    let support_names = support.iter().map(|&c| p.names()[c].clone()).collect();
    let e = p.smooth_loss(&alpha);
    let (exp_s, _) = p.post_means(&alpha);
    let transition_pct_expected = transition_percentage(p.xbar_source(), p.xbar_target(), exp_s.as_slice())?;
    let mc_seed = rng::derive_seed(cfg.seed, "optimize.transition");
    let full = p.full_alpha(&alpha);
    let (sim_s, se_s) = mc_mean(p.scm_source(), &full, cfg.mc_n, mc_seed);
    let transition_pct = transition_percentage(p.xbar_source(), p.xbar_target(), sim_s.as_slice())?;
    let feasibility = if p.has_constraints() {
        let (sim_t, se_t) = mc_mean(p.scm_target(), &full, cfg.mc_n, mc_seed);
        let (c1, c3) = p.violations(sim_s.as_slice(), sim_t.as_slice());
        let max_std_error = se_s.iter().chain(se_t.iter()).fold(0.0f64, |a, b| a.max(*b));
        Feasibility { constrained: true, c1_violation: c1, c3_violation: c3, c1_ok: c1 == 0.0, c3_ok: c3 == 0.0, feasible: c1 == 0.0 && c3 == 0.0, max_std_error }
    } else {
        let max_std_error = se_s.iter().fold(0.0f64, |a, b| a.max(*b));
        Feasibility { constrained: false, c1_violation: 0.0, c3_violation: 0.0, c1_ok: true, c3_ok: true, feasible: true, max_std_error }
    };
    Ok(Solution {
        lambda,
        objective_value: e.value + lambda * l1(p, &alpha),
        alignment_term: e.alignment,
        stability_term: e.stability,
        penalty: e.penalty,
        alpha,
        support,
        support_names,
        transition_pct,
        transition_pct_expected,
        feasibility,
        iterations,
        converged,
        mc_seed,
    })
}

/// Minimize the full objective at one `λ`, starting from `warm` (or the origin).
pub fn solve(p: &InterventionProblem, lambda: f64, warm: Option<&[f64]>) -> Result<Solution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite and >= 0"));
    }
    let k = p.candidates().len();
    let start = match warm {
        Some(w) if w.len() == k => w.to_vec(),
        Some(_) => return Err(Error::invalid("warm start length differs from the candidate count")),
        None => vec![0.0; k],
    };
    let (alpha, iterations, converged) = minimize(p, lambda, start);
    if !converged {
        log::warn!("solver hit {iterations} iterations at lambda {lambda}");
    }
    finish(p, lambda, alpha, iterations, converged)
}

/// Warm-started solves down the grid; repeated `λ` values reuse the previous solution.
pub fn solve_path(p: &InterventionProblem, grid: &LambdaGrid) -> Result<RegPath> {
    if grid.values.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut solutions: Vec<Solution> = Vec::with_capacity(grid.values.len());
    for &lambda in &grid.values {
        let sol = match solutions.last() {
            Some(prev) if prev.lambda == lambda => prev.clone(),
            Some(prev) => solve(p, lambda, Some(&prev.alpha))?,
            None => solve(p, lambda, None)?,
        };
        solutions.push(sol);
    }
    Ok(RegPath { candidates: p.candidate_names(), weights: p.weights().to_vec(), grid: grid.clone(), solutions })
}
