//! Mechanism-change attribution of the source → target mean shift.
//!
//! For a responsive variable `i`, the game value of a node set `Γ` is the mean
//! of `x_i` when nodes in `Γ` use target mechanisms and all other nodes use
//! source mechanisms. Shapley values of this game give `ψ_ij`; summing their
//! magnitudes over the shifted variables gives the driver score `u_j`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::StatePair;
use crate::error::{Error, Result};
use crate::featsel::{bh_adjust, shift_p_value, TestKind};
use crate::rng;
use crate::scm::{Mechanism, Scm};

/// How hybrid means are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HybridEvaluation {
    /// Spliced closed form for linear models.
    #[default]
    ClosedForm,
    /// Ancestral simulation with one common seed for every `Γ`.
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributionConfig {
    pub exact_max_nodes: usize,
    pub n_permutations: usize,
    pub mc_samples_per_eval: usize,
    pub delta: f64,
    pub fdr_level: f64,
    pub evaluation: HybridEvaluation,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        AttributionConfig {
            exact_max_nodes: 12,
            n_permutations: 200,
            mc_samples_per_eval: 5000,
            delta: 0.01,
            fdr_level: 0.05,
            evaluation: HybridEvaluation::ClosedForm,
        }
    }
}

impl AttributionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exact_max_nodes == 0 || self.exact_max_nodes > 24 {
            return Err(Error::invalid("exact_max_nodes must lie in 1..=24"));
        }
        if self.n_permutations == 0 || self.mc_samples_per_eval == 0 {
            return Err(Error::invalid("n_permutations and mc_samples_per_eval must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.fdr_level > 0.0 && self.fdr_level < 1.0) {
            return Err(Error::invalid("fdr_level must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMode {
    Exact,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub nodes: Vec<String>,
    pub omega: Vec<usize>,
    /// Rows follow `omega`, columns follow `nodes`.
    pub psi: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub normalized_u: Vec<f64>,
    pub selected: Vec<usize>,
    pub mode: ShapleyMode,
    pub config: AttributionConfig,
}

impl AttributionReport {
    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|&j| self.nodes[j].clone()).collect()
    }

    pub fn psi_csv(&self) -> String {
        let mut out = String::from("variable");
        for n in &self.nodes {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (r, &i) in self.omega.iter().enumerate() {
            out.push_str(&self.nodes[i]);
            for v in &self.psi[r] {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Features whose BH-adjusted Welch p-value falls below `fdr_level`.
pub fn significant_shift_set(pair: &StatePair, fdr_level: f64) -> Result<Vec<usize>> {
    let raw: Vec<f64> = (0..pair.p())
        .into_par_iter()
        .map(|j| shift_p_value(&pair.source.column(j), &pair.target.column(j), TestKind::Welch))
        .collect::<Result<_>>()?;
    let adj = bh_adjust(&raw)?;
    Ok((0..pair.p()).filter(|&j| adj[j] < fdr_level).collect())
}

fn check_shared(s: &Scm, t: &Scm) -> Result<()> {
    if s.names() != t.names() || s.dag().edges() != t.dag().edges() {
        return Err(Error::DagMismatch("source and target models must share one graph".into()));
    }
    Ok(())
}

fn spliced(s: &Scm, t: &Scm, gamma: &[bool]) -> Result<Scm> {
    let mechs: Vec<Mechanism> = (0..s.len()).map(|i| if gamma[i] { t.mechanism(i).clone() } else { s.mechanism(i).clone() }).collect();
    Scm::new(s.dag().clone(), mechs, s.state().clone())
}

// Closed-form spliced means; `order` is the shared topological order.
fn spliced_mean(s: &Scm, t: &Scm, gamma: &[bool], out: &mut [f64]) {
    for &i in s.order() {
        let m = if gamma[i] { t.mechanism(i) } else { s.mechanism(i) };
        let mut v = m.intercept + m.noise.mean();
        for (&p, &c) in m.parents.iter().zip(&m.coefficients) {
            v += c * out[p];
        }
        out[i] = v;
    }
}

struct Game<'a> {
    s: &'a Scm,
    t: &'a Scm,
    eval: HybridEvaluation,
    mc_n: usize,
    seed: u64,
}

impl Game<'_> {
    fn value(&self, gamma: &[bool]) -> Vec<f64> {
        match self.eval {
            HybridEvaluation::ClosedForm => {
                let mut out = vec![0.0; self.s.len()];
                spliced_mean(self.s, self.t, gamma, &mut out);
                out
            }
            HybridEvaluation::MonteCarlo => {
                let h = spliced(self.s, self.t, gamma).expect("splice of validated models");
                let (m, _) = crate::scm::mc_mean(&h, &vec![0.0; h.len()], self.mc_n, self.seed);
                m.iter().copied().collect()
            }
        }
    }
}

/// Node-wise means of the hybrid model in which nodes in `gamma` use target mechanisms.
pub fn hybrid_mean(s: &Scm, t: &Scm, gamma: &BTreeSet<usize>, cfg: &AttributionConfig, seed: u64) -> Result<Vec<f64>> {
    check_shared(s, t)?;
    if let Some(&bad) = gamma.iter().find(|&&i| i >= s.len()) {
        return Err(Error::invalid(format!("node {bad} out of range")));
    }
    let mask: Vec<bool> = (0..s.len()).map(|i| gamma.contains(&i)).collect();
    let game = Game { s, t, eval: cfg.evaluation, mc_n: cfg.mc_samples_per_eval, seed: rng::derive_seed(seed, "attribution.hybrid") };
    Ok(game.value(&mask))
}

/// Shapley values `ψ` (rows follow `omega`). Exact enumeration up to
/// `exact_max_nodes` nodes, otherwise a permutation estimator whose
/// permutations are shared by every row.
pub fn shapley_attributions(s: &Scm, t: &Scm, omega: &[usize], cfg: &AttributionConfig, seed: u64) -> Result<(DMatrix<f64>, ShapleyMode)> {
    cfg.validate()?;
    check_shared(s, t)?;
    let q = s.len();
    if let Some(&bad) = omega.iter().find(|&&i| i >= q) {
        return Err(Error::invalid(format!("responsive variable {bad} out of range")));
    }
    let game = Game { s, t, eval: cfg.evaluation, mc_n: cfg.mc_samples_per_eval, seed: rng::derive_seed(seed, "attribution.hybrid") };
    if q <= cfg.exact_max_nodes {
        Ok((exact_shapley(&game, q, omega), ShapleyMode::Exact))
    } else {
        Ok((permutation_shapley(&game, q, omega, cfg.n_permutations, seed), ShapleyMode::Permutation))
    }
}

fn exact_shapley(game: &Game, q: usize, omega: &[usize]) -> DMatrix<f64> {
    let masks = 1usize << q;
    let values: Vec<Vec<f64>> = (0..masks)
        .into_par_iter()
        .map(|m| {
            let gamma: Vec<bool> = (0..q).map(|i| m >> i & 1 == 1).collect();
            let v = game.value(&gamma);
            omega.iter().map(|&i| v[i]).collect()
        })
        .collect();
    // weight of a coalition of size s not containing the player: s!(q-s-1)!/q!
    let mut w = vec![0.0; q];
    for (sz, wv) in w.iter_mut().enumerate() {
        let mut x = 1.0 / q as f64;
        // 1 / (q · C(q-1, sz))
        for k in 0..sz {
            x *= (k + 1) as f64 / (q - 1 - k) as f64;
        }
        *wv = x;
    }
    let mut psi = DMatrix::zeros(omega.len(), q);
    for j in 0..q {
        let bit = 1usize << j;
        for m in 0..masks {
            if m & bit != 0 {
                continue;
            }
            let wt = w[m.count_ones() as usize];
            let (with, without) = (&values[m | bit], &values[m]);
            for r in 0..omega.len() {
                psi[(r, j)] += wt * (with[r] - without[r]);
            }
        }
    }
    psi
}

fn permutation_shapley(game: &Game, q: usize, omega: &[usize], n_perm: usize, seed: u64) -> DMatrix<f64> {
    // collected in order, then summed sequentially, so the result does not depend on thread scheduling
    let parts: Vec<DMatrix<f64>> = (0..n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng::stream("attribution.permutation", rng::derive_seed(seed, &p.to_string()));
            let mut order: Vec<usize> = (0..q).collect();
            order.shuffle(&mut rng);
            let mut gamma = vec![false; q];
            let mut acc = DMatrix::zeros(omega.len(), q);
            let mut prev = game.value(&gamma);
            for &j in &order {
                gamma[j] = true;
                let cur = game.value(&gamma);
                for (r, &i) in omega.iter().enumerate() {
                    acc[(r, j)] = cur[i] - prev[i];
                }
                prev = cur;
            }
            acc
        })
        .collect();
    let sum = parts.into_iter().fold(DMatrix::zeros(omega.len(), q), |a, b| a + b);
    sum / n_perm as f64
}

/// `u_j = Σ_i |ψ_ij|`.
pub fn accumulated_scores(psi: &DMatrix<f64>) -> Vec<f64> {
    psi.column_iter().map(|c| c.iter().map(|v| v.abs()).sum()).collect()
}

/// Scores rescaled to sum to 100.
pub fn normalize_scores(u: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = u.iter().sum();
    if !(total > 0.0) || u.iter().any(|v| *v < 0.0) {
        return Err(Error::AllZeroScores);
    }
    Ok(u.iter().map(|v| v / total * 100.0).collect())
}

/// Diminishing-returns selection: walk nodes by descending score (ties by
/// name) and stop before the first candidate whose share of the running total
/// drops below `delta`. The top node is always selected.
pub fn adaptive_select(u: &[f64], names: &[String], delta: f64) -> Result<Vec<usize>> {
    let norm = normalize_scores(u)?;
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[b].total_cmp(&u[a]).then_with(|| names[a].cmp(&names[b])));
    let mut selected = vec![order[0]];
    let mut cum = norm[order[0]];
    for &c in &order[1..] {
        if norm[c] / cum < delta {
            break;
        }
        selected.push(c);
        cum += norm[c];
    }
    Ok(selected)
}

/// Full attribution step on a standardized pair and its two fitted models.
pub fn run_attribution(pair: &StatePair, s: &Scm, t: &Scm, cfg: &AttributionConfig, seed: u64) -> Result<AttributionReport> {
    cfg.validate()?;
    if pair.names() != s.names() {
        return Err(Error::DagMismatch("model nodes differ from the data features".into()));
    }
    let omega = significant_shift_set(pair, cfg.fdr_level)?;
    let (psi, mode) = shapley_attributions(s, t, &omega, cfg, seed)?;
    let u = accumulated_scores(&psi);
    let normalized_u = normalize_scores(&u)?;
    let selected = adaptive_select(&u, s.names(), cfg.delta)?;
    Ok(AttributionReport {
        nodes: s.names().to_vec(),
        omega,
        psi: psi.row_iter().map(|r| r.iter().copied().collect()).collect(),
        u,
        normalized_u,
        selected,
        mode,
        config: cfg.clone(),
    })
}

/// Efficiency gap `Σ_j ψ_ij − (v_i(all) − v_i(∅))` per row, on closed-form values.
pub fn efficiency_gaps(s: &Scm, t: &Scm, omega: &[usize], psi: &DMatrix<f64>) -> Vec<f64> {
    let q = s.len();
    let mut all = vec![0.0; q];
    let mut none = vec![0.0; q];
    spliced_mean(s, t, &vec![true; q], &mut all);
    spliced_mean(s, t, &vec![false; q], &mut none);
    omega.iter().enumerate().map(|(r, &i)| psi.row(r).sum() - (all[i] - none[i])).collect()
}
