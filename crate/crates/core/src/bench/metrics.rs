use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::StatePair;
use crate::error::{Error, Result};
use crate::optimize::{solve, InterventionProblem, OptimizeConfig, RegPath};
use crate::scm::Scm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdaScore {
    pub node: usize,
    pub name: String,
    pub score: f64,
}

/// Variables by `|mean(source) − mean(target)|`, largest first, ties by name.
pub fn mda_rank(pair: &StatePair) -> Vec<MdaScore> {
    let ms = pair.source.feature_means();
    let mt = pair.target.feature_means();
    let mut out: Vec<MdaScore> = pair
        .names()
        .iter()
        .enumerate()
        .map(|(j, n)| MdaScore { node: j, name: n.clone(), score: (ms[j] - mt[j]).abs() })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    out
}

/// Share of the first `k` ranked items that belong to `truth`.
pub fn recall_at_k<T: Ord>(ranked: &[T], truth: &BTreeSet<T>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > ranked.len() {
        return Err(Error::TooFew { requested: k, available: ranked.len() });
    }
    Ok(ranked[..k].iter().filter(|x| truth.contains(x)).count() as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpAtK {
    pub value: f64,
    pub support_size: usize,
    /// No solution had exactly the requested size.
    pub substituted: bool,
}

/// Transition percentage at the solution whose support size is `k`.
///
/// Several solutions of that size resolve to the largest percentage. Without
/// one, the nearest size is used (the smaller on a tie) and flagged.
pub fn tp_at_k(path: &RegPath, k: usize) -> Result<TpAtK> {
    if path.solutions.is_empty() {
        return Err(Error::EmptyPath);
    }
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for s in &path.solutions {
        let e = best.entry(s.support_size()).or_insert(f64::NEG_INFINITY);
        *e = e.max(s.transition_pct);
    }
    let size = *best.keys().min_by_key(|&&sz| (sz.abs_diff(k), sz)).expect("nonempty path");
    Ok(TpAtK { value: best[&size], support_size: size, substituted: size != k })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBest {
    pub size: usize,
    /// Support of the best solution of this size, sorted by name.
    pub support: Vec<String>,
    pub transition_pct: f64,
}

/// The best solution of every nonzero support size on the path, smallest size first.
/// Ties in percentage keep the earlier (larger `λ`) solution.
pub fn best_per_size(path: &RegPath) -> Vec<SizeBest> {
    let mut best: BTreeMap<usize, SizeBest> = BTreeMap::new();
    for s in path.solutions.iter().filter(|s| s.support_size() > 0) {
        let size = s.support_size();
        if best.get(&size).is_some_and(|b| b.transition_pct >= s.transition_pct) {
            continue;
        }
        let mut support = s.support_names.clone();
        support.sort();
        best.insert(size, SizeBest { size, support, transition_pct: s.transition_pct });
    }
    best.into_values().collect()
}

/// Mean transition percentage over the nonzero support sizes of a path, each
/// size contributing its best solution.
pub fn avg_tp(path: &RegPath) -> Result<f64> {
    let sizes = best_per_size(path);
    if sizes.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(sizes.iter().map(|s| s.transition_pct).sum::<f64>() / sizes.len() as f64)
}

/// For each size, solve `λ = 0` with the top-`size` MDA variables as the only
/// candidates (unit weights) and report the simulated transition percentage.
pub fn mda_tp_matched(pair: &StatePair, scm_s: &Scm, scm_t: &Scm, ranking: &[MdaScore], sizes: &[usize], cfg: &OptimizeConfig) -> Result<Vec<f64>> {
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        if size > ranking.len() {
            return Err(Error::TooFew { requested: size, available: ranking.len() });
        }
        if let Some(&v) = cache.get(&size) {
            out.push(v);
            continue;
        }
        let nodes: Vec<usize> = ranking[..size].iter().map(|m| m.node).collect();
        let v = unregularized_tp(pair, scm_s, scm_t, &nodes, cfg)?;
        cache.insert(size, v);
        out.push(v);
    }
    Ok(out)
}

/// Simulated transition percentage of the `λ = 0` solution restricted to `nodes`.
pub fn unregularized_tp(pair: &StatePair, scm_s: &Scm, scm_t: &Scm, nodes: &[usize], cfg: &OptimizeConfig) -> Result<f64> {
    if nodes.is_empty() {
        return Ok(0.0);
    }
    let mut cand = nodes.to_vec();
    cand.sort_unstable();
    cand.dedup();
    let w = vec![1.0; cand.len()];
    let p = InterventionProblem::from_pair(pair, scm_s.clone(), scm_t.clone(), cand, w, cfg.clone())?;
    Ok(solve(&p, 0.0, None)?.transition_pct)
}
