//! Feature selection: univariate shift tests with FDR control, optional prior
//! features, elastic-net regulator expansion and topology-aware refinement.

mod betweenness;
mod elastic_net;
mod stats;

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::StatePair;
use crate::error::{Error, Result};

pub use betweenness::betweenness;
pub use elastic_net::{ElasticNetConfig, ElasticNetFit};
pub use stats::{bh_adjust, mann_whitney_u, skewness, welch_t, TestResult};

pub(crate) use stats::normal_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalityMode {
    Welch,
    MannWhitney,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub fdr_level: f64,
    pub abs_effect_threshold: f64,
    pub normality_mode: NormalityMode,
    pub prior_features: Vec<String>,
    /// N: regulators kept per key feature. 0 skips expansion.
    pub regulators_per_key: usize,
    /// K: regulators kept per key feature after refinement. 0 skips refinement.
    pub top_k_per_key: usize,
    pub alpha_mix: f64,
    pub edge_weight_floor: f64,
    pub elastic_net: ElasticNetConfig,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            fdr_level: 0.05,
            abs_effect_threshold: 0.0,
            normality_mode: NormalityMode::Auto,
            prior_features: Vec::new(),
            regulators_per_key: 3,
            top_k_per_key: 0,
            alpha_mix: 0.5,
            edge_weight_floor: 0.0,
            elastic_net: ElasticNetConfig::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fdr_level > 0.0 && self.fdr_level < 1.0) {
            return Err(Error::invalid("fdr_level must lie in (0, 1)"));
        }
        if self.abs_effect_threshold < 0.0 || self.edge_weight_floor < 0.0 {
            return Err(Error::invalid("thresholds must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return Err(Error::invalid("alpha_mix must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Welch,
    MannWhitney,
}

/// Which test to run for one feature.
pub fn choose_test(a: &[f64], b: &[f64], mode: NormalityMode) -> TestKind {
    match mode {
        NormalityMode::Welch => TestKind::Welch,
        NormalityMode::MannWhitney => TestKind::MannWhitney,
        NormalityMode::Auto => {
            if a.len() >= 20 && b.len() >= 20 && skewness(a).abs() < 1.0 && skewness(b).abs() < 1.0 {
                TestKind::Welch
            } else {
                TestKind::MannWhitney
            }
        }
    }
}

/// Two-sided p-value for a mean shift; two constant samples give 0 or 1.
pub fn shift_p_value(a: &[f64], b: &[f64], kind: TestKind) -> Result<f64> {
    match kind {
        TestKind::Welch => match welch_t(a, b) {
            Ok(r) => Ok(r.p),
            Err(Error::DegenerateVariance) => Ok(if a[0] == b[0] { 1.0 } else { 0.0 }),
            Err(e) => Err(e),
        },
        TestKind::MannWhitney => Ok(mann_whitney_u(a, b)?.p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTests {
    pub tests: Vec<TestKind>,
    pub raw_p: Vec<f64>,
    pub adjusted_p: Vec<f64>,
    pub mean_diff: Vec<f64>,
}

pub fn feature_tests(pair: &StatePair, mode: NormalityMode) -> Result<FeatureTests> {
    let per: Vec<Result<(TestKind, f64, f64)>> = (0..pair.p())
        .into_par_iter()
        .map(|j| {
            let a = pair.source.column(j);
            let b = pair.target.column(j);
            let kind = choose_test(&a, &b, mode);
            let p = shift_p_value(&a, &b, kind)?;
            let diff = b.iter().sum::<f64>() / b.len() as f64 - a.iter().sum::<f64>() / a.len() as f64;
            Ok((kind, p, diff))
        })
        .collect();
    let mut tests = Vec::with_capacity(per.len());
    let mut raw_p = Vec::with_capacity(per.len());
    let mut mean_diff = Vec::with_capacity(per.len());
    for r in per {
        let (k, p, d) = r?;
        tests.push(k);
        raw_p.push(p);
        mean_diff.push(d);
    }
    let adjusted_p = bh_adjust(&raw_p)?;
    Ok(FeatureTests { tests, raw_p, adjusted_p, mean_diff })
}

fn key_from_tests(pair: &StatePair, tests: &FeatureTests, cfg: &SelectionConfig) -> Result<Vec<usize>> {
    let mut key: BTreeSet<usize> = (0..pair.p())
        .filter(|&j| tests.adjusted_p[j] < cfg.fdr_level && tests.mean_diff[j].abs() >= cfg.abs_effect_threshold)
        .collect();
    for name in &cfg.prior_features {
        let j = pair.source.index_of(name).ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        key.insert(j);
    }
    Ok(key.into_iter().collect())
}

/// Key feature set `[t]`: significant, large-enough shifts plus prior features.
pub fn select_key_features(pair: &StatePair, cfg: &SelectionConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let tests = feature_tests(pair, cfg.normality_mode)?;
    key_from_tests(pair, &tests, cfg)
}

/// Normalised importance of regulator `regulator` for key feature `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatorWeight {
    pub regulator: usize,
    pub target: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub expanded: Vec<usize>,
    pub weights: Vec<RegulatorWeight>,
}

fn rank_desc_by_name(items: &mut [(usize, f64)], names: &[String]) {
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| names[a.0].cmp(&names[b.0])));
}

/// Regulator expansion `[r]`: top-N elastic-net regulators of every key feature.
pub fn expand_regulators(pair: &StatePair, key: &[usize], cfg: &SelectionConfig) -> Result<Expansion> {
    let names = pair.names();
    let mut expanded: BTreeSet<usize> = key.iter().copied().collect();
    if cfg.regulators_per_key == 0 || key.is_empty() {
        return Ok(Expansion { expanded: expanded.into_iter().collect(), weights: Vec::new() });
    }
    let pooled = pair.pooled();
    let columns: Vec<Vec<f64>> = (0..pair.p()).map(|j| pooled.column(j)).collect();
    let fits: Vec<Result<Vec<(usize, f64)>>> = key
        .par_iter()
        .map(|&t| {
            let others: Vec<usize> = (0..pair.p()).filter(|&j| j != t).collect();
            let preds: Vec<Vec<f64>> = others.iter().map(|&j| columns[j].clone()).collect();
            let fit = elastic_net::fit(&preds, &columns[t], &cfg.elastic_net);
            if !fit.converged {
                return Err(Error::NonConvergence(names[t].clone()));
            }
            let mut ranked: Vec<(usize, f64)> = others
                .iter()
                .zip(&fit.coef)
                .filter(|(_, c)| **c != 0.0)
                .map(|(&j, c)| (j, c.abs()))
                .collect();
            rank_desc_by_name(&mut ranked, names);
            ranked.truncate(cfg.regulators_per_key);
            Ok(ranked)
        })
        .collect();
    let mut raw = Vec::new();
    for (&t, fit) in key.iter().zip(fits) {
        for (r, w) in fit? {
            raw.push(RegulatorWeight { regulator: r, target: t, weight: w });
            expanded.insert(r);
        }
    }
    let max = raw.iter().fold(0.0f64, |m, e| m.max(e.weight));
    if max > 0.0 {
        raw.iter_mut().for_each(|e| e.weight /= max);
    }
    Ok(Expansion { expanded: expanded.into_iter().collect(), weights: raw })
}

/// Betweenness of every node in `nodes` over the regulator graph `r → t`
/// (edges with weight at least `floor`). Indexed like `nodes`.
pub fn regulator_betweenness(nodes: &[usize], weights: &[RegulatorWeight], floor: f64) -> Vec<f64> {
    let pos = |x: usize| nodes.iter().position(|&n| n == x);
    let mut adj = vec![Vec::new(); nodes.len()];
    for e in weights.iter().filter(|e| e.weight >= floor) {
        if let (Some(a), Some(b)) = (pos(e.regulator), pos(e.target)) {
            if !adj[a].contains(&b) {
                adj[a].push(b);
            }
        }
    }
    adj.iter_mut().for_each(|v| v.sort_unstable());
    betweenness(&adj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridScore {
    pub regulator: String,
    pub target: String,
    pub w: f64,
    pub b: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub refined: Vec<usize>,
    pub table: Vec<HybridScore>,
}

/// Hybrid refinement `[q]`: `h_rt = α·w_rt + (1−α)·b_r`, top-K per key feature.
///
/// `b` maps node index to its betweenness. `key` features are always kept.
pub fn refine_regulators(
    weights: &[RegulatorWeight],
    b: &dyn Fn(usize) -> f64,
    key: &[usize],
    names: &[String],
    cfg: &SelectionConfig,
) -> Refinement {
    let alpha = cfg.alpha_mix;
    let mut refined: BTreeSet<usize> = key.iter().copied().collect();
    let mut table = Vec::new();
    let targets: BTreeSet<usize> = weights.iter().map(|e| e.target).collect();
    for t in targets {
        let mut ranked: Vec<(usize, f64)> = weights
            .iter()
            .filter(|e| e.target == t)
            .map(|e| {
                let br = b(e.regulator);
                let h = alpha * e.weight + (1.0 - alpha) * br;
                table.push(HybridScore {
                    regulator: names[e.regulator].clone(),
                    target: names[t].clone(),
                    w: e.weight,
                    b: br,
                    h,
                });
                (e.regulator, h)
            })
            .collect();
        rank_desc_by_name(&mut ranked, names);
        if cfg.top_k_per_key == 0 {
            refined.extend(ranked.iter().map(|r| r.0));
        } else {
            refined.extend(ranked.iter().take(cfg.top_k_per_key).map(|r| r.0));
        }
    }
    Refinement { refined: refined.into_iter().collect(), table }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub features: Vec<String>,
    pub tests: Vec<TestKind>,
    pub raw_p: Vec<f64>,
    pub adjusted_p: Vec<f64>,
    pub key_set: Vec<String>,
    pub expanded_set: Vec<String>,
    pub refined_set: Vec<String>,
    pub hybrid_scores: Vec<HybridScore>,
    pub config: SelectionConfig,
}

impl SelectionReport {
    /// Column indices of the refined set, in the original feature order.
    pub fn refined_indices(&self) -> Vec<usize> {
        let keep: HashSet<&str> = self.refined_set.iter().map(String::as_str).collect();
        (0..self.features.len()).filter(|&j| keep.contains(self.features[j].as_str())).collect()
    }

    pub fn hybrid_csv(&self) -> String {
        let mut out = String::from("regulator,target,w,b,h\n");
        for r in &self.hybrid_scores {
            out.push_str(&format!("{},{},{},{},{}\n", r.regulator, r.target, r.w, r.b, r.h));
        }
        out
    }
}

/// Steps 1–4 end to end.
pub fn run_selection(pair: &StatePair, cfg: &SelectionConfig) -> Result<SelectionReport> {
    cfg.validate()?;
    let names = pair.names();
    let tests = feature_tests(pair, cfg.normality_mode)?;
    let key = key_from_tests(pair, &tests, cfg)?;
    let exp = expand_regulators(pair, &key, cfg)?;
    let (refined, table) = if cfg.top_k_per_key == 0 {
        (exp.expanded.clone(), Vec::new())
    } else {
        let bt = regulator_betweenness(&exp.expanded, &exp.weights, cfg.edge_weight_floor);
        let lookup = |r: usize| exp.expanded.iter().position(|&x| x == r).map_or(0.0, |i| bt[i]);
        let refinement = refine_regulators(&exp.weights, &lookup, &key, names, cfg);
        (refinement.refined, refinement.table)
    };
    let to_names = |idx: &[usize]| idx.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();
    Ok(SelectionReport {
        features: names.to_vec(),
        tests: tests.tests,
        raw_p: tests.raw_p,
        adjusted_p: tests.adjusted_p,
        key_set: to_names(&key),
        expanded_set: to_names(&exp.expanded),
        refined_set: to_names(&refined),
        hybrid_scores: table,
        config: cfg.clone(),
    })
}
