//! Synthetic benchmark: random linear models with surgical ground-truth
//! targets, scored against the mean-difference (MDA) baseline.

mod generate;
mod metrics;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{run_attribution, AttributionConfig};
use crate::data::StatePair;
use crate::error::{Error, Result};
use crate::graph::{discover_shared_backbone, Dag, DiscoveryConfig};
use crate::optimize::{persistence, rank_targets, solve_path, weights_from_attributions, InterventionProblem, OptimizeConfig};
use crate::rng;
use crate::scm::{fit_scm, NoiseKind};

pub use generate::{generate_ground_truth, generate_pair, generate_raw_pair, node_names, GroundTruth};
pub use metrics::{avg_tp, best_per_size, mda_rank, mda_tp_matched, recall_at_k, tp_at_k, unregularized_tp, MdaScore, SizeBest, TpAtK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    #[default]
    Oracle,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub q: usize,
    pub k_true: usize,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub n_samples: usize,
    /// Defaults to `4/q` (capped at 1).
    pub edge_prob: Option<f64>,
    /// Range of `|ζ|`; the sign is random.
    pub coef_range: [f64; 2],
    /// Range of `|do-value| / σ`; the sign is random.
    pub do_value_range: [f64; 2],
    pub graph_mode: GraphMode,
    pub noise_kind: NoiseKind,
    pub discovery: DiscoveryConfig,
    pub attribution: AttributionConfig,
    pub optimize: OptimizeConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            q: 10,
            k_true: 1,
            sigma: 1.0,
            seeds: (0..5).collect(),
            n_samples: 5000,
            edge_prob: None,
            coef_range: [0.5, 2.0],
            do_value_range: [2.0, 5.0],
            graph_mode: GraphMode::Oracle,
            noise_kind: NoiseKind::Gaussian,
            discovery: DiscoveryConfig::default(),
            attribution: AttributionConfig::default(),
            optimize: OptimizeConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn new(q: usize, k_true: usize, sigma: f64) -> Self {
        BenchConfig { q, k_true, sigma, ..Default::default() }
    }

    pub fn edge_probability(&self) -> f64 {
        self.edge_prob.unwrap_or(4.0 / self.q as f64).min(1.0)
    }

    /// Checks shared by generation, which also accepts `k_true = 0`.
    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.q == 0 || self.n_samples < 2 {
            return Err(Error::invalid("q must be positive and n_samples at least 2"));
        }
        if self.k_true > self.q {
            return Err(Error::invalid(format!("k_true = {} exceeds q = {}", self.k_true, self.q)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        let p = self.edge_probability();
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("edge_prob must lie in [0, 1]"));
        }
        for (label, r) in [("coef_range", self.coef_range), ("do_value_range", self.do_value_range)] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(Error::invalid(format!("{label} must satisfy 0 < low <= high")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_shape()?;
        if self.k_true == 0 {
            return Err(Error::invalid("k_true must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        self.attribution.validate()?;
        self.optimize.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub recall_at_k: f64,
    pub tp_at_k: f64,
    pub avg_tp: f64,
}

impl MethodMetrics {
    fn mean(items: impl Iterator<Item = MethodMetrics>) -> MethodMetrics {
        let v: Vec<MethodMetrics> = items.collect();
        let n = v.len().max(1) as f64;
        MethodMetrics {
            recall_at_k: v.iter().map(|m| m.recall_at_k).sum::<f64>() / n,
            tp_at_k: v.iter().map(|m| m.tp_at_k).sum::<f64>() / n,
            avg_tp: v.iter().map(|m| m.avg_tp).sum::<f64>() / n,
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimes {
    pub generate: f64,
    pub graph: f64,
    pub fit: f64,
    pub attribution: f64,
    pub optimize: f64,
    pub mda: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.generate + self.graph + self.fit + self.attribution + self.optimize + self.mda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub true_targets: Vec<String>,
    pub do_values: Vec<f64>,
    pub n_candidates: usize,
    pub coast: MethodMetrics,
    pub mda: MethodMetrics,
    pub coast_top: Vec<String>,
    pub mda_top: Vec<String>,
    /// Support size used for the COAST percentage at `k_true`.
    pub tp_support_size: usize,
    pub tp_substituted: bool,
    /// Nonzero COAST support sizes on the path, matched by MDA.
    pub matched_sizes: Vec<usize>,
    /// Best COAST support per size re-solved at `λ = 0`, averaged like `avg_tp`.
    pub coast_avg_tp_refit: f64,
    /// Not serialized, so result files stay reproducible.
    #[serde(skip)]
    pub runtime: StageTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub per_seed: Vec<SeedResult>,
    pub coast: MethodMetrics,
    pub mda: MethodMetrics,
    pub coast_avg_tp_refit: f64,
}

impl BenchResult {
    /// One row per (metric, method): `metric,q,k,sigma,method,mean,seed_<s>...`.
    pub fn csv_table(&self) -> String {
        let mut out = String::from("metric,q,k,sigma,method,mean");
        for s in &self.per_seed {
            out.push_str(&format!(",seed_{}", s.seed));
        }
        out.push('\n');
        let c = &self.config;
        type Get = fn(&MethodMetrics) -> f64;
        let metrics: [(&str, Get); 3] = [("recall_at_k", |m| m.recall_at_k), ("tp_at_k", |m| m.tp_at_k), ("avg_tp", |m| m.avg_tp)];
        for (name, get) in metrics {
            for (method, mean, per) in [("coast", &self.coast, 0), ("mda", &self.mda, 1)] {
                out.push_str(&format!("{name},{},{},{},{method},{}", c.q, c.k_true, c.sigma, get(mean)));
                for s in &self.per_seed {
                    out.push_str(&format!(",{}", get(if per == 0 { &s.coast } else { &s.mda })));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn total_runtime(&self) -> f64 {
        self.per_seed.iter().map(|s| s.runtime.total()).sum()
    }
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let r = f();
    *slot += t0.elapsed().as_secs_f64();
    r
}

fn graph_for(cfg: &BenchConfig, gt: &GroundTruth, pair: &StatePair) -> Result<Dag> {
    match cfg.graph_mode {
        GraphMode::Oracle => Ok(gt.dag.clone()),
        GraphMode::Learned => {
            let datasets = [pair.source.clone(), pair.target.clone()];
            Ok(discover_shared_backbone(pair.names(), &datasets, &[], &[], &cfg.discovery)?.0)
        }
    }
}

/// Full protocol for one seed.
pub fn run_seed(cfg: &BenchConfig, seed: u64) -> Result<SeedResult> {
    let mut rt = StageTimes::default();
    let (gt, pair) = timed(&mut rt.generate, || {
        let gt = generate_ground_truth(cfg, seed)?;
        let pair = generate_pair(&gt, cfg, seed)?;
        Ok((gt, pair))
    })?;
    let dag = timed(&mut rt.graph, || graph_for(cfg, &gt, &pair))?;
    let (scm_s, scm_t) = timed(&mut rt.fit, || Ok((fit_scm(&dag, &pair.source, cfg.noise_kind)?, fit_scm(&dag, &pair.target, cfg.noise_kind)?)))?;
    let att = timed(&mut rt.attribution, || run_attribution(&pair, &scm_s, &scm_t, &cfg.attribution, rng::derive_seed(seed, "bench.attribution")))?;

    let mut opt = cfg.optimize.clone();
    opt.seed = rng::derive_seed(seed, "bench.optimize");
    let k = cfg.k_true;
    let names = pair.names().to_vec();
    let truth: BTreeSet<usize> = gt.true_targets.iter().copied().collect();

    let (path, ranking) = timed(&mut rt.optimize, || {
        let cu: Vec<f64> = att.selected.iter().map(|&i| att.u[i]).collect();
        let w = weights_from_attributions(&cu)?;
        let p = InterventionProblem::from_pair(&pair, scm_s.clone(), scm_t.clone(), att.selected.clone(), w, opt.clone())?;
        let path = solve_path(&p, &p.lambda_grid()?)?;
        let rep = persistence(&path)?;
        let ranking = rank_targets(&rep, &names, &att.u, rng::derive_seed(seed, "bench.rank"))?;
        Ok((path, ranking))
    })?;
    let tp = tp_at_k(&path, k)?;
    let by_size = best_per_size(&path);
    let coast = MethodMetrics { recall_at_k: recall_at_k(&ranking, &truth, k)?, tp_at_k: tp.value, avg_tp: avg_tp(&path)? };

    let matched_sizes: Vec<usize> = by_size.iter().map(|s| s.size).collect();
    let coast_avg_tp_refit = timed(&mut rt.optimize, || {
        let mut total = 0.0;
        for b in &by_size {
            let nodes: Vec<usize> = b.support.iter().map(|n| names.iter().position(|m| m == n).expect("candidate name")).collect();
            total += unregularized_tp(&pair, &scm_s, &scm_t, &nodes, &opt)?;
        }
        Ok(total / by_size.len() as f64)
    })?;
    let (mda, mda_order) = timed(&mut rt.mda, || {
        let rank = mda_rank(&pair);
        let order: Vec<usize> = rank.iter().map(|m| m.node).collect();
        let mut sizes = matched_sizes.clone();
        sizes.push(k);
        let s = mda_tp_matched(&pair, &scm_s, &scm_t, &rank, &sizes, &opt)?;
        let avg = s[..matched_sizes.len()].iter().sum::<f64>() / matched_sizes.len() as f64;
        Ok((MethodMetrics { recall_at_k: recall_at_k(&order, &truth, k)?, tp_at_k: s[matched_sizes.len()], avg_tp: avg }, order))
    })?;

    Ok(SeedResult {
        seed,
        true_targets: gt.target_names(),
        do_values: gt.do_values.clone(),
        n_candidates: att.selected.len(),
        coast,
        mda,
        coast_top: ranking[..k].iter().map(|&i| names[i].clone()).collect(),
        mda_top: mda_order[..k].iter().map(|&i| names[i].clone()).collect(),
        tp_support_size: tp.support_size,
        tp_substituted: tp.substituted,
        matched_sizes,
        coast_avg_tp_refit,
        runtime: rt,
    })
}

/// Every seed in parallel, then the per-metric means.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let per_seed: Vec<SeedResult> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed).map_err(|e| Error::Seed { seed, source: Box::new(e) }))
        .collect::<Result<_>>()?;
    let n = per_seed.len() as f64;
    Ok(BenchResult {
        coast_avg_tp_refit: per_seed.iter().map(|s| s.coast_avg_tp_refit).sum::<f64>() / n,
        coast: MethodMetrics::mean(per_seed.iter().map(|s| s.coast)),
        mda: MethodMetrics::mean(per_seed.iter().map(|s| s.mda)),
        config: cfg.clone(),
        per_seed,
    })
}
