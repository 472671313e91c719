use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::BenchConfig;
use crate::data::{standardize, StateLabel, StatePair};
use crate::error::Result;
use crate::graph::Dag;
use crate::rng;
use crate::scm::{sample, sample_surgical, Mechanism, NoiseModel, Scm};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub dag: Dag,
    pub scm: Scm,
    /// Sorted node indices.
    pub true_targets: Vec<usize>,
    /// Do-value per entry of `true_targets`.
    pub do_values: Vec<f64>,
}

impl GroundTruth {
    pub fn target_names(&self) -> Vec<String> {
        self.true_targets.iter().map(|&i| self.scm.names()[i].clone()).collect()
    }

    pub fn do_map(&self) -> BTreeMap<usize, f64> {
        self.true_targets.iter().copied().zip(self.do_values.iter().copied()).collect()
    }
}

pub fn node_names(q: usize) -> Vec<String> {
    let width = q.saturating_sub(1).to_string().len();
    (0..q).map(|i| format!("x{i:0width$}")).collect()
}

fn uniform_signed(r: &mut impl Rng, range: [f64; 2]) -> f64 {
    let m = if range[0] < range[1] { r.random_range(range[0]..range[1]) } else { range[0] };
    if r.random_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Random linear Gaussian model plus `k_true` surgical targets.
///
/// Edges come from an upper-triangular Erdős–Rényi draw over a random node
/// permutation (stream `bench.graph`); targets and do-values use stream
/// `bench.targets`. Do-value magnitudes are `do_value_range · σ`.
pub fn generate_ground_truth(cfg: &BenchConfig, seed: u64) -> Result<GroundTruth> {
    cfg.validate_shape()?;
    let q = cfg.q;
    let names = node_names(q);
    let mut gr = rng::stream("bench.graph", seed);
    let mut perm: Vec<usize> = (0..q).collect();
    perm.shuffle(&mut gr);
    let p = cfg.edge_probability();
    let mut coef: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in 0..q {
        for b in a + 1..q {
            if gr.random_bool(p) {
                coef.insert((perm[a], perm[b]), uniform_signed(&mut gr, cfg.coef_range));
            }
        }
    }
    let edges: Vec<(usize, usize)> = coef.keys().copied().collect();
    let dag = Dag::new(names, &edges)?;
    let var = cfg.sigma * cfg.sigma;
    let mechs = (0..q)
        .map(|i| {
            let pa = dag.parents(i).to_vec();
            let c = pa.iter().map(|&j| coef[&(j, i)]).collect();
            Mechanism::linear(i, pa, 0.0, c, NoiseModel::Gaussian { mean: 0.0, variance: var })
        })
        .collect();
    let scm = Scm::new(dag.clone(), mechs, StateLabel::Source)?;

    let mut tr = rng::stream("bench.targets", seed);
    let mut true_targets: Vec<usize> = rand::seq::index::sample(&mut tr, q, cfg.k_true).into_vec();
    true_targets.sort_unstable();
    let do_range = [cfg.do_value_range[0] * cfg.sigma, cfg.do_value_range[1] * cfg.sigma];
    let do_values = true_targets.iter().map(|_| uniform_signed(&mut tr, do_range)).collect();
    Ok(GroundTruth { dag, scm, true_targets, do_values })
}

/// Source rows from the model and target rows with every true target pinned
/// to its do-value, before standardization.
pub fn generate_raw_pair(gt: &GroundTruth, cfg: &BenchConfig, seed: u64) -> Result<StatePair> {
    let source = sample(&gt.scm, cfg.n_samples, rng::derive_seed(seed, "bench.source"))?;
    let target = sample_surgical(&gt.scm, &gt.do_map(), cfg.n_samples, rng::derive_seed(seed, "bench.target"))?;
    StatePair::new(source.with_state(StateLabel::Source), target.with_state(StateLabel::Target))
}

/// [`generate_raw_pair`] followed by pooled z-scoring.
pub fn generate_pair(gt: &GroundTruth, cfg: &BenchConfig, seed: u64) -> Result<StatePair> {
    standardize(&generate_raw_pair(gt, cfg, seed)?)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::significant_shift_set;

    fn cfg(q: usize, k: usize, sigma: f64) -> BenchConfig {
        BenchConfig::new(q, k, sigma)
    }

    #[test]
    fn empty_graph_when_edge_prob_zero() {
        let c = BenchConfig { edge_prob: Some(0.0), ..cfg(10, 2, 2.0) };
        let gt = generate_ground_truth(&c, 1).unwrap();
        assert!(gt.dag.edges().is_empty());
        for m in gt.scm.mechanisms() {
            assert!(m.parents.is_empty());
            assert_eq!(m.noise.variance(), 4.0);
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let c = cfg(30, 5, 3.0);
        let a = generate_ground_truth(&c, 9).unwrap();
        assert_eq!(a, generate_ground_truth(&c, 9).unwrap());
        assert_ne!(a.dag, generate_ground_truth(&c, 10).unwrap().dag);
        assert_eq!(a.true_targets.len(), 5);
        assert!(a.true_targets.windows(2).all(|w| w[0] < w[1]));
        for (m, d) in a.scm.mechanisms().iter().zip(0..) {
            for &z in &m.coefficients {
                assert!((0.5..2.0).contains(&z.abs()), "node {d}: {z}");
            }
        }
        for v in &a.do_values {
            assert!((6.0..15.0).contains(&v.abs()));
        }
        assert_eq!(node_names(100)[7], "x07");
        assert_eq!(node_names(10)[7], "x7");
    }

    #[test]
    fn mean_in_degree_matches_edge_probability() {
        let c = cfg(100, 1, 1.0);
        let expected = 100.0 * c.edge_probability() / 2.0;
        let mean: f64 = (0..5)
            .map(|s| {
                let gt = generate_ground_truth(&c, s).unwrap();
                gt.dag.edges().len() as f64 / 100.0
            })
            .sum::<f64>()
            / 5.0;
        assert!((mean - expected).abs() <= 1.0, "{mean} vs {expected}");
    }

    #[test]
    fn surgical_targets_are_constant_and_shift_propagates() {
        let c = BenchConfig { n_samples: 20_000, ..cfg(12, 3, 1.0) };
        let gt = generate_ground_truth(&c, 4).unwrap();
        let raw = generate_raw_pair(&gt, &c, 4).unwrap();
        let fixed = gt.do_map();
        for (&i, &v) in &fixed {
            assert!(raw.target.column(i).iter().all(|x| *x == v));
        }
        // post-surgery means by recursion in topological order
        let order = gt.dag.topological_order().unwrap();
        let mut mu = vec![0.0; 12];
        for &i in &order {
            mu[i] = match fixed.get(&i) {
                Some(&v) => v,
                None => {
                    let m = gt.scm.mechanism(i);
                    m.parents.iter().zip(&m.coefficients).map(|(&p, z)| z * mu[p]).sum()
                }
            };
        }
        let means = raw.target.feature_means();
        let sds = raw.target.feature_sds();
        for i in 0..12 {
            let se = sds[i] / (c.n_samples as f64).sqrt();
            assert!((means[i] - mu[i]).abs() <= 4.0 * se + 1e-9, "node {i}: {} vs {}", means[i], mu[i]);
        }
        assert!(mu.iter().enumerate().any(|(i, m)| !fixed.contains_key(&i) && m.abs() > 0.5), "no downstream shift to check");
    }

    #[test]
    fn no_targets_means_no_detected_shift() {
        let c = cfg(10, 0, 1.0);
        let mut hits = 0;
        for seed in 0..5 {
            let gt = generate_ground_truth(&c, seed).unwrap();
            let pair = generate_pair(&gt, &c, seed).unwrap();
            hits += significant_shift_set(&pair, 0.05).unwrap().len();
        }
        assert!(hits <= 1, "{hits} false discoveries");
    }

    #[test]
    fn standardized_pair_is_pooled_zscore() {
        let c = cfg(8, 2, 3.0);
        let gt = generate_ground_truth(&c, 2).unwrap();
        let pair = generate_pair(&gt, &c, 2).unwrap();
        let pooled = pair.pooled();
        for (m, s) in pooled.feature_means().iter().zip(pooled.feature_sds().iter()) {
            assert!(m.abs() < 1e-10 && (s - 1.0).abs() < 1e-10);
        }
    }
}
