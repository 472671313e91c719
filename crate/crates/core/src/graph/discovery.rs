//! Greedy hill-climbing over DAGs with a Gaussian BIC summed across environments.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dag, Edge};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::ols;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    GaussianBic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub max_parents: usize,
    pub max_sweeps: usize,
    pub score: ScoreKind,
    pub restart_seeds: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self { max_parents: 5, max_sweeps: 1000, score: ScoreKind::GaussianBic, restart_seeds: 3 }
    }
}

const TIE: f64 = 1e-9;

/// Per-environment matrices with columns reordered to the graph's node order.
fn aligned(names: &[String], datasets: &[Dataset]) -> Result<Vec<DMatrix<f64>>> {
    if datasets.is_empty() {
        return Err(Error::invalid("at least one dataset is required"));
    }
    datasets
        .iter()
        .map(|ds| {
            let idx: Vec<usize> = names
                .iter()
                .map(|n| ds.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
                .collect::<Result<_>>()?;
            Ok(ds.values().select_columns(&idx))
        })
        .collect()
}

fn local_score(envs: &[DMatrix<f64>], node: usize, parents: &[usize]) -> f64 {
    envs.iter()
        .map(|m| {
            let n = m.nrows() as f64;
            let var = ols(m, node, parents).resid_var.max(f64::MIN_POSITIVE);
            -(n / 2.0) * var.ln() - (n.ln() / 2.0) * (1 + parents.len()) as f64
        })
        .sum()
}

/// Sum over environments of `−(n/2)·Σᵢ log σ̂ᵢ² − (log n / 2)·(q + |E|)`; higher is better.
pub fn multi_env_score(dag: &Dag, datasets: &[Dataset]) -> Result<f64> {
    let envs = aligned(dag.names(), datasets)?;
    Ok((0..dag.len()).map(|i| local_score(&envs, i, dag.parents(i))).sum())
}

struct ScoreCache<'a> {
    envs: &'a [DMatrix<f64>],
    cache: Mutex<HashMap<(usize, Vec<usize>), f64>>,
}

impl<'a> ScoreCache<'a> {
    fn get(&self, node: usize, parents: &[usize]) -> f64 {
        let key = (node, parents.to_vec());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return *v;
        }
        let v = local_score(self.envs, node, parents);
        self.cache.lock().unwrap().insert(key, v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Add(usize, usize),
    Delete(usize, usize),
    Reverse(usize, usize),
}

fn with(ps: &[usize], x: usize) -> Vec<usize> {
    let mut v = ps.to_vec();
    let pos = v.binary_search(&x).unwrap_or_else(|e| e);
    v.insert(pos, x);
    v
}

fn without(ps: &[usize], x: usize) -> Vec<usize> {
    ps.iter().copied().filter(|&p| p != x).collect()
}

fn move_delta(dag: &Dag, sc: &ScoreCache, m: Move) -> f64 {
    match m {
        Move::Add(p, c) => sc.get(c, &with(dag.parents(c), p)) - sc.get(c, dag.parents(c)),
        Move::Delete(p, c) => sc.get(c, &without(dag.parents(c), p)) - sc.get(c, dag.parents(c)),
        Move::Reverse(p, c) => {
            sc.get(c, &without(dag.parents(c), p)) + sc.get(p, &with(dag.parents(p), c))
                - sc.get(c, dag.parents(c))
                - sc.get(p, dag.parents(p))
        }
    }
}

fn legal_moves(dag: &Dag, max_parents: usize) -> Vec<Move> {
    let q = dag.len();
    let mut moves = Vec::new();
    for p in 0..q {
        for c in 0..q {
            if p == c {
                continue;
            }
            if dag.has_edge(p, c) {
                if dag.required().contains(&(p, c)) {
                    continue;
                }
                moves.push(Move::Delete(p, c));
                if !dag.forbidden().contains(&(c, p)) && dag.parents(p).len() < max_parents {
                    let mut g = dag.clone();
                    g.remove_edge_unchecked(p, c);
                    if !g.has_path(p, c) {
                        moves.push(Move::Reverse(p, c));
                    }
                }
            } else if !dag.has_edge(c, p) && dag.parents(c).len() < max_parents && dag.can_add(p, c) {
                moves.push(Move::Add(p, c));
            }
        }
    }
    moves
}

fn apply(dag: &mut Dag, m: Move) {
    match m {
        Move::Add(p, c) => dag.add_edge_unchecked(p, c),
        Move::Delete(p, c) => dag.remove_edge_unchecked(p, c),
        Move::Reverse(p, c) => {
            dag.remove_edge_unchecked(p, c);
            dag.add_edge_unchecked(c, p);
        }
    }
}

/// Score after every accepted move of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTrace {
    pub restart: usize,
    pub scores: Vec<f64>,
}

fn climb(mut dag: Dag, sc: &ScoreCache, cfg: &DiscoveryConfig, restart: usize) -> (Dag, f64, DiscoveryTrace) {
    let mut score: f64 = (0..dag.len()).map(|i| sc.get(i, dag.parents(i))).sum();
    let mut trace = DiscoveryTrace { restart, scores: vec![score] };
    for _ in 0..cfg.max_sweeps {
        let moves = legal_moves(&dag, cfg.max_parents);
        let deltas: Vec<f64> = moves.par_iter().map(|&m| move_delta(&dag, sc, m)).collect();
        let mut best: Option<(Move, f64)> = None;
        for (m, d) in moves.into_iter().zip(deltas) {
            if d > TIE && best.is_none_or(|(_, bd)| d > bd) {
                best = Some((m, d));
            }
        }
        let Some((m, d)) = best else { break };
        apply(&mut dag, m);
        score += d;
        trace.scores.push(score);
    }
    (dag, score, trace)
}

fn perturbed_start(base: &Dag, seed: u64, max_parents: usize) -> Dag {
    let mut rng = rng::stream("graph.restart", seed);
    let mut dag = base.clone();
    let q = dag.len();
    let mut pairs: Vec<Edge> = (0..q).flat_map(|p| (0..q).map(move |c| (p, c))).filter(|(p, c)| p != c).collect();
    pairs.shuffle(&mut rng);
    let budget = q.max(1);
    let mut added = 0;
    for (p, c) in pairs {
        if added >= budget {
            break;
        }
        if rng.random_bool(0.5) && dag.parents(c).len() < max_parents && dag.can_add(p, c) {
            dag.add_edge_unchecked(p, c);
            added += 1;
        }
    }
    dag
}

/// Learn one DAG shared by every environment.
///
/// Restart 0 climbs from the empty graph (plus required edges); restart `s > 0`
/// climbs from the same start with up to `q` random legal edges drawn from
/// stream `graph.restart` under seed `s`. The best-scoring result wins, ties
/// going to the lowest restart index.
pub fn discover_shared_backbone(
    names: &[String],
    datasets: &[Dataset],
    required: &[Edge],
    forbidden: &[Edge],
    cfg: &DiscoveryConfig,
) -> Result<(Dag, Vec<DiscoveryTrace>)> {
    let envs = aligned(names, datasets)?;
    let start = Dag::with_constraints(names.to_vec(), &[], required, forbidden)?;
    let sc = ScoreCache { envs: &envs, cache: Mutex::new(HashMap::new()) };
    let restarts = cfg.restart_seeds.max(1);
    let results: Vec<(Dag, f64, DiscoveryTrace)> = (0..restarts)
        .into_par_iter()
        .map(|s| {
            let init = if s == 0 { start.clone() } else { perturbed_start(&start, s as u64, cfg.max_parents) };
            climb(init, &sc, cfg, s)
        })
        .collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1 > results[best].1 + TIE {
            best = i;
        }
    }
    let traces = results.iter().map(|r| r.2.clone()).collect();
    let dag = results.into_iter().nth(best).map(|r| r.0).expect("at least one restart");
    dag.validate()?;
    Ok((dag, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StateLabel;
    use rand_distr::StandardNormal;
    use std::collections::BTreeSet;

    fn names(q: usize) -> Vec<String> {
        (1..=q).map(|i| format!("x{i}")).collect()
    }

    fn simulate(n: usize, seed: u64, f: impl Fn(&mut dyn FnMut() -> f64) -> Vec<f64>, q: usize) -> Dataset {
        let mut rng = rng::stream("test.discovery", seed);
        let mut draw = || rng.sample::<f64, _>(StandardNormal);
        let mut data = Vec::with_capacity(n * q);
        for _ in 0..n {
            data.extend(f(&mut draw));
        }
        Dataset::new(StateLabel::Source, names(q), DMatrix::from_row_slice(n, q, &data)).unwrap()
    }

    /// Brute-force BIC straight from the formula, no caching.
    fn brute_bic(ds: &Dataset, dag: &Dag) -> f64 {
        let n = ds.n() as f64;
        let mut s = 0.0;
        for i in 0..dag.len() {
            let fit = ols(ds.values(), i, dag.parents(i));
            s += -(n / 2.0) * fit.resid_var.ln();
        }
        s - (n.ln() / 2.0) * (dag.len() + dag.edge_count()) as f64
    }

    #[test]
    fn independent_columns_prefer_empty_graph() {
        let ds = simulate(500, 1, |d| vec![d(), d()], 2);
        let empty = Dag::new(names(2), &[]).unwrap();
        let edge = Dag::new(names(2), &[(0, 1)]).unwrap();
        let (se, s1) = (multi_env_score(&empty, &[ds.clone()]).unwrap(), multi_env_score(&edge, &[ds.clone()]).unwrap());
        assert!((se - brute_bic(&ds, &empty)).abs() < 1e-9);
        assert!((s1 - brute_bic(&ds, &edge)).abs() < 1e-9);
        assert!(se > s1);
    }

    #[test]
    fn dependent_columns_prefer_edge() {
        let ds = simulate(500, 2, |d| {
            let a = d();
            vec![a, 2.0 * a + 0.1 * d()]
        }, 2);
        let empty = Dag::new(names(2), &[]).unwrap();
        let edge = Dag::new(names(2), &[(0, 1)]).unwrap();
        assert!(multi_env_score(&edge, &[ds.clone()]).unwrap() > multi_env_score(&empty, &[ds]).unwrap());
    }

    #[test]
    fn score_additive_and_row_permutation_invariant() {
        let ds = simulate(300, 3, |d| {
            let a = d();
            vec![a, a - d()]
        }, 2);
        let dag = Dag::new(names(2), &[(0, 1)]).unwrap();
        let one = multi_env_score(&dag, &[ds.clone()]).unwrap();
        let two = multi_env_score(&dag, &[ds.clone(), ds.clone()]).unwrap();
        assert_eq!(two, 2.0 * one);
        let mut rows: Vec<usize> = (0..ds.n()).collect();
        rows.reverse();
        let perm = Dataset::new(StateLabel::Source, names(2), ds.values().select_rows(&rows)).unwrap();
        let p = multi_env_score(&dag, &[perm]).unwrap();
        assert!((p - one).abs() < 1e-8 * one.abs());
    }

    #[test]
    fn recovers_chain_skeleton() {
        let ds = simulate(2000, 4, |d| {
            let x1 = d();
            let x2 = 1.5 * x1 + d();
            let x3 = -1.2 * x2 + d();
            vec![x1, x2, x3]
        }, 3);
        let (dag, traces) = discover_shared_backbone(&names(3), &[ds], &[], &[], &DiscoveryConfig::default()).unwrap();
        assert_eq!(dag.skeleton(), BTreeSet::from([(0, 1), (1, 2)]));
        for t in traces {
            assert!(t.scores.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn all_forbidden_gives_empty_graph() {
        let ds = simulate(500, 5, |d| {
            let a = d();
            vec![a, a + 0.1 * d(), a - 0.2 * d()]
        }, 3);
        let forbidden: Vec<Edge> = (0..3).flat_map(|p| (0..3).map(move |c| (p, c))).filter(|(p, c)| p != c).collect();
        let (dag, _) = discover_shared_backbone(&names(3), &[ds], &[], &forbidden, &DiscoveryConfig::default()).unwrap();
        assert_eq!(dag.edge_count(), 0);
    }

    #[test]
    fn independent_columns_give_empty_graph() {
        let ds = simulate(1000, 6, |d| vec![d(), d(), d(), d()], 4);
        let (dag, _) = discover_shared_backbone(&names(4), &[ds], &[], &[], &DiscoveryConfig::default()).unwrap();
        assert_eq!(dag.edge_count(), 0);
    }

    #[test]
    fn required_edges_survive_and_max_parents_respected() {
        let ds = simulate(800, 7, |d| {
            let a = d();
            let b = d();
            let c = d();
            vec![a, b, c, a + b + c + 0.1 * d()]
        }, 4);
        let cfg = DiscoveryConfig { max_parents: 1, ..Default::default() };
        let (dag, _) = discover_shared_backbone(&names(4), &[ds], &[(1, 0)], &[], &cfg).unwrap();
        assert!(dag.has_edge(1, 0));
        assert!((0..4).all(|i| dag.parents(i).len() <= 1));
        dag.validate().unwrap();
    }
}
