use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::RegPath;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetPersistence {
    pub set: Vec<String>,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePersistence {
    pub node: String,
    pub persistence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceReport {
    pub path_length: usize,
    /// Distinct support sets (empty set included), most persistent first.
    pub set_persistence: Vec<SetPersistence>,
    /// One entry per candidate, in candidate order.
    pub target_persistence: Vec<NodePersistence>,
}

impl PersistenceReport {
    pub fn of_node(&self, name: &str) -> f64 {
        self.target_persistence.iter().find(|n| n.node == name).map_or(0.0, |n| n.persistence)
    }
}

/// Fraction of path entries whose support equals each set, and fraction containing each node.
pub fn persistence(path: &RegPath) -> Result<PersistenceReport> {
    let len = path.solutions.len();
    if len == 0 {
        return Err(Error::EmptyPath);
    }
    let mut sets: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut nodes: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &path.solutions {
        let mut key = s.support_names.clone();
        key.sort();
        *sets.entry(key).or_default() += 1;
        for n in &s.support_names {
            *nodes.entry(n.as_str()).or_default() += 1;
        }
    }
    let lf = len as f64;
    let mut set_persistence: Vec<SetPersistence> = sets.into_iter().map(|(set, c)| SetPersistence { set, persistence: c as f64 / lf }).collect();
    set_persistence.sort_by(|a, b| b.persistence.total_cmp(&a.persistence).then_with(|| a.set.cmp(&b.set)));
    let target_persistence = path
        .candidates
        .iter()
        .map(|c| NodePersistence { node: c.clone(), persistence: nodes.get(c.as_str()).map_or(0.0, |&k| k as f64 / lf) })
        .collect();
    Ok(PersistenceReport { path_length: len, set_persistence, target_persistence })
}

/// Order every node by persistence, then by attribution score, then by a
/// seeded random shuffle. Nodes that are not candidates have persistence 0.
pub fn rank_targets(report: &PersistenceReport, names: &[String], u: &[f64], seed: u64) -> Result<Vec<usize>> {
    if u.len() != names.len() {
        return Err(Error::invalid("one attribution score per node is required"));
    }
    let pers: Vec<f64> = names.iter().map(|n| report.of_node(n)).collect();
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.shuffle(&mut rng::stream("optimize.rank", seed));
    order.sort_by(|&a, &b| pers[b].total_cmp(&pers[a]).then_with(|| u[b].total_cmp(&u[a])));
    Ok(order)
}
