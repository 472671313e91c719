//! Directed acyclic graphs over named features, shared-backbone discovery,
//! and a local-Markov falsification check.

mod discovery;
mod falsify;
mod io;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};

pub use discovery::{discover_shared_backbone, multi_env_score, DiscoveryConfig, DiscoveryTrace, ScoreKind};
pub use falsify::{falsify, FalsificationReport, IndependenceTest};
pub use io::{read_edge_list, DagJson};

pub type Edge = (usize, usize);

/// A DAG with optional background knowledge.
///
/// Invariants (checked by every constructor and mutator): acyclic, no
/// self-loops, every required edge present, no forbidden edge present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    required: BTreeSet<Edge>,
    forbidden: BTreeSet<Edge>,
}

impl Dag {
    pub fn empty(names: Vec<String>) -> Self {
        let q = names.len();
        Self { names, parents: vec![Vec::new(); q], required: BTreeSet::new(), forbidden: BTreeSet::new() }
    }

    pub fn new(names: Vec<String>, edges: &[Edge]) -> Result<Self> {
        Self::with_constraints(names, edges, &[], &[])
    }

    pub fn with_constraints(names: Vec<String>, edges: &[Edge], required: &[Edge], forbidden: &[Edge]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(Error::InvalidGraph(format!("duplicate node {n:?}")));
            }
        }
        let mut dag = Self::empty(names);
        dag.required = required.iter().copied().collect();
        dag.forbidden = forbidden.iter().copied().collect();
        let q = dag.len();
        for &(p, c) in edges.iter().chain(required) {
            if p >= q || c >= q {
                return Err(Error::InvalidGraph(format!("edge ({p}, {c}) out of range for {q} nodes")));
            }
            if p == c {
                return Err(Error::InvalidGraph(format!("self-loop on {:?}", dag.names[p])));
            }
            if !dag.parents[c].contains(&p) {
                dag.parents[c].push(p);
            }
        }
        for ps in &mut dag.parents {
            ps.sort_unstable();
        }
        if let Some(&(p, c)) = dag.required.intersection(&dag.forbidden).next() {
            return Err(Error::InvalidGraph(format!(
                "edge {} -> {} both required and forbidden",
                dag.names[p], dag.names[c]
            )));
        }
        if let Some(&(p, c)) = dag.forbidden.iter().find(|&&(p, c)| dag.has_edge(p, c)) {
            return Err(Error::InvalidGraph(format!("forbidden edge {} -> {} present", dag.names[p], dag.names[c])));
        }
        if let Some(cycle) = dag.find_cycle() {
            return Err(Error::Cycle(cycle.iter().map(|&i| dag.names[i].clone()).collect()));
        }
        Ok(dag)
    }

    /// Build from named edges.
    pub fn from_named_edges(names: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let idx = |s: &str| {
            names.iter().position(|n| n == s).ok_or_else(|| Error::InvalidGraph(format!("unknown node {s:?}")))
        };
        let e: Vec<Edge> = edges.iter().map(|(p, c)| Ok((idx(p)?, idx(c)?))).collect::<Result<_>>()?;
        Self::new(names, &e)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&c| self.parents[c].contains(&i)).collect()
    }

    pub fn has_edge(&self, p: usize, c: usize) -> bool {
        self.parents[c].contains(&p)
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> Vec<Edge> {
        let mut e: Vec<Edge> =
            self.parents.iter().enumerate().flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c))).collect();
        e.sort_unstable();
        e
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn required(&self) -> &BTreeSet<Edge> {
        &self.required
    }

    pub fn forbidden(&self) -> &BTreeSet<Edge> {
        &self.forbidden
    }

    pub fn skeleton(&self) -> BTreeSet<Edge> {
        self.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect()
    }

    /// Is there a directed path `from ⇝ to` (length ≥ 1)?
    pub fn has_path(&self, from: usize, to: usize) -> bool {
        let children = self.child_lists();
        let mut seen = vec![false; self.len()];
        let mut stack = children[from].clone();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend_from_slice(&children[v]);
            }
        }
        false
    }

    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let children = self.child_lists();
        let mut out = BTreeSet::new();
        let mut stack = children[i].clone();
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend_from_slice(&children[v]);
            }
        }
        out
    }

    pub fn ancestors(&self, i: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = self.parents[i].clone();
        while let Some(v) = stack.pop() {
            if out.insert(v) {
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        out
    }

    pub(crate) fn child_lists(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.len()];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                ch[p].push(c);
            }
        }
        ch
    }

    /// Kahn's algorithm, ties broken by node name.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let q = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let children = self.child_lists();
        let mut ready: BinaryHeap<Reverse<(&str, usize)>> =
            (0..q).filter(|&i| indeg[i] == 0).map(|i| Reverse((self.names[i].as_str(), i))).collect();
        let mut order = Vec::with_capacity(q);
        while let Some(Reverse((_, v))) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse((self.names[c].as_str(), c)));
                }
            }
        }
        if order.len() < q {
            let cycle = self.find_cycle().unwrap_or_default();
            return Err(Error::Cycle(cycle.iter().map(|&i| self.names[i].clone()).collect()));
        }
        Ok(order)
    }

    pub fn topological_names(&self) -> Result<Vec<String>> {
        Ok(self.topological_order()?.into_iter().map(|i| self.names[i].clone()).collect())
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        // colour DFS over child lists; returns the nodes of one cycle, closed
        let children = self.child_lists();
        let q = self.len();
        let mut colour = vec![0u8; q];
        let mut parent = vec![usize::MAX; q];
        for root in 0..q {
            if colour[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            colour[root] = 1;
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                if *k < children[v].len() {
                    let w = children[v][*k];
                    *k += 1;
                    match colour[w] {
                        0 => {
                            colour[w] = 1;
                            parent[w] = v;
                            stack.push((w, 0));
                        }
                        1 => {
                            let mut cyc = vec![w];
                            let mut x = v;
                            while x != w {
                                cyc.push(x);
                                x = parent[x];
                            }
                            cyc.push(w);
                            cyc.reverse();
                            return Some(cyc);
                        }
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }

    /// Would adding `p → c` keep the graph a valid DAG under the constraints?
    pub(crate) fn can_add(&self, p: usize, c: usize) -> bool {
        p != c && !self.has_edge(p, c) && !self.forbidden.contains(&(p, c)) && !self.has_path(c, p)
    }

    pub(crate) fn add_edge_unchecked(&mut self, p: usize, c: usize) {
        let ps = &mut self.parents[c];
        let pos = ps.binary_search(&p).unwrap_or_else(|e| e);
        ps.insert(pos, p);
    }

    pub(crate) fn remove_edge_unchecked(&mut self, p: usize, c: usize) {
        self.parents[c].retain(|&x| x != p);
    }

    /// Check every structural invariant; used by tests and after discovery.
    pub fn validate(&self) -> Result<()> {
        Self::with_constraints(
            self.names.clone(),
            &self.edges(),
            &self.required.iter().copied().collect::<Vec<_>>(),
            &self.forbidden.iter().copied().collect::<Vec<_>>(),
        )
        .map(|_| ())
    }

    /// Same graph with nodes renamed/reordered to `names` (a permutation of the current names).
    pub fn reordered(&self, names: &[String]) -> Result<Self> {
        let map: Vec<usize> = self
            .names
            .iter()
            .map(|n| names.iter().position(|m| m == n).ok_or_else(|| Error::InvalidGraph(format!("missing node {n:?}"))))
            .collect::<Result<_>>()?;
        let e: Vec<Edge> = self.edges().iter().map(|&(p, c)| (map[p], map[c])).collect();
        let r: Vec<Edge> = self.required.iter().map(|&(p, c)| (map[p], map[c])).collect();
        let f: Vec<Edge> = self.forbidden.iter().map(|&(p, c)| (map[p], map[c])).collect();
        Self::with_constraints(names.to_vec(), &e, &r, &f)
    }
}
