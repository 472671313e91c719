//! Local Markov check: every node should be independent of its non-descendant
//! non-parents given its parents. Each pair is tested by a Fisher-z partial
//! correlation; the fraction of rejections summarises how well the graph fits.

use serde::{Deserialize, Serialize};

use super::Dag;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::featsel::normal_sf;
use crate::linalg::{pearson, residualize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTest {
    pub node: String,
    pub other: String,
    pub conditioning: Vec<String>,
    pub partial_correlation: f64,
    pub p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub significance: f64,
    pub tested_independencies: usize,
    pub rejected: usize,
    pub rejection_fraction: f64,
    /// Tests skipped because the conditioning set exceeded n − 3.
    pub skipped: usize,
    pub tests: Vec<IndependenceTest>,
}

pub fn falsify(dag: &Dag, ds: &Dataset, significance: f64) -> Result<FalsificationReport> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::invalid("significance must lie in (0, 1)"));
    }
    let idx: Vec<usize> = dag
        .names()
        .iter()
        .map(|n| ds.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
        .collect::<Result<_>>()?;
    let data = ds.values().select_columns(&idx);
    let n = ds.n();
    let mut tests = Vec::new();
    let mut skipped = 0;
    for i in 0..dag.len() {
        let pa = dag.parents(i);
        let desc = dag.descendants(i);
        let others: Vec<usize> = (0..dag.len()).filter(|&j| j != i && !pa.contains(&j) && !desc.contains(&j)).collect();
        if others.is_empty() {
            continue;
        }
        if pa.len() + 3 > n {
            skipped += others.len();
            continue;
        }
        let ri = residualize(&data, i, pa);
        for j in others {
            let rj = residualize(&data, j, pa);
            let r = pearson(&ri, &rj);
            let dof = (n - pa.len() - 3) as f64;
            let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln() * dof.sqrt();
            let p = if z.is_finite() { (2.0 * normal_sf(z.abs())).min(1.0) } else { 0.0 };
            tests.push(IndependenceTest {
                node: dag.names()[i].clone(),
                other: dag.names()[j].clone(),
                conditioning: pa.iter().map(|&k| dag.names()[k].clone()).collect(),
                partial_correlation: r,
                p,
                rejected: p < significance,
            });
        }
    }
    let rejected = tests.iter().filter(|t| t.rejected).count();
    let tested = tests.len();
    Ok(FalsificationReport {
        significance,
        tested_independencies: tested,
        rejected,
        rejection_fraction: if tested == 0 { 0.0 } else { rejected as f64 / tested as f64 },
        skipped,
        tests,
    })
}
