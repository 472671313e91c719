//! State-specific linear structural causal models over a shared DAG.

mod fit;
mod sample;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use fit::fit_scm;
pub use sample::{post_intervention_mean, sample, sample_shift, MeanEstimate, MeanPath};
pub(crate) use sample::{mc_mean, sample_surgical};

use crate::data::StateLabel;
use crate::error::{Error, Result};
use crate::graph::Dag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum NoiseModel {
    Gaussian { mean: f64, variance: f64 },
    Empirical { residuals: Vec<f64> },
}

impl NoiseModel {
    pub fn mean(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { mean, .. } => *mean,
            NoiseModel::Empirical { residuals } => residuals.iter().sum::<f64>() / residuals.len() as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            NoiseModel::Gaussian { variance, .. } => *variance,
            NoiseModel::Empirical { residuals } => {
                let m = self.mean();
                residuals.iter().map(|r| (r - m).powi(2)).sum::<f64>() / residuals.len() as f64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Gaussian { mean, variance } if !mean.is_finite() || !(*variance >= 0.0) || !variance.is_finite() => {
                Err(Error::invalid("gaussian noise needs a finite mean and variance >= 0"))
            }
            NoiseModel::Empirical { residuals } if residuals.is_empty() || residuals.iter().any(|r| !r.is_finite()) => {
                Err(Error::invalid("empirical noise needs a nonempty finite residual sample"))
            }
            _ => Ok(()),
        }
    }
}

/// Functional form of a mechanism. Only linear is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MechanismForm {
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub node: usize,
    pub parents: Vec<usize>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub noise: NoiseModel,
    pub form: MechanismForm,
}

impl Mechanism {
    pub fn linear(node: usize, parents: Vec<usize>, intercept: f64, coefficients: Vec<f64>, noise: NoiseModel) -> Self {
        Mechanism { node, parents, intercept, coefficients, noise, form: MechanismForm::Linear }
    }
}

/// Additive shifts α per node; absent nodes are unshifted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShiftIntervention {
    pub shifts: BTreeMap<usize, f64>,
}

impl ShiftIntervention {
    pub fn new(shifts: BTreeMap<usize, f64>) -> Self {
        ShiftIntervention { shifts }
    }

    pub fn from_dense(alpha: &[f64]) -> Self {
        ShiftIntervention { shifts: alpha.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(i, a)| (i, *a)).collect() }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.shifts.get(&i).copied().unwrap_or(0.0)
    }

    pub fn dense(&self, q: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; q];
        for (&i, &a) in &self.shifts {
            if i >= q {
                return Err(Error::invalid(format!("shift on node {i} but the model has {q} nodes")));
            }
            if !a.is_finite() {
                return Err(Error::invalid(format!("non-finite shift on node {i}")));
            }
            out[i] = a;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    dag: Dag,
    mechanisms: Vec<Mechanism>,
    state: StateLabel,
    order: Vec<usize>,
    warnings: Vec<String>,
}

impl Scm {
    pub fn new(dag: Dag, mut mechanisms: Vec<Mechanism>, state: StateLabel) -> Result<Self> {
        if mechanisms.len() != dag.len() {
            return Err(Error::invalid(format!("{} mechanisms for {} nodes", mechanisms.len(), dag.len())));
        }
        mechanisms.sort_by_key(|m| m.node);
        for (i, m) in mechanisms.iter().enumerate() {
            if m.node != i {
                return Err(Error::invalid("mechanism nodes must cover every node exactly once"));
            }
            if m.parents.len() != m.coefficients.len() {
                return Err(Error::invalid(format!("node {}: {} coefficients for {} parents", dag.names()[i], m.coefficients.len(), m.parents.len())));
            }
            let mut pa = m.parents.clone();
            pa.sort_unstable();
            if pa != dag.parents(i) {
                return Err(Error::DagMismatch(format!("mechanism parents of {} differ from the graph", dag.names()[i])));
            }
            if !m.intercept.is_finite() || m.coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("non-finite parameter at node {}", dag.names()[i])));
            }
            m.noise.validate()?;
        }
        let order = dag.topological_order()?;
        Ok(Scm { dag, mechanisms, state, order, warnings: Vec::new() })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, i: usize) -> &Mechanism {
        &self.mechanisms[i]
    }

    pub fn state(&self) -> &StateLabel {
        &self.state
    }

    pub fn len(&self) -> usize {
        self.dag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.is_empty()
    }

    pub fn names(&self) -> &[String] {
        self.dag.names()
    }

    /// Topological order used by every sampler.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Messages recorded while fitting (e.g. ridge jitter).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_linear(&self) -> bool {
        self.mechanisms.iter().all(|m| m.form == MechanismForm::Linear)
    }

    pub fn has_centered_noise(&self) -> bool {
        self.mechanisms.iter().all(|m| m.noise.mean() == 0.0)
    }

    /// Weighted adjacency with `B[(j, i)] = ζ` for the edge j → i.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let q = self.len();
        let mut b = DMatrix::zeros(q, q);
        for m in &self.mechanisms {
            for (&p, &c) in m.parents.iter().zip(&m.coefficients) {
                b[(p, m.node)] = c;
            }
        }
        b
    }

    /// `T = (I − Bᵀ)⁻¹`, computed column by column by propagating a unit shift.
    pub fn total_effect_matrix(&self) -> DMatrix<f64> {
        let q = self.len();
        let mut t = DMatrix::zeros(q, q);
        let mut v = vec![0.0; q];
        for k in 0..q {
            v.iter_mut().for_each(|x| *x = 0.0);
            for &i in &self.order {
                let m = &self.mechanisms[i];
                let mut s = if i == k { 1.0 } else { 0.0 };
                for (&p, &c) in m.parents.iter().zip(&m.coefficients) {
                    s += c * v[p];
                }
                v[i] = s;
            }
            t.set_column(k, &DVector::from_column_slice(&v));
        }
        t
    }

    /// Closed-form observational means of a linear model (noise means included).
    pub fn observational_mean(&self) -> DVector<f64> {
        self.shifted_mean(&vec![0.0; self.len()])
    }

    pub(crate) fn shifted_mean(&self, alpha: &[f64]) -> DVector<f64> {
        let mut mu = DVector::zeros(self.len());
        for &i in &self.order {
            let m = &self.mechanisms[i];
            let mut s = m.intercept + m.noise.mean() + alpha[i];
            for (&p, &c) in m.parents.iter().zip(&m.coefficients) {
                s += c * mu[p];
            }
            mu[i] = s;
        }
        mu
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScmJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ScmJson>(s)?.try_into()
    }

    pub(crate) fn with_warnings(mut self, w: Vec<String>) -> Self {
        self.warnings = w;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCoefficient {
    pub parent: String,
    pub child: String,
    pub coefficient: f64,
}

/// Serialized form: `{state, nodes, edges, intercepts, noise, form}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmJson {
    pub state: StateLabel,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeCoefficient>,
    pub intercepts: Vec<f64>,
    pub noise: Vec<NoiseModel>,
    #[serde(default)]
    pub form: MechanismForm,
}

impl From<&Scm> for ScmJson {
    fn from(s: &Scm) -> Self {
        let names = s.names();
        let mut edges = Vec::new();
        for (p, c) in s.dag.edges() {
            let m = &s.mechanisms[c];
            let k = m.parents.iter().position(|&x| x == p).expect("edge parent present in mechanism");
            edges.push(EdgeCoefficient { parent: names[p].clone(), child: names[c].clone(), coefficient: m.coefficients[k] });
        }
        ScmJson {
            state: s.state.clone(),
            nodes: names.to_vec(),
            edges,
            intercepts: s.mechanisms.iter().map(|m| m.intercept).collect(),
            noise: s.mechanisms.iter().map(|m| m.noise.clone()).collect(),
            form: MechanismForm::Linear,
        }
    }
}

impl TryFrom<ScmJson> for Scm {
    type Error = Error;
    fn try_from(j: ScmJson) -> Result<Self> {
        let q = j.nodes.len();
        if j.intercepts.len() != q || j.noise.len() != q {
            return Err(Error::invalid("intercepts and noise must have one entry per node"));
        }
        let named: Vec<(String, String)> = j.edges.iter().map(|e| (e.parent.clone(), e.child.clone())).collect();
        let dag = Dag::from_named_edges(j.nodes, &named)?;
        let mut mechs: Vec<Mechanism> = (0..q)
            .map(|i| Mechanism::linear(i, Vec::new(), j.intercepts[i], Vec::new(), j.noise[i].clone()))
            .collect();
        for e in &j.edges {
            let (p, c) = (dag.index_of(&e.parent).unwrap(), dag.index_of(&e.child).unwrap());
            mechs[c].parents.push(p);
            mechs[c].coefficients.push(e.coefficient);
        }
        for m in &mut mechs {
            let mut pairs: Vec<(usize, f64)> = m.parents.iter().copied().zip(m.coefficients.iter().copied()).collect();
            pairs.sort_by_key(|x| x.0);
            m.parents = pairs.iter().map(|x| x.0).collect();
            m.coefficients = pairs.iter().map(|x| x.1).collect();
        }
        Scm::new(dag, mechs, j.state)
    }
}
