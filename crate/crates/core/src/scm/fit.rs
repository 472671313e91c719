use super::{Mechanism, NoiseKind, NoiseModel, Scm};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::linalg::ols;

/// Per-node least squares on the graph parents. Residuals are centred so the
/// intercept carries the whole mean. Parents that are constant in `ds` get a
/// zero coefficient; other singular designs get a ridge jitter. Both are
/// recorded as warnings.
pub fn fit_scm(dag: &Dag, ds: &Dataset, noise_kind: NoiseKind) -> Result<Scm> {
    let idx: Vec<usize> = dag
        .names()
        .iter()
        .map(|n| ds.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
        .collect::<Result<_>>()?;
    let max_pa = (0..dag.len()).map(|i| dag.parents(i).len()).max().unwrap_or(0);
    if ds.n() <= max_pa + 1 {
        return Err(Error::invalid(format!("{} rows cannot fit a node with {} parents", ds.n(), max_pa)));
    }
    let data = ds.values().select_columns(&idx);
    let mut warnings = Vec::new();
    let mut mechs = Vec::with_capacity(dag.len());
    for i in 0..dag.len() {
        let pa = dag.parents(i).to_vec();
        let fit = ols(&data, i, &pa);
        if fit.singular {
            let msg = format!("node {}: singular parent design, constant parents dropped or ridge jitter applied", dag.names()[i]);
            log::debug!("{msg}");
            warnings.push(msg);
        }
        let rmean = fit.residuals.iter().sum::<f64>() / fit.residuals.len() as f64;
        let residuals: Vec<f64> = fit.residuals.iter().map(|r| r - rmean).collect();
        let intercept = fit.intercept + rmean;
        let noise = match noise_kind {
            NoiseKind::Gaussian => {
                NoiseModel::Gaussian { mean: 0.0, variance: residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64 }
            }
            NoiseKind::Empirical => NoiseModel::Empirical { residuals },
        };
        mechs.push(Mechanism::linear(i, pa, intercept, fit.coef, noise));
    }
    Ok(Scm::new(dag.clone(), mechs, ds.state().clone())?.with_warnings(warnings))
}
