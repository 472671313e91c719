use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{NoiseModel, Scm, ShiftIntervention};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

const SAMPLE_STREAM: &str = "scm.sample";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanPath {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: Vec<f64>,
    pub path: MeanPath,
    /// Per-node standard errors; absent on the exact path.
    pub std_error: Option<Vec<f64>>,
}

fn draw(noise: &NoiseModel, rng: &mut StreamRng) -> f64 {
    match noise {
        NoiseModel::Gaussian { mean, variance } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + variance.sqrt() * z
        }
        NoiseModel::Empirical { residuals } => residuals[rng.random_range(0..residuals.len())],
    }
}

/// Column-wise ancestral simulation. Noise for node `i` is drawn for all rows
/// before moving to the next node in topological order, and it is drawn even
/// for nodes fixed by `fixed`, so every regime consumes the stream identically.
pub(crate) fn simulate(scm: &Scm, n: usize, seed: u64, alpha: &[f64], fixed: &[Option<f64>]) -> DMatrix<f64> {
    let mut rng = rng::stream(SAMPLE_STREAM, seed);
    let q = scm.len();
    let mut x = DMatrix::zeros(n, q);
    for &i in scm.order() {
        let m = scm.mechanism(i);
        for r in 0..n {
            let e = draw(&m.noise, &mut rng);
            let v = match fixed[i] {
                Some(c) => c,
                None => {
                    let mut s = m.intercept;
                    for (&p, &c) in m.parents.iter().zip(&m.coefficients) {
                        s += c * x[(r, p)];
                    }
                    if alpha[i] != 0.0 {
                        s += alpha[i];
                    }
                    s + e
                }
            };
            x[(r, i)] = v;
        }
    }
    x
}

fn to_dataset(scm: &Scm, x: DMatrix<f64>) -> Result<Dataset> {
    Dataset::new(scm.state().clone(), scm.names().to_vec(), x)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    Ok(())
}

pub fn sample(scm: &Scm, n: usize, seed: u64) -> Result<Dataset> {
    sample_shift(scm, &ShiftIntervention::default(), n, seed)
}

/// Ancestral sampling with `α_i` added to each shifted node's assignment.
pub fn sample_shift(scm: &Scm, iv: &ShiftIntervention, n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let alpha = iv.dense(scm.len())?;
    to_dataset(scm, simulate(scm, n, seed, &alpha, &vec![None; scm.len()]))
}

/// Hard interventions: every node in `values` is replaced by its constant.
pub(crate) fn sample_surgical(scm: &Scm, values: &BTreeMap<usize, f64>, n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut fixed = vec![None; scm.len()];
    for (&i, &v) in values {
        if i >= scm.len() {
            return Err(Error::invalid(format!("do-value on node {i} out of range")));
        }
        fixed[i] = Some(v);
    }
    to_dataset(scm, simulate(scm, n, seed, &vec![0.0; scm.len()], &fixed))
}

/// Monte-Carlo column means and standard errors under shift `alpha`.
pub(crate) fn mc_mean(scm: &Scm, alpha: &[f64], n: usize, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let x = simulate(scm, n, seed, alpha, &vec![None; scm.len()]);
    let nf = n as f64;
    let mean = DVector::from_iterator(scm.len(), x.column_iter().map(|c| c.sum() / nf));
    let se = DVector::from_iterator(
        scm.len(),
        x.column_iter().zip(mean.iter()).map(|(c, m)| {
            let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
            (var / nf).sqrt()
        }),
    );
    (mean, se)
}

/// Expected node values under a shift. Linear models with centred noise use
/// `μ + T·α` exactly; anything else is simulated with `mc_n` rows.
pub fn post_intervention_mean(scm: &Scm, iv: &ShiftIntervention, mc_n: usize, seed: u64) -> Result<MeanEstimate> {
    let alpha = iv.dense(scm.len())?;
    if scm.is_linear() && scm.has_centered_noise() {
        let t = scm.total_effect_matrix();
        let mean = scm.observational_mean() + t * DVector::from_column_slice(&alpha);
        return Ok(MeanEstimate { mean: mean.iter().copied().collect(), path: MeanPath::Exact, std_error: None });
    }
    check_n(mc_n)?;
    let (mean, se) = mc_mean(scm, &alpha, mc_n, seed);
    Ok(MeanEstimate { mean: mean.iter().copied().collect(), path: MeanPath::MonteCarlo, std_error: Some(se.iter().copied().collect()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StateLabel;
    use crate::graph::Dag;
    use crate::scm::tests::{chain2, gauss, names};
    use crate::scm::Mechanism;

    fn shift(pairs: &[(usize, f64)]) -> ShiftIntervention {
        ShiftIntervention::new(pairs.iter().copied().collect())
    }

    #[test]
    fn deterministic_model_repeats_intercepts() {
        let dag = Dag::empty(names(3));
        let m = (0..3).map(|i| Mechanism::linear(i, vec![], i as f64 - 1.0, vec![], gauss(0.0))).collect();
        let s = Scm::new(dag, m, StateLabel::Source).unwrap();
        let d = sample(&s, 7, 11).unwrap();
        for r in 0..7 {
            assert_eq!(d.values().row(r).iter().copied().collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn chain_is_strongly_correlated() {
        let s = chain2(0.0, 1.0);
        let mut s0 = s.clone();
        s0.mechanisms[1].noise = gauss(0.0);
        let d = sample(&s0, 10_000, 5).unwrap();
        let r = crate::linalg::pearson(&d.column(0), &d.column(1));
        assert!(r > 0.99);
        assert_eq!(sample(&s, 50, 9).unwrap(), sample(&s, 50, 9).unwrap());
        assert_ne!(sample(&s, 50, 9).unwrap(), sample(&s, 50, 10).unwrap());
    }

    #[test]
    fn zero_shift_matches_plain_sampling() {
        let s = chain2(0.3, 1.0);
        let a = sample(&s, 100, 2).unwrap();
        let b = sample_shift(&s, &shift(&[(0, 0.0), (1, 0.0)]), 100, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_shift_propagates() {
        let s = chain2(0.0, 1.0);
        let n = 20_000;
        let (m0, _) = mc_mean(&s, &[0.0, 0.0], n, 4);
        let (m1, se) = mc_mean(&s, &[1.0, 0.0], n, 4);
        // common random numbers: the difference is exact up to rounding
        assert!((m1[1] - m0[1] - 2.0).abs() < 1e-9);
        let (m2, _) = mc_mean(&s, &[1.0, 0.0], n, 77);
        assert!((m2[1] - 2.0).abs() < 3.0 * se[1] * 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn sink_shift_touches_only_the_sink() {
        let s = chain2(0.0, 1.0);
        let a = sample(&s, 30, 1).unwrap();
        let b = sample_shift(&s, &shift(&[(1, 0.5)]), 30, 1).unwrap();
        assert_eq!(a.column(0), b.column(0));
        for (x, y) in a.column(1).iter().zip(b.column(1)) {
            assert!((y - x - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn declaration_order_does_not_matter() {
        // same graph, nodes declared in two orders
        let fwd = Dag::from_named_edges(vec!["a".into(), "b".into(), "c".into()], &[("a".into(), "c".into()), ("b".into(), "c".into())]).unwrap();
        let rev = Dag::from_named_edges(vec!["c".into(), "b".into(), "a".into()], &[("a".into(), "c".into()), ("b".into(), "c".into())]).unwrap();
        let mk = |dag: Dag| {
            let a = dag.index_of("a").unwrap();
            let b = dag.index_of("b").unwrap();
            let c = dag.index_of("c").unwrap();
            let mut pa = vec![(a, 0.5), (b, -1.0)];
            pa.sort_by_key(|x| x.0);
            let m = vec![
                Mechanism::linear(a, vec![], 1.0, vec![], gauss(1.0)),
                Mechanism::linear(b, vec![], 0.0, vec![], gauss(2.0)),
                Mechanism::linear(c, pa.iter().map(|x| x.0).collect(), 0.0, pa.iter().map(|x| x.1).collect(), gauss(0.5)),
            ];
            Scm::new(dag, m, StateLabel::Source).unwrap()
        };
        let (s1, s2) = (mk(fwd), mk(rev));
        let (d1, d2) = (sample(&s1, 40, 3).unwrap(), sample(&s2, 40, 3).unwrap());
        for name in ["a", "b", "c"] {
            assert_eq!(d1.column(d1.index_of(name).unwrap()), d2.column(d2.index_of(name).unwrap()));
        }
    }

    #[test]
    fn zero_noise_shift_is_affine() {
        let s = chain2(0.2, 0.0);
        let base = sample(&s, 5, 0).unwrap();
        let one = sample_shift(&s, &shift(&[(0, 1.0)]), 5, 0).unwrap();
        let two = sample_shift(&s, &shift(&[(0, 2.0)]), 5, 0).unwrap();
        for r in 0..5 {
            for c in 0..2 {
                let (b, o, t) = (base.values()[(r, c)], one.values()[(r, c)], two.values()[(r, c)]);
                assert!((t - o - (o - b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_mean_of_chain() {
        let s = chain2(0.0, 1.0);
        let est = post_intervention_mean(&s, &shift(&[(0, 1.0)]), 10, 0).unwrap();
        assert_eq!(est.path, MeanPath::Exact);
        assert_eq!(est.mean, vec![1.0, 2.0]);
        let zero = post_intervention_mean(&s, &ShiftIntervention::default(), 10, 0).unwrap();
        assert_eq!(zero.mean, s.observational_mean().iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn exact_and_simulated_paths_agree() {
        let mut s = chain2(0.5, 1.0);
        let est = post_intervention_mean(&s, &shift(&[(0, -1.0), (1, 0.25)]), 0, 0).unwrap();
        // a tiny noise mean forces the Monte-Carlo path
        s.mechanisms[0].noise = NoiseModel::Gaussian { mean: 1e-300, variance: 1.0 };
        let mc = post_intervention_mean(&s, &shift(&[(0, -1.0), (1, 0.25)]), 20_000, 8).unwrap();
        assert_eq!(mc.path, MeanPath::MonteCarlo);
        let se = mc.std_error.unwrap();
        for i in 0..2 {
            assert!((mc.mean[i] - est.mean[i]).abs() <= 3.0 * se[i], "node {i}");
        }
    }

    #[test]
    fn surgical_values_are_constant() {
        let s = chain2(0.0, 1.0);
        let d = sample_surgical(&s, &[(0, 3.0)].into_iter().collect(), 200, 1).unwrap();
        assert!(d.column(0).iter().all(|&v| v == 3.0));
        let m = d.column(1).iter().sum::<f64>() / 200.0;
        assert!((m - 6.0).abs() < 0.3);
    }
}
