//! Fixtures shared by the criterion benchmarks.

use coast_core::attribution::{run_attribution, AttributionConfig};
use coast_core::bench::{generate_ground_truth, generate_pair, BenchConfig};
use coast_core::optimize::{weights_from_attributions, InterventionProblem, OptimizeConfig};
use coast_core::scm::{fit_scm, NoiseKind};
use coast_core::{Dag, Scm, StatePair};

pub struct Fixture {
    pub pair: StatePair,
    pub dag: Dag,
    pub scm_s: Scm,
    pub scm_t: Scm,
}

/// One synthetic cell with the oracle graph and fitted models.
pub fn fixture(q: usize, k: usize, n: usize) -> Fixture {
    let cfg = BenchConfig { n_samples: n, ..BenchConfig::new(q, k, 1.0) };
    let gt = generate_ground_truth(&cfg, 0).expect("ground truth");
    let pair = generate_pair(&gt, &cfg, 0).expect("pair");
    let scm_s = fit_scm(&gt.dag, &pair.source, NoiseKind::Gaussian).expect("source fit");
    let scm_t = fit_scm(&gt.dag, &pair.target, NoiseKind::Gaussian).expect("target fit");
    Fixture { pair, dag: gt.dag, scm_s, scm_t }
}

/// The optimization problem the benchmark protocol would solve for `f`.
pub fn problem(f: &Fixture) -> InterventionProblem {
    let att = run_attribution(&f.pair, &f.scm_s, &f.scm_t, &AttributionConfig::default(), 1).expect("attribution");
    let u: Vec<f64> = att.selected.iter().map(|&i| att.u[i]).collect();
    let w = weights_from_attributions(&u).expect("weights");
    InterventionProblem::from_pair(&f.pair, f.scm_s.clone(), f.scm_t.clone(), att.selected, w, OptimizeConfig::default()).expect("problem")
}
