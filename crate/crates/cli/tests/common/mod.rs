#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use coast_core::scm::{sample, Mechanism, NoiseModel, Scm};
use coast_core::{Dag, StateLabel, StatePair};

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// Six variables, `a → b → c → f` and `a → d → e`. The target raises the
/// intercept of `a` and lowers that of `f`.
pub fn write_pair(dir: &Path) {
    let dag = Dag::new(NAMES.map(String::from).to_vec(), &[(0, 1), (1, 2), (0, 3), (3, 4), (2, 5)]).unwrap();
    let mk = |a0: f64, f0: f64, state| {
        let g = |v| NoiseModel::Gaussian { mean: 0.0, variance: v };
        let m = vec![
            Mechanism::linear(0, vec![], a0, vec![], g(1.0)),
            Mechanism::linear(1, vec![0], 0.0, vec![1.5], g(0.5)),
            Mechanism::linear(2, vec![1], 0.0, vec![-1.0], g(0.5)),
            Mechanism::linear(3, vec![0], 0.0, vec![0.8], g(1.0)),
            Mechanism::linear(4, vec![3], 0.0, vec![1.2], g(0.5)),
            Mechanism::linear(5, vec![2], f0, vec![0.7], g(0.5)),
        ];
        Scm::new(dag.clone(), m, state).unwrap()
    };
    let s = sample(&mk(0.0, 0.0, StateLabel::Source), 600, 1).unwrap();
    let t = sample(&mk(2.0, -1.5, StateLabel::Target), 600, 2).unwrap();
    let pair = StatePair::new(s, t.with_state(StateLabel::Target)).unwrap();
    pair.source.write_csv(dir.join("source.csv")).unwrap();
    pair.target.write_csv(dir.join("target.csv")).unwrap();
}

pub fn coast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coast")).args(args).current_dir(dir).output().unwrap()
}
