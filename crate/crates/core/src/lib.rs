//! Causal intervention design for state transitions.
//!
//! Given samples from a source state and a target state, this crate learns a
//! shared causal backbone, fits state-specific linear structural causal models,
//! attributes the mean shift between the states to individual mechanisms, and
//! solves a weighted-ℓ1 shift-intervention problem along a regularization path.
//! The [`bench`] module reproduces the synthetic evaluation protocol against a
//! marginal-shift baseline.
//!
//! Pipeline order:
//!
//! 1. [`data`]: load and standardize a [`StatePair`].
//! 2. [`featsel`]: univariate testing, regulator expansion, hybrid refinement.
//! 3. [`graph`]: shared-backbone hill-climbing and a local-Markov falsification check.
//! 4. [`scm`]: per-state linear mechanisms, ancestral and shift sampling.
//! 5. [`attribution`]: Shapley mechanism-change attribution and candidate selection.
//! 6. [`optimize`]: λ-grid, proximal-gradient path, persistence, screening.

pub mod attribution;
pub mod bench;
pub mod data;
mod error;
pub mod featsel;
pub mod graph;
mod linalg;
pub mod optimize;
pub mod rng;
pub mod scm;

pub use attribution::{AttributionConfig, AttributionReport};
pub use bench::{BenchConfig, BenchResult, GraphMode, GroundTruth};
pub use data::{Dataset, StateLabel, StatePair};
pub use error::{Error, Result};
pub use featsel::{SelectionConfig, SelectionReport};
pub use graph::{Dag, DiscoveryConfig, FalsificationReport};
pub use optimize::{
    InterventionProblem, LambdaGrid, PersistenceReport, RegPath, ScreeningReport, Solution,
};
pub use scm::{Mechanism, NoiseKind, NoiseModel, Scm, ShiftIntervention};
