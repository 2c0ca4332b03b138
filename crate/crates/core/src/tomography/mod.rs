//! Reconstruction of the detector matrix, the input state and the Rabi
//! frequency from histograms.

mod bootstrap;
mod config;
mod engine;
pub(crate) mod fit;
mod learning;
mod problem;

pub use bootstrap::{bootstrap, BootstrapEnsemble, BootstrapSummary, Spread};
pub use config::{CostKind, TomographyConfig, UpdateRule};
pub use engine::{reconstruct, reconstruct_from, InitialGuess, TomographyResult};
pub use fit::{fit_moments, init_from_fits, MomentFit};
pub use learning::{learning_curve, learning_test, learning_test_detailed, LearningOutcome};
pub use problem::{Gradient, TomographyProblem, PROB_FLOOR};
