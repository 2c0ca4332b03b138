//! Tomography of number-resolving atom detectors from Rabi-oscillation
//! histograms.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod analysis;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrology;
pub mod prob;
pub mod rabi;
pub mod scalar;
pub mod simulator;
pub mod special;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tomography::{CostKind, TomographyConfig, UpdateRule};

pub type ProbVector = prob::ProbVector<f64>;
pub type DetectorMatrix = detector::DetectorMatrix<f64>;
pub type DiagonalState = state::DiagonalState<f64>;
pub type HistogramDataset = dataset::HistogramDataset<f64>;
pub type RabiParams = rabi::RabiParams<f64>;
pub type DarkCountModel = rabi::DarkCountModel<f64>;
pub type SyntheticDetectorSpec = simulator::SyntheticDetectorSpec<f64>;
pub type ExperimentPlan = simulator::ExperimentPlan<f64>;
pub type TomographyResult = tomography::TomographyResult<f64>;
pub type BootstrapEnsemble = tomography::BootstrapEnsemble<f64>;
pub type PovmSet = analysis::PovmSet<f64>;
pub type WignerGrid = analysis::WignerGrid<f64>;
pub type ResolutionStats = analysis::ResolutionStats<f64>;
pub type SqueezedEnsemble = metrology::SqueezedEnsemble<f64>;
pub type GainMap = metrology::GainMap<f64>;
