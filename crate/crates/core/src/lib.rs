//! Transmission-line fault detection and classification from single-level
//! db4 wavelet detail maxima and a feedforward network trained by
//! Levenberg–Marquardt.
//!
//! Pipeline: [`synth`] produces surrogate three-phase + ground currents,
//! [`wavelet`] reduces a window to the feature vector (m, n, p, q),
//! [`dataset`] builds the training grid, [`ann`] trains the classifier, and
//! [`detector`] runs it online over a sample stream.

pub mod ann;
pub mod calibrate;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fault;
pub mod signal;
pub mod sweep;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use exec::Exec;
pub use fault::{label_name, FaultLabel, FaultType, LabelName};
pub use signal::{Channel, SignalSet};
pub use synth::{ScenarioParams, SurrogateModel};
pub use wavelet::FeatureVector;
