//! Adaptive compressive wideband spectrum sensing.
//!
//! A wideband signal is acquired block by block over the mini slots of the
//! sensing interval. After every slot the spectrum is recovered by ℓ1
//! minimisation from a training subset of the compressed samples, and the
//! residual on a held-out testing subset is compared with the known noise
//! level. Acquisition stops at the first slot where the two agree, and the
//! remaining slots are counted as transmission time.

pub mod acquisition;
pub mod config;
pub mod detection;
pub mod dft;
pub mod error;
pub mod harness;
mod linalg;
pub mod orchestrator;
pub mod par;
pub mod recovery;
pub mod signal;
pub mod throughput;
pub mod validation;

pub use acquisition::{AcquisitionState, MeasurementEnsemble, Split};
pub use config::{Preset, ScenarioConfig, SubbandPlan, SubbandSpec, TimeOffset};
pub use error::{Result, SenseError};
pub use linalg::RowBlock;
pub use orchestrator::{adaptive_sense, SensingOutcome};
pub use par::Execution;
pub use recovery::{recover, SolverSettings, SpectralEstimate};
pub use signal::{synthesize, NyquistSignal};
