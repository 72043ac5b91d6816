//! Simulation of electromagnetically induced transparency, slow light and
//! light storage in an optically thin atomic ensemble.
//!
//! Rates and detunings are angular (rad/s) throughout; use
//! [`model::hz_to_angular`] for values quoted as `rate/2π`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod dynamics;
pub mod estimation;
pub mod instrument;
pub mod model;
pub mod propagation;
pub mod spectra;

pub use error::{Error, Result};

pub use dynamics::{ControlSchedule, NumConfig, StorageResult};
pub use estimation::{FitParam, FitResult, SlowLightDataset, SlowLightRow};
pub use instrument::{CountTrace, DetectorConfig};
pub use model::{ControlField, EnsembleParams, GaussianPulse};
pub use propagation::{GridConfig, PulseMetrics, TimeTrace};
pub use spectra::{ComplexResponse, Spectrum, WindowMetrics};
