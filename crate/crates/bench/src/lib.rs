//! Parameter sets shared by the benchmarks.

use eitsim::model::hz_to_angular;
use eitsim::{ControlField, EnsembleParams, GaussianPulse};

/// Transparency-window parameters of the spectroscopy scenario.
pub fn spectrum_scenario() -> (EnsembleParams, ControlField) {
    (
        EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).expect("valid ensemble"),
        ControlField::from_rabi_hz(2.4e6).expect("valid control"),
    )
}

/// Slow-light pulse through the dense ensemble.
pub fn slowlight_scenario() -> (EnsembleParams, ControlField, GaussianPulse) {
    (
        EnsembleParams::from_hz(6.0, 6.4e6, 20e3, 1e-3).expect("valid ensemble"),
        ControlField::from_rabi_hz(1.0e6).expect("valid control"),
        GaussianPulse::resonant(0.7e-12, 9.4e-6, 0.0).expect("valid pulse"),
    )
}

/// Storage of a short pulse.
pub fn storage_scenario() -> (EnsembleParams, GaussianPulse, f64) {
    (
        EnsembleParams::from_hz(2.4, 6.4e6, 20e3, 1e-3).expect("valid ensemble"),
        GaussianPulse::resonant(1e-12, 0.2e-6, 0.0).expect("valid pulse"),
        hz_to_angular(2.24e6),
    )
}
