//! Frequency-domain propagation of probe pulses through the EIT medium.
//!
//! The complex field envelope `√P(t)` is Fourier transformed, multiplied by
//! `h(δ + δ_carrier)` and transformed back. Spectral components are taken as
//! `e^{+iδt}`, so a transfer phase that falls linearly with δ delays the pulse.

use std::f64::consts::{LN_2, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{config, data, domain, Error, Result};
use crate::estimation::fit_gaussian;
use crate::model::{ControlField, EnsembleParams, GaussianPulse};
use crate::spectra::transfer_function;

/// Uniformly sampled power (or count-rate) record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    times: Vec<f64>,
    powers: Vec<f64>,
    sigmas: Option<Vec<f64>>,
}

impl TimeTrace {
    /// Trace on the grid `start + k·dt`.
    pub fn uniform(start: f64, dt: f64, powers: Vec<f64>, sigmas: Option<Vec<f64>>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(data(format!("sample spacing must be > 0, got {dt}")));
        }
        let times = (0..powers.len()).map(|k| start + k as f64 * dt).collect();
        Self::new(times, powers, sigmas)
    }

    /// Validates that `times` is uniformly spaced to 1e-12 relative.
    pub fn new(times: Vec<f64>, powers: Vec<f64>, sigmas: Option<Vec<f64>>) -> Result<Self> {
        if times.len() != powers.len() {
            return Err(data(format!(
                "trace has {} times but {} samples",
                times.len(),
                powers.len()
            )));
        }
        if times.len() < 2 {
            return Err(data("a trace needs at least two samples"));
        }
        if let Some(i) = times.iter().chain(&powers).position(|v| !v.is_finite()) {
            return Err(data(format!("non-finite value at position {i}")));
        }
        if let Some(s) = &sigmas {
            if s.len() != powers.len() {
                return Err(data("sigma column length mismatch"));
            }
        }
        check_uniform(&times)?;
        Ok(Self { times, powers, sigmas })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn sigmas(&self) -> Option<&[f64]> {
        self.sigmas.as_deref()
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Sample spacing.
    pub fn dt(&self) -> f64 {
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Trapezoidal integral of the samples.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.powers, self.dt())
    }

    pub fn scaled(&self, factor: f64) -> TimeTrace {
        TimeTrace {
            times: self.times.clone(),
            powers: self.powers.iter().map(|p| p * factor).collect(),
            sigmas: self.sigmas.as_ref().map(|s| s.iter().map(|v| v * factor.abs()).collect()),
        }
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> Result<TimeTrace> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.times[i] >= t0 && self.times[i] <= t1).collect();
        if idx.len() < 2 {
            return Err(data(format!("window [{t0}, {t1}] holds fewer than two samples")));
        }
        Ok(TimeTrace {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            powers: idx.iter().map(|&i| self.powers[i]).collect(),
            sigmas: self.sigmas.as_ref().map(|s| idx.iter().map(|&i| s[i]).collect()),
        })
    }
}

fn check_uniform(times: &[f64]) -> Result<()> {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(data("time grid is not increasing"));
    }
    let scale = times[0].abs().max(times[n - 1].abs()).max(dt);
    let tol = 1e-12 * scale + 1e-9 * dt;
    for (k, &t) in times.iter().enumerate() {
        let expect = times[0] + k as f64 * dt;
        if (t - expect).abs() > tol {
            return Err(data(format!("time grid is not uniform at row {k}")));
        }
    }
    Ok(())
}

pub(crate) fn trapezoid(y: &[f64], dt: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    dt * (inner + 0.5 * (y[0] + y[y.len() - 1]))
}

/// FFT grid: `points` samples spanning `window_factor` pulse durations,
/// centred on the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub points: usize,
    pub window_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: 1 << 16, window_factor: 16.0 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(config(format!("grid.points must be >= 2, got {}", self.points)));
        }
        if !(self.window_factor >= 8.0) {
            return Err(config(format!(
                "grid.window_factor must be >= 8 (span of at least 8 pulse durations), got {}",
                self.window_factor
            )));
        }
        let per_fwhm = self.points as f64 / self.window_factor;
        if per_fwhm < 16.0 {
            return Err(config(format!(
                "grid resolves the pulse FWHM with {per_fwhm:.1} samples; at least 16 required"
            )));
        }
        Ok(())
    }

    fn dt(&self, pulse: &GaussianPulse) -> f64 {
        self.window_factor * pulse.fwhm() / self.points as f64
    }

    fn times(&self, pulse: &GaussianPulse) -> Vec<f64> {
        let dt = self.dt(pulse);
        let half = (self.points / 2) as f64;
        (0..self.points).map(|k| pulse.center() + (k as f64 - half) * dt).collect()
    }
}

/// Input pulse power sampled on the propagation grid.
pub fn sample_pulse(pulse: &GaussianPulse, grid: &GridConfig) -> Result<TimeTrace> {
    grid.validate()?;
    let times = grid.times(pulse);
    let powers = times.iter().map(|&t| pulse.power_at(t)).collect();
    TimeTrace::new(times, powers, None)
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
}

/// Signed angular frequency of FFT bin `k` for `n` samples at spacing `dt`.
#[inline]
fn bin_frequency(k: usize, n: usize, dt: f64) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    TAU * signed / (n as f64 * dt)
}

/// Transmitted pulse power after the medium.
pub fn propagate_pulse(
    pulse: &GaussianPulse,
    ens: &EnsembleParams,
    ctrl: &ControlField,
    grid: &GridConfig,
) -> Result<TimeTrace> {
    grid.validate()?;
    let n = grid.points;
    let dt = grid.dt(pulse);
    let times = grid.times(pulse);
    let mut field: Vec<Complex64> = times.iter().map(|&t| Complex64::new(pulse.envelope_at(t), 0.0)).collect();
    let p = plans(n);
    p.forward.process(&mut field);
    let norm = 1.0 / n as f64;
    for (k, v) in field.iter_mut().enumerate() {
        let delta = bin_frequency(k, n, dt) + pulse.carrier_detuning();
        *v *= transfer_function(delta, ens, ctrl) * norm;
    }
    p.inverse.process(&mut field);
    let powers = field.iter().map(|c| c.norm_sqr()).collect();
    TimeTrace::new(times, powers, None)
}

/// Delay, duration and transmission of a transmitted pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseMetrics {
    /// Centre shift relative to the reference, s.
    pub delay: f64,
    /// Intensity FWHM of the output pulse, s.
    pub duration: f64,
    /// Output/reference pulse energy ratio.
    pub transmission: f64,
    /// False when Gaussian fits failed and raw moments were used.
    pub fit_ok: bool,
}

struct PeakSummary {
    center: f64,
    fwhm: f64,
    energy: f64,
}

fn gaussian_summary(trace: &TimeTrace) -> Option<PeakSummary> {
    let fit = fit_gaussian(trace).ok()?;
    if !fit.converged {
        return None;
    }
    let (a, c, w) = (fit.value("amplitude"), fit.value("center"), fit.value("fwhm"));
    if !(a > 0.0 && w > 0.0 && c.is_finite()) {
        return None;
    }
    Some(PeakSummary { center: c, fwhm: w, energy: a * w })
}

fn moment_summary(trace: &TimeTrace) -> Result<PeakSummary> {
    let e: f64 = trace.powers().iter().sum();
    if !(e > 0.0) {
        return Err(Error::Degenerate("trace carries no energy".into()));
    }
    let c = trace.times().iter().zip(trace.powers()).map(|(t, p)| t * p).sum::<f64>() / e;
    let var = trace.times().iter().zip(trace.powers()).map(|(t, p)| (t - c).powi(2) * p).sum::<f64>() / e;
    Ok(PeakSummary {
        center: c,
        fwhm: 2.0 * (2.0 * LN_2 * var).sqrt(),
        energy: e * trace.dt(),
    })
}

/// Compares an output trace with a reference via Gaussian fits, falling back
/// to raw moments when either fit fails.
pub fn pulse_metrics(output: &TimeTrace, reference: &TimeTrace) -> Result<PulseMetrics> {
    let fitted = gaussian_summary(output).zip(gaussian_summary(reference));
    let (out, refp, fit_ok) = match fitted {
        Some((o, r)) => (o, r, true),
        None => (moment_summary(output)?, moment_summary(reference)?, false),
    };
    Ok(PulseMetrics {
        delay: out.center - refp.center,
        duration: out.fwhm,
        transmission: out.energy / refp.energy,
        fit_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignalDelay {
    /// `η γ31 / |Ωc|²`, s.
    pub delay: f64,
    /// Set when γ21 > 0, where the lossless formula only approximates the slope.
    pub reduced_validity: bool,
}

/// Transparency-limit group delay `η γ31 / |Ωc|²`.
pub fn group_delay_smallsignal(ens: &EnsembleParams, ctrl: &ControlField) -> Result<SmallSignalDelay> {
    let reduced_validity = ens.gamma21() > 0.0;
    if ens.eta() == 0.0 {
        return Ok(SmallSignalDelay { delay: 0.0, reduced_validity });
    }
    let w = ctrl.rabi() * ctrl.rabi();
    if w == 0.0 {
        return Err(domain("small-signal delay undefined without a control field"));
    }
    Ok(SmallSignalDelay { delay: ens.eta() * ens.gamma31() / w, reduced_validity })
}

/// Group velocity `length / delay`.
pub fn group_velocity(delay: f64, ens: &EnsembleParams) -> Result<f64> {
    if !(delay.is_finite() && delay > 0.0) {
        return Err(domain(format!("delay must be > 0, got {delay}")));
    }
    Ok(ens.length() / delay)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz_to_angular;

    fn slow_pulse() -> GaussianPulse {
        GaussianPulse::resonant(0.7e-12, 9.4e-6, 0.0).unwrap()
    }

    #[test]
    fn empty_medium_round_trip() {
        let ens = EnsembleParams::from_hz(0.0, 6.4e6, 20e3, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(0.5e6).unwrap();
        let grid = GridConfig { points: 1 << 12, window_factor: 16.0 };
        let input = sample_pulse(&slow_pulse(), &grid).unwrap();
        let out = propagate_pulse(&slow_pulse(), &ens, &ctrl, &grid).unwrap();
        let peak = slow_pulse().peak_power();
        for (a, b) in input.powers().iter().zip(out.powers()) {
            assert!((a - b).abs() <= 1e-9 * peak);
        }
    }

    #[test]
    fn grid_bounds_are_named() {
        let coarse = GridConfig { points: 64, window_factor: 16.0 };
        let e = coarse.validate().unwrap_err();
        assert!(e.to_string().contains("at least 16"), "{e}");
        let short = GridConfig { points: 1 << 12, window_factor: 4.0 };
        assert!(short.validate().unwrap_err().to_string().contains("window_factor"));
    }

    #[test]
    fn synthetic_delay_and_attenuation() {
        let dt = 0.05e-6;
        let g = |c: f64, a: f64| -> Vec<f64> {
            (0..2000)
                .map(|k| {
                    let t = k as f64 * dt;
                    a * (-4.0 * LN_2 * ((t - c) / 9.4e-6).powi(2)).exp()
                })
                .collect()
        };
        let reference = TimeTrace::uniform(0.0, dt, g(40e-6, 1.0), None).unwrap();
        let output = TimeTrace::uniform(0.0, dt, g(43e-6, 0.4), None).unwrap();
        let m = pulse_metrics(&output, &reference).unwrap();
        assert!(m.fit_ok);
        assert!((m.delay / 3e-6 - 1.0).abs() < 1e-6);
        assert!((m.transmission / 0.4 - 1.0).abs() < 1e-6);
        assert!((m.duration / 9.4e-6 - 1.0).abs() < 1e-6);
        let same = pulse_metrics(&reference, &reference).unwrap();
        assert!(same.delay.abs() < 1e-15);
        assert!((same.transmission - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_signal_delay_values() {
        let ens = EnsembleParams::from_hz(6.0, 6.4e6, 0.0, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(2.4e6).unwrap();
        let d = group_delay_smallsignal(&ens, &ctrl).unwrap();
        assert!((d.delay / 1.06e-6 - 1.0).abs() < 1e-2);
        assert!(!d.reduced_validity);
        let d2 = group_delay_smallsignal(&ens, &ctrl.scaled(2.0).unwrap()).unwrap();
        assert!((d2.delay * 4.0 / d.delay - 1.0).abs() < 1e-15);
        let empty = ens.with_eta(0.0).unwrap();
        assert_eq!(group_delay_smallsignal(&empty, &ctrl).unwrap().delay, 0.0);
        let lossy = ens.with_gamma21(hz_to_angular(20e3)).unwrap();
        assert!(group_delay_smallsignal(&lossy, &ctrl).unwrap().reduced_validity);
    }

    #[test]
    fn phase_slope_matches_small_signal_delay() {
        let ens = EnsembleParams::from_hz(6.0, 6.4e6, 0.0, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(2.4e6).unwrap();
        let h = 1.0;
        let up = transfer_function(h, &ens, &ctrl).arg();
        let dn = transfer_function(-h, &ens, &ctrl).arg();
        let slope_delay = -(up - dn) / (2.0 * h);
        let d = group_delay_smallsignal(&ens, &ctrl).unwrap().delay;
        assert!((slope_delay / d - 1.0).abs() < 1e-2);
    }

    #[test]
    fn group_velocity_values() {
        let ens = EnsembleParams::from_hz(6.0, 6.4e6, 0.0, 1e-3).unwrap();
        assert_eq!(group_velocity(20e-6, &ens).unwrap(), 50.0);
        assert!((group_velocity(22e-6, &ens).unwrap() - 45.45).abs() < 0.1);
        let unit = EnsembleParams::from_hz(6.0, 6.4e6, 0.0, 1.0).unwrap();
        assert_eq!(group_velocity(1.0, &unit).unwrap(), 1.0);
        assert!(group_velocity(0.0, &ens).is_err());
        assert!(group_velocity(-1e-6, &ens).is_err());
    }
}
