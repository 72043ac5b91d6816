//! Steady-state EIT response of the Λ-system: normalised susceptibility,
//! field transfer function and transmission spectra.
//!
//! The susceptibility is evaluated with numerator and denominator multiplied
//! by γ21², which leaves it unchanged for γ21 > 0 and keeps it finite at
//! γ21 = 0 (ideal dark state).

use num_complex::Complex64;

use crate::error::{data, domain, Error, Result};
use crate::model::{ControlField, EnsembleParams};

/// Transmission versus probe detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    detunings: Vec<f64>,
    values: Vec<f64>,
    sigmas: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, values: Vec<f64>, sigmas: Option<Vec<f64>>) -> Result<Self> {
        if detunings.len() != values.len() {
            return Err(data(format!(
                "spectrum has {} detunings but {} values",
                detunings.len(),
                values.len()
            )));
        }
        if let Some(s) = &sigmas {
            if s.len() != values.len() {
                return Err(data("spectrum sigma column length mismatch"));
            }
            if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(data(format!("sigma at index {i} is not a finite non-negative number")));
            }
        }
        check_increasing(&detunings)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(data(format!("transmission at index {i} is not finite")));
        }
        Ok(Self { detunings, values, sigmas })
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigmas(&self) -> Option<&[f64]> {
        self.sigmas.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Complex amplitude response sampled on a detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponse {
    pub detunings: Vec<f64>,
    pub h_values: Vec<Complex64>,
}

impl ComplexResponse {
    pub fn transmissions(&self) -> Vec<f64> {
        self.h_values.iter().map(|h| h.norm_sqr()).collect()
    }
}

pub(crate) fn check_increasing(grid: &[f64]) -> Result<()> {
    if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
        return Err(data(format!("grid value at index {i} is not finite")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(data(format!("grid is not strictly increasing at index {}", i + 1)));
    }
    Ok(())
}

/// Normalised probe susceptibility χ̃(δp).
///
/// Real part `2(δ/γ21)(4δ² − Ωc²)/(γ21γ31) / |D|²`, imaginary part
/// `(4(δ/γ21)² + 1 + Ωc²/(γ21γ31)) / |D|²` with
/// `D = Ωc²/(γ21γ31) + (1 − 2iδ/γ21)(1 − 2iδ/γ31)`.
pub fn chi_tilde(delta_p: f64, ens: &EnsembleParams, ctrl: &ControlField) -> Complex64 {
    chi_tilde_raw(delta_p, ens.gamma21(), ens.gamma31(), ctrl.rabi())
}

pub(crate) fn chi_tilde_raw(d: f64, g21: f64, g31: f64, rabi: f64) -> Complex64 {
    let w = rabi * rabi;
    let re = 2.0 * d * (4.0 * d * d - w) / g31;
    let im = 4.0 * d * d + g21 * g21 + g21 * w / g31;
    let den = Complex64::new(w / g31, 0.0)
        + Complex64::new(g21, -2.0 * d) * Complex64::new(1.0, -2.0 * d / g31);
    let den2 = den.norm_sqr();
    if den2 == 0.0 {
        // γ21 = Ωc = δ = 0: continuous limit of the two-level response
        return Complex64::new(0.0, 1.0);
    }
    Complex64::new(re / den2, im / den2)
}

/// Field transfer function `h = exp(i η χ̃ / 2)`.
pub fn transfer_function(delta_p: f64, ens: &EnsembleParams, ctrl: &ControlField) -> Complex64 {
    let chi = chi_tilde(delta_p, ens, ctrl);
    (Complex64::i() * ens.eta() * chi / 2.0).exp()
}

/// Power transmission `|h|²`.
pub fn transmission(delta_p: f64, ens: &EnsembleParams, ctrl: &ControlField) -> f64 {
    (-ens.eta() * chi_tilde(delta_p, ens, ctrl).im).exp()
}

/// Noise-free transmission spectrum on a caller-supplied grid.
pub fn transmission_spectrum(grid: &[f64], ens: &EnsembleParams, ctrl: &ControlField) -> Result<Spectrum> {
    check_increasing(grid)?;
    let values = grid.iter().map(|&d| transmission(d, ens, ctrl)).collect();
    Spectrum::new(grid.to_vec(), values, None)
}

/// Complex response on a caller-supplied grid.
pub fn complex_response(grid: &[f64], ens: &EnsembleParams, ctrl: &ControlField) -> ComplexResponse {
    ComplexResponse {
        detunings: grid.to_vec(),
        h_values: grid.iter().map(|&d| transfer_function(d, ens, ctrl)).collect(),
    }
}

/// Uniform detuning grid of `points` samples spanning `[-half_span, half_span]`.
pub fn symmetric_grid(half_span: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![0.0; points.min(1)];
    }
    let step = 2.0 * half_span / (points - 1) as f64;
    (0..points).map(|k| -half_span + k as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Transparency window on an absorbing background.
    Transparency,
    /// No control field: width of the two-level absorption dip instead.
    AbsorptionDip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMetrics {
    /// T(0).
    pub t_peak: f64,
    /// Full width (rad/s) at the level halfway between `t_peak` and the reference level.
    pub fwhm: f64,
    /// Absorption floor e^(−η).
    pub t_floor: f64,
    pub kind: WindowKind,
}

/// Peak, floor and full width of the transparency window.
///
/// The width is taken at the mid-level between T(0) and e^(−η), found by
/// geometric bracketing outward from δp = 0 followed by bisection.
pub fn window_metrics(ens: &EnsembleParams, ctrl: &ControlField) -> Result<WindowMetrics> {
    let t_peak = transmission(0.0, ens, ctrl);
    let t_floor = (-ens.eta()).exp();
    if ens.eta() == 0.0 {
        return Err(domain("empty medium (eta = 0) has no transparency window"));
    }
    let (level, kind) = if ctrl.rabi() > 0.0 && t_peak > t_floor {
        (0.5 * (t_peak + t_floor), WindowKind::Transparency)
    } else {
        (0.5 * (t_peak + 1.0), WindowKind::AbsorptionDip)
    };
    // f > 0 inside the feature for a window, f < 0 inside for a dip
    let sign = match kind {
        WindowKind::Transparency => 1.0,
        WindowKind::AbsorptionDip => -1.0,
    };
    let f = |d: f64| sign * (transmission(d, ens, ctrl) - level);
    let scale = ens.gamma31() + ctrl.rabi() + ens.gamma21();
    let mut lo = 0.0;
    let mut hi = 1e-9 * scale;
    let max = 1e3 * scale;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 1.05;
        if hi > max {
            return Err(Error::Numerical(
                "no half-level crossing found for the window".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(WindowMetrics { t_peak, fwhm: lo + hi, t_floor, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz_to_angular;
    use approx::assert_relative_eq;

    fn fig2a() -> (EnsembleParams, ControlField) {
        (
            EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).unwrap(),
            ControlField::from_rabi_hz(2.4e6).unwrap(),
        )
    }

    /// Eq. for χ̃ exactly as printed, with explicit divisions by γ21.
    fn chi_printed(d: f64, g21: f64, g31: f64, rabi: f64) -> Complex64 {
        let w = rabi * rabi;
        let x = w / (g21 * g31);
        let den = Complex64::new(x, 0.0)
            + Complex64::new(1.0, -2.0 * d / g21) * Complex64::new(1.0, -2.0 * d / g31);
        let re = 2.0 * (d / g21) * ((4.0 * d * d - w) / (g21 * g31));
        let im = 4.0 * (d / g21).powi(2) + 1.0 + x;
        Complex64::new(re, im) / den.norm_sqr()
    }

    #[test]
    fn rescaled_form_equals_printed_form() {
        let g31 = hz_to_angular(6.4e6);
        for &g21 in &[hz_to_angular(49e3), hz_to_angular(2e3), 0.3 * g31] {
            for &rabi in &[0.0, hz_to_angular(0.3e6), hz_to_angular(2.4e6)] {
                for k in -20..=20 {
                    let d = k as f64 * 0.37 * g31 / 10.0;
                    let a = chi_tilde_raw(d, g21, g31, rabi);
                    let b = chi_printed(d, g21, g31, rabi);
                    assert_relative_eq!(a.re, b.re, epsilon = 1e-15, max_relative = 1e-10);
                    assert_relative_eq!(a.im, b.im, epsilon = 1e-15, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn resonance_closed_form() {
        let (ens, ctrl) = fig2a();
        let x = ens.control_ratio(&ctrl);
        let chi = chi_tilde(0.0, &ens, &ctrl);
        assert_eq!(chi.re, 0.0);
        assert_relative_eq!(chi.im, 1.0 / (1.0 + x), max_relative = 1e-12);
    }

    #[test]
    fn two_level_limit() {
        let (ens, _) = fig2a();
        let off = ControlField::off();
        let g31 = ens.gamma31();
        for k in 0..50 {
            let d = k as f64 * 0.1 * g31;
            let chi = chi_tilde(d, &ens, &off);
            assert_relative_eq!(chi.im, 1.0 / (1.0 + 4.0 * d * d / (g31 * g31)), max_relative = 1e-12);
        }
        assert_eq!(chi_tilde(0.0, &ens, &off).re, 0.0);
        let t = transmission(0.0, &ens.with_eta(5.9).unwrap(), &off);
        assert_relative_eq!(t, 2.74e-3, max_relative = 2e-3);
    }

    #[test]
    fn far_detuning_decays() {
        let (ens, ctrl) = fig2a();
        let far = chi_tilde(1e6 * ens.gamma31(), &ens, &ctrl);
        assert!(far.norm() < 1e-5);
        let far = chi_tilde(-1e6 * ens.gamma31(), &ens, &ctrl);
        assert!(far.norm() < 1e-5);
    }

    #[test]
    fn zero_gamma21_is_finite() {
        let ens = EnsembleParams::from_hz(5.9, 6.4e6, 0.0, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(2.4e6).unwrap();
        assert_eq!(chi_tilde(0.0, &ens, &ctrl), Complex64::new(0.0, 0.0));
        assert_eq!(chi_tilde(0.0, &ens, &ControlField::off()), Complex64::new(0.0, 1.0));
        for k in 1..10 {
            let c = chi_tilde(k as f64 * 1e5, &ens, &ctrl);
            assert!(c.re.is_finite() && c.im.is_finite());
        }
    }

    #[test]
    fn empty_medium_is_transparent() {
        let ens = EnsembleParams::from_hz(0.0, 6.4e6, 49e3, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(1e6).unwrap();
        let grid = symmetric_grid(hz_to_angular(30e6), 101);
        let s = transmission_spectrum(&grid, &ens, &ctrl).unwrap();
        assert!(s.values().iter().all(|&t| t == 1.0));
        assert_eq!(transfer_function(1e6, &ens, &ctrl), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn fig2a_peak_and_width() {
        let (ens, ctrl) = fig2a();
        let m = window_metrics(&ens, &ctrl).unwrap();
        assert_eq!(m.kind, WindowKind::Transparency);
        assert!((m.t_peak - 0.737).abs() < 1e-3, "{}", m.t_peak);
        let fwhm_khz = m.fwhm / hz_to_angular(1e3);
        assert!((250.0..=400.0).contains(&fwhm_khz), "{fwhm_khz}");
        // brute-force scan crosses the same mid level
        let level = 0.5 * (m.t_peak + m.t_floor);
        let half = m.fwhm / 2.0;
        assert!(transmission(half * (1.0 - 1e-6), &ens, &ctrl) > level);
        assert!(transmission(half * (1.0 + 1e-6), &ens, &ctrl) < level);
    }

    #[test]
    fn grid_spectrum_is_even_and_passive() {
        let (ens, ctrl) = fig2a();
        let grid = symmetric_grid(hz_to_angular(30e6), 2048);
        let s = transmission_spectrum(&grid, &ens, &ctrl).unwrap();
        let v = s.values();
        for i in 0..v.len() {
            assert_relative_eq!(v[i], v[v.len() - 1 - i], max_relative = 1e-13);
            assert!((0.0..=1.0).contains(&v[i]));
        }
    }

    #[test]
    fn rejects_unsorted_grid() {
        let (ens, ctrl) = fig2a();
        assert!(transmission_spectrum(&[0.0, 2.0, 1.0], &ens, &ctrl).is_err());
        assert!(transmission_spectrum(&[0.0, 0.0], &ens, &ctrl).is_err());
    }

    #[test]
    fn thin_medium_has_degenerate_but_valid_metrics() {
        let ens = EnsembleParams::from_hz(0.01, 6.4e6, 49e3, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(1e6).unwrap();
        let m = window_metrics(&ens, &ctrl).unwrap();
        assert!((m.t_peak - 1.0).abs() < 0.01);
        assert!((m.t_floor - 1.0).abs() < 0.011);
        assert!(m.fwhm > 0.0);
    }

    #[test]
    fn window_widens_with_control() {
        let ens = EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).unwrap();
        let mut prev = 0.0;
        for k in 0..5 {
            let rabi_hz = 0.6e6 * 2f64.powi(k) / 2.0;
            let m = window_metrics(&ens, &ControlField::from_rabi_hz(rabi_hz).unwrap()).unwrap();
            assert!(m.fwhm > prev, "k={k}");
            prev = m.fwhm;
        }
    }

    #[test]
    fn no_control_reports_absorption_dip() {
        let (ens, _) = fig2a();
        let m = window_metrics(&ens, &ControlField::off()).unwrap();
        assert_eq!(m.kind, WindowKind::AbsorptionDip);
        // analytic half-depth width of exp(-η/(1+4δ²/γ²))
        let level = 0.5 * (m.t_peak + 1.0);
        let u = -level.ln() / ens.eta();
        let half = 0.5 * ens.gamma31() * (1.0 / u - 1.0).sqrt();
        assert_relative_eq!(m.fwhm, 2.0 * half, max_relative = 1e-9);
    }
}
