//! Domain types, physical constants and unit conversions.
//!
//! All rates are stored as angular frequencies (rad/s). Values quoted as
//! "frequency / 2π" in Hz are converted once, at construction, through
//! [`hz_to_angular`].

use std::f64::consts::{LN_2, PI, TAU};

use crate::error::{domain, Result};

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const LIGHT_SPEED: f64 = 299_792_458.0;
/// Cesium D2 line vacuum wavelength, m. Default probe carrier.
pub const CS_D2_WAVELENGTH: f64 = 852.347e-9;

/// Fixed physical constants used for photon bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub planck: f64,
    pub light_speed: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        planck: PLANCK,
        light_speed: LIGHT_SPEED,
    };
}

/// Converts an ordinary frequency in Hz (a "/(2π)" value) to rad/s.
#[inline]
pub fn hz_to_angular(hz: f64) -> f64 {
    hz * TAU
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Ratio of the energy of a Gaussian intensity pulse to `peak_power * fwhm`.
#[inline]
pub fn gaussian_energy_factor() -> f64 {
    (PI / (4.0 * LN_2)).sqrt()
}

/// Effective parameters of the atomic medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    eta: f64,
    gamma31: f64,
    gamma21: f64,
    length: f64,
}

impl EnsembleParams {
    /// Builds a validated parameter set. Rates are angular (rad/s).
    pub fn new(eta: f64, gamma31: f64, gamma21: f64, length: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(domain(format!("optical depth must be finite and >= 0, got {eta}")));
        }
        if !(gamma31.is_finite() && gamma31 > 0.0) {
            return Err(domain(format!("gamma31 must be > 0, got {gamma31}")));
        }
        if !(gamma21.is_finite() && gamma21 >= 0.0) {
            return Err(domain(format!("gamma21 must be >= 0, got {gamma21}")));
        }
        if gamma21 >= gamma31 {
            return Err(domain(format!(
                "gamma21 ({gamma21}) must be smaller than gamma31 ({gamma31})"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(domain(format!("medium length must be > 0, got {length}")));
        }
        Ok(Self { eta, gamma31, gamma21, length })
    }

    /// Same as [`EnsembleParams::new`] with rates given as `rate / 2π` in Hz.
    pub fn from_hz(eta: f64, gamma31_hz: f64, gamma21_hz: f64, length: f64) -> Result<Self> {
        Self::new(eta, hz_to_angular(gamma31_hz), hz_to_angular(gamma21_hz), length)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma31(&self) -> f64 {
        self.gamma31
    }

    pub fn gamma21(&self) -> f64 {
        self.gamma21
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(eta, self.gamma31, self.gamma21, self.length)
    }

    pub fn with_gamma21(&self, gamma21: f64) -> Result<Self> {
        Self::new(self.eta, self.gamma31, gamma21, self.length)
    }

    /// Cooperativity-like ratio `|Ωc|² / (γ21 γ31)`; infinite when γ21 = 0.
    pub fn control_ratio(&self, ctrl: &ControlField) -> f64 {
        let w = ctrl.rabi() * ctrl.rabi();
        if w == 0.0 {
            0.0
        } else {
            w / (self.gamma21 * self.gamma31)
        }
    }
}

/// Control field driving the |2⟩→|3⟩ transition.
///
/// When built from a power and a calibration constant `s`, the Rabi frequency
/// is `s·√P` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlField {
    rabi: f64,
    power: Option<f64>,
    calib_s: Option<f64>,
}

impl ControlField {
    pub fn from_rabi(rabi: f64) -> Result<Self> {
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(domain(format!("Rabi frequency must be >= 0, got {rabi}")));
        }
        Ok(Self { rabi, power: None, calib_s: None })
    }

    pub fn from_rabi_hz(rabi_hz: f64) -> Result<Self> {
        Self::from_rabi(hz_to_angular(rabi_hz))
    }

    pub fn from_power(power: f64, calib_s: f64) -> Result<Self> {
        let rabi = rabi_from_power(power, calib_s)?;
        Ok(Self { rabi, power: Some(power), calib_s: Some(calib_s) })
    }

    /// No control light.
    pub fn off() -> Self {
        Self { rabi: 0.0, power: None, calib_s: None }
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    pub fn power(&self) -> Option<f64> {
        self.power
    }

    pub fn calib_s(&self) -> Option<f64> {
        self.calib_s
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_rabi(self.rabi * factor)
    }
}

/// Control Rabi frequency `Ωc = s·√Pc`.
pub fn rabi_from_power(power: f64, calib_s: f64) -> Result<f64> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(domain(format!("control power must be >= 0, got {power}")));
    }
    if !(calib_s.is_finite() && calib_s > 0.0) {
        return Err(domain(format!("calibration constant must be > 0, got {calib_s}")));
    }
    Ok(calib_s * power.sqrt())
}

/// Calibration constant `s` such that the control reaches `rabi` at `power`.
pub fn calib_from_reference(rabi: f64, power: f64) -> Result<f64> {
    if !(power.is_finite() && power > 0.0) {
        return Err(domain(format!("reference power must be > 0, got {power}")));
    }
    if !(rabi.is_finite() && rabi > 0.0) {
        return Err(domain(format!("reference Rabi frequency must be > 0, got {rabi}")));
    }
    Ok(rabi / power.sqrt())
}

/// Probe pulse with a Gaussian intensity profile.
///
/// `P(t) = peak_power · exp(−4 ln2 (t − center)² / fwhm²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPulse {
    peak_power: f64,
    fwhm: f64,
    center: f64,
    carrier_detuning: f64,
    wavelength: f64,
}

impl GaussianPulse {
    pub fn new(
        peak_power: f64,
        fwhm: f64,
        center: f64,
        carrier_detuning: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if !(peak_power.is_finite() && peak_power >= 0.0) {
            return Err(domain(format!("peak power must be >= 0, got {peak_power}")));
        }
        if !(fwhm.is_finite() && fwhm > 0.0) {
            return Err(domain(format!("pulse FWHM must be > 0, got {fwhm}")));
        }
        if !center.is_finite() || !carrier_detuning.is_finite() {
            return Err(domain("pulse center and carrier detuning must be finite"));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(domain(format!("wavelength must be > 0, got {wavelength}")));
        }
        Ok(Self { peak_power, fwhm, center, carrier_detuning, wavelength })
    }

    /// Resonant pulse at the cesium D2 wavelength.
    pub fn resonant(peak_power: f64, fwhm: f64, center: f64) -> Result<Self> {
        Self::new(peak_power, fwhm, center, 0.0, CS_D2_WAVELENGTH)
    }

    /// Resonant pulse carrying `photons` on average.
    pub fn from_photons(photons: f64, fwhm: f64, center: f64, wavelength: f64) -> Result<Self> {
        let peak = peak_power_from_photons(photons, fwhm, wavelength)?;
        Self::new(peak, fwhm, center, 0.0, wavelength)
    }

    pub fn peak_power(&self) -> f64 {
        self.peak_power
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn carrier_detuning(&self) -> f64 {
        self.carrier_detuning
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn with_peak_power(&self, peak_power: f64) -> Result<Self> {
        Self::new(peak_power, self.fwhm, self.center, self.carrier_detuning, self.wavelength)
    }

    pub fn with_center(&self, center: f64) -> Result<Self> {
        Self::new(self.peak_power, self.fwhm, center, self.carrier_detuning, self.wavelength)
    }

    pub fn with_carrier_detuning(&self, detuning: f64) -> Result<Self> {
        Self::new(self.peak_power, self.fwhm, self.center, detuning, self.wavelength)
    }

    /// Instantaneous power at time `t`.
    pub fn power_at(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.fwhm;
        self.peak_power * (-4.0 * LN_2 * u * u).exp()
    }

    /// Real field envelope `√P(t)`.
    pub fn envelope_at(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.fwhm;
        self.peak_power.sqrt() * (-2.0 * LN_2 * u * u).exp()
    }

    /// Pulse energy, J.
    pub fn energy(&self) -> f64 {
        self.peak_power * self.fwhm * gaussian_energy_factor()
    }

    pub fn photon_number(&self) -> f64 {
        pulse_photon_number(self)
    }
}

/// Photon energy `h·c/λ`.
pub fn photon_energy(wavelength: f64) -> Result<f64> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(domain(format!("wavelength must be > 0, got {wavelength}")));
    }
    let k = PhysicalConstants::CODATA;
    Ok(k.planck * k.light_speed / wavelength)
}

/// Mean photon number of a Gaussian pulse.
pub fn pulse_photon_number(pulse: &GaussianPulse) -> f64 {
    // wavelength already validated by the pulse constructor
    let e_ph = PLANCK * LIGHT_SPEED / pulse.wavelength;
    pulse.energy() / e_ph
}

/// Peak power of a Gaussian pulse of the given FWHM carrying `photons`.
pub fn peak_power_from_photons(photons: f64, fwhm: f64, wavelength: f64) -> Result<f64> {
    if !(photons.is_finite() && photons >= 0.0) {
        return Err(domain(format!("photon number must be >= 0, got {photons}")));
    }
    if !(fwhm.is_finite() && fwhm > 0.0) {
        return Err(domain(format!("pulse FWHM must be > 0, got {fwhm}")));
    }
    let e_ph = photon_energy(wavelength)?;
    Ok(photons * e_ph / (fwhm * gaussian_energy_factor()))
}

/// Number of atoms giving optical depth `eta` when each absorbs the fraction
/// `absorption_per_atom` of the guided probe power.
pub fn atom_number(eta: f64, absorption_per_atom: f64) -> Result<f64> {
    if !(absorption_per_atom > 0.0 && absorption_per_atom < 1.0) {
        return Err(domain(format!(
            "absorption per atom must lie in (0, 1), got {absorption_per_atom}"
        )));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(domain(format!("optical depth must be >= 0, got {eta}")));
    }
    Ok(eta / -(-absorption_per_atom).ln_1p())
}

/// Atom number using the linearised convention `eta / absorption_per_atom`.
pub fn atom_number_linear(eta: f64, absorption_per_atom: f64) -> Result<f64> {
    if !(absorption_per_atom > 0.0 && absorption_per_atom < 1.0) {
        return Err(domain(format!(
            "absorption per atom must lie in (0, 1), got {absorption_per_atom}"
        )));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(domain(format!("optical depth must be >= 0, got {eta}")));
    }
    Ok(eta / absorption_per_atom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn photon_energy_d2_and_nd_yag() {
        // h c / λ evaluated independently with the SI constants
        let hc = 6.626_070_15e-34 * 299_792_458.0;
        assert_relative_eq!(photon_energy(852.347e-9).unwrap(), 2.3305e-19, max_relative = 1e-4);
        assert_relative_eq!(photon_energy(852.347e-9).unwrap(), hc / 852.347e-9);
        assert_relative_eq!(photon_energy(1064e-9).unwrap(), 1.8669e-19, max_relative = 1e-4);
        let e1 = photon_energy(500e-9).unwrap();
        let e2 = photon_energy(1000e-9).unwrap();
        assert_eq!(e2, e1 / 2.0);
    }

    #[test]
    fn photon_energy_rejects_bad_wavelength() {
        assert!(photon_energy(0.0).is_err());
        assert!(photon_energy(-1e-9).is_err());
        assert!(photon_energy(f64::NAN).is_err());
    }

    #[test]
    fn slow_light_pulse_carries_thirty_photons() {
        let p = GaussianPulse::resonant(0.7e-12, 9.4e-6, 0.0).unwrap();
        let n = pulse_photon_number(&p);
        assert!((n - 30.0).abs() < 0.5, "{n}");
        let zero = GaussianPulse::resonant(0.0, 3e-6, 0.0).unwrap();
        assert_eq!(pulse_photon_number(&zero), 0.0);
    }

    #[test]
    fn storage_pulse_peak_power() {
        let p = peak_power_from_photons(0.8, 0.2e-6, CS_D2_WAVELENGTH).unwrap();
        assert_relative_eq!(p, 0.876e-12, max_relative = 1e-2);
    }

    #[test]
    fn rabi_scaling() {
        let s = calib_from_reference(hz_to_angular(353e3), 1e-12).unwrap();
        let at1 = rabi_from_power(1e-12, s).unwrap();
        assert_relative_eq!(angular_to_hz(at1), 353e3, max_relative = 1e-12);
        assert_eq!(rabi_from_power(0.0, s).unwrap(), 0.0);
        let at21 = rabi_from_power(2.1e-12, s).unwrap();
        assert_relative_eq!(angular_to_hz(at21), 511.6e3, max_relative = 1e-3);
        assert!(rabi_from_power(-1e-12, s).is_err());
        let c = ControlField::from_power(2.1e-12, s).unwrap();
        assert_eq!(c.rabi(), s * (2.1e-12f64).sqrt());
    }

    #[test]
    fn atom_number_examples() {
        assert!((atom_number(5.9, 0.038).unwrap() - 152.3).abs() < 0.1);
        assert_eq!(atom_number(0.0, 0.038).unwrap(), 0.0);
        assert!((atom_number(2.4, 0.038).unwrap() - 61.9).abs() < 0.1);
        assert!((atom_number_linear(5.9, 0.038).unwrap() - 155.26).abs() < 0.01);
        assert!(atom_number(1.0, 0.0).is_err());
        assert!(atom_number(1.0, 1.0).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).is_ok());
        assert!(EnsembleParams::from_hz(-1.0, 6.4e6, 49e3, 1e-3).is_err());
        assert!(EnsembleParams::from_hz(1.0, 0.0, 0.0, 1e-3).is_err());
        assert!(EnsembleParams::from_hz(1.0, 6.4e6, 7e6, 1e-3).is_err());
        assert!(EnsembleParams::from_hz(1.0, 6.4e6, 0.0, 0.0).is_err());
    }

    #[test]
    fn hz_round_trip() {
        for f in [1.0, 49e3, 6.4e6, 2.24e6, 353e3] {
            assert_relative_eq!(angular_to_hz(hz_to_angular(f)), f, max_relative = 2.0 * f64::EPSILON);
        }
    }
}
