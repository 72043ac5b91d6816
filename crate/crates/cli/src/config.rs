//! Scenario configuration: TOML with dotted sections, every key checked.
//!
//! Frequencies are entered as ordinary frequencies (`*_hz_over_2pi`, or
//! `*_hz` for detunings) and converted to angular units here.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use eitsim::dynamics::{default_schedule, DEFAULT_HOLD, DEFAULT_RAMPDOWN, DEFAULT_RAMPUP};
use eitsim::model::{calib_from_reference, hz_to_angular, CS_D2_WAVELENGTH};
use eitsim::{ControlField, ControlSchedule, DetectorConfig, EnsembleParams, GaussianPulse, GridConfig, NumConfig};

use crate::error::{CliError, CliResult};
use crate::Scenario;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Optional guard; must equal the subcommand when present.
    pub scenario: Option<String>,
    pub ensemble: Option<EnsembleSection>,
    pub control: Option<ControlSection>,
    pub pulse: Option<PulseSection>,
    pub grid: Option<GridSection>,
    pub num: Option<NumSection>,
    pub schedule: Option<ScheduleSection>,
    pub spectrum: Option<SpectrumSection>,
    pub detector: Option<DetectorSection>,
    pub synth: Option<SynthSection>,
    pub fit: Option<FitSection>,
    pub input: Option<InputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub eta: f64,
    pub gamma31_hz_over_2pi: f64,
    pub gamma21_hz_over_2pi: f64,
    pub length_m: Option<f64>,
}

/// Either `rabi_hz_over_2pi`, or `power_w` with a calibration point.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub rabi_hz_over_2pi: Option<f64>,
    pub power_w: Option<f64>,
    pub calib_rabi_hz_over_2pi: Option<f64>,
    pub calib_power_w: Option<f64>,
}

/// Either `peak_power_w` or `photons`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub fwhm_s: f64,
    pub peak_power_w: Option<f64>,
    pub photons: Option<f64>,
    pub center_s: Option<f64>,
    pub detuning_hz: Option<f64>,
    pub wavelength_m: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    pub window_factor: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumSection {
    pub nz: usize,
    pub dt_gamma31: f64,
    pub lead_fwhm: f64,
    pub tail_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub rabi0_hz_over_2pi: f64,
    /// Omitted: ramp-down starts when the pulse reaches mid-medium.
    pub rampdown_start_s: Option<f64>,
    pub rampdown_s: Option<f64>,
    pub hold_s: Option<f64>,
    pub rampup_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub half_span_hz: f64,
    pub points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub quantum_efficiency: f64,
    pub dark_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    /// Swept-detuning counting spectrum from the model.
    Spectrum,
    /// Detection of a power trace read from `input.trace_csv`.
    Trace,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub mode: SynthMode,
    pub n_runs: u64,
    pub bin_s: f64,
    /// Probe power at the detector without the medium (spectrum mode).
    pub probe_power_w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Eit,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    InverseVariance,
    Relative,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub gamma31_hz_over_2pi: Option<f64>,
    pub model: Option<FitModel>,
    pub tau_in_s: Option<f64>,
    pub weighting: Option<FitWeighting>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub spectrum_csv: Option<PathBuf>,
    pub dataset_csv: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
}

pub fn load(path: &Path) -> CliResult<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn parse(text: &str) -> CliResult<RawConfig> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let msg = match e.span() {
            Some(span) => {
                let line = text[..span.start].matches('\n').count() + 1;
                let src = text.lines().nth(line - 1).unwrap_or("").trim();
                format!("line {line} `{src}`: {}", e.message())
            }
            None => e.message().to_string(),
        };
        CliError::config(msg)
    })
}

/// Wraps a core validation error with the config key it came from.
fn at<T>(key: &str, r: eitsim::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::config(format!("{key}: {e}")))
}

fn need<'a, T>(v: &'a Option<T>, key: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{key} must be > 0, got {v}")))
    }
}

impl RawConfig {
    /// Rejects sections the scenario does not read and a mismatched `scenario` key.
    pub fn check_sections(&self, scenario: Scenario) -> CliResult<()> {
        if let Some(s) = &self.scenario {
            if s != scenario.name() {
                return Err(CliError::config(format!(
                    "scenario = \"{s}\" does not match subcommand `{}`",
                    scenario.name()
                )));
            }
        }
        let present = [
            ("ensemble", self.ensemble.is_some()),
            ("control", self.control.is_some()),
            ("pulse", self.pulse.is_some()),
            ("grid", self.grid.is_some()),
            ("num", self.num.is_some()),
            ("schedule", self.schedule.is_some()),
            ("spectrum", self.spectrum.is_some()),
            ("detector", self.detector.is_some()),
            ("synth", self.synth.is_some()),
            ("fit", self.fit.is_some()),
            ("input", self.input.is_some()),
        ];
        let allowed: &[&str] = match scenario {
            Scenario::Spectrum => &["ensemble", "control", "spectrum"],
            Scenario::Propagate => &["ensemble", "control", "pulse", "grid"],
            Scenario::Store => &["ensemble", "schedule", "pulse", "num"],
            Scenario::FitSpectrum => &["fit", "input"],
            Scenario::FitSlowlight => &["fit", "input", "grid"],
            Scenario::Synth => match self.synth.as_ref().map(|s| s.mode) {
                Some(SynthMode::Trace) => &["synth", "detector", "input"],
                _ => &["synth", "detector", "ensemble", "control", "spectrum"],
            },
        };
        for (name, is_set) in present {
            if is_set && !allowed.contains(&name) {
                return Err(CliError::config(format!(
                    "section `{name}` is not used by scenario `{}`",
                    scenario.name()
                )));
            }
        }
        Ok(())
    }

    pub fn ensemble(&self) -> CliResult<EnsembleParams> {
        let e = need(&self.ensemble, "ensemble.eta")?;
        at(
            "ensemble",
            EnsembleParams::from_hz(e.eta, e.gamma31_hz_over_2pi, e.gamma21_hz_over_2pi, e.length_m.unwrap_or(1e-3)),
        )
    }

    pub fn control(&self) -> CliResult<ControlField> {
        let c = need(&self.control, "control.rabi_hz_over_2pi")?;
        match (c.rabi_hz_over_2pi, c.power_w, c.calib_rabi_hz_over_2pi, c.calib_power_w) {
            (Some(r), None, None, None) => at("control.rabi_hz_over_2pi", ControlField::from_rabi_hz(r)),
            (None, Some(p), Some(cr), Some(cp)) => {
                let s = at("control.calib_rabi_hz_over_2pi", calib_from_reference(hz_to_angular(cr), cp))?;
                at("control.power_w", ControlField::from_power(p, s))
            }
            (Some(_), _, _, _) => Err(CliError::config(
                "control.rabi_hz_over_2pi excludes control.power_w and the calib_* keys",
            )),
            _ => Err(CliError::config(
                "control needs rabi_hz_over_2pi, or power_w with calib_rabi_hz_over_2pi and calib_power_w",
            )),
        }
    }

    pub fn pulse(&self) -> CliResult<GaussianPulse> {
        let p = need(&self.pulse, "pulse.fwhm_s")?;
        let wl = p.wavelength_m.unwrap_or(CS_D2_WAVELENGTH);
        let center = p.center_s.unwrap_or(0.0);
        let pulse = match (p.peak_power_w, p.photons) {
            (Some(w), None) => at("pulse.peak_power_w", GaussianPulse::new(w, p.fwhm_s, center, 0.0, wl))?,
            (None, Some(n)) => at("pulse.photons", GaussianPulse::from_photons(n, p.fwhm_s, center, wl))?,
            _ => return Err(CliError::config("pulse needs exactly one of peak_power_w, photons")),
        };
        at("pulse.detuning_hz", pulse.with_carrier_detuning(hz_to_angular(p.detuning_hz.unwrap_or(0.0))))
    }

    pub fn grid(&self, default: GridConfig) -> CliResult<GridConfig> {
        let g = match &self.grid {
            Some(g) => GridConfig { points: g.points, window_factor: g.window_factor },
            None => default,
        };
        at("grid", g.validate()).map(|_| g)
    }

    pub fn num(&self) -> CliResult<NumConfig> {
        let n = match &self.num {
            Some(n) => NumConfig { nz: n.nz, dt_gamma31: n.dt_gamma31, lead_fwhm: n.lead_fwhm, tail: n.tail_s },
            None => NumConfig::default(),
        };
        at("num", n.validate()).map(|_| n)
    }

    pub fn schedule(&self, pulse: &GaussianPulse, ens: &EnsembleParams) -> CliResult<ControlSchedule> {
        let s = need(&self.schedule, "schedule.rabi0_hz_over_2pi")?;
        let omega0 = hz_to_angular(s.rabi0_hz_over_2pi);
        let start = match s.rampdown_start_s {
            Some(t) => t,
            None => at("schedule", default_schedule(pulse, ens, omega0))?.t_rampdown_start,
        };
        at(
            "schedule",
            ControlSchedule::new(
                omega0,
                start,
                s.rampdown_s.unwrap_or(DEFAULT_RAMPDOWN),
                s.hold_s.unwrap_or(DEFAULT_HOLD),
                s.rampup_s.unwrap_or(DEFAULT_RAMPUP),
            ),
        )
    }

    /// Detuning grid in rad/s; defaults to 2048 points over ±30 MHz.
    pub fn spectrum_grid(&self) -> CliResult<Vec<f64>> {
        let (half, points) = match &self.spectrum {
            Some(s) => (hz_to_angular(positive("spectrum.half_span_hz", s.half_span_hz)?), s.points),
            None => (hz_to_angular(30e6), 2048),
        };
        if points < 2 {
            return Err(CliError::config(format!("spectrum.points must be >= 2, got {points}")));
        }
        Ok(eitsim::spectra::symmetric_grid(half, points))
    }

    pub fn detector(&self, seed: u64) -> CliResult<DetectorConfig> {
        match &self.detector {
            Some(d) => at("detector", DetectorConfig::new(d.quantum_efficiency, d.dark_rate_hz, seed)),
            None => Ok(DetectorConfig::with_seed(seed)),
        }
    }

    pub fn synth(&self) -> CliResult<&SynthSection> {
        let s = need(&self.synth, "synth.mode")?;
        positive("synth.bin_s", s.bin_s)?;
        if s.n_runs == 0 {
            return Err(CliError::config("synth.n_runs must be >= 1"));
        }
        match (s.mode, s.probe_power_w) {
            (SynthMode::Spectrum, None) => Err(CliError::config("missing required key `synth.probe_power_w`")),
            (SynthMode::Spectrum, Some(p)) => positive("synth.probe_power_w", p).map(|_| s),
            (SynthMode::Trace, Some(_)) => {
                Err(CliError::config("synth.probe_power_w is not used in trace mode"))
            }
            (SynthMode::Trace, None) => Ok(s),
        }
    }

    pub fn fit_gamma31(&self) -> CliResult<f64> {
        let f = need(&self.fit, "fit.gamma31_hz_over_2pi")?;
        let g = *need(&f.gamma31_hz_over_2pi, "fit.gamma31_hz_over_2pi")?;
        Ok(hz_to_angular(positive("fit.gamma31_hz_over_2pi", g)?))
    }

    pub fn fit(&self) -> CliResult<&FitSection> {
        need(&self.fit, "fit")
    }

    pub fn input_path(&self, key: &str) -> CliResult<&Path> {
        let full = format!("input.{key}");
        let i = need(&self.input, &full)?;
        let p = match key {
            "spectrum_csv" => &i.spectrum_csv,
            "dataset_csv" => &i.dataset_csv,
            "trace_csv" => &i.trace_csv,
            _ => unreachable!("unknown input key {key}"),
        };
        need(p, &full).map(|p| p.as_path())
    }

    /// Input keys that are set but not read by the scenario.
    pub fn check_inputs(&self, used: &[&str]) -> CliResult<()> {
        if let Some(i) = &self.input {
            for (name, set) in [
                ("spectrum_csv", i.spectrum_csv.is_some()),
                ("dataset_csv", i.dataset_csv.is_some()),
                ("trace_csv", i.trace_csv.is_some()),
            ] {
                if set && !used.contains(&name) {
                    return Err(CliError::config(format!("input.{name} is not used by this scenario")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_parse() {
        let c = parse(
            "ensemble.eta = 5.9\nensemble.gamma31_hz_over_2pi = 6.4e6\nensemble.gamma21_hz_over_2pi = 49e3\n\
             control.rabi_hz_over_2pi = 2.4e6\n",
        )
        .unwrap();
        let ens = c.ensemble().unwrap();
        assert_eq!(ens.eta(), 5.9);
        assert!((c.control().unwrap().rabi() - hz_to_angular(2.4e6)).abs() < 1e-6);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("ensemble.eta = 5.9\nensemble.gama31 = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("gama31"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_key_is_named() {
        let err = parse("ensemble.eta = 5.9\nensemble.gamma31_hz_over_2pi = 6.4e6\n").unwrap_err();
        assert!(err.to_string().contains("gamma21_hz_over_2pi"), "{err}");
    }

    #[test]
    fn control_forms_are_exclusive() {
        let c = parse("control.rabi_hz_over_2pi = 1e6\ncontrol.power_w = 1e-12\n").unwrap();
        assert!(c.control().is_err());
        let c = parse("control.power_w = 4e-12\ncontrol.calib_rabi_hz_over_2pi = 353e3\ncontrol.calib_power_w = 1e-12\n")
            .unwrap();
        assert!((c.control().unwrap().rabi() / hz_to_angular(706e3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_value_carries_key() {
        let c = parse("ensemble.eta = -1\nensemble.gamma31_hz_over_2pi = 6.4e6\nensemble.gamma21_hz_over_2pi = 0\n")
            .unwrap();
        let err = c.ensemble().unwrap_err();
        assert!(err.to_string().contains("ensemble"), "{err}");
    }

    #[test]
    fn foreign_section_rejected() {
        let c = parse("detector.quantum_efficiency = 0.4\ndetector.dark_rate_hz = 0\n").unwrap();
        let err = c.check_sections(Scenario::Spectrum).unwrap_err();
        assert!(err.to_string().contains("detector"));
    }
}
