use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use eitsim::estimation::{
    fit_eit_spectrum, fit_lorentzian, fit_slowlight_global, SlowLightFitConfig, Weighting,
};
use eitsim::instrument::{expected_rate, poisson_counts, simulate_counts, transmission_from_counts};
use eitsim::model::{angular_to_hz, CS_D2_WAVELENGTH};
use eitsim::propagation::{propagate_pulse, pulse_metrics, sample_pulse};
use eitsim::spectra::{transmission_spectrum, window_metrics, WindowKind};
use eitsim::{CountTrace, FitResult, GridConfig, PulseMetrics};

use crate::config::{FitModel, FitWeighting, RawConfig, SynthMode};
use crate::error::{CliError, CliResult};
use crate::io;
use crate::{Invocation, Scenario};

/// Result of a scenario run.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// One-line JSON summary.
    pub summary: String,
    pub outputs: Vec<PathBuf>,
    /// False only for a fit that stopped without meeting its tolerances.
    pub converged: bool,
}

/// Metrics file schema.
#[derive(Debug, Serialize)]
pub struct PulseMetricsJson {
    pub delay_s: f64,
    pub duration_s: f64,
    pub transmission: f64,
}

impl From<&PulseMetrics> for PulseMetricsJson {
    fn from(m: &PulseMetrics) -> Self {
        Self { delay_s: m.delay, duration_s: m.duration, transmission: m.transmission }
    }
}

#[derive(Debug, Serialize)]
struct WindowJson {
    t_peak: f64,
    fwhm_hz: f64,
    t_floor: f64,
    kind: &'static str,
}

#[derive(Debug, Serialize)]
struct StoreJson {
    efficiency: f64,
    retrieval_delay_s: Option<f64>,
    leak_fraction: f64,
    input_energy_j: f64,
    leak_energy_j: f64,
    retrieved_energy_j: f64,
    residual_excitation_j: f64,
    rampdown_start_s: f64,
    rampdown_s: f64,
    hold_s: f64,
    rampup_s: f64,
}

#[derive(Debug, Serialize)]
struct ParamJson {
    name: String,
    unit: &'static str,
    value: f64,
    std_error: f64,
}

#[derive(Debug, Serialize)]
struct FitJson {
    model: &'static str,
    converged: bool,
    n_iter: usize,
    chi2_reduced: f64,
    params: Vec<ParamJson>,
}

struct Writer<'a> {
    dir: &'a Path,
    verbose: bool,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        if self.verbose {
            eprintln!("writing {}", p.display());
        }
        self.written.push(p.clone());
        p
    }

    fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect()
    }
}

fn numerical(what: &str, e: eitsim::Error) -> CliError {
    match e {
        eitsim::Error::Numerical(m) | eitsim::Error::Degenerate(m) => CliError::Numerical(format!("{what}: {m}")),
        other => CliError::Core(other),
    }
}

pub fn run(inv: &Invocation, cfg: &RawConfig) -> CliResult<Outcome> {
    let mut w = Writer { dir: &inv.out, verbose: inv.verbose, written: Vec::new() };
    let (mut summary, converged) = match inv.scenario {
        Scenario::Spectrum => (spectrum(cfg, &mut w)?, true),
        Scenario::Propagate => (propagate(cfg, &mut w)?, true),
        Scenario::Store => (store(cfg, &mut w)?, true),
        Scenario::FitSpectrum => fit_spectrum(cfg, &mut w)?,
        Scenario::FitSlowlight => fit_slowlight(cfg, &mut w)?,
        Scenario::Synth => (synth(cfg, inv.seed.expect("seed checked before dispatch"), &mut w)?, true),
    };
    summary["scenario"] = json!(inv.scenario.name());
    summary["outputs"] = json!(w.names());
    Ok(Outcome { summary: summary.to_string(), outputs: w.written, converged })
}

fn spectrum(cfg: &RawConfig, w: &mut Writer) -> CliResult<Value> {
    let ens = cfg.ensemble()?;
    let ctrl = cfg.control()?;
    let grid = cfg.spectrum_grid()?;
    let spec = transmission_spectrum(&grid, &ens, &ctrl)?;
    let m = window_metrics(&ens, &ctrl).map_err(|e| numerical("window metrics", e))?;
    let out = WindowJson {
        t_peak: m.t_peak,
        fwhm_hz: angular_to_hz(m.fwhm),
        t_floor: m.t_floor,
        kind: match m.kind {
            WindowKind::Transparency => "transparency",
            WindowKind::AbsorptionDip => "absorption_dip",
        },
    };
    io::write_spectrum(&w.path("spectrum.csv"), &spec)?;
    io::write_json(&w.path("window.json"), &out)?;
    Ok(json!({ "t_peak": out.t_peak, "fwhm_hz": out.fwhm_hz, "t_floor": out.t_floor, "points": spec.len() }))
}

fn propagate(cfg: &RawConfig, w: &mut Writer) -> CliResult<Value> {
    let ens = cfg.ensemble()?;
    let ctrl = cfg.control()?;
    let pulse = cfg.pulse()?;
    let grid = cfg.grid(GridConfig::default())?;
    let input = sample_pulse(&pulse, &grid)?;
    let output = propagate_pulse(&pulse, &ens, &ctrl, &grid).map_err(|e| numerical("propagation", e))?;
    let metrics = pulse_metrics(&output, &input).map_err(|e| numerical("pulse metrics", e))?;
    let out = PulseMetricsJson::from(&metrics);
    io::write_trace(&w.path("input.csv"), &input)?;
    io::write_trace(&w.path("output.csv"), &output)?;
    io::write_json(&w.path("metrics.json"), &out)?;
    Ok(json!({ "delay_s": out.delay_s, "duration_s": out.duration_s, "transmission": out.transmission }))
}

fn store(cfg: &RawConfig, w: &mut Writer) -> CliResult<Value> {
    let ens = cfg.ensemble()?;
    let pulse = cfg.pulse()?;
    let schedule = cfg.schedule(&pulse, &ens)?;
    let num = cfg.num()?;
    let r = eitsim::dynamics::simulate_storage(&pulse, &ens, &schedule, &num)
        .map_err(|e| numerical("storage", e))?;
    let out = StoreJson {
        efficiency: r.efficiency,
        retrieval_delay_s: r.retrieval_delay,
        leak_fraction: r.leak_fraction(),
        input_energy_j: r.input_energy,
        leak_energy_j: r.leak_energy,
        retrieved_energy_j: r.retrieved_energy,
        residual_excitation_j: r.residual_excitation,
        rampdown_start_s: schedule.t_rampdown_start,
        rampdown_s: schedule.rampdown_duration,
        hold_s: schedule.hold_duration,
        rampup_s: schedule.rampup_duration,
    };
    io::write_trace(&w.path("input.csv"), &r.input_trace)?;
    io::write_trace(&w.path("output.csv"), &r.output_trace)?;
    io::write_json(&w.path("storage.json"), &out)?;
    Ok(json!({
        "efficiency": out.efficiency,
        "retrieval_delay_s": out.retrieval_delay_s,
        "leak_fraction": out.leak_fraction,
    }))
}

fn param(fit: &FitResult, key: &str, name: &str, unit: &'static str, scale: f64) -> ParamJson {
    let p = fit.get(key).unwrap_or_else(|| panic!("fit result lacks {key}"));
    ParamJson { name: name.to_string(), unit, value: p.value * scale, std_error: p.std_error * scale }
}

fn fit_report(w: &mut Writer, model: &'static str, fit: &FitResult, params: Vec<ParamJson>) -> CliResult<(Value, bool)> {
    let out = FitJson { model, converged: fit.converged, n_iter: fit.n_iter, chi2_reduced: fit.chi2_reduced, params };
    io::write_json(&w.path("fit.json"), &out)?;
    let mut summary = json!({ "model": model, "converged": out.converged, "chi2_reduced": out.chi2_reduced });
    for p in &out.params {
        summary[p.name.as_str()] = json!(p.value);
        summary[format!("{}_std_error", p.name)] = json!(p.std_error);
    }
    Ok((summary, fit.converged))
}

fn fit_spectrum(cfg: &RawConfig, w: &mut Writer) -> CliResult<(Value, bool)> {
    cfg.check_inputs(&["spectrum_csv"])?;
    let f = cfg.fit()?;
    if f.tau_in_s.is_some() || f.weighting.is_some() {
        return Err(CliError::config("fit.tau_in_s and fit.weighting apply to fit-slowlight only"));
    }
    let model = f.model.unwrap_or(FitModel::Eit);
    let gamma31 = match model {
        FitModel::Eit => Some(cfg.fit_gamma31()?),
        FitModel::Lorentzian if f.gamma31_hz_over_2pi.is_some() => {
            return Err(CliError::config("fit.gamma31_hz_over_2pi is not used by the lorentzian model"))
        }
        FitModel::Lorentzian => None,
    };
    let spec = io::load_spectrum_csv(cfg.input_path("spectrum_csv")?)?;
    let hz = angular_to_hz(1.0);
    match gamma31 {
        Some(g31) => {
            let fit = fit_eit_spectrum(&spec, g31).map_err(|e| numerical("EIT fit", e))?;
            let params = vec![
                param(&fit, "gamma21", "gamma21_hz_over_2pi", "Hz", hz),
                param(&fit, "rabi", "rabi_hz_over_2pi", "Hz", hz),
                param(&fit, "eta", "eta", "1", 1.0),
            ];
            fit_report(w, "eit", &fit, params)
        }
        None => {
            let fit = fit_lorentzian(&spec).map_err(|e| numerical("Lorentzian fit", e))?;
            let params = vec![
                param(&fit, "amplitude", "amplitude", "1", 1.0),
                param(&fit, "center", "center_hz", "Hz", hz),
                param(&fit, "fwhm", "fwhm_hz", "Hz", hz),
                param(&fit, "baseline", "baseline", "1", 1.0),
            ];
            fit_report(w, "lorentzian", &fit, params)
        }
    }
}

fn fit_slowlight(cfg: &RawConfig, w: &mut Writer) -> CliResult<(Value, bool)> {
    cfg.check_inputs(&["dataset_csv"])?;
    let f = cfg.fit()?;
    if f.model.is_some() {
        return Err(CliError::config("fit.model applies to fit-spectrum only"));
    }
    let gamma31 = cfg.fit_gamma31()?;
    let tau_in = match f.tau_in_s {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => return Err(CliError::config(format!("fit.tau_in_s must be > 0, got {t}"))),
        None => return Err(CliError::config("missing required key `fit.tau_in_s`")),
    };
    let defaults = SlowLightFitConfig::default();
    let fit_cfg = SlowLightFitConfig {
        grid: cfg.grid(defaults.grid)?,
        weighting: match f.weighting.unwrap_or(FitWeighting::InverseVariance) {
            FitWeighting::InverseVariance => Weighting::InverseVariance,
            FitWeighting::Relative => Weighting::Relative,
        },
        ..defaults
    };
    let ds = io::load_dataset_csv(cfg.input_path("dataset_csv")?)?;
    let fit = fit_slowlight_global(&ds, gamma31, tau_in, &fit_cfg).map_err(|e| numerical("slow-light fit", e))?;
    let params = vec![
        param(&fit, "gamma21", "gamma21_hz_over_2pi", "Hz", angular_to_hz(1.0)),
        param(&fit, "calib_s", "calib_s", "rad/s/sqrt(W)", 1.0),
        param(&fit, "eta", "eta", "1", 1.0),
    ];
    fit_report(w, "slowlight", &fit, params)
}

/// Independent seed for the reference record.
const REFERENCE_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

fn total(c: &CountTrace) -> u64 {
    c.counts().iter().sum()
}

fn synth(cfg: &RawConfig, seed: u64, w: &mut Writer) -> CliResult<Value> {
    let s = cfg.synth()?;
    let det = cfg.detector(seed)?;
    match s.mode {
        SynthMode::Spectrum => {
            cfg.check_inputs(&[])?;
            let ens = cfg.ensemble()?;
            let ctrl = cfg.control()?;
            let grid = cfg.spectrum_grid()?;
            let power = s.probe_power_w.expect("checked by config");
            let truth = transmission_spectrum(&grid, &ens, &ctrl)?;
            let mean_ref = expected_rate(power, CS_D2_WAVELENGTH, &det)? * s.bin_s * s.n_runs as f64;
            let dark = expected_rate(0.0, CS_D2_WAVELENGTH, &det)? * s.bin_s * s.n_runs as f64;
            let ref_means = vec![mean_ref; grid.len()];
            let probe_means: Vec<f64> = truth.values().iter().map(|t| dark + t * (mean_ref - dark)).collect();
            // one bin per detuning step of a linear sweep
            let times: Vec<f64> = (0..grid.len()).map(|k| (k as f64 + 0.5) * s.bin_s).collect();
            let probe = CountTrace::new(times.clone(), poisson_counts(&probe_means, seed), s.bin_s, s.n_runs)?;
            let reference = CountTrace::new(
                times,
                poisson_counts(&ref_means, seed ^ REFERENCE_SEED_MIX),
                s.bin_s,
                s.n_runs,
            )?;
            let series = transmission_from_counts(&probe, &reference)?;
            let spec = series.to_spectrum(&grid)?;
            io::write_counts(&w.path("probe_counts.csv"), &probe)?;
            io::write_counts(&w.path("reference_counts.csv"), &reference)?;
            io::write_spectrum(&w.path("spectrum.csv"), &spec)?;
            Ok(json!({
                "probe_counts": total(&probe),
                "reference_counts": total(&reference),
                "points": spec.len(),
                "dropped_points": grid.len() - spec.len(),
            }))
        }
        SynthMode::Trace => {
            cfg.check_inputs(&["trace_csv"])?;
            let trace = io::load_timetrace_csv(cfg.input_path("trace_csv")?)?;
            let counts = simulate_counts(&trace, CS_D2_WAVELENGTH, &det, s.bin_s, s.n_runs)?;
            io::write_counts(&w.path("counts.csv"), &counts)?;
            Ok(json!({ "counts": total(&counts), "bins": counts.len() }))
        }
    }
}
