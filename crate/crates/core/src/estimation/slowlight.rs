use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::Mutex;

use rayon::prelude::*;

use super::lm::{levenberg_marquardt, LmConfig};
use super::{reduced_chi2, std_errors, FitParam, FitResult};
use crate::error::{config, data, domain, Result};
use crate::model::{ControlField, EnsembleParams, GaussianPulse};
use crate::propagation::{propagate_pulse, pulse_metrics, sample_pulse, GridConfig, PulseMetrics};

/// One control power with the measured pulse observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowLightRow {
    /// Control power, W.
    pub pc: f64,
    pub delay: f64,
    pub duration: f64,
    pub transmission: f64,
    pub sigma_delay: f64,
    pub sigma_duration: f64,
    pub sigma_transmission: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowLightDataset {
    rows: Vec<SlowLightRow>,
}

impl SlowLightDataset {
    pub fn new(rows: Vec<SlowLightRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(data("slow-light dataset is empty"));
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.pc.is_finite() && r.pc > 0.0) {
                return Err(data(format!("row {i}: control power must be > 0, got {}", r.pc)));
            }
            let vals = [r.delay, r.duration, r.transmission, r.sigma_delay, r.sigma_duration, r.sigma_transmission];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(data(format!("row {i}: non-finite observable")));
            }
            if [r.sigma_delay, r.sigma_duration, r.sigma_transmission].iter().any(|&s| s < 0.0) {
                return Err(data(format!("row {i}: negative uncertainty")));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[SlowLightRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// How the three observables enter the joint χ².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Residuals divided by the per-row uncertainties.
    InverseVariance,
    /// Residuals divided by the measured values; std errors scaled by √χ²_red.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowLightFitConfig {
    pub grid: GridConfig,
    pub lm: LmConfig,
    pub weighting: Weighting,
    /// Start values `(γ21, s, η)`; estimated from the data when `None`.
    pub initial: Option<[f64; 3]>,
}

impl Default for SlowLightFitConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig { points: 1 << 13, window_factor: 16.0 },
            lm: LmConfig { jacobian_step: 1e-4, ..LmConfig::default() },
            weighting: Weighting::InverseVariance,
            initial: None,
        }
    }
}

/// Delay, duration and transmission of a resonant Gaussian pulse of FWHM
/// `tau_in` at control power `pc` with `Ωc = s·√pc`.
pub fn slowlight_forward(
    ens: &EnsembleParams,
    calib_s: f64,
    pc: f64,
    tau_in: f64,
    grid: &GridConfig,
) -> Result<PulseMetrics> {
    let pulse = GaussianPulse::resonant(1e-12, tau_in, 0.0)?;
    let ctrl = ControlField::from_power(pc, calib_s)?;
    let out = propagate_pulse(&pulse, ens, &ctrl, grid)?;
    let reference = sample_pulse(&pulse, grid)?;
    pulse_metrics(&out, &reference)
}

type CacheKey = ([u64; 3], u64);

/// Global fit of (γ21, s, η) to delay, duration and transmission at all
/// control powers, with γ31 and the input pulse duration fixed.
///
/// Parameters are fitted as logarithms. A candidate at which the forward
/// model fails for any row is rejected by the optimiser.
pub fn fit_slowlight_global(
    dataset: &SlowLightDataset,
    gamma31: f64,
    tau_in: f64,
    cfg: &SlowLightFitConfig,
) -> Result<FitResult> {
    if dataset.len() < 3 {
        return Err(data(format!(
            "under-determined: the global fit needs at least 3 control powers, got {}",
            dataset.len()
        )));
    }
    if !(gamma31.is_finite() && gamma31 > 0.0) {
        return Err(domain(format!("gamma31 must be > 0, got {gamma31}")));
    }
    if !(tau_in.is_finite() && tau_in > 0.0) {
        return Err(domain(format!("input pulse duration must be > 0, got {tau_in}")));
    }
    cfg.grid.validate()?;
    let rows = dataset.rows();
    let scale = |r: &SlowLightRow| -> Result<[f64; 3]> {
        let s = match cfg.weighting {
            Weighting::InverseVariance => [r.sigma_delay, r.sigma_duration, r.sigma_transmission],
            Weighting::Relative => [r.delay.abs(), r.duration.abs(), r.transmission.abs()],
        };
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(config(format!(
                "weighting {:?} needs strictly positive scales at Pc = {} W",
                cfg.weighting, r.pc
            )));
        }
        Ok(s)
    };
    let scales: Vec<[f64; 3]> = rows.iter().map(scale).collect::<Result<_>>()?;

    let cache: Mutex<HashMap<CacheKey, Option<PulseMetrics>>> = Mutex::new(HashMap::new());
    let forward = |p: &[f64], pc: f64| -> Option<PulseMetrics> {
        let key = ([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()], pc.to_bits());
        if let Some(v) = cache.lock().unwrap().get(&key) {
            return *v;
        }
        let v = EnsembleParams::new(p[2].exp(), gamma31, p[0].exp(), 1.0)
            .and_then(|ens| slowlight_forward(&ens, p[1].exp(), pc, tau_in, &cfg.grid))
            .ok()
            .filter(|m| m.delay.is_finite() && m.duration.is_finite() && m.transmission.is_finite());
        cache.lock().unwrap().insert(key, v);
        v
    };
    let resid = |p: &[f64]| -> Option<Vec<f64>> {
        let metrics: Vec<Option<PulseMetrics>> = rows.par_iter().map(|r| forward(p, r.pc)).collect();
        let mut out = Vec::with_capacity(3 * rows.len());
        for ((r, m), s) in rows.iter().zip(metrics).zip(&scales) {
            let m = m?;
            out.push((m.delay - r.delay) / s[0]);
            out.push((m.duration - r.duration) / s[1]);
            out.push((m.transmission - r.transmission) / s[2]);
        }
        Some(out)
    };

    let init = match cfg.initial {
        Some([g, s, e]) => {
            if !(g > 0.0 && g < gamma31 && s > 0.0 && e > 0.0) {
                return Err(config("initial (gamma21, calib_s, eta) must be positive with gamma21 < gamma31"));
            }
            [g, s, e]
        }
        None => initial_guess(rows, gamma31, tau_in),
    };
    let p0 = [init[0].ln(), init[1].ln(), init[2].ln()];
    let out = levenberg_marquardt(resid, &p0, &[1.0, 1.0, 1.0], &cfg.lm)?;
    let errs = std_errors(&out, cfg.weighting == Weighting::Relative);
    let v: Vec<f64> = out.params.iter().map(|x| x.exp()).collect();
    Ok(FitResult {
        params: vec![
            FitParam { name: "gamma21", value: v[0], std_error: errs[0] * v[0] },
            FitParam { name: "calib_s", value: v[1], std_error: errs[1] * v[1] },
            FitParam { name: "eta", value: v[2], std_error: errs[2] * v[2] },
        ],
        chi2_reduced: reduced_chi2(&out),
        converged: out.converged,
        n_iter: out.n_iter,
    })
}

/// Per-row estimates from the large-x limits `D = ηγ31/Ωc²`,
/// `ln T = −γ21 D` and `τ_out² − τ² = 16 ln2 D²/η`, combined by median.
fn initial_guess(rows: &[SlowLightRow], gamma31: f64, tau_in: f64) -> [f64; 3] {
    let mut g = Vec::new();
    let mut e = Vec::new();
    for r in rows {
        if r.delay > 0.0 && r.transmission > 0.0 && r.transmission < 1.0 {
            g.push(-r.transmission.ln() / r.delay);
        }
        let broad = r.duration * r.duration - tau_in * tau_in;
        if r.delay > 0.0 && broad > 0.0 {
            e.push(16.0 * LN_2 * r.delay * r.delay / broad);
        }
    }
    let eta = median(&mut e).unwrap_or(3.0).clamp(0.1, 100.0);
    let gamma21 = median(&mut g).unwrap_or(1e-2 * gamma31).clamp(1e-6 * gamma31, 0.5 * gamma31);
    let mut s = Vec::new();
    for r in rows {
        if r.delay > 0.0 {
            s.push((eta * gamma31 / (r.delay * r.pc)).sqrt());
        }
    }
    let calib = median(&mut s).unwrap_or_else(|| {
        let pc = rows.iter().map(|r| r.pc).fold(0.0, f64::max);
        gamma31 / pc.sqrt()
    });
    [gamma21, calib, eta]
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{calib_from_reference, hz_to_angular};

    fn truth() -> (EnsembleParams, f64) {
        let ens = EnsembleParams::from_hz(6.0, 6.4e6, 20e3, 1e-3).unwrap();
        let s = calib_from_reference(hz_to_angular(353e3), 1e-12).unwrap();
        (ens, s)
    }

    #[test]
    fn single_row_is_under_determined() {
        let row = SlowLightRow {
            pc: 1e-12,
            delay: 3e-6,
            duration: 12e-6,
            transmission: 0.2,
            sigma_delay: 0.1e-6,
            sigma_duration: 0.3e-6,
            sigma_transmission: 0.01,
        };
        let ds = SlowLightDataset::new(vec![row]).unwrap();
        let err = fit_slowlight_global(&ds, hz_to_angular(6.4e6), 9.4e-6, &SlowLightFitConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("under-determined"));
    }

    #[test]
    fn dataset_rejects_nonpositive_power() {
        let row = SlowLightRow {
            pc: 0.0,
            delay: 1.0,
            duration: 1.0,
            transmission: 0.5,
            sigma_delay: 0.1,
            sigma_duration: 0.1,
            sigma_transmission: 0.1,
        };
        assert!(SlowLightDataset::new(vec![row]).is_err());
    }

    #[test]
    fn initial_guess_orders_of_magnitude() {
        let (ens, s) = truth();
        let grid = SlowLightFitConfig::default().grid;
        let rows: Vec<SlowLightRow> = [2.1e-12, 5e-12, 10e-12]
            .iter()
            .map(|&pc| {
                let m = slowlight_forward(&ens, s, pc, 9.4e-6, &grid).unwrap();
                SlowLightRow {
                    pc,
                    delay: m.delay,
                    duration: m.duration,
                    transmission: m.transmission,
                    sigma_delay: 0.0,
                    sigma_duration: 0.0,
                    sigma_transmission: 0.0,
                }
            })
            .collect();
        let [g, c, e] = initial_guess(&rows, ens.gamma31(), 9.4e-6);
        assert!(g > 0.1 * ens.gamma21() && g < 10.0 * ens.gamma21(), "{g}");
        assert!(c > 0.3 * s && c < 3.0 * s, "{c} vs {s}");
        assert!(e > 0.6 && e < 60.0, "{e}");
    }
}
