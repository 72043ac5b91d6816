use super::lm::{levenberg_marquardt, LmConfig};
use super::{reduced_chi2, std_errors, FitParam, FitResult};
use crate::error::{data, domain, Error, Result};
use crate::spectra::{chi_tilde_raw, Spectrum};

/// Fits `T(δ) = exp(−η Im χ̃(δ))` with γ31 held fixed.
///
/// Internally the parameters are `logit(γ21/γ31)`, `ln Ωc` and `ln η`, which
/// keeps every candidate physical. Reported values and standard errors are
/// mapped back to `gamma21` (rad/s), `rabi` (rad/s) and `eta`.
pub fn fit_eit_spectrum(spec: &Spectrum, gamma31: f64) -> Result<FitResult> {
    if !(gamma31.is_finite() && gamma31 > 0.0) {
        return Err(domain(format!("gamma31 must be > 0, got {gamma31}")));
    }
    if spec.len() < 6 {
        return Err(data(format!("need at least 6 spectrum points, got {}", spec.len())));
    }
    let d = spec.detunings();
    let y = spec.values();
    let weights: Option<Vec<f64>> = spec.sigmas().and_then(|s| {
        let min_pos = s.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        min_pos
            .is_finite()
            .then(|| s.iter().map(|&e| 1.0 / if e > 0.0 { e } else { min_pos }).collect())
    });

    let init = initial_guess(d, y, gamma31)?;
    let resid = |p: &[f64]| -> Option<Vec<f64>> {
        let (g21, rabi, eta) = unpack(p, gamma31);
        if !(g21 > 0.0 && rabi.is_finite() && eta.is_finite()) {
            return None;
        }
        Some(
            d.iter()
                .zip(y)
                .enumerate()
                .map(|(i, (&di, &yi))| {
                    let t = (-eta * chi_tilde_raw(di, g21, gamma31, rabi).im).exp();
                    match &weights {
                        Some(w) => (t - yi) * w[i],
                        None => t - yi,
                    }
                })
                .collect(),
        )
    };
    let out = levenberg_marquardt(resid, &init, &[1.0, 1.0, 1.0], &LmConfig::default())?;
    let errs = std_errors(&out, weights.is_none());
    let (g21, rabi, eta) = unpack(&out.params, gamma31);
    let frac = g21 / gamma31;
    Ok(FitResult {
        params: vec![
            FitParam { name: "gamma21", value: g21, std_error: errs[0] * gamma31 * frac * (1.0 - frac) },
            FitParam { name: "rabi", value: rabi, std_error: errs[1] * rabi },
            FitParam { name: "eta", value: eta, std_error: errs[2] * eta },
        ],
        chi2_reduced: reduced_chi2(&out),
        converged: out.converged,
        n_iter: out.n_iter,
    })
}

fn unpack(p: &[f64], gamma31: f64) -> (f64, f64, f64) {
    let frac = 1.0 / (1.0 + (-p[0]).exp());
    (gamma31 * frac, p[1].exp(), p[2].exp())
}

fn logit(f: f64) -> f64 {
    (f / (1.0 - f)).ln()
}

/// Start values: η from the deepest point, x = Ωc²/(γ21γ31) from T(0) via
/// `T(0) = exp(−η/(1+x))`, Ωc from the window width via the lossless
/// transparency profile, then γ21 from x.
fn initial_guess(d: &[f64], y: &[f64], gamma31: f64) -> Result<Vec<f64>> {
    let t_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let eta = (-t_min.max(1e-12).ln()).max(1e-4);
    let i0 = (0..d.len())
        .min_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()))
        .ok_or_else(|| Error::Degenerate("empty spectrum".into()))?;
    let t0 = y[i0].clamp(1e-12, 1.0 - 1e-12);
    let floor = (-eta).exp();
    let x = (eta / -t0.ln() - 1.0).max(1e-3);

    // transparency profile at γ21 = 0: T = exp(−η u), u = s²/(1+s²), s = δ/Γ, Γ = Ωc²/γ31
    let level = 0.5 * (t0 + floor);
    let rabi = match half_width(d, y, i0, level) {
        Some(hw) if t0 > floor * 1.5 => {
            let u_star = (-level.ln() / eta).clamp(1e-6, 1.0 - 1e-6);
            let big_gamma = 2.0 * hw / (u_star / (1.0 - u_star)).sqrt();
            (big_gamma * gamma31).sqrt()
        }
        _ => 1e-2 * gamma31,
    };
    let frac = (rabi * rabi / (x * gamma31 * gamma31)).clamp(1e-6, 0.5);
    Ok(vec![logit(frac), rabi.ln(), eta.ln()])
}

/// Mean distance from `d[i0]` to the first crossings below `level` on each side.
fn half_width(d: &[f64], y: &[f64], i0: usize, level: f64) -> Option<f64> {
    let right = (i0 + 1..d.len()).find(|&i| y[i] < level).map(|i| {
        let f = (y[i - 1] - level) / (y[i - 1] - y[i]);
        d[i - 1] + f * (d[i] - d[i - 1]) - d[i0]
    });
    let left = (0..i0).rev().find(|&i| y[i] < level).map(|i| {
        let f = (y[i + 1] - level) / (y[i + 1] - y[i]);
        d[i0] - (d[i + 1] + f * (d[i] - d[i + 1]))
    });
    match (left, right) {
        (Some(l), Some(r)) => Some(0.5 * (l + r)),
        (Some(v), None) | (None, Some(v)) => Some(v),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hz_to_angular, ControlField, EnsembleParams};
    use crate::spectra::{symmetric_grid, transmission_spectrum};

    #[test]
    fn noiseless_round_trip() {
        let g31 = hz_to_angular(6.4e6);
        let ens = EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(2.4e6).unwrap();
        let grid = symmetric_grid(hz_to_angular(30e6), 501);
        let spec = transmission_spectrum(&grid, &ens, &ctrl).unwrap();
        let fit = fit_eit_spectrum(&spec, g31).unwrap();
        assert!(fit.converged);
        for (name, truth) in [("gamma21", ens.gamma21()), ("rabi", ctrl.rabi()), ("eta", 5.9)] {
            assert!((fit.value(name) / truth - 1.0).abs() < 1e-6, "{name}: {}", fit.value(name));
        }
    }

    #[test]
    fn initial_guess_is_in_the_basin() {
        let g31 = hz_to_angular(6.4e6);
        let ens = EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).unwrap();
        let ctrl = ControlField::from_rabi_hz(2.4e6).unwrap();
        let grid = symmetric_grid(hz_to_angular(30e6), 501);
        let spec = transmission_spectrum(&grid, &ens, &ctrl).unwrap();
        let p = initial_guess(spec.detunings(), spec.values(), g31).unwrap();
        let (g21, rabi, eta) = unpack(&p, g31);
        assert!((rabi / ctrl.rabi() - 1.0).abs() < 0.3, "rabi {rabi}");
        assert!((eta / 5.9 - 1.0).abs() < 0.2);
        assert!(g21 > 0.0 && g21 < g31);
    }

    #[test]
    fn missing_window_leaves_rabi_unidentified() {
        let g31 = hz_to_angular(6.4e6);
        let ens = EnsembleParams::from_hz(5.9, 6.4e6, 49e3, 1e-3).unwrap();
        let grid = symmetric_grid(hz_to_angular(30e6), 301);
        let clean = transmission_spectrum(&grid, &ens, &ControlField::off()).unwrap();
        let spec = Spectrum::new(grid.clone(), clean.values().to_vec(), Some(vec![0.01; grid.len()])).unwrap();
        let fit = fit_eit_spectrum(&spec, g31).unwrap();
        let p = fit.get("rabi").unwrap();
        assert!(!(p.std_error < p.value), "rabi {} ± {}", p.value, p.std_error);
    }
}
