use std::f64::consts::LN_2;

use super::lm::{levenberg_marquardt, LmConfig};
use super::{reduced_chi2, std_errors, FitParam, FitResult};
use crate::error::{data, Error, Result};
use crate::propagation::TimeTrace;
use crate::spectra::Spectrum;

/// Peak profile `A·g((x − c)/w) + b` with `g(0) = 1` and FWHM `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakShape {
    Gaussian,
    Lorentzian,
}

impl PeakShape {
    #[inline]
    fn profile(self, z: f64) -> f64 {
        match self {
            PeakShape::Gaussian => (-4.0 * LN_2 * z * z).exp(),
            PeakShape::Lorentzian => 1.0 / (1.0 + 4.0 * z * z),
        }
    }
}

/// Gaussian fit of a time trace: parameters `amplitude`, `center`, `fwhm`, `baseline`.
pub fn fit_gaussian(trace: &TimeTrace) -> Result<FitResult> {
    fit_peak(trace.times(), trace.powers(), trace.sigmas(), PeakShape::Gaussian)
}

/// Lorentzian fit of a spectrum: `A·(w/2)²/((δ − c)² + (w/2)²) + b`.
pub fn fit_lorentzian(spec: &Spectrum) -> Result<FitResult> {
    fit_peak(spec.detunings(), spec.values(), spec.sigmas(), PeakShape::Lorentzian)
}

/// Weighted peak fit on arbitrary abscissae.
///
/// Abscissa and ordinate are rescaled to O(1) before fitting so that the
/// result is equivariant under shifts of `x` and scalings of `y`.
pub fn fit_peak(x: &[f64], y: &[f64], sigma: Option<&[f64]>, shape: PeakShape) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(data("abscissa and ordinate lengths differ"));
    }
    if x.len() < 5 {
        return Err(data(format!("need at least 5 points for a 4-parameter fit, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(data("non-finite sample in fit input"));
    }
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let x0 = 0.5 * (xmin + xmax);
    let sx = 0.5 * (xmax - xmin);
    if sx <= 0.0 {
        return Err(data("abscissa has zero span"));
    }
    let sy = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if sy == 0.0 {
        return Err(Error::Degenerate("all samples are zero".into()));
    }
    let u: Vec<f64> = x.iter().map(|v| (v - x0) / sx).collect();
    let v: Vec<f64> = y.iter().map(|v| v / sy).collect();

    let weights: Option<Vec<f64>> = match sigma {
        None => None,
        Some(s) => {
            if s.len() != y.len() {
                return Err(data("sigma length differs from data length"));
            }
            let min_pos = s.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
            if min_pos.is_finite() {
                Some(s.iter().map(|&e| sy / if e > 0.0 { e } else { min_pos }).collect())
            } else {
                None
            }
        }
    };

    let init = initial_guess(&u, &v)?;
    let resid = |p: &[f64]| -> Option<Vec<f64>> {
        let (a, c, w, b) = (p[0], p[1], p[2], p[3]);
        if w == 0.0 {
            return None;
        }
        Some(
            u.iter()
                .zip(&v)
                .enumerate()
                .map(|(i, (&ui, &vi))| {
                    let r = a * shape.profile((ui - c) / w) + b - vi;
                    match &weights {
                        Some(wt) => r * wt[i],
                        None => r,
                    }
                })
                .collect(),
        )
    };
    let out = levenberg_marquardt(resid, &init, &[1.0, 0.1, 0.1, 1.0], &LmConfig::default())?;
    let errs = std_errors(&out, weights.is_none());
    let p = &out.params;
    let chi2_red = if weights.is_some() {
        reduced_chi2(&out)
    } else {
        reduced_chi2(&out) * sy * sy
    };
    Ok(FitResult {
        params: vec![
            FitParam { name: "amplitude", value: p[0] * sy, std_error: errs[0] * sy },
            FitParam { name: "center", value: x0 + p[1] * sx, std_error: errs[1] * sx },
            FitParam { name: "fwhm", value: p[2].abs() * sx, std_error: errs[2] * sx },
            FitParam { name: "baseline", value: p[3] * sy, std_error: errs[3] * sy },
        ],
        chi2_reduced: chi2_red,
        converged: out.converged,
        n_iter: out.n_iter,
    })
}

/// Start values from the sample maximum, the half-maximum extent around it
/// and the first moment over that extent.
fn initial_guess(u: &[f64], v: &[f64]) -> Result<[f64; 4]> {
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let us: Vec<f64> = order.iter().map(|&i| u[i]).collect();
    let vs: Vec<f64> = order.iter().map(|&i| v[i]).collect();

    let base = vs.iter().copied().fold(f64::INFINITY, f64::min);
    let (imax, vmax) = vs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, val)| if val > acc.1 { (i, val) } else { acc });
    let amp = vmax - base;
    if amp <= 1e-12 {
        return Err(Error::Degenerate("trace is flat; no peak to fit".into()));
    }
    let half = base + 0.5 * amp;
    let mut lo = imax;
    while lo > 0 && vs[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < vs.len() && vs[hi + 1] > half {
        hi += 1;
    }
    let support = vs.iter().filter(|&&val| val - base > amp / 16.0).count();
    if support < 8 {
        return Err(data(format!(
            "peak is resolved by only {support} samples (at least 8 required)"
        )));
    }
    // half-maximum extent, interpolated one sample outward on each side
    let left = if lo > 0 { 0.5 * (us[lo - 1] + us[lo]) } else { us[lo] };
    let right = if hi + 1 < us.len() { 0.5 * (us[hi] + us[hi + 1]) } else { us[hi] };
    let width = (right - left).max(1e-6);
    let (mut s0, mut s1) = (0.0, 0.0);
    for i in lo..=hi {
        let wgt = vs[i] - base;
        s0 += wgt;
        s1 += wgt * us[i];
    }
    let center = if s0 > 0.0 { s1 / s0 } else { us[imax] };
    Ok([amp, center, width, base])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_trace(a: f64, c: f64, w: f64, b: f64, n: usize, dt: f64) -> TimeTrace {
        let p: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                a * (-4.0 * LN_2 * ((t - c) / w).powi(2)).exp() + b
            })
            .collect();
        TimeTrace::uniform(0.0, dt, p, None).unwrap()
    }

    #[test]
    fn exact_gaussian_round_trip() {
        let tr = gaussian_trace(1.0, 10e-6, 9.4e-6, 0.0, 400, 0.1e-6);
        let fit = fit_gaussian(&tr).unwrap();
        assert!(fit.converged);
        assert!((fit.value("amplitude") - 1.0).abs() < 1e-8);
        assert!((fit.value("center") - 10e-6).abs() < 1e-8 * 10e-6);
        assert!((fit.value("fwhm") - 9.4e-6).abs() < 1e-8 * 9.4e-6);
        assert!(fit.value("baseline").abs() < 1e-8);
    }

    #[test]
    fn exact_lorentzian_round_trip() {
        let w = 2.0 * std::f64::consts::PI * 26e3;
        let det: Vec<f64> = (0..301).map(|k| (k as f64 - 150.0) * w / 20.0).collect();
        let vals: Vec<f64> = det.iter().map(|d| 0.55 * (w / 2.0).powi(2) / (d * d + (w / 2.0).powi(2)) + 0.05).collect();
        let s = Spectrum::new(det, vals, None).unwrap();
        let fit = fit_lorentzian(&s).unwrap();
        assert!(fit.converged);
        assert!((fit.value("fwhm") / w - 1.0).abs() < 1e-8);
        assert!((fit.value("amplitude") / 0.55 - 1.0).abs() < 1e-8);
        assert!((fit.value("baseline") / 0.05 - 1.0).abs() < 1e-8);
        assert!(fit.value("center").abs() < 1e-8 * w);
    }

    #[test]
    fn flat_data_is_degenerate() {
        let tr = TimeTrace::uniform(0.0, 1.0, vec![0.3; 50], None).unwrap();
        assert!(matches!(fit_gaussian(&tr), Err(Error::Degenerate(_))));
        let s = Spectrum::new((0..50).map(|k| k as f64).collect(), vec![0.1; 50], None).unwrap();
        assert!(matches!(fit_lorentzian(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn two_pulses_fit_poorly() {
        let dt = 0.1e-6;
        let p: Vec<f64> = (0..600)
            .map(|k| {
                let t = k as f64 * dt;
                let g = |c: f64| (-4.0 * LN_2 * ((t - c) / 6e-6).powi(2)).exp();
                g(25e-6) + 0.9 * g(35e-6)
            })
            .collect();
        let sig = vec![0.01; p.len()];
        let tr = TimeTrace::uniform(0.0, dt, p, Some(sig)).unwrap();
        let fit = fit_gaussian(&tr).unwrap();
        assert!(!fit.converged || fit.chi2_reduced > 5.0, "{}", fit.chi2_reduced);
    }

    #[test]
    fn shift_and_scale_equivariance() {
        let tr = gaussian_trace(2.0, 12e-6, 5e-6, 0.1, 300, 0.1e-6);
        let base = fit_gaussian(&tr).unwrap();
        let shift = 3.3e-6;
        let times: Vec<f64> = tr.times().iter().map(|t| t + shift).collect();
        let shifted = TimeTrace::new(times, tr.powers().to_vec(), None).unwrap();
        let fs = fit_gaussian(&shifted).unwrap();
        assert!((fs.value("center") - base.value("center") - shift).abs() < 1e-9 * 5e-6);
        let scaled = TimeTrace::uniform(0.0, 0.1e-6, tr.powers().iter().map(|p| 7.5 * p).collect(), None).unwrap();
        let fk = fit_gaussian(&scaled).unwrap();
        assert!((fk.value("amplitude") / base.value("amplitude") - 7.5).abs() < 1e-9);
        assert!((fk.value("baseline") / base.value("baseline") - 7.5).abs() < 1e-9);
    }
}
