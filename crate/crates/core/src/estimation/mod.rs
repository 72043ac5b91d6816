//! Nonlinear least-squares fitting: line shapes, full EIT spectra and the
//! simulation-based global slow-light fit.

mod eit;
mod lineshape;
pub mod lm;
mod slowlight;

pub use eit::fit_eit_spectrum;
pub use lineshape::{fit_gaussian, fit_lorentzian, fit_peak, PeakShape};
pub use lm::{levenberg_marquardt, LmConfig, LmOutcome};
pub use slowlight::{
    fit_slowlight_global, slowlight_forward, SlowLightDataset, SlowLightFitConfig, SlowLightRow,
    Weighting,
};

/// One fitted parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParam {
    pub name: &'static str,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub n_iter: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Value of the named parameter. Panics on an unknown name.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit has no parameter named {name}"))
            .value
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("fit has no parameter named {name}"))
            .std_error
    }
}

/// Standard errors from `cov`, optionally scaled by √χ²_red.
pub(crate) fn std_errors(out: &LmOutcome, scale_by_chi2: bool) -> Vec<f64> {
    let n = out.params.len();
    let dof = out.n_residuals.saturating_sub(n).max(1) as f64;
    let s = if scale_by_chi2 { (out.chi2 / dof).sqrt() } else { 1.0 };
    match &out.covariance {
        Some(c) => (0..n)
            .map(|i| {
                let v = c[(i, i)];
                if v >= 0.0 && v.is_finite() {
                    v.sqrt() * s
                } else {
                    f64::INFINITY
                }
            })
            .collect(),
        None => vec![f64::INFINITY; n],
    }
}

pub(crate) fn reduced_chi2(out: &LmOutcome) -> f64 {
    let dof = out.n_residuals.saturating_sub(out.params.len()).max(1) as f64;
    out.chi2 / dof
}
