//! Levenberg–Marquardt driver with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Damping schedule and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iter: usize,
    pub lambda0: f64,
    /// Multiplier applied to λ after an accepted step.
    pub lambda_down: f64,
    /// Multiplier applied to λ after a rejected step.
    pub lambda_up: f64,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative χ² change tolerance.
    pub ftol: f64,
    /// Relative finite-difference step for the Jacobian.
    pub jacobian_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            lambda0: 1e-3,
            lambda_down: 0.3,
            lambda_up: 3.0,
            xtol: 1e-8,
            ftol: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared (weighted) residuals at `params`.
    pub chi2: f64,
    pub n_residuals: usize,
    pub n_iter: usize,
    pub converged: bool,
    /// Inverse of JᵀJ at the optimum; `None` when singular.
    pub covariance: Option<DMatrix<f64>>,
    /// χ² after the initial guess and after every accepted step.
    pub chi2_history: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian; one-sided where a probe point fails.
/// `scales[i]` is the magnitude below which the step stops shrinking.
pub(crate) fn numeric_jacobian<F>(
    f: &F,
    p: &[f64],
    r0: &[f64],
    rel_step: f64,
    scales: &[f64],
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    let m = r0.len();
    let cols: Vec<Result<Vec<f64>>> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let h = rel_step * p[i].abs().max(scales[i]);
            let mut up = p.to_vec();
            up[i] += h;
            let mut dn = p.to_vec();
            dn[i] -= h;
            match (f(&up), f(&dn)) {
                (Some(a), Some(b)) => Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()),
                (Some(a), None) => Ok(a.iter().zip(r0).map(|(x, y)| (x - y) / h).collect()),
                (None, Some(b)) => Ok(r0.iter().zip(&b).map(|(x, y)| (x - y) / h).collect()),
                (None, None) => Err(Error::Numerical(format!(
                    "residuals undefined on both sides of parameter {i}"
                ))),
            }
        })
        .collect();
    let mut jac = DMatrix::zeros(m, p.len());
    for (i, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (k, v) in col.into_iter().enumerate() {
            jac[(k, i)] = v;
        }
    }
    Ok(jac)
}

/// Minimises `Σ r_i(p)²`. The residual closure returns `None` where the
/// model cannot be evaluated; such trial points are rejected.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], scales: &[f64], cfg: &LmConfig) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>> + Sync,
{
    assert_eq!(p0.len(), scales.len());
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = f(&p).ok_or_else(|| Error::Numerical("residuals undefined at the initial guess".into()))?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite residuals at the initial guess".into()));
    }
    let m = r.len();
    let mut chi2 = sum_sq(&r);
    let mut history = vec![chi2];
    let mut lambda = cfg.lambda0;
    let mut converged = chi2 == 0.0;
    let mut n_iter = 0;
    let mut jac = numeric_jacobian(&f, &p, &r, cfg.jacobian_step, scales)?;

    'outer: while !converged && n_iter < cfg.max_iter {
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        loop {
            n_iter += 1;
            let mut damped = a.clone();
            for i in 0..n {
                let d = if a[(i, i)] > 0.0 { a[(i, i)] } else { 1.0 };
                damped[(i, i)] += lambda * d;
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= cfg.lambda_up;
                    if n_iter >= cfg.max_iter || lambda > 1e30 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let pnorm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let snorm = step.norm();
            let small_step = snorm <= cfg.xtol * (pnorm + cfg.xtol);
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let accepted = match f(&trial) {
                Some(rt) if rt.iter().all(|v| v.is_finite()) => {
                    let c = sum_sq(&rt);
                    if c < chi2 {
                        let rel = (chi2 - c) / chi2;
                        p = trial;
                        r = rt;
                        chi2 = c;
                        history.push(chi2);
                        lambda *= cfg.lambda_down;
                        if small_step || rel < cfg.ftol || chi2 == 0.0 {
                            converged = true;
                        }
                        true
                    } else {
                        false
                    }
                }
                _ => false,
            };
            if accepted {
                if !converged {
                    jac = numeric_jacobian(&f, &p, &r, cfg.jacobian_step, scales)?;
                }
                break;
            }
            // rejected: a vanishing step means we already sit at the minimum
            if small_step {
                converged = true;
                break 'outer;
            }
            lambda *= cfg.lambda_up;
            if n_iter >= cfg.max_iter || lambda > 1e30 {
                break 'outer;
            }
        }
    }

    let jac = numeric_jacobian(&f, &p, &r, cfg.jacobian_step, scales)?;
    let covariance = (jac.transpose() * &jac).try_inverse();
    Ok(LmOutcome {
        params: p,
        chi2,
        n_residuals: m,
        n_iter,
        converged,
        covariance,
        chi2_history: history,
    })
}
