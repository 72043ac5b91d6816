//! Time-domain storage and retrieval of probe pulses.
//!
//! The field equation carries no time derivative (the medium transit time is
//! negligible), so at every Runge–Kutta stage the field is re-solved along
//! `z` from the input boundary while the coherences are advanced in time.

mod medium;
mod schedule;

use num_complex::Complex64;
use rayon::prelude::*;

pub use medium::{LambdaMedium, MediumState, Stepper};
pub use schedule::ControlSchedule;

use crate::error::{config, Error, Result};
use crate::estimation::fit_gaussian;
use crate::model::{ControlField, EnsembleParams, GaussianPulse};
use crate::propagation::{group_delay_smallsignal, trapezoid, TimeTrace};
use crate::spectra::ComplexResponse;

/// Default ramp-down duration of the storage schedule, s.
pub const DEFAULT_RAMPDOWN: f64 = 0.6e-6;
/// Default ramp-up duration of the storage schedule, s.
pub const DEFAULT_RAMPUP: f64 = 0.2e-6;
/// Default hold time with the control off, s.
pub const DEFAULT_HOLD: f64 = 1.0e-6;

/// Discretisation of the time-domain model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumConfig {
    /// Number of cells along the medium.
    pub nz: usize,
    /// Time step in units of 1/γ31.
    pub dt_gamma31: f64,
    /// Simulation start relative to the pulse centre, in pulse FWHMs (negative).
    pub lead_fwhm: f64,
    /// Simulated time after the last schedule breakpoint (or the pulse), s.
    pub tail: f64,
}

impl Default for NumConfig {
    fn default() -> Self {
        Self { nz: 100, dt_gamma31: 0.05, lead_fwhm: 4.0, tail: 3e-6 }
    }
}

impl NumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nz < 100 {
            return Err(config(format!("num.nz must be >= 100, got {}", self.nz)));
        }
        if !(self.dt_gamma31 > 0.0 && self.dt_gamma31 <= 0.05) {
            return Err(config(format!(
                "num.dt_gamma31 must lie in (0, 0.05], got {}",
                self.dt_gamma31
            )));
        }
        if !(self.lead_fwhm >= 3.0) {
            return Err(config(format!(
                "num.lead_fwhm must be >= 3 so the window covers the pulse, got {}",
                self.lead_fwhm
            )));
        }
        if !(self.tail.is_finite() && self.tail > 0.0) {
            return Err(config(format!("num.tail must be > 0, got {}", self.tail)));
        }
        Ok(())
    }

    /// Halved time step and doubled cell count.
    pub fn refined(&self) -> Self {
        Self { nz: self.nz * 2, dt_gamma31: self.dt_gamma31 / 2.0, ..*self }
    }
}

/// Storage schedule whose ramp-down starts when the pulse centre reaches the
/// middle of the medium, as estimated from the small-signal group delay.
pub fn default_schedule(pulse: &GaussianPulse, ens: &EnsembleParams, omega0: f64) -> Result<ControlSchedule> {
    let ctrl = ControlField::from_rabi(omega0)?;
    let delay = group_delay_smallsignal(ens, &ctrl)?.delay;
    ControlSchedule::new(
        omega0,
        pulse.center() + 0.5 * delay,
        DEFAULT_RAMPDOWN,
        DEFAULT_HOLD,
        DEFAULT_RAMPUP,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageResult {
    /// Power leaving the medium.
    pub output_trace: TimeTrace,
    /// Power entering the medium, on the same grid.
    pub input_trace: TimeTrace,
    /// Output energy up to the end of the ramp-down, J.
    pub leak_energy: f64,
    /// Output energy from the start of the ramp-up onward, J.
    pub retrieved_energy: f64,
    pub input_energy: f64,
    /// Excitation left in the medium at the end of the run, J.
    pub residual_excitation: f64,
    pub efficiency: f64,
    /// Retrieved-pulse centre minus input-pulse centre; `None` for a constant control.
    pub retrieval_delay: Option<f64>,
}

impl StorageResult {
    pub fn leak_fraction(&self) -> f64 {
        self.leak_energy / self.input_energy
    }
}

fn integrate_window(trace: &TimeTrace, t0: f64, t1: f64) -> f64 {
    let samples: Vec<f64> = trace
        .times()
        .iter()
        .zip(trace.powers())
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(_, p)| *p)
        .collect();
    trapezoid(&samples, trace.dt())
}

/// Runs the medium with an arbitrary lossless-or-lossy coefficient set. The
/// returned traces hold `|E(0,t)|²` and `|E(1,t)|²`.
pub fn run_medium<R>(
    medium: LambdaMedium,
    pulse: &GaussianPulse,
    rabi: R,
    nz: usize,
    t_start: f64,
    t_end: f64,
    dt: f64,
) -> Result<(TimeTrace, TimeTrace, MediumState)>
where
    R: Fn(f64) -> f64,
{
    let steps = ((t_end - t_start) / dt).ceil() as usize;
    if steps < 2 {
        return Err(config("simulation window shorter than two time steps"));
    }
    let e_in = |t: f64| Complex64::new(pulse.envelope_at(t), 0.0);
    let mut state = MediumState::empty(nz);
    let mut stepper = Stepper::new(medium, nz);
    stepper.solve_field(&mut state, e_in(t_start));
    let mut out = Vec::with_capacity(steps + 1);
    let mut inp = Vec::with_capacity(steps + 1);
    out.push(state.output().norm_sqr());
    inp.push(pulse.power_at(t_start));
    for k in 0..steps {
        let t = t_start + k as f64 * dt;
        stepper.step(&mut state, t, dt, &e_in, &rabi);
        let o = state.output().norm_sqr();
        if !o.is_finite() {
            return Err(Error::Numerical(format!(
                "output field became non-finite at t = {:.6e} s (step {k}); reduce num.dt_gamma31",
                t + dt
            )));
        }
        out.push(o);
        inp.push(pulse.power_at(t + dt));
    }
    let output = TimeTrace::uniform(t_start, dt, out, None)?;
    let input = TimeTrace::uniform(t_start, dt, inp, None)?;
    Ok((input, output, state))
}

/// Simulates storage and retrieval of a resonant pulse.
pub fn simulate_storage(
    pulse: &GaussianPulse,
    ens: &EnsembleParams,
    schedule: &ControlSchedule,
    num: &NumConfig,
) -> Result<StorageResult> {
    num.validate()?;
    if pulse.carrier_detuning() != 0.0 {
        return Err(config("storage runs require a resonant carrier (pulse.detuning = 0)"));
    }
    let dt = num.dt_gamma31 / ens.gamma31();
    let t_start = pulse.center() - num.lead_fwhm * pulse.fwhm();
    let pulse_end = pulse.center() + num.lead_fwhm * pulse.fwhm();
    let t_end = if schedule.is_constant() {
        pulse_end + num.tail
    } else {
        schedule.rampup_end().max(pulse_end) + num.tail
    };
    let medium = LambdaMedium::from_ensemble(ens, 0.0);
    let (input, output, state) = run_medium(medium, pulse, |t| schedule.rabi_at(t), num.nz, t_start, t_end, dt)?;

    let input_energy = input.integral();
    if !(input_energy > 0.0) {
        return Err(Error::Degenerate("input pulse carries no energy".into()));
    }
    let (leak_energy, retrieved_energy, retrieval_delay) = if schedule.is_constant() {
        (output.integral(), 0.0, None)
    } else {
        let leak = integrate_window(&output, t_start, schedule.rampdown_end());
        let retrieved = integrate_window(&output, schedule.rampup_start(), t_end);
        let delay = retrieval_center(&output, schedule.rampup_start(), t_end).map(|c| c - pulse.center());
        (leak, retrieved, delay)
    };
    Ok(StorageResult {
        output_trace: output,
        input_trace: input,
        leak_energy,
        retrieved_energy,
        input_energy,
        residual_excitation: state.excitation(),
        efficiency: retrieved_energy / input_energy,
        retrieval_delay,
    })
}

/// Gaussian-fit centre of the retrieved peak, centroid as fallback.
fn retrieval_center(output: &TimeTrace, t0: f64, t1: f64) -> Option<f64> {
    let win = output.window(t0, t1).ok()?;
    if let Ok(fit) = fit_gaussian(&win) {
        let c = fit.value("center");
        if fit.converged && fit.value("amplitude") > 0.0 && c >= t0 && c <= t1 {
            return Some(c);
        }
    }
    let e: f64 = win.powers().iter().sum();
    (e > 0.0).then(|| win.times().iter().zip(win.powers()).map(|(t, p)| t * p).sum::<f64>() / e)
}

/// Steady-state amplitude transfer of the time-domain model on a detuning grid.
pub fn steady_state_transfer(ens: &EnsembleParams, ctrl: &ControlField, deltas: &[f64], nz: usize) -> ComplexResponse {
    ComplexResponse {
        detunings: deltas.to_vec(),
        h_values: deltas
            .iter()
            .map(|&d| LambdaMedium::from_ensemble(ens, d).steady_state_ratio(ctrl.rabi(), nz))
            .collect(),
    }
}

/// Efficiencies relative to a baseline schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    pub baseline: f64,
    /// Baseline schedule with γ21 = 0.
    pub no_decoherence: f64,
    /// Baseline schedule with omega0 × 4, ramp-down shifted by the change in
    /// half the small-signal group delay.
    pub boosted_control: f64,
    /// Best schedule of the scan.
    pub best_ramp: f64,
}

impl LossBudget {
    pub fn decoherence_gain(&self) -> f64 {
        self.no_decoherence / self.baseline
    }

    pub fn control_gain(&self) -> f64 {
        self.boosted_control / self.baseline
    }

    pub fn ramp_gain(&self) -> f64 {
        self.best_ramp / self.baseline
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyScan {
    pub rows: Vec<(ControlSchedule, f64)>,
    pub best_index: usize,
    pub budget: LossBudget,
}

impl EfficiencyScan {
    pub fn best(&self) -> (ControlSchedule, f64) {
        self.rows[self.best_index]
    }
}

fn boosted_schedule(baseline: &ControlSchedule, ens: &EnsembleParams, factor: f64) -> Result<ControlSchedule> {
    let boosted = baseline.with_omega0(factor * baseline.omega0)?;
    if baseline.is_constant() || baseline.omega0 == 0.0 || ens.eta() == 0.0 {
        return Ok(boosted);
    }
    let d0 = group_delay_smallsignal(ens, &ControlField::from_rabi(baseline.omega0)?)?.delay;
    let d1 = d0 / (factor * factor);
    ControlSchedule::new(
        boosted.omega0,
        baseline.t_rampdown_start + 0.5 * (d1 - d0),
        baseline.rampdown_duration,
        baseline.hold_duration,
        baseline.rampup_duration,
    )
}

/// Evaluates every schedule of `grid` in parallel and builds the loss budget
/// against `baseline`.
pub fn efficiency_scan(
    pulse: &GaussianPulse,
    ens: &EnsembleParams,
    baseline: &ControlSchedule,
    grid: &[ControlSchedule],
    num: &NumConfig,
) -> Result<EfficiencyScan> {
    if grid.is_empty() {
        return Err(config("schedule grid is empty"));
    }
    let effs: Vec<f64> = grid
        .par_iter()
        .map(|s| simulate_storage(pulse, ens, s, num).map(|r| r.efficiency))
        .collect::<Result<_>>()?;
    let rows: Vec<(ControlSchedule, f64)> = grid.iter().copied().zip(effs).collect();
    let best_index = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let no_dec = ens.with_gamma21(0.0)?;
    let boosted = boosted_schedule(baseline, ens, 4.0)?;
    let variants = [(*ens, *baseline), (no_dec, *baseline), (*ens, boosted)];
    let effs: Vec<f64> = variants
        .par_iter()
        .map(|(e, s)| simulate_storage(pulse, e, s, num).map(|r| r.efficiency))
        .collect::<Result<_>>()?;
    let budget = LossBudget {
        baseline: effs[0],
        no_decoherence: effs[1],
        boosted_control: effs[2],
        best_ramp: rows[best_index].1,
    };
    Ok(EfficiencyScan { rows, best_index, budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hz_to_angular;

    #[test]
    fn num_config_bounds() {
        assert!(NumConfig::default().validate().is_ok());
        assert!(NumConfig { nz: 50, ..NumConfig::default() }.validate().is_err());
        let e = NumConfig { dt_gamma31: 0.1, ..NumConfig::default() }.validate().unwrap_err();
        assert!(e.to_string().contains("dt_gamma31"));
    }

    #[test]
    fn detuned_carrier_rejected() {
        let ens = EnsembleParams::from_hz(2.4, 6.4e6, 20e3, 1e-3).unwrap();
        let p = GaussianPulse::new(1e-12, 0.2e-6, 0.0, 1e5, 852e-9).unwrap();
        let s = ControlSchedule::constant(hz_to_angular(2.24e6)).unwrap();
        assert!(simulate_storage(&p, &ens, &s, &NumConfig::default()).is_err());
    }

    #[test]
    fn empty_medium_passes_pulse_unchanged() {
        let ens = EnsembleParams::from_hz(0.0, 6.4e6, 20e3, 1e-3).unwrap();
        let p = GaussianPulse::resonant(1e-12, 0.2e-6, 0.0).unwrap();
        let s = ControlSchedule::constant(hz_to_angular(2.24e6)).unwrap();
        let r = simulate_storage(&p, &ens, &s, &NumConfig::default()).unwrap();
        for (a, b) in r.input_trace.powers().iter().zip(r.output_trace.powers()) {
            assert!((a - b).abs() < 1e-15 * p.peak_power());
        }
        assert!((r.leak_fraction() - 1.0).abs() < 1e-12);
    }
}
