//! Semi-discrete Maxwell–Bloch model on the normalised length `z ∈ [0, 1]`.
//!
//! Atomic coherences `P`, `S` live at `nz` cell centres, the field `E` at the
//! `nz + 1` cell edges. Within a cell the field obeys
//! `E_{j+1} = E_j + i c h P_j` and the atoms see the midpoint field
//! `(E_j + E_{j+1}) / 2`. With this pairing the excitation
//! `h Σ (|P|² + |S|²)` changes exactly by the boundary flux difference
//! `|E_0|² − |E_nz|²` when both decay rates vanish.

use num_complex::Complex64;

use crate::model::EnsembleParams;

/// Coefficients of the three-level equations
///
/// ```text
/// ∂z E = i c P
/// ∂t P = −(Γp + iδ) P + i c E + i (Ωc/2) S
/// ∂t S = −(Γs + iδ) S + i (Ωc/2) P
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMedium {
    /// Light–matter coupling `c`, √(rad/s).
    pub coupling: f64,
    /// Optical coherence amplitude decay Γp, rad/s.
    pub decay_p: f64,
    /// Spin coherence amplitude decay Γs, rad/s.
    pub decay_s: f64,
    /// Probe detuning δ, rad/s.
    pub detuning: f64,
}

impl LambdaMedium {
    /// `c = √(η γ31)/2`, `Γp = γ31/2`, `Γs = γ21/2`; on resonance the
    /// control-free steady state then transmits `e^{−η}` in power.
    pub fn from_ensemble(ens: &EnsembleParams, detuning: f64) -> Self {
        Self {
            coupling: (ens.eta() * ens.gamma31()).sqrt() / 2.0,
            decay_p: ens.gamma31() / 2.0,
            decay_s: ens.gamma21() / 2.0,
            detuning,
        }
    }

    /// Steady-state amplitude transfer `E_nz / E_0` of the discretised
    /// medium for a constant control `rabi`.
    pub fn steady_state_ratio(&self, rabi: f64, nz: usize) -> Complex64 {
        let gp = Complex64::new(self.decay_p, self.detuning);
        let gs = Complex64::new(self.decay_s, self.detuning);
        let q = 0.25 * rabi * rabi;
        let den = gp * gs + q;
        // local response P = i c κ E_mid
        let kappa = if den.norm_sqr() == 0.0 { gp.inv() } else { gs / den };
        let h = 1.0 / nz as f64;
        let a = self.coupling * self.coupling * h * kappa;
        let cell = (1.0 - a / 2.0) / (1.0 + a / 2.0);
        cell.powu(nz as u32)
    }
}

/// Discretised field and coherences.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumState {
    /// Field at the `nz + 1` cell edges.
    pub e: Vec<Complex64>,
    /// Optical coherence per cell.
    pub p: Vec<Complex64>,
    /// Spin coherence per cell.
    pub s: Vec<Complex64>,
}

impl MediumState {
    pub fn empty(nz: usize) -> Self {
        Self {
            e: vec![Complex64::new(0.0, 0.0); nz + 1],
            p: vec![Complex64::new(0.0, 0.0); nz],
            s: vec![Complex64::new(0.0, 0.0); nz],
        }
    }

    pub fn nz(&self) -> usize {
        self.p.len()
    }

    /// Cell-centre positions on [0, 1].
    pub fn grid_z(&self) -> Vec<f64> {
        let nz = self.nz();
        (0..nz).map(|j| (j as f64 + 0.5) / nz as f64).collect()
    }

    /// `∫ (|P|² + |S|²) dz`, in the units of the boundary flux × time.
    pub fn excitation(&self) -> f64 {
        let h = 1.0 / self.nz() as f64;
        h * self.p.iter().chain(&self.s).map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn output(&self) -> Complex64 {
        self.e[self.e.len() - 1]
    }
}

/// Classical RK4 stepper with the field re-solved along z at every stage.
pub struct Stepper {
    medium: LambdaMedium,
    nz: usize,
    kp: [Vec<Complex64>; 4],
    ks: [Vec<Complex64>; 4],
    tp: Vec<Complex64>,
    ts: Vec<Complex64>,
}

impl Stepper {
    pub fn new(medium: LambdaMedium, nz: usize) -> Self {
        let z = || vec![Complex64::new(0.0, 0.0); nz];
        Self {
            medium,
            nz,
            kp: [z(), z(), z(), z()],
            ks: [z(), z(), z(), z()],
            tp: z(),
            ts: z(),
        }
    }

    pub fn medium(&self) -> &LambdaMedium {
        &self.medium
    }

    fn derivs(
        medium: &LambdaMedium,
        p: &[Complex64],
        s: &[Complex64],
        e_in: Complex64,
        rabi: f64,
        dp: &mut [Complex64],
        ds: &mut [Complex64],
    ) {
        let nz = p.len();
        let h = 1.0 / nz as f64;
        let i = Complex64::i();
        let c = medium.coupling;
        let gp = Complex64::new(medium.decay_p, medium.detuning);
        let gs = Complex64::new(medium.decay_s, medium.detuning);
        let half = 0.5 * rabi;
        let mut e = e_in;
        for j in 0..nz {
            let step = i * (c * h) * p[j];
            let mid = e + 0.5 * step;
            dp[j] = -gp * p[j] + i * (c * mid + half * s[j]);
            ds[j] = -gs * s[j] + i * half * p[j];
            e += step;
        }
    }

    /// Recomputes the edge fields of `state` for boundary value `e_in`.
    pub fn solve_field(&self, state: &mut MediumState, e_in: Complex64) {
        let h = 1.0 / self.nz as f64;
        let ic = Complex64::i() * (self.medium.coupling * h);
        state.e[0] = e_in;
        for j in 0..self.nz {
            state.e[j + 1] = state.e[j] + ic * state.p[j];
        }
    }

    /// Advances `state` from `t` to `t + dt` and refreshes its field.
    pub fn step<E, R>(&mut self, state: &mut MediumState, t: f64, dt: f64, e_in: &E, rabi: &R)
    where
        E: Fn(f64) -> Complex64,
        R: Fn(f64) -> f64,
    {
        let m = self.medium;
        let (e0, e_mid, e1) = (e_in(t), e_in(t + 0.5 * dt), e_in(t + dt));
        let (r0, r_mid, r1) = (rabi(t), rabi(t + 0.5 * dt), rabi(t + dt));
        let [k1p, k2p, k3p, k4p] = &mut self.kp;
        let [k1s, k2s, k3s, k4s] = &mut self.ks;

        Self::derivs(&m, &state.p, &state.s, e0, r0, k1p, k1s);
        for j in 0..self.nz {
            self.tp[j] = state.p[j] + 0.5 * dt * k1p[j];
            self.ts[j] = state.s[j] + 0.5 * dt * k1s[j];
        }
        Self::derivs(&m, &self.tp, &self.ts, e_mid, r_mid, k2p, k2s);
        for j in 0..self.nz {
            self.tp[j] = state.p[j] + 0.5 * dt * k2p[j];
            self.ts[j] = state.s[j] + 0.5 * dt * k2s[j];
        }
        Self::derivs(&m, &self.tp, &self.ts, e_mid, r_mid, k3p, k3s);
        for j in 0..self.nz {
            self.tp[j] = state.p[j] + dt * k3p[j];
            self.ts[j] = state.s[j] + dt * k3s[j];
        }
        Self::derivs(&m, &self.tp, &self.ts, e1, r1, k4p, k4s);
        let w = dt / 6.0;
        for j in 0..self.nz {
            state.p[j] += w * (k1p[j] + 2.0 * k2p[j] + 2.0 * k3p[j] + k4p[j]);
            state.s[j] += w * (k1s[j] + 2.0 * k2s[j] + 2.0 * k3s[j] + k4s[j]);
        }
        self.solve_field(state, e1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_steady_state_transmits_exp_minus_eta() {
        let ens = EnsembleParams::from_hz(2.4, 6.4e6, 0.0, 1e-3).unwrap();
        let m = LambdaMedium::from_ensemble(&ens, 0.0);
        let r = m.steady_state_ratio(0.0, 400);
        assert!((r.norm_sqr() / (-2.4f64).exp() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn dark_state_is_transparent() {
        let ens = EnsembleParams::from_hz(5.0, 6.4e6, 0.0, 1e-3).unwrap();
        let m = LambdaMedium::from_ensemble(&ens, 0.0);
        assert_eq!(m.steady_state_ratio(1e7, 100), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cw_drive_relaxes_to_steady_state() {
        let ens = EnsembleParams::from_hz(3.0, 6.4e6, 200e3, 1e-3).unwrap();
        let rabi = std::f64::consts::TAU * 3e6;
        for &det in &[0.0, 2e6, -7e6] {
            let m = LambdaMedium::from_ensemble(&ens, det);
            let nz = 100;
            let mut st = MediumState::empty(nz);
            let mut stepper = Stepper::new(m, nz);
            let dt = 0.05 / ens.gamma31();
            let one = |_t: f64| Complex64::new(1.0, 0.0);
            let r = |_t: f64| rabi;
            stepper.solve_field(&mut st, one(0.0));
            let steps = (30e-6 / dt) as usize;
            for k in 0..steps {
                stepper.step(&mut st, k as f64 * dt, dt, &one, &r);
            }
            let expect = m.steady_state_ratio(rabi, nz);
            assert!((st.output() - expect).norm() < 1e-6, "det {det}: {} vs {}", st.output(), expect);
        }
    }
}
