use crate::error::{domain, Result};

/// Piecewise-linear control Rabi frequency: `omega0` until the ramp-down
/// starts, linear ramp to zero, hold at zero, linear ramp back to `omega0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSchedule {
    pub omega0: f64,
    pub t_rampdown_start: f64,
    pub rampdown_duration: f64,
    pub hold_duration: f64,
    pub rampup_duration: f64,
}

impl ControlSchedule {
    pub fn new(
        omega0: f64,
        t_rampdown_start: f64,
        rampdown_duration: f64,
        hold_duration: f64,
        rampup_duration: f64,
    ) -> Result<Self> {
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(domain(format!("schedule omega0 must be >= 0, got {omega0}")));
        }
        for (name, v) in [
            ("rampdown_duration", rampdown_duration),
            ("hold_duration", hold_duration),
            ("rampup_duration", rampup_duration),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(domain(format!("schedule {name} must be >= 0, got {v}")));
            }
        }
        if t_rampdown_start.is_nan() || t_rampdown_start == f64::NEG_INFINITY {
            return Err(domain("schedule ramp-down start must be a time or +infinity"));
        }
        Ok(Self { omega0, t_rampdown_start, rampdown_duration, hold_duration, rampup_duration })
    }

    /// Control held at `omega0` forever.
    pub fn constant(omega0: f64) -> Result<Self> {
        Self::new(omega0, f64::INFINITY, 0.0, 0.0, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.t_rampdown_start.is_infinite()
    }

    pub fn rampdown_end(&self) -> f64 {
        self.t_rampdown_start + self.rampdown_duration
    }

    pub fn rampup_start(&self) -> f64 {
        self.rampdown_end() + self.hold_duration
    }

    pub fn rampup_end(&self) -> f64 {
        self.rampup_start() + self.rampup_duration
    }

    pub fn with_omega0(&self, omega0: f64) -> Result<Self> {
        Self::new(omega0, self.t_rampdown_start, self.rampdown_duration, self.hold_duration, self.rampup_duration)
    }

    /// Ωc(t).
    pub fn rabi_at(&self, t: f64) -> f64 {
        if t <= self.t_rampdown_start {
            return self.omega0;
        }
        let down_end = self.rampdown_end();
        if t < down_end {
            return self.omega0 * (1.0 - (t - self.t_rampdown_start) / self.rampdown_duration);
        }
        let up_start = self.rampup_start();
        if t <= up_start {
            return 0.0;
        }
        let up_end = self.rampup_end();
        if t < up_end {
            return self.omega0 * (t - up_start) / self.rampup_duration;
        }
        self.omega0
    }
}
