//! Photon-counting detector model.
//!
//! Counts are Poisson distributed with mean `n_runs · ∫ rate dt` over each
//! bin; summing independent runs is equivalent to a single Poisson draw with
//! the summed mean. Randomness comes from ChaCha8 (a counter-based stream
//! cipher generator): the seed selects the key, and bin `k` of a trace draws
//! from stream `k`, so output is reproducible and independent of threading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{config, data, domain, Result};
use crate::model::photon_energy;
use crate::propagation::TimeTrace;
use crate::spectra::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub quantum_efficiency: f64,
    /// Dark count rate, counts/s.
    pub dark_rate: f64,
    pub seed: u64,
}

impl DetectorConfig {
    pub fn new(quantum_efficiency: f64, dark_rate: f64, seed: u64) -> Result<Self> {
        if !(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0) {
            return Err(domain(format!(
                "quantum efficiency must lie in (0, 1], got {quantum_efficiency}"
            )));
        }
        if !(dark_rate.is_finite() && dark_rate >= 0.0) {
            return Err(domain(format!("dark rate must be >= 0, got {dark_rate}")));
        }
        Ok(Self { quantum_efficiency, dark_rate, seed })
    }

    /// Silicon SPCM at 852 nm, no dark counts.
    pub fn with_seed(seed: u64) -> Self {
        Self { quantum_efficiency: 0.43, dark_rate: 0.0, seed }
    }
}

/// Counts summed over `n_runs` repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTrace {
    times: Vec<f64>,
    counts: Vec<u64>,
    bin: f64,
    n_runs: u64,
}

impl CountTrace {
    pub fn new(times: Vec<f64>, counts: Vec<u64>, bin: f64, n_runs: u64) -> Result<Self> {
        if times.len() != counts.len() {
            return Err(data("count trace times and counts differ in length"));
        }
        if !(bin.is_finite() && bin > 0.0) {
            return Err(data(format!("bin width must be > 0, got {bin}")));
        }
        if n_runs == 0 {
            return Err(data("n_runs must be >= 1"));
        }
        Ok(Self { times, counts, bin, n_runs })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bin(&self) -> f64 {
        self.bin
    }

    pub fn n_runs(&self) -> u64 {
        self.n_runs
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Mean counts per run and bin, with Poisson standard deviations.
    pub fn per_run(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_runs as f64;
        let mean = self.counts.iter().map(|&c| c as f64 / n).collect();
        let sd = self.counts.iter().map(|&c| (c as f64).sqrt() / n).collect();
        (mean, sd)
    }

    /// Per-run mean count rate (counts/s per bin) as a trace with Poisson sigmas.
    pub fn to_rate_trace(&self) -> Result<TimeTrace> {
        let (m, s) = self.per_run();
        TimeTrace::new(
            self.times.clone(),
            m.iter().map(|v| v / self.bin).collect(),
            Some(s.iter().map(|v| v / self.bin).collect()),
        )
    }
}

/// Detected count rate `qe·P/E_photon + dark_rate`.
pub fn expected_rate(power: f64, wavelength: f64, det: &DetectorConfig) -> Result<f64> {
    if !(power.is_finite() && power >= 0.0) {
        return Err(domain(format!("power must be >= 0, got {power}")));
    }
    Ok(det.quantum_efficiency * power / photon_energy(wavelength)? + det.dark_rate)
}

/// Bins a power trace into photon counts accumulated over `n_runs` runs.
///
/// `bin` must be at least the trace spacing; bins are integrated with the
/// trapezoidal rule over the samples they contain (linear interpolation at
/// partial edges).
pub fn simulate_counts(
    trace: &TimeTrace,
    wavelength: f64,
    det: &DetectorConfig,
    bin: f64,
    n_runs: u64,
) -> Result<CountTrace> {
    let dt = trace.dt();
    if !(bin.is_finite() && bin >= dt * (1.0 - 1e-9)) {
        return Err(config(format!("bin width {bin} is finer than the trace spacing {dt}")));
    }
    if n_runs == 0 {
        return Err(config("n_runs must be >= 1"));
    }
    let t0 = trace.times()[0];
    let span = dt * (trace.len() - 1) as f64;
    let n_bins = ((span / bin) * (1.0 + 1e-12)).floor() as usize;
    if n_bins == 0 {
        return Err(config("trace is shorter than one bin"));
    }
    let rates: Vec<f64> = trace
        .powers()
        .iter()
        .map(|&p| expected_rate(p.max(0.0), wavelength, det))
        .collect::<Result<_>>()?;
    let cumulative = cumulative_trapezoid(&rates, dt);
    let integral_to = |t: f64| -> f64 {
        let x = ((t - t0) / dt).clamp(0.0, (rates.len() - 1) as f64);
        let k = (x.floor() as usize).min(rates.len() - 2);
        let f = x - k as f64;
        // exact integral of the linear interpolant over the partial interval
        let r_at = rates[k] + f * (rates[k + 1] - rates[k]);
        cumulative[k] + 0.5 * f * dt * (rates[k] + r_at)
    };
    let mut times = Vec::with_capacity(n_bins);
    let mut counts = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let a = t0 + b as f64 * bin;
        let mean = n_runs as f64 * (integral_to(a + bin) - integral_to(a)).max(0.0);
        times.push(a + 0.5 * bin);
        counts.push(draw_poisson(mean, det.seed, b as u64));
    }
    CountTrace::new(times, counts, bin, n_runs)
}

/// Poisson counts with the given expected values, one substream per index.
pub fn poisson_counts(means: &[f64], seed: u64) -> Vec<u64> {
    means.iter().enumerate().map(|(k, &m)| draw_poisson(m, seed, k as u64)).collect()
}

fn draw_poisson(mean: f64, seed: u64, stream: u64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(&mut rng) as u64
}

fn cumulative_trapezoid(y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Pointwise probe/reference ratio with Poisson error bars.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// False where the reference bin is empty.
    pub valid: Vec<bool>,
}

impl TransmissionSeries {
    /// Valid points mapped onto detunings (one per bin).
    pub fn to_spectrum(&self, detunings: &[f64]) -> Result<Spectrum> {
        if detunings.len() != self.values.len() {
            return Err(data("detuning grid does not match the number of bins"));
        }
        let idx: Vec<usize> = (0..self.values.len()).filter(|&i| self.valid[i]).collect();
        Spectrum::new(
            idx.iter().map(|&i| detunings[i]).collect(),
            idx.iter().map(|&i| self.values[i]).collect(),
            Some(idx.iter().map(|&i| self.sigmas[i]).collect()),
        )
    }

    /// Valid points as a time trace with sigmas.
    pub fn to_trace(&self) -> Result<TimeTrace> {
        if self.valid.iter().any(|v| !v) {
            return Err(data("series contains invalid bins; filter them before building a trace"));
        }
        TimeTrace::new(self.times.clone(), self.values.clone(), Some(self.sigmas.clone()))
    }
}

/// Transmission `T = Np/Nr` (normalised per run) with
/// `σ_T = T·√(1/Np + 1/Nr)`. Bins with `Np = 0` get `σ_T = 1/Nr`, the
/// one-count resolution; bins with `Nr = 0` are marked invalid.
pub fn transmission_from_counts(probe: &CountTrace, reference: &CountTrace) -> Result<TransmissionSeries> {
    if probe.len() != reference.len() {
        return Err(data("probe and reference have different numbers of bins"));
    }
    if (probe.bin() - reference.bin()).abs() > 1e-9 * probe.bin() {
        return Err(data("probe and reference bin widths differ"));
    }
    let norm = reference.n_runs() as f64 / probe.n_runs() as f64;
    let mut values = Vec::with_capacity(probe.len());
    let mut sigmas = Vec::with_capacity(probe.len());
    let mut valid = Vec::with_capacity(probe.len());
    for (&np, &nr) in probe.counts().iter().zip(reference.counts()) {
        if nr == 0 {
            values.push(0.0);
            sigmas.push(0.0);
            valid.push(false);
            continue;
        }
        let (npf, nrf) = (np as f64, nr as f64);
        let t = npf / nrf * norm;
        let s = if np == 0 { norm / nrf } else { t * (1.0 / npf + 1.0 / nrf).sqrt() };
        values.push(t);
        sigmas.push(s);
        valid.push(true);
    }
    Ok(TransmissionSeries { times: probe.times().to_vec(), values, sigmas, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CS_D2_WAVELENGTH;

    fn ideal(seed: u64) -> DetectorConfig {
        DetectorConfig::new(1.0, 0.0, seed).unwrap()
    }

    #[test]
    fn rate_examples() {
        let r = expected_rate(2.9e-12, CS_D2_WAVELENGTH, &ideal(0)).unwrap();
        assert!((r / 1.244e7 - 1.0).abs() < 1e-3, "{r}");
        let dark = DetectorConfig::new(1.0, 100.0, 0).unwrap();
        assert_eq!(expected_rate(0.0, CS_D2_WAVELENGTH, &dark).unwrap(), 100.0);
        let half = DetectorConfig::new(0.5, 0.0, 0).unwrap();
        let rh = expected_rate(2.9e-12, CS_D2_WAVELENGTH, &half).unwrap();
        assert_eq!(rh, r / 2.0);
    }

    #[test]
    fn zero_power_gives_zero_counts() {
        let tr = TimeTrace::uniform(0.0, 0.1e-6, vec![0.0; 1000], None).unwrap();
        let c = simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(3), 1e-6, 800).unwrap();
        assert!(c.counts().iter().all(|&n| n == 0));
        assert_eq!(c.len(), 99);
    }

    #[test]
    fn bin_finer_than_samples_rejected() {
        let tr = TimeTrace::uniform(0.0, 1e-6, vec![1e-12; 100], None).unwrap();
        assert!(simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(1), 0.5e-6, 1).is_err());
    }

    #[test]
    fn binning_integrates_exactly_for_constant_rate() {
        // constant power → mean counts = rate · bin · n_runs for every bin
        let p = 1e-15;
        let tr = TimeTrace::uniform(0.0, 0.3e-6, vec![p; 400], None).unwrap();
        let rate = expected_rate(p, CS_D2_WAVELENGTH, &ideal(0)).unwrap();
        let c = simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(11), 1e-6, 1_000_000).unwrap();
        let expect = rate * 1e-6 * 1e6;
        let mean = c.counts().iter().sum::<u64>() as f64 / c.len() as f64;
        let tol = 5.0 / (expect * c.len() as f64).sqrt();
        assert!((mean / expect - 1.0).abs() < tol);
    }

    #[test]
    fn ratio_and_error_propagation() {
        let probe = CountTrace::new(vec![0.0, 1.0, 2.0], vec![737, 400, 5], 1.0, 10).unwrap();
        let reference = CountTrace::new(vec![0.0, 1.0, 2.0], vec![1000, 400, 0], 1.0, 10).unwrap();
        let t = transmission_from_counts(&probe, &reference).unwrap();
        assert!((t.values[0] - 0.737).abs() < 1e-12);
        assert!((t.sigmas[0] - 0.737 * (1.0f64 / 737.0 + 1.0 / 1000.0).sqrt()).abs() < 1e-15);
        assert!((t.sigmas[0] - 0.0358).abs() < 1e-4);
        assert_eq!(t.values[1], 1.0);
        assert!((t.sigmas[1] - 2f64.sqrt() / 20.0).abs() < 1e-12);
        assert!(!t.valid[2]);
        assert!(t.values.iter().chain(&t.sigmas).all(|v| v.is_finite()));
    }

    #[test]
    fn seeded_output_is_reproducible() {
        let tr = TimeTrace::uniform(0.0, 0.1e-6, (0..500).map(|k| 1e-12 * (k as f64 / 50.0).sin().abs()).collect(), None).unwrap();
        let a = simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(42), 1e-6, 800).unwrap();
        let b = simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(42), 1e-6, 800).unwrap();
        let c = simulate_counts(&tr, CS_D2_WAVELENGTH, &ideal(43), 1e-6, 800).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
