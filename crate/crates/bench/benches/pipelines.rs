use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use eitsim::dynamics::{default_schedule, simulate_storage};
use eitsim::estimation::fit_eit_spectrum;
use eitsim::instrument::simulate_counts;
use eitsim::model::{hz_to_angular, CS_D2_WAVELENGTH};
use eitsim::propagation::propagate_pulse;
use eitsim::spectra::{symmetric_grid, transmission_spectrum, window_metrics};
use eitsim::{DetectorConfig, GridConfig, NumConfig};
use eitsim_bench::{slowlight_scenario, spectrum_scenario, storage_scenario};

fn spectra(c: &mut Criterion) {
    let (ens, ctrl) = spectrum_scenario();
    let grid = symmetric_grid(hz_to_angular(30e6), 2001);
    c.bench_function("transmission_spectrum_2001", |b| {
        b.iter(|| transmission_spectrum(black_box(&grid), &ens, &ctrl).unwrap())
    });
    c.bench_function("window_metrics", |b| b.iter(|| window_metrics(black_box(&ens), &ctrl).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let (ens, ctrl, pulse) = slowlight_scenario();
    for points in [1usize << 13, 1 << 16] {
        let grid = GridConfig { points, window_factor: 16.0 };
        c.bench_function(&format!("propagate_pulse_{points}"), |b| {
            b.iter(|| propagate_pulse(black_box(&pulse), &ens, &ctrl, &grid).unwrap())
        });
    }
}

fn storage(c: &mut Criterion) {
    let (ens, pulse, omega0) = storage_scenario();
    let schedule = default_schedule(&pulse, &ens, omega0).unwrap();
    let num = NumConfig::default();
    let mut group = c.benchmark_group("storage");
    group.sample_size(10);
    group.bench_function("simulate_storage_default", |b| {
        b.iter(|| simulate_storage(black_box(&pulse), &ens, &schedule, &num).unwrap())
    });
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let (ens, ctrl) = spectrum_scenario();
    let grid = symmetric_grid(hz_to_angular(30e6), 501);
    let spec = transmission_spectrum(&grid, &ens, &ctrl).unwrap();
    c.bench_function("fit_eit_spectrum_501", |b| {
        b.iter(|| fit_eit_spectrum(black_box(&spec), ens.gamma31()).unwrap())
    });
}

fn instrument(c: &mut Criterion) {
    let (ens, ctrl, pulse) = slowlight_scenario();
    let trace = propagate_pulse(&pulse, &ens, &ctrl, &GridConfig { points: 1 << 13, window_factor: 16.0 }).unwrap();
    let det = DetectorConfig::with_seed(7);
    c.bench_function("simulate_counts_1us_800runs", |b| {
        b.iter(|| simulate_counts(black_box(&trace), CS_D2_WAVELENGTH, &det, 1e-6, 800).unwrap())
    });
}

criterion_group!(benches, spectra, propagation, storage, estimation, instrument);
criterion_main!(benches);
