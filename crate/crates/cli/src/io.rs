//! CSV and JSON files.
//!
//! Schemas (header row, then numeric rows):
//! - power trace: `time_s,power_w`
//! - count trace: `time_s,counts,n_runs`
//! - spectrum: `detuning_hz,transmission,sigma`
//! - slow-light dataset: `pc_w,delay_s,duration_s,transmission,sigma_delay_s,sigma_duration_s,sigma_transmission`
//!
//! Floats are written with 17 significant digits so that a load reproduces
//! the stored values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use eitsim::model::{angular_to_hz, hz_to_angular};
use eitsim::{CountTrace, SlowLightDataset, SlowLightRow, Spectrum, TimeTrace};

use crate::error::{CliError, CliResult};

pub const TRACE_HEADER: [&str; 2] = ["time_s", "power_w"];
pub const COUNTS_HEADER: [&str; 3] = ["time_s", "counts", "n_runs"];
pub const SPECTRUM_HEADER: [&str; 3] = ["detuning_hz", "transmission", "sigma"];
pub const DATASET_HEADER: [&str; 7] = [
    "pc_w",
    "delay_s",
    "duration_s",
    "transmission",
    "sigma_delay_s",
    "sigma_duration_s",
    "sigma_transmission",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| CliError::io(path, e.into());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(&r).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trace(path: &Path, trace: &TimeTrace) -> CliResult<()> {
    let rows = trace.times().iter().zip(trace.powers()).map(|(&t, &p)| vec![fmt_f64(t), fmt_f64(p)]);
    write_rows(path, &TRACE_HEADER, rows)
}

pub fn write_counts(path: &Path, counts: &CountTrace) -> CliResult<()> {
    let n = counts.n_runs().to_string();
    let rows = counts.times().iter().zip(counts.counts()).map(|(&t, &c)| vec![fmt_f64(t), c.to_string(), n.clone()]);
    write_rows(path, &COUNTS_HEADER, rows)
}

/// Detunings are converted from rad/s to Hz; a missing sigma column is written as zeros.
pub fn write_spectrum(path: &Path, spec: &Spectrum) -> CliResult<()> {
    let rows = (0..spec.len()).map(|i| {
        vec![
            fmt_f64(angular_to_hz(spec.detunings()[i])),
            fmt_f64(spec.values()[i]),
            fmt_f64(spec.sigmas().map_or(0.0, |s| s[i])),
        ]
    });
    write_rows(path, &SPECTRUM_HEADER, rows)
}

pub fn write_dataset(path: &Path, ds: &SlowLightDataset) -> CliResult<()> {
    let rows = ds.rows().iter().map(|r| {
        [r.pc, r.delay, r.duration, r.transmission, r.sigma_delay, r.sigma_duration, r.sigma_transmission]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect()
    });
    write_rows(path, &DATASET_HEADER, rows)
}

/// Pretty JSON with a trailing newline; key order follows the serialized type.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Reads all rows as floats (or as raw text for integer columns), checking
/// the header and reporting malformed rows by file line number.
fn read_table(path: &Path, header: &[&str]) -> CliResult<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::input(path, format!("{other:?}")),
        })?;
    let found = r.headers().map_err(|e| CliError::input(path, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::input(
            path,
            format!("header must be `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(path, format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line()) as usize;
        if rec.len() != header.len() {
            return Err(CliError::input(path, format!("line {line}: expected {} fields, found {}", header.len(), rec.len())));
        }
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    Ok(rows)
}

fn float(path: &Path, line: usize, rec: &csv::StringRecord, col: usize, name: &str) -> CliResult<f64> {
    let s = &rec[col];
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::input(path, format!("line {line}: column {name}: `{s}` is not a finite number"))),
    }
}

fn uint(path: &Path, line: usize, rec: &csv::StringRecord, col: usize, name: &str) -> CliResult<u64> {
    let s = &rec[col];
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let msg = match s.parse::<f64>() {
        Ok(v) if v < 0.0 => format!("line {line}: column {name} is negative ({s})"),
        _ => format!("line {line}: column {name}: `{s}` is not a non-negative integer"),
    };
    Err(CliError::input(path, msg))
}

/// Rejects a non-uniform time column, naming the first offending line.
fn check_grid(path: &Path, lines: &[usize], times: &[f64]) -> CliResult<()> {
    if times.len() < 2 {
        return Err(CliError::input(path, "a trace needs at least two rows"));
    }
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let scale = times[0].abs().max(times[n - 1].abs()).max(dt.abs());
    let tol = 1e-12 * scale + 1e-9 * dt.abs();
    for k in 0..n {
        if !(dt > 0.0) || (times[k] - (times[0] + k as f64 * dt)).abs() > tol {
            return Err(CliError::input(path, format!("line {}: time grid is not uniform", lines[k])));
        }
    }
    Ok(())
}

pub fn load_timetrace_csv(path: &Path) -> CliResult<TimeTrace> {
    let rows = read_table(path, &TRACE_HEADER)?;
    let mut lines = Vec::with_capacity(rows.len());
    let mut times = Vec::with_capacity(rows.len());
    let mut powers = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        lines.push(*line);
        times.push(float(path, *line, rec, 0, "time_s")?);
        let p = float(path, *line, rec, 1, "power_w")?;
        if p < 0.0 {
            return Err(CliError::input(path, format!("line {line}: column power_w is negative ({p})")));
        }
        powers.push(p);
    }
    check_grid(path, &lines, &times)?;
    TimeTrace::new(times, powers, None).map_err(|e| CliError::input(path, e.to_string()))
}

/// Bin width is the time spacing; `n_runs` must agree across rows.
pub fn load_counttrace_csv(path: &Path) -> CliResult<CountTrace> {
    let rows = read_table(path, &COUNTS_HEADER)?;
    let mut lines = Vec::with_capacity(rows.len());
    let mut times = Vec::with_capacity(rows.len());
    let mut counts = Vec::with_capacity(rows.len());
    let mut n_runs = None;
    for (line, rec) in &rows {
        lines.push(*line);
        times.push(float(path, *line, rec, 0, "time_s")?);
        counts.push(uint(path, *line, rec, 1, "counts")?);
        let n = uint(path, *line, rec, 2, "n_runs")?;
        if *n_runs.get_or_insert(n) != n {
            return Err(CliError::input(path, format!("line {line}: n_runs differs from earlier rows")));
        }
    }
    check_grid(path, &lines, &times)?;
    let bin = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    CountTrace::new(times, counts, bin, n_runs.unwrap_or(0)).map_err(|e| CliError::input(path, e.to_string()))
}

/// Detunings come back in rad/s. An all-zero sigma column means "no sigmas".
pub fn load_spectrum_csv(path: &Path) -> CliResult<Spectrum> {
    let rows = read_table(path, &SPECTRUM_HEADER)?;
    let mut d = Vec::with_capacity(rows.len());
    let mut t = Vec::with_capacity(rows.len());
    let mut s = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        d.push(hz_to_angular(float(path, *line, rec, 0, "detuning_hz")?));
        t.push(float(path, *line, rec, 1, "transmission")?);
        let sigma = float(path, *line, rec, 2, "sigma")?;
        if sigma < 0.0 {
            return Err(CliError::input(path, format!("line {line}: column sigma is negative ({sigma})")));
        }
        s.push(sigma);
    }
    let sigmas = s.iter().any(|&v| v > 0.0).then_some(s);
    Spectrum::new(d, t, sigmas).map_err(|e| CliError::input(path, e.to_string()))
}

pub fn load_dataset_csv(path: &Path) -> CliResult<SlowLightDataset> {
    let rows = read_table(path, &DATASET_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let v: Vec<f64> = (0..7).map(|c| float(path, *line, rec, c, DATASET_HEADER[c])).collect::<CliResult<_>>()?;
        out.push(SlowLightRow {
            pc: v[0],
            delay: v[1],
            duration: v[2],
            transmission: v[3],
            sigma_delay: v[4],
            sigma_duration: v[5],
            sigma_transmission: v[6],
        });
    }
    SlowLightDataset::new(out).map_err(|e| CliError::input(path, e.to_string()))
}
