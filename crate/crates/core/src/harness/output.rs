//! CSV writers. Every file carries a header row; missing values are empty
//! fields. Floats use Rust's shortest round-trip formatting, so identical
//! records always produce identical bytes.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::OdeState;

use super::sweep::SweepRow;
use super::TrialRecord;

pub const TRIALS_HEADER: &[&str] = &[
    "trial",
    "seed",
    "success",
    "evaluations_to_target",
    "evaluations",
    "iterations",
    "termination",
    "cause",
    "final_f_m",
    "best_f",
    "final_sigma",
    "final_eta_m",
    "final_eta_sigma",
    "resamples",
    "clamped",
    "eta_floor_hits",
];

pub const HISTORY_HEADER: &[&str] = &[
    "trial",
    "t",
    "evals",
    "f_m",
    "f_best",
    "eta_m",
    "eta_sigma",
    "snr_m",
    "snr_sigma",
    "sigma",
    "eig_min",
    "eig_max",
];

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("csv output: {e}"))
}

/// Shortest round-trip text; exponent form outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_trials<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIALS_HEADER).map_err(io_err)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.success.to_string(),
            r.evaluations_to_target.map(|e| e.to_string()).unwrap_or_default(),
            r.evaluations.to_string(),
            r.iterations.to_string(),
            r.termination.kind().to_string(),
            r.termination.cause().to_string(),
            num(r.final_f_m),
            num(r.best_f),
            num(r.final_sigma),
            num(r.final_eta_m),
            num(r.final_eta_sigma),
            r.resamples.to_string(),
            r.clamped.to_string(),
            r.eta_floor_hits.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_history<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER).map_err(io_err)?;
    for r in records {
        for h in &r.history {
            w.write_record([
                r.trial.to_string(),
                h.t.to_string(),
                h.evals.to_string(),
                num(h.f_m),
                num(h.f_best),
                num(h.eta_m),
                num(h.eta_sigma),
                num(h.snr_m),
                num(h.snr_sigma),
                num(h.sigma),
                num(h.eig_min),
                num(h.eig_max),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// `grid` column followed by one proportion column per labelled curve.
pub fn write_ecdf<W: Write>(out: W, grid: &[f64], curves: &[(String, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["grid".to_string()];
    header.extend(curves.iter().map(|(l, _)| l.clone()));
    w.write_record(&header).map_err(io_err)?;
    for (i, g) in grid.iter().enumerate() {
        let mut row = vec![num(*g)];
        for (label, c) in curves {
            let v = c
                .get(i)
                .ok_or_else(|| Error::InvalidInput(format!("ecdf curve '{label}' shorter than grid")))?;
            row.push(num(*v));
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "success_rate", "sp1"]).map_err(io_err)?;
    for r in rows {
        w.write_record([r.value.clone(), num(r.success_rate), opt_num(r.sp1)])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_ode<W: Write>(out: W, states: &[OdeState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "m", "v"]).map_err(io_err)?;
    for s in states {
        w.write_record([s.step.to_string(), num(s.m), num(s.v)])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Creates `dir` if needed and writes `name` through `f`.
pub fn write_file<F>(dir: &Path, name: &str, f: F) -> Result<std::path::PathBuf>
where
    F: FnOnce(std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    std::fs::create_dir_all(dir).map_err(|e| io_err(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    f(std::io::BufWriter::new(file))?;
    Ok(path)
}
