//! CSV and JSON output. CSV values are written with 17 significant digits so
//! every `f64` round-trips; JSON keys follow struct field order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analysis::SweepReport;
use crate::assembly::DiscreteOperators;
use crate::control::IterationRecord;
use crate::error::{Error, Result};
use crate::mesh::TimeGrid;
use crate::state::{ControlPair, Trajectory};

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_history_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    write_rows(
        path,
        &["iteration", "cost", "grad_norm", "step_norm"],
        history.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_f64(r.cost),
                fmt_f64(r.grad_norm),
                fmt_f64(r.step_norm),
            ]
        }),
    )
}

/// One row per (slice, node). State slice `k` sits at time `k tau`; adjoint
/// slice `k` holds the value paired with control step `k`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, grid: &TimeGrid) -> Result<()> {
    write_rows(
        path,
        &["step", "time", "node", "value"],
        traj.slices.iter().enumerate().flat_map(|(k, s)| {
            let t = fmt_f64(grid.time(k));
            s.iter()
                .enumerate()
                .map(move |(i, v)| vec![k.to_string(), t.clone(), i.to_string(), fmt_f64(*v)])
        }),
    )
}

/// Control slice `k` acts on the step ending at `(k + 1) tau`. Boundary
/// values are listed under their global node numbers.
pub fn write_control_csv(path: &Path, ctrl: &ControlPair, ops: &DiscreteOperators) -> Result<()> {
    let g_rows = ctrl.g.iter().enumerate().flat_map(|(k, s)| {
        s.iter()
            .enumerate()
            .map(move |(i, v)| vec!["g".to_string(), k.to_string(), i.to_string(), fmt_f64(*v)])
    });
    let q_rows = ctrl.q.iter().enumerate().flat_map(|(k, s)| {
        s.iter()
            .zip(&ops.gamma2_nodes)
            .map(move |(v, i)| vec!["q".to_string(), k.to_string(), i.to_string(), fmt_f64(*v)])
    });
    write_rows(path, &["field", "step", "node", "value"], g_rows.chain(q_rows))
}

pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<()> {
    write_rows(
        path,
        &[
            "alpha",
            "state_gap",
            "adjoint_gap",
            "control_gap",
            "boundary_residual",
            "cost_alpha",
        ],
        report.records.iter().map(|r| {
            vec![
                fmt_f64(r.alpha),
                fmt_f64(r.state_gap),
                fmt_f64(r.adjoint_gap),
                fmt_opt(r.control_gap),
                fmt_f64(r.boundary_residual),
                fmt_f64(r.cost_alpha),
            ]
        }),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::io(path, std::io::Error::other(e)))
}
