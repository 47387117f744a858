//! CSV time series of diagnostics records.

use std::fs::{self, OpenOptions};
use std::path::Path;

use crate::diagnostics::{BoundSeries, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::integrate::Trajectory;

pub const HEADER: [&str; 13] = [
    "time",
    "energy",
    "dissipation",
    "source",
    "min_gamma",
    "min_rho",
    "u_L2",
    "grad_u_L2",
    "sigma_L1",
    "sigma_L2",
    "grad_sigma_L2",
    "omega_L2",
    "c_max",
];

pub(crate) fn row(r: &DiagnosticsRecord) -> Vec<String> {
    let norm = |k: &str| r.norms.get(k).unwrap_or(f64::NAN);
    [
        r.time,
        r.energy,
        r.dissipation,
        r.source,
        r.min_gamma,
        r.min_rho,
        norm("u_L2"),
        norm("grad_u_L2"),
        norm("sigma_L1"),
        norm("sigma_L2"),
        norm("grad_sigma_L2"),
        norm("omega_L2"),
        r.c_max,
    ]
    .iter()
    .map(|v| format!("{v:.16e}"))
    .collect()
}

/// Appends one row, writing the header first if the file is new or empty.
pub fn append_timeseries(record: &DiagnosticsRecord, path: &Path) -> Result<()> {
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(HEADER)?;
    }
    w.write_record(row(record))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the output rows of a trajectory to a fresh file.
pub fn write_timeseries(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in traj.output_records() {
        w.write_record(row(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Columns of a time-series file, keyed like [`HEADER`].
pub fn read_timeseries(path: &Path) -> Result<Vec<[f64; 13]>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut vals = [0.0; 13];
        for (j, field) in rec.iter().enumerate().take(13) {
            vals[j] = field.trim().parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                msg: format!("row {}: cannot parse `{field}`", i + 2),
            })?;
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Norm histories recoverable from a time-series file; columns the file
/// does not carry are left empty.
pub fn bound_series_from_rows(rows: &[[f64; 13]]) -> BoundSeries {
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    BoundSeries {
        times: col(0),
        energy: col(1),
        grad_u_l2: col(7),
        sigma_l2: col(9),
        grad_sigma_l2: col(10),
        omega_l2: col(11),
        ..Default::default()
    }
}
