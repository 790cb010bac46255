//! CSV serialization, header `t,re_0,im_0,re_1,im_1,...`, one row per sample.
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly. `dt` is recovered from the second row (`t_1 = dt`); the
//! characteristic time and labels are not part of the format.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{default_labels, AmplitudeVector, Result, Trajectory, TrajectoryError};

fn csv_err(e: impl std::fmt::Display) -> TrajectoryError {
    TrajectoryError::Csv(e.to_string())
}

pub fn write_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    for k in 0..traj.dim() {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    out.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for (m, s) in traj.samples().iter().enumerate() {
        row.clear();
        row.push(format!("{:.16e}", traj.time(m)));
        for c in s.entries() {
            row.push(format!("{:.16e}", c.re));
            row.push(format!("{:.16e}", c.im));
        }
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush().map_err(csv_err)
}

/// Reads a trajectory written by [`write_csv`]. Labels default to the basis
/// indices when `labels` is `None`.
pub fn read_csv<R: Read>(
    r: R,
    t_c: Option<f64>,
    labels: Option<Vec<String>>,
    eps_norm: f64,
) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 3 || header.len() % 2 == 0 || &header[0] != "t" {
        return Err(TrajectoryError::Csv(format!("unexpected header {header:?}")));
    }
    for k in 0..(header.len() - 1) / 2 {
        if header[1 + 2 * k] != format!("re_{k}") || header[2 + 2 * k] != format!("im_{k}") {
            return Err(TrajectoryError::Csv(format!("unexpected header column {}", 1 + 2 * k)));
        }
    }
    let dim = (header.len() - 1) / 2;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(csv_err))
            .collect::<Result<Vec<f64>>>()?;
        times.push(vals[0]);
        samples.push(AmplitudeVector::new(
            (0..dim)
                .map(|k| Complex64::new(vals[1 + 2 * k], vals[2 + 2 * k]))
                .collect(),
        ));
    }
    if times.len() < 2 {
        return Err(TrajectoryError::TooFewSamples(times.len()));
    }
    let dt = times[1];
    for (m, &t) in times.iter().enumerate() {
        let expected = m as f64 * dt;
        if (t - expected).abs() > 1e-9 * expected.abs().max(dt) {
            return Err(TrajectoryError::Csv(format!(
                "row {m}: time {t} is not on the uniform grid (expected {expected})"
            )));
        }
    }
    Trajectory::new(
        dt,
        t_c.unwrap_or(dt),
        labels.unwrap_or_else(|| default_labels(dim)),
        samples,
        eps_norm,
    )
}
