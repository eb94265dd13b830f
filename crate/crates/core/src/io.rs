//! File formats.
//!
//! * System: JSON `{"n", "d_u", "d_y", "A", "B", "C"}` with row-major nested
//!   arrays.
//! * Trajectory: CSV with header `t,u_1..u_{d_u},y_1..y_{d_y}`, `t` from 1.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::lti::{StateSpaceSystem, Trajectory};

/// Row-major nested vectors.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Inverse of [`matrix_rows`]. The column count is needed to type empty rows.
pub fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(SysIdError::invalid(format!("{name} must be {nrows}x{ncols}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SysIdError::invalid(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    n: usize,
    d_u: usize,
    d_y: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
}

pub fn system_to_json(system: &StateSpaceSystem) -> String {
    let file = SystemFile {
        n: system.order(),
        d_u: system.input_dim(),
        d_y: system.output_dim(),
        a: matrix_rows(system.a()),
        b: matrix_rows(system.b()),
        c: matrix_rows(system.c()),
    };
    serde_json::to_string_pretty(&file).expect("system serializes")
}

pub fn system_from_json(text: &str) -> Result<StateSpaceSystem> {
    let f: SystemFile = serde_json::from_str(text)?;
    StateSpaceSystem::new(
        matrix_from_rows(&f.a, f.n, f.n, "A")?,
        matrix_from_rows(&f.b, f.n, f.d_u, "B")?,
        matrix_from_rows(&f.c, f.d_y, f.n, "C")?,
    )
}

pub fn write_system(path: &Path, system: &StateSpaceSystem) -> Result<()> {
    std::fs::write(path, system_to_json(system) + "\n")?;
    Ok(())
}

pub fn read_system(path: &Path) -> Result<StateSpaceSystem> {
    system_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_trajectory_to<W: Write>(writer: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.input_dim()).map(|i| format!("u_{i}")));
    header.extend((1..=traj.output_dim()).map(|i| format!("y_{i}")));
    w.write_record(&header)?;
    for t in 0..traj.len() {
        let mut record = vec![(t + 1).to_string()];
        record.extend(traj.inputs().row(t).iter().map(|v| v.to_string()));
        record.extend(traj.outputs().row(t).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_from<R: Read>(reader: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"t") {
        return Err(SysIdError::invalid("trajectory header must start with `t`"));
    }
    let d_u = names.iter().filter(|h| h.starts_with("u_")).count();
    let d_y = names.iter().filter(|h| h.starts_with("y_")).count();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d_u).map(|i| format!("u_{i}")))
        .chain((1..=d_y).map(|i| format!("y_{i}")))
        .collect();
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() || d_u == 0 || d_y == 0 {
        return Err(SysIdError::invalid(format!(
            "unexpected trajectory header: {}",
            names.join(",")
        )));
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record?;
        let t: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| SysIdError::invalid(format!("bad time index on row {}", row + 1)))?;
        if t != row + 1 {
            return Err(SysIdError::invalid(format!("expected t = {}, found {t}", row + 1)));
        }
        for (k, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| SysIdError::invalid(format!("bad number `{field}` at t = {t}")))?;
            if !v.is_finite() {
                return Err(SysIdError::invalid(format!("non-finite value at t = {t}")));
            }
            if k <= d_u {
                inputs.push(v);
            } else {
                outputs.push(v);
            }
        }
    }
    let len = inputs.len() / d_u;
    Trajectory::new(
        DMatrix::from_row_slice(len, d_u, &inputs),
        DMatrix::from_row_slice(len, d_y, &outputs),
    )
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trajectory_to(std::io::BufWriter::new(file), traj)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory_from(std::fs::File::open(path)?)
}
