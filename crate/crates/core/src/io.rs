//! On-disk formats.
//!
//! Ensemble snapshots are CSV files whose first record is `N,D` followed by
//! `N` rows of `D` parameters. Measures use the same layout with the weight
//! appended as a last column. Basis matrices use `rows,cols` then rows.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::shallow_model::{ParticleEnsemble, UnitSpec};
use crate::training::RunRecord;

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::WriterBuilder::new().flexible(true).has_headers(false).from_path(path).map_err(csv_err)?)
}

fn write_table(path: &Path, header: [usize; 2], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([header[0].to_string(), header[1].to_string()]).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table with header `rows,cols` whose rows have `cols + extra` fields.
fn read_table(path: &Path, extra: usize) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    let mut records = r.records();
    let head = records
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?
        .map_err(csv_err)?;
    let parse_usize = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("{}: bad header field '{s}'", path.display())))
    };
    if head.len() != 2 {
        return Err(Error::Parse(format!("{}: header must be 'rows,cols'", path.display())));
    }
    let (rows, cols) = (parse_usize(&head[0])?, parse_usize(&head[1])?);
    let mut out = Vec::with_capacity(rows);
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != cols + extra {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 1,
                rec.len(),
                cols + extra
            )));
        }
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{}: bad number '{s}'", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    if out.len() != rows {
        return Err(Error::Parse(format!("{}: header announces {rows} rows, found {}", path.display(), out.len())));
    }
    Ok((rows, cols, out))
}

pub fn write_ensemble_csv(path: &Path, ens: &ParticleEnsemble) -> Result<()> {
    write_table(path, [ens.n(), ens.dim()], ens.particles().map(<[f64]>::to_vec))
}

pub fn read_ensemble_csv(path: &Path, unit: &UnitSpec) -> Result<ParticleEnsemble> {
    let (_, cols, rows) = read_table(path, 0)?;
    if cols != unit.param_dim() {
        return Err(Error::Parse(format!("{}: {cols} columns for a unit with D = {}", path.display(), unit.param_dim())));
    }
    ParticleEnsemble::from_rows(*unit, &rows)
}

pub fn write_measure_csv(path: &Path, mu: &EmpiricalMeasure) -> Result<()> {
    write_table(
        path,
        [mu.len(), mu.dim()],
        mu.atoms().map(|(p, w)| p.iter().copied().chain([w]).collect()),
    )
}

pub fn read_measure_csv(path: &Path) -> Result<EmpiricalMeasure> {
    let (_, cols, rows) = read_table(path, 1)?;
    let mut points = Vec::with_capacity(rows.len() * cols);
    let mut weights = Vec::with_capacity(rows.len());
    for row in rows {
        points.extend_from_slice(&row[..cols]);
        weights.push(row[cols]);
    }
    EmpiricalMeasure::new(cols, points, weights)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_table(path, [m.nrows(), m.ncols()], m.row_iter().map(|r| r.iter().copied().collect()))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let (rows, cols, data) = read_table(path, 0)?;
    Ok(DMatrix::from_row_iterator(rows, cols, data.into_iter().flatten()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `config.json`, `snapshots/epoch_<k>.csv` and `final.csv`.
pub fn write_run_dir(dir: &Path, record: &RunRecord, config: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    write_json(&dir.join("config.json"), config)?;
    for snap in &record.snapshots {
        write_ensemble_csv(&dir.join("snapshots").join(format!("epoch_{}.csv", snap.epoch)), &snap.ensemble)?;
    }
    write_ensemble_csv(&dir.join("final.csv"), record.final_ensemble())
}
