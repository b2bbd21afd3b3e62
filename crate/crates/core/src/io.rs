//! Dataset CSV input/output.
//!
//! One file, one header row; column names prefixed `X:` are treatments and
//! `Y:` are outcomes. Numbers are written with 17 significant digits so a
//! write/read round trip reproduces every value bit for bit.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Writes `contents` to `path` via a temporary file in the same directory.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map_or("out".into(), |n| n.to_string_lossy())
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = data
        .treatment_names
        .iter()
        .map(|n| format!("X:{n}"))
        .chain(data.outcome_names.iter().map(|n| format!("Y:{n}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.n() {
        let mut cells = Vec::with_capacity(data.k() + data.p());
        for j in 0..data.k() {
            cells.push(format!("{:.17e}", data.treatments[(i, j)]));
        }
        for j in 0..data.p() {
            cells.push(format!("{:.17e}", data.outcomes[(i, j)]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    atomic_write(path, &out)
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let mut x_cols = Vec::new();
    let mut y_cols = Vec::new();
    let mut x_names = Vec::new();
    let mut y_names = Vec::new();
    for (idx, h) in headers.iter().enumerate() {
        if let Some(name) = h.strip_prefix("X:") {
            x_cols.push(idx);
            x_names.push(name.to_string());
        } else if let Some(name) = h.strip_prefix("Y:") {
            y_cols.push(idx);
            y_names.push(name.to_string());
        } else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("column {h:?} lacks an X: or Y: role prefix"),
            });
        }
    }
    if x_cols.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no treatment (X:) columns found".into(),
        });
    }
    if y_cols.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no outcome (Y:) columns found".into(),
        });
    }
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: x_rows.len() + 2,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(x_rows.len() + 2, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} cells, found {}", headers.len(), rec.len()),
            });
        }
        let parse = |idx: &usize| -> Result<f64> {
            rec[*idx].parse().map_err(|_| Error::Parse {
                line,
                msg: format!(
                    "column {:?}: cannot parse {:?} as a number",
                    &headers[*idx], &rec[*idx]
                ),
            })
        };
        x_rows.push(x_cols.iter().map(parse).collect::<Result<_>>()?);
        y_rows.push(y_cols.iter().map(parse).collect::<Result<_>>()?);
    }
    if x_rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    let x = DMatrix::from_fn(x_rows.len(), x_cols.len(), |i, j| x_rows[i][j]);
    let y = DMatrix::from_fn(y_rows.len(), y_cols.len(), |i, j| y_rows[i][j]);
    Dataset::new(x, y, x_names, y_names)
}
