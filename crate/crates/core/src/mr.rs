//! Adapter mapping two-sample summary statistics (instrument-outcome and
//! instrument-exposure associations) into the cross-coefficient frame, so the
//! specificity and estimation machinery applies unchanged.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gamma::GammaMatrix;

/// Summary associations from two samples sharing an instrument panel.
#[derive(Debug, Clone)]
pub struct MrSummary {
    /// L x P instrument-outcome associations.
    pub gamma_zy: DMatrix<f64>,
    /// L x K instrument-exposure associations.
    pub delta_zx: DMatrix<f64>,
    pub instrument_names: Vec<String>,
    pub exposure_names: Vec<String>,
    pub outcome_names: Vec<String>,
}

impl MrSummary {
    pub fn new(
        gamma_zy: DMatrix<f64>,
        delta_zx: DMatrix<f64>,
        instrument_names: Vec<String>,
        exposure_names: Vec<String>,
        outcome_names: Vec<String>,
    ) -> Result<Self> {
        let l = gamma_zy.nrows();
        let k = delta_zx.ncols();
        if delta_zx.nrows() != l {
            return Err(Error::InvalidInput(format!(
                "instrument rows disagree: {l} outcome rows vs {} exposure rows",
                delta_zx.nrows()
            )));
        }
        if l < k {
            return Err(Error::InvalidInput(format!(
                "need at least as many instruments as exposures, got L={l}, K={k}"
            )));
        }
        if instrument_names.len() != l
            || exposure_names.len() != k
            || outcome_names.len() != gamma_zy.ncols()
        {
            return Err(Error::InvalidInput("name lists do not match matrix shapes".into()));
        }
        if gamma_zy.iter().chain(delta_zx.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("summary matrices contain non-finite values".into()));
        }
        Ok(Self {
            gamma_zy,
            delta_zx,
            instrument_names,
            exposure_names,
            outcome_names,
        })
    }
}

/// Least-squares reduction `gamma = (D'D)^{-1} D' G` of the instrument-level
/// associations to a K x P population-mode cross-coefficient matrix.
pub fn mr_reduce(summary: &MrSummary) -> Result<GammaMatrix> {
    let d = &summary.delta_zx;
    let gram = d.transpose() * d;
    let eig = gram.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !lambda_max.is_finite() || lambda_max <= 0.0 || lambda_min <= lambda_max * 1e-12 {
        return Err(Error::RankDeficient);
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let values = chol.solve(&(d.transpose() * &summary.gamma_zy));
    Ok(GammaMatrix::population(values, lambda_max / lambda_min))
}

fn sniff_delimiter(path: &Path) -> Result<u8> {
    let head = std::fs::read_to_string(path)?;
    let first = head.lines().next().unwrap_or("");
    Ok(if first.contains('\t') {
        b'\t'
    } else if first.contains(';') {
        b';'
    } else {
        b','
    })
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let delim = sniff_delimiter(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            msg: "expected an instrument-name column plus at least one value column".into(),
        });
    }
    let col_names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut row_names = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: rows.len() + 2,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(rows.len() + 2, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} cells, found {}", headers.len(), rec.len()),
            });
        }
        row_names.push(rec[0].to_string());
        let mut row = Vec::with_capacity(col_names.len());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("column {:?}: cannot parse {cell:?} as a number", col_names[j]),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    let m = DMatrix::from_fn(rows.len(), col_names.len(), |i, j| rows[i][j]);
    Ok((row_names, col_names, m))
}

/// Reads the two summary files (instrument x outcome, instrument x exposure).
/// Row order must match between the files; mismatches are reported with the
/// offending line.
pub fn read_mr_summary(outcome_path: &Path, exposure_path: &Path) -> Result<MrSummary> {
    let (rows_zy, outcome_names, gamma_zy) = read_table(outcome_path)?;
    let (rows_zx, exposure_names, delta_zx) = read_table(exposure_path)?;
    if rows_zy.len() != rows_zx.len() {
        return Err(Error::Parse {
            line: rows_zy.len().min(rows_zx.len()) + 2,
            msg: format!(
                "files list {} and {} instruments",
                rows_zy.len(),
                rows_zx.len()
            ),
        });
    }
    for (i, (a, b)) in rows_zy.iter().zip(rows_zx.iter()).enumerate() {
        if a != b {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("instrument name mismatch: {a:?} vs {b:?}"),
            });
        }
    }
    MrSummary::new(gamma_zy, delta_zx, rows_zy, exposure_names, outcome_names)
}
