//! Observation matrices for treatments and outcomes, plus column standardization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column centering/scaling applied by [`standardize`], kept so estimates can be
/// mapped back to the original scale.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub x_means: Vec<f64>,
    pub x_sds: Vec<f64>,
    pub y_means: Vec<f64>,
    pub y_sds: Vec<f64>,
}

/// Raw n x K treatment and n x P outcome observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub treatments: DMatrix<f64>,
    pub outcomes: DMatrix<f64>,
    pub treatment_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub standardized: bool,
    /// Present when `standardized` is set; maps back to the pre-standardization scale.
    pub scaling: Option<Scaling>,
}

impl Dataset {
    /// Validates shapes and contents: n >= K+2, n >= P+2, K >= 3, P >= 3, all finite.
    pub fn new(
        treatments: DMatrix<f64>,
        outcomes: DMatrix<f64>,
        treatment_names: Vec<String>,
        outcome_names: Vec<String>,
    ) -> Result<Self> {
        let n = treatments.nrows();
        let k = treatments.ncols();
        let p = outcomes.ncols();
        if outcomes.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "treatments have {n} rows but outcomes have {}",
                outcomes.nrows()
            )));
        }
        if k < 3 || p < 3 {
            return Err(Error::InvalidInput(format!(
                "need at least 3 treatments and 3 outcomes, got K={k}, P={p}"
            )));
        }
        if n < k + 2 || n < p + 2 {
            return Err(Error::InvalidInput(format!(
                "need n >= K+2 and n >= P+2, got n={n}, K={k}, P={p}"
            )));
        }
        if treatment_names.len() != k || outcome_names.len() != p {
            return Err(Error::InvalidInput(
                "name lists do not match matrix shapes".into(),
            ));
        }
        for m in [&treatments, &outcomes] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "observations contain non-finite values".into(),
                ));
            }
        }
        Ok(Self {
            treatments,
            outcomes,
            treatment_names,
            outcome_names,
            standardized: false,
            scaling: None,
        })
    }

    pub fn n(&self) -> usize {
        self.treatments.nrows()
    }

    pub fn k(&self) -> usize {
        self.treatments.ncols()
    }

    pub fn p(&self) -> usize {
        self.outcomes.ncols()
    }

    /// Resamples rows with replacement. `rows` are indices into `self`.
    pub fn resample(&self, rows: &[usize]) -> Dataset {
        let x = DMatrix::from_fn(rows.len(), self.k(), |i, j| self.treatments[(rows[i], j)]);
        let y = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.outcomes[(rows[i], j)]);
        Dataset {
            treatments: x,
            outcomes: y,
            treatment_names: self.treatment_names.clone(),
            outcome_names: self.outcome_names.clone(),
            standardized: false,
            scaling: None,
        }
    }
}

fn column_moments(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let col = m.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        means.push(mean);
        sds.push(var.sqrt());
    }
    (means, sds)
}

/// Centers every column to mean 0 and scales it to sample variance 1.
///
/// Fails with [`Error::ConstantColumn`] when a column has no variation.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let (x_means, x_sds) = column_moments(&data.treatments);
    let (y_means, y_sds) = column_moments(&data.outcomes);
    for (j, sd) in x_sds.iter().enumerate() {
        if *sd <= 1e-12 * x_means[j].abs().max(1.0) {
            return Err(Error::ConstantColumn(data.treatment_names[j].clone()));
        }
    }
    for (j, sd) in y_sds.iter().enumerate() {
        if *sd <= 1e-12 * y_means[j].abs().max(1.0) {
            return Err(Error::ConstantColumn(data.outcome_names[j].clone()));
        }
    }
    let x = DMatrix::from_fn(data.n(), data.k(), |i, j| {
        (data.treatments[(i, j)] - x_means[j]) / x_sds[j]
    });
    let y = DMatrix::from_fn(data.n(), data.p(), |i, j| {
        (data.outcomes[(i, j)] - y_means[j]) / y_sds[j]
    });
    Ok(Dataset {
        treatments: x,
        outcomes: y,
        treatment_names: data.treatment_names.clone(),
        outcome_names: data.outcome_names.clone(),
        standardized: true,
        scaling: Some(Scaling {
            x_means,
            x_sds,
            y_means,
            y_sds,
        }),
    })
}
