//! Cross-coefficient matrix estimation by multivariate least squares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default cap on the Gram matrix condition number.
pub const DEFAULT_CONDITION_CAP: f64 = 1e10;

/// Estimated (or population) K x P cross-coefficient matrix.
#[derive(Debug, Clone)]
pub struct GammaMatrix {
    pub values: DMatrix<f64>,
    /// Sample size behind the estimate; `None` marks a population matrix.
    pub n: Option<usize>,
    /// Condition number of the Gram matrix the estimate was solved against.
    pub gram_condition: f64,
}

impl GammaMatrix {
    pub fn population(values: DMatrix<f64>, gram_condition: f64) -> Self {
        Self {
            values,
            n: None,
            gram_condition,
        }
    }

    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// Serialization-friendly form of a [`GammaMatrix`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaRecord {
    pub treatment_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub n: Option<usize>,
    pub gram_condition: f64,
    pub values: Vec<Vec<f64>>,
}

/// Row-major nested-vector view, the JSON-friendly matrix form.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl GammaRecord {
    pub fn from_gamma(g: &GammaMatrix, treatment_names: &[String], outcome_names: &[String]) -> Self {
        Self {
            treatment_names: treatment_names.to_vec(),
            outcome_names: outcome_names.to_vec(),
            n: g.n,
            gram_condition: g.gram_condition,
            values: matrix_rows(&g.values),
        }
    }

    pub fn to_gamma(&self) -> Result<GammaMatrix> {
        let k = self.values.len();
        if k == 0 || self.values.iter().any(|r| r.len() != self.values[0].len()) {
            return Err(Error::InvalidInput("ragged gamma value rows".into()));
        }
        let p = self.values[0].len();
        let values = DMatrix::from_fn(k, p, |i, j| self.values[i][j]);
        Ok(GammaMatrix {
            values,
            n: self.n,
            gram_condition: self.gram_condition,
        })
    }
}

/// Solves the through-origin normal equations `(X'X) B = X'Y`.
///
/// The Gram matrix is factored with a symmetric positive-definite decomposition;
/// its extreme eigenvalue ratio is returned next to the solution so callers can
/// record how trustworthy the solve was.
pub fn solve_normal_equations(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    condition_cap: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let gram = x.transpose() * x;
    let moment = x.transpose() * y;
    let eig = gram.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !lambda_max.is_finite() || lambda_max <= 0.0 || lambda_min <= lambda_max * 1e-15 {
        return Err(Error::SingularGram);
    }
    let cond = lambda_max / lambda_min;
    if cond > condition_cap {
        return Err(Error::IllConditioned {
            cond,
            cap: condition_cap,
        });
    }
    let chol = gram.cholesky().ok_or(Error::SingularGram)?;
    Ok((chol.solve(&moment), cond))
}

/// Multivariate least-squares fit of outcomes on treatments (no intercept).
pub fn fit_gamma(data: &Dataset) -> Result<GammaMatrix> {
    fit_gamma_with(data, DEFAULT_CONDITION_CAP)
}

pub fn fit_gamma_with(data: &Dataset, condition_cap: f64) -> Result<GammaMatrix> {
    let (values, gram_condition) =
        solve_normal_equations(&data.treatments, &data.outcomes, condition_cap)?;
    Ok(GammaMatrix {
        values,
        n: Some(data.n()),
        gram_condition,
    })
}
