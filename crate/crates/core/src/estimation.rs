//! Identification checks and the four-step causal-effect estimator
//! (correlation, confounding, causation, correction).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaMatrix;
use crate::lts::lts_line_fit;

/// Boolean support of allowed nonzero causal effects.
#[derive(Debug, Clone)]
pub struct CausalPattern {
    pub support: DMatrix<bool>,
}

impl CausalPattern {
    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let k = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        Self {
            support: DMatrix::from_fn(k, p, |i, j| rows[i][j]),
        }
    }

    pub fn k(&self) -> usize {
        self.support.nrows()
    }

    pub fn p(&self) -> usize {
        self.support.ncols()
    }

    /// Treatments allowed to cause outcome `p`.
    fn causes_of(&self, p: usize) -> Vec<usize> {
        (0..self.k()).filter(|&k| self.support[(k, p)]).collect()
    }

    /// Outcomes treatment `k` is allowed to affect.
    fn effects_of(&self, k: usize) -> Vec<usize> {
        (0..self.p()).filter(|&p| self.support[(k, p)]).collect()
    }
}

/// A failed identification condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Violation {
    /// |causes(p) U causes(q)| exceeds (K-1)/2.
    OutcomePair { p: usize, q: usize, union: usize },
    /// |effects(k)| exceeds (P-1)/2.
    TreatmentRow { k: usize, effects: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// Checks the global identification conditions: every pair of outcomes has at
/// most (K-1)/2 combined causes and every treatment affects at most (P-1)/2
/// outcomes.
pub fn check_identification(pattern: &CausalPattern) -> IdentificationReport {
    let k = pattern.k();
    let p = pattern.p();
    let kb = (k as f64 - 1.0) / 2.0;
    let pb = (p as f64 - 1.0) / 2.0;
    let causes: Vec<Vec<usize>> = (0..p).map(|j| pattern.causes_of(j)).collect();
    let mut violations = Vec::new();
    for a in 0..p {
        for b in a..p {
            let union = causes[a]
                .iter()
                .chain(causes[b].iter())
                .collect::<std::collections::BTreeSet<_>>()
                .len();
            if union as f64 > kb {
                violations.push(Violation::OutcomePair { p: a, q: b, union });
            }
        }
    }
    for kk in 0..k {
        let effects = pattern.effects_of(kk).len();
        if effects as f64 > pb {
            violations.push(Violation::TreatmentRow { k: kk, effects });
        }
    }
    IdentificationReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Identification conditions restricted to treatment/outcome subsets, with
/// K and P replaced by the subset sizes and supports intersected accordingly.
pub fn check_partial_identification(
    pattern: &CausalPattern,
    treatments: &[usize],
    outcomes: &[usize],
) -> bool {
    assert!(!treatments.is_empty() && !outcomes.is_empty(), "subsets must be nonempty");
    let kb = (treatments.len() as f64 - 1.0) / 2.0;
    let pb = (outcomes.len() as f64 - 1.0) / 2.0;
    let causes_in: Vec<Vec<usize>> = outcomes
        .iter()
        .map(|&j| {
            treatments
                .iter()
                .copied()
                .filter(|&k| pattern.support[(k, j)])
                .collect()
        })
        .collect();
    for a in 0..outcomes.len() {
        for b in a..outcomes.len() {
            let union = causes_in[a]
                .iter()
                .chain(causes_in[b].iter())
                .collect::<std::collections::BTreeSet<_>>()
                .len();
            if union as f64 > kb {
                return false;
            }
        }
    }
    for &k in treatments {
        let effects = outcomes
            .iter()
            .filter(|&&j| pattern.support[(k, j)])
            .count();
        if effects as f64 > pb {
            return false;
        }
    }
    true
}

/// Output of [`spc_estimate`].
#[derive(Debug, Clone)]
pub struct SpcEstimate {
    /// Final causal-effect estimates, `beta = gamma - delta * alpha'`.
    pub beta: DMatrix<f64>,
    /// Confounding loadings on outcomes, anchored so `alpha[anchor] = 1`.
    pub alpha: DVector<f64>,
    /// Confounding loadings on treatments.
    pub delta: DVector<f64>,
    /// Intermediate trimmed-regression estimate of beta.
    pub beta_lts: DMatrix<f64>,
    /// Per outcome p: treatments whose trimmed beta estimate is below the
    /// selection threshold (apparent non-causes of p).
    pub null_sets_alpha: Vec<Vec<usize>>,
    /// Per treatment k: outcomes below the selection threshold.
    pub null_sets_delta: Vec<Vec<usize>>,
    /// Bootstrap standard errors when computed.
    pub stderr: Option<DMatrix<f64>>,
    /// Outcome column with the unit loading.
    pub anchor: usize,
    /// Outcomes where the correction step had no usable equations and kept the
    /// trimmed value.
    pub alpha_fallbacks: Vec<usize>,
    /// Treatments where the correction step kept the trimmed value.
    pub delta_fallbacks: Vec<usize>,
}

/// Threshold below which |beta_lts|^2 marks an apparent null effect:
/// log(n)/n for estimated input, a fixed tolerance for population input.
pub const POPULATION_SELECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub anchor: usize,
    /// Overrides the selection threshold when set.
    pub selection_tol: Option<f64>,
}

/// Four-step estimation of (beta, alpha, delta) from a cross-coefficient matrix.
///
/// Steps: trimmed line fits of every gamma column on the anchor column give
/// alpha; trimmed fits of every row on alpha give delta; `beta_lts` is the
/// residual matrix; the correction step reselects apparent null effects and
/// re-solves alpha and delta on those by ordinary least squares.
///
/// The alpha re-solve uses equations `gamma_kp = gamma_k,anchor * alpha_p`,
/// which hold only where both beta_kp and beta_k,anchor vanish, so the
/// selection set is intersected with the anchor column's null set.
pub fn spc_estimate(gamma: &GammaMatrix) -> Result<SpcEstimate> {
    spc_estimate_with(gamma, EstimateOptions::default())
}

pub fn spc_estimate_with(gamma: &GammaMatrix, opts: EstimateOptions) -> Result<SpcEstimate> {
    let k = gamma.k();
    let p = gamma.p();
    if k < 3 || p < 3 {
        return Err(Error::InvalidInput(format!(
            "estimation needs K >= 3 and P >= 3, got K={k}, P={p}"
        )));
    }
    if opts.anchor >= p {
        return Err(Error::InvalidInput(format!(
            "anchor outcome {} out of range for P={p}",
            opts.anchor
        )));
    }
    if gamma.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("gamma contains non-finite values".into()));
    }
    let g = &gamma.values;
    let anchor = opts.anchor;
    let tol = opts.selection_tol.unwrap_or(match gamma.n {
        Some(n) => {
            if n < 2 {
                return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
            }
            (n as f64).ln() / n as f64
        }
        None => POPULATION_SELECTION_TOL,
    });

    // Confounding: alpha_p from the trimmed regression of column p on the anchor column.
    let anchor_col: Vec<f64> = (0..k).map(|i| g[(i, anchor)]).collect();
    let h_alpha = k / 2 + 1;
    let mut alpha_lts = DVector::zeros(p);
    alpha_lts[anchor] = 1.0;
    for j in 0..p {
        if j == anchor {
            continue;
        }
        let col: Vec<f64> = (0..k).map(|i| g[(i, j)]).collect();
        alpha_lts[j] = lts_line_fit(&anchor_col, &col, h_alpha)?.slope;
    }

    // delta_k from the trimmed regression of row k on alpha.
    let h_delta = p / 2 + 1;
    let alpha_xs: Vec<f64> = alpha_lts.iter().copied().collect();
    let mut delta_lts = DVector::zeros(k);
    for i in 0..k {
        let row: Vec<f64> = (0..p).map(|j| g[(i, j)]).collect();
        delta_lts[i] = lts_line_fit(&alpha_xs, &row, h_delta)?.slope;
    }

    // Causation.
    let beta_lts = g - &delta_lts * alpha_lts.transpose();

    // Correction: reselect null effects, then least-squares updates.
    let null_sets_alpha: Vec<Vec<usize>> = (0..p)
        .map(|j| (0..k).filter(|&i| beta_lts[(i, j)].powi(2) < tol).collect())
        .collect();
    let null_sets_delta: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..p).filter(|&j| beta_lts[(i, j)].powi(2) < tol).collect())
        .collect();

    let mut alpha = alpha_lts.clone();
    let mut alpha_fallbacks = Vec::new();
    for j in 0..p {
        if j == anchor {
            continue;
        }
        let rows: Vec<usize> = null_sets_alpha[j]
            .iter()
            .copied()
            .filter(|i| null_sets_alpha[anchor].contains(i))
            .collect();
        let sxx: f64 = rows.iter().map(|&i| g[(i, anchor)] * g[(i, anchor)]).sum();
        if rows.is_empty() || sxx == 0.0 {
            alpha_fallbacks.push(j);
            continue;
        }
        let sxy: f64 = rows.iter().map(|&i| g[(i, anchor)] * g[(i, j)]).sum();
        alpha[j] = sxy / sxx;
    }

    let mut delta = delta_lts.clone();
    let mut delta_fallbacks = Vec::new();
    for i in 0..k {
        let cols = &null_sets_delta[i];
        let sxx: f64 = cols.iter().map(|&j| alpha[j] * alpha[j]).sum();
        if cols.is_empty() || sxx == 0.0 {
            delta_fallbacks.push(i);
            continue;
        }
        let sxy: f64 = cols.iter().map(|&j| alpha[j] * g[(i, j)]).sum();
        delta[i] = sxy / sxx;
    }

    let beta = g - &delta * alpha.transpose();
    Ok(SpcEstimate {
        beta,
        alpha,
        delta,
        beta_lts,
        null_sets_alpha,
        null_sets_delta,
        stderr: None,
        anchor,
        alpha_fallbacks,
        delta_fallbacks,
    })
}
