//! Confounding-bias probes, specificity scores, critical values, and tests.
//!
//! For a target pair (i, j), every other pair (k, p) yields a probe
//! `Lambda_kp = Gamma_ip * Gamma_kp^{-1} * Gamma_kj` of the confounding bias.
//! The score is the larger of the fractions of probes strictly above or below
//! the target association magnitude, and the test compares it to the critical
//! value `tau = 1 - (K-1-K*)(P-1-P*)/((K-1)(P-1))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::GammaMatrix;

/// Default absolute tolerance under which a Gamma entry counts as zero
/// (probe set to +inf). Calibrated for standardized data.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

/// Relative tolerance treating a probe as tied with a threshold. Strict
/// inequalities on exact-arithmetic ties would otherwise be decided by
/// floating-point rounding.
const EQUALITY_REL_TOL: f64 = 1e-9;

/// Probe grid for one target pair; entries may be +inf.
#[derive(Debug, Clone)]
pub struct LambdaMatrix {
    /// Zero-based (treatment, outcome) target indices.
    pub target: (usize, usize),
    /// (K-1) x (P-1) probes, rows ordered by k != i, columns by p != j.
    pub values: DMatrix<f64>,
}

/// Scored pair before a critical value is attached.
#[derive(Debug, Clone)]
pub struct PairScore {
    pub target: (usize, usize),
    pub q1: f64,
    pub q2: f64,
    pub score: f64,
    pub eta: f64,
    pub buffer: f64,
}

/// Full per-pair result: score, critical value, decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecificityReport {
    pub target: (usize, usize),
    pub q1: f64,
    pub q2: f64,
    pub score: f64,
    pub tau: f64,
    pub eta: f64,
    pub buffer: f64,
    pub reject: bool,
}

/// Population scoring or finite-sample scoring with the log(n)/n buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreMode {
    Population,
    Sample { n: usize },
}

impl ScoreMode {
    pub fn buffer(self) -> Result<f64> {
        match self {
            ScoreMode::Population => Ok(0.0),
            ScoreMode::Sample { n } => {
                if n < 2 {
                    return Err(Error::InvalidInput(format!("sample mode needs n >= 2, got {n}")));
                }
                let n = n as f64;
                Ok((n.ln() / n).sqrt())
            }
        }
    }
}

/// Probe matrix for `target`; Gamma entries within `zero_tol` of zero give +inf.
pub fn lambda_matrix(gamma: &GammaMatrix, target: (usize, usize), zero_tol: f64) -> LambdaMatrix {
    let (i, j) = target;
    let k = gamma.k();
    let p = gamma.p();
    assert!(i < k && j < p, "target ({i}, {j}) out of range for {k}x{p}");
    let g = &gamma.values;
    let mut values = DMatrix::zeros(k - 1, p - 1);
    let mut row = 0;
    for kk in 0..k {
        if kk == i {
            continue;
        }
        let mut col = 0;
        for pp in 0..p {
            if pp == j {
                continue;
            }
            values[(row, col)] = if g[(kk, pp)].abs() <= zero_tol {
                f64::INFINITY
            } else {
                g[(i, pp)] / g[(kk, pp)] * g[(kk, j)]
            };
            col += 1;
        }
        row += 1;
    }
    LambdaMatrix { target, values }
}

/// `tau = 1 - (K-1-K*)(P-1-P*) / ((K-1)(P-1))`.
pub fn critical_value(k: usize, p: usize, kstar: usize, pstar: usize) -> Result<f64> {
    if k < 2 || kstar >= k - 1 {
        return Err(Error::InvalidBounds(format!("need K* < K-1, got K*={kstar}, K={k}")));
    }
    if p < 2 || pstar >= p - 1 {
        return Err(Error::InvalidBounds(format!("need P* < P-1, got P*={pstar}, P={p}")));
    }
    let num = ((k - 1 - kstar) * (p - 1 - pstar)) as f64;
    let den = ((k - 1) * (p - 1)) as f64;
    Ok(1.0 - num / den)
}

fn strictly_above(value: f64, threshold: f64) -> bool {
    if value.is_infinite() {
        return true;
    }
    let tol = EQUALITY_REL_TOL * value.abs().max(threshold.abs());
    value > threshold + tol
}

fn strictly_below(value: f64, threshold: f64) -> bool {
    if value.is_infinite() {
        return false;
    }
    let tol = EQUALITY_REL_TOL * value.abs().max(threshold.abs());
    value < threshold - tol
}

/// q1/q2/score for one probe grid against the target association `gamma_target`.
///
/// With `eta = 0` and population mode this is the plain score; `eta > 0` widens
/// the comparison thresholds to `|gamma|*(1+eta)^2/(1-eta)` above and
/// `|gamma|*(1-eta)^2/(1+eta)` below, and sample mode adds the buffer
/// `sqrt(log(n)/n)` on each side.
pub fn specificity_score(
    lambda: &LambdaMatrix,
    gamma_target: f64,
    mode: ScoreMode,
    eta: f64,
) -> Result<PairScore> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("eta must lie in [0, 1), got {eta}")));
    }
    let buffer = mode.buffer()?;
    let g = gamma_target.abs();
    let t_hi = g * (1.0 + eta) * (1.0 + eta) / (1.0 - eta) + buffer;
    let t_lo = g * (1.0 - eta) * (1.0 - eta) / (1.0 + eta) - buffer;
    let total = (lambda.values.nrows() * lambda.values.ncols()) as f64;
    let mut hi = 0usize;
    let mut lo = 0usize;
    for v in lambda.values.iter() {
        let a = v.abs();
        if strictly_above(a, t_hi) {
            hi += 1;
        } else if strictly_below(a, t_lo) {
            lo += 1;
        }
    }
    let q1 = hi as f64 / total;
    let q2 = lo as f64 / total;
    Ok(PairScore {
        target: lambda.target,
        q1,
        q2,
        score: q1.max(q2),
        eta,
        buffer,
    })
}

/// Attaches the critical value: reject iff score >= tau.
pub fn specificity_test(parts: &PairScore, tau: f64) -> Result<SpecificityReport> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidBounds(format!("tau must lie in [0, 1), got {tau}")));
    }
    Ok(SpecificityReport {
        target: parts.target,
        q1: parts.q1,
        q2: parts.q2,
        score: parts.score,
        tau,
        eta: parts.eta,
        buffer: parts.buffer,
        reject: parts.score >= tau,
    })
}

/// Specificity bounds for one pair: explicit, or the most conservative rule
/// `K* = K-2, P* = P-2` (tau = 1 - 1/((K-1)(P-1))).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum KpBounds {
    Conservative,
    Given { kstar: usize, pstar: usize },
}

impl KpBounds {
    pub fn resolve(self, k: usize, p: usize) -> (usize, usize) {
        match self {
            KpBounds::Conservative => (k - 2, p - 2),
            KpBounds::Given { kstar, pstar } => (kstar, pstar),
        }
    }
}

/// Per-pair override of the global bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairBounds {
    pub treatment: usize,
    pub outcome: usize,
    pub kstar: usize,
    pub pstar: usize,
}

/// Scoring configuration shared by a whole K x P sweep.
#[derive(Debug, Clone)]
pub struct ScoreConfig {
    pub bounds: KpBounds,
    pub per_pair: Vec<PairBounds>,
    /// When set, used for every pair instead of the critical-value formula.
    pub tau_override: Option<f64>,
    pub eta: f64,
    pub mode: ScoreMode,
    pub zero_tol: f64,
}

impl ScoreConfig {
    pub fn population() -> Self {
        Self {
            bounds: KpBounds::Conservative,
            per_pair: Vec::new(),
            tau_override: None,
            eta: 0.0,
            mode: ScoreMode::Population,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    pub fn sample(n: usize) -> Self {
        Self {
            mode: ScoreMode::Sample { n },
            ..Self::population()
        }
    }

    fn tau_for(&self, k: usize, p: usize, target: (usize, usize)) -> Result<f64> {
        if let Some(t) = self.tau_override {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::InvalidBounds(format!("tau must lie in [0, 1), got {t}")));
            }
            return Ok(t);
        }
        let (mut kstar, mut pstar) = self.bounds.resolve(k, p);
        for pb in &self.per_pair {
            if (pb.treatment, pb.outcome) == target {
                kstar = pb.kstar;
                pstar = pb.pstar;
            }
        }
        critical_value(k, p, kstar, pstar)
    }
}

/// Report grid over all K x P target pairs (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportGrid {
    pub k: usize,
    pub p: usize,
    pub eta: f64,
    pub reports: Vec<SpecificityReport>,
}

impl ReportGrid {
    pub fn get(&self, i: usize, j: usize) -> &SpecificityReport {
        &self.reports[i * self.p + j]
    }

    pub fn scores(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| (0..self.p).map(|j| self.get(i, j).score).collect())
            .collect()
    }

    pub fn rejections(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                (0..self.p)
                    .map(|j| if self.get(i, j).reject { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

/// Runs probe construction, scoring, and the test for every pair.
pub fn score_all_pairs(gamma: &GammaMatrix, config: &ScoreConfig) -> Result<ReportGrid> {
    let k = gamma.k();
    let p = gamma.p();
    if k < 3 || p < 3 {
        return Err(Error::InvalidInput(format!(
            "specificity analysis needs K >= 3 and P >= 3, got K={k}, P={p}"
        )));
    }
    let mut reports = Vec::with_capacity(k * p);
    for i in 0..k {
        for j in 0..p {
            let lambda = lambda_matrix(gamma, (i, j), config.zero_tol);
            let parts = specificity_score(&lambda, gamma.values[(i, j)], config.mode, config.eta)?;
            let tau = config.tau_for(k, p, (i, j))?;
            reports.push(specificity_test(&parts, tau)?);
        }
    }
    Ok(ReportGrid {
        k,
        p,
        eta: config.eta,
        reports,
    })
}

/// One report per eta value; the grid must be ascending within [0, 1).
pub fn sensitivity_curve(
    gamma: &GammaMatrix,
    target: (usize, usize),
    eta_grid: &[f64],
    tau: f64,
    mode: ScoreMode,
    zero_tol: f64,
) -> Result<Vec<SpecificityReport>> {
    if eta_grid.is_empty() {
        return Err(Error::InvalidInput("empty eta grid".into()));
    }
    if eta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("eta grid must be ascending".into()));
    }
    let lambda = lambda_matrix(gamma, target, zero_tol);
    let g = gamma.values[target];
    eta_grid
        .iter()
        .map(|&eta| {
            let parts = specificity_score(&lambda, g, mode, eta)?;
            specificity_test(&parts, tau)
        })
        .collect()
}
