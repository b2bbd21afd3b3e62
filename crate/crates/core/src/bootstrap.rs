//! Row-resampling bootstrap: the BSPC test and standard errors for the
//! causal-effect estimator.
//!
//! Every replicate draws its own random stream from (seed, replicate index),
//! so results do not depend on scheduling or the number of worker threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::gamma::fit_gamma;
use crate::specificity::{lambda_matrix, specificity_score, ScoreMode, DEFAULT_ZERO_TOL};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Reject when more than this fraction of replicate scores exceeds tau.
    pub reject_fraction: f64,
    pub seed: u64,
    pub zero_tol: f64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, reject_fraction: f64, seed: u64) -> Self {
        Self {
            replicates,
            reject_fraction,
            seed,
            zero_tol: DEFAULT_ZERO_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(Error::InvalidInput(format!(
                "need at least 100 bootstrap replicates, got {}",
                self.replicates
            )));
        }
        if !(self.reject_fraction > 0.5 && self.reject_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "reject fraction must lie in (0.5, 1), got {}",
                self.reject_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub reject: bool,
    /// Fraction of retained replicate scores strictly above tau.
    pub exceed_fraction: f64,
    /// Retained replicate scores in replicate order.
    pub scores: Vec<f64>,
    pub dropped: usize,
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 + 1);
    rng
}

fn resample_rows(data: &Dataset, rng: &mut ChaCha8Rng) -> Dataset {
    let n = data.n();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.resample(&rows)
}

fn check_drop_rate(dropped: usize, total: usize) -> Result<()> {
    if dropped * 20 > total {
        return Err(Error::TooManyFailures { dropped, total });
    }
    Ok(())
}

/// Bootstrap specificity test for one target pair.
///
/// Each replicate resamples rows, re-standardizes, refits gamma, and recomputes
/// the finite-sample score; the null is rejected when the fraction of replicate
/// scores above `tau` exceeds `cfg.reject_fraction`. Replicates that fail
/// numerically are dropped; more than 5% dropped is an error.
pub fn bootstrap_test(
    data: &Dataset,
    target: (usize, usize),
    tau: f64,
    eta: f64,
    cfg: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidBounds(format!("tau must lie in [0, 1), got {tau}")));
    }
    let n = data.n();
    let results: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let resampled = resample_rows(data, &mut rng);
            let score = (|| -> Result<f64> {
                let std = standardize(&resampled)?;
                let gamma = fit_gamma(&std)?;
                let lambda = lambda_matrix(&gamma, target, cfg.zero_tol);
                let parts = specificity_score(
                    &lambda,
                    gamma.values[target],
                    ScoreMode::Sample { n },
                    eta,
                )?;
                Ok(parts.score)
            })();
            score.ok()
        })
        .collect();

    let scores: Vec<f64> = results.iter().filter_map(|s| *s).collect();
    let dropped = cfg.replicates - scores.len();
    check_drop_rate(dropped, cfg.replicates)?;
    let exceeding = scores.iter().filter(|s| **s > tau).count();
    let exceed_fraction = exceeding as f64 / scores.len() as f64;
    Ok(BootstrapOutcome {
        reject: exceed_fraction > cfg.reject_fraction,
        exceed_fraction,
        scores,
        dropped,
    })
}

/// All-pairs BSPC sweep sharing one gamma refit per replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BspcGrid {
    pub k: usize,
    pub p: usize,
    /// Fraction of retained replicate scores above the pair's tau (row-major).
    pub exceed: Vec<Vec<f64>>,
    pub reject: Vec<Vec<bool>>,
    pub dropped: usize,
    pub replicates: usize,
    pub reject_fraction: f64,
}

/// Runs the bootstrap specificity test for every pair at once. Equivalent to
/// calling [`bootstrap_test`] per pair with the same config, but each
/// replicate's resample and gamma fit are shared across pairs.
pub fn bspc_all_pairs(
    data: &Dataset,
    score_cfg: &crate::specificity::ScoreConfig,
    cfg: &BootstrapConfig,
) -> Result<BspcGrid> {
    cfg.validate()?;
    if !matches!(score_cfg.mode, ScoreMode::Sample { .. }) {
        return Err(Error::InvalidInput("bootstrap scoring needs sample mode".into()));
    }
    let results: Vec<Option<crate::specificity::ReportGrid>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let resampled = resample_rows(data, &mut rng);
            (|| -> Result<crate::specificity::ReportGrid> {
                let std = standardize(&resampled)?;
                let gamma = fit_gamma(&std)?;
                crate::specificity::score_all_pairs(&gamma, score_cfg)
            })()
            .ok()
        })
        .collect();
    let grids: Vec<&crate::specificity::ReportGrid> =
        results.iter().filter_map(|g| g.as_ref()).collect();
    let dropped = cfg.replicates - grids.len();
    check_drop_rate(dropped, cfg.replicates)?;
    let (k, p) = (data.k(), data.p());
    let retained = grids.len() as f64;
    let mut exceed = vec![vec![0.0; p]; k];
    for g in &grids {
        for (i, row) in exceed.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let rep = g.get(i, j);
                if rep.score > rep.tau {
                    *cell += 1.0;
                }
            }
        }
    }
    for row in exceed.iter_mut() {
        for v in row.iter_mut() {
            *v /= retained;
        }
    }
    let reject = exceed
        .iter()
        .map(|row| row.iter().map(|&f| f > cfg.reject_fraction).collect())
        .collect();
    Ok(BspcGrid {
        k,
        p,
        exceed,
        reject,
        dropped,
        replicates: cfg.replicates,
        reject_fraction: cfg.reject_fraction,
    })
}

/// Entrywise bootstrap standard deviation of the causal-effect estimates.
pub fn bootstrap_stderr(data: &Dataset, replicates: usize, seed: u64) -> Result<DMatrix<f64>> {
    if replicates < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 bootstrap replicates, got {replicates}"
        )));
    }
    let results: Vec<Option<DMatrix<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let resampled = resample_rows(data, &mut rng);
            (|| -> Result<DMatrix<f64>> {
                let std = standardize(&resampled)?;
                let gamma = fit_gamma(&std)?;
                Ok(crate::estimation::spc_estimate(&gamma)?.beta)
            })()
            .ok()
        })
        .collect();

    let betas: Vec<&DMatrix<f64>> = results.iter().filter_map(|b| b.as_ref()).collect();
    let dropped = replicates - betas.len();
    check_drop_rate(dropped, replicates)?;
    let m = betas.len() as f64;
    let k = data.k();
    let p = data.p();
    let mut mean = DMatrix::zeros(k, p);
    for b in &betas {
        mean += *b;
    }
    mean /= m;
    let mut var = DMatrix::zeros(k, p);
    for b in &betas {
        let d = *b - &mean;
        var += d.component_mul(&d);
    }
    var /= m - 1.0;
    Ok(var.map(f64::sqrt))
}
