//! Synthetic data-generating processes, closed-form population quantities, and
//! the Monte Carlo power/bias experiment harness.
//!
//! The benchmark setting has five treatments and eight outcomes driven by one
//! latent confounder: X ~ N(zeta*U, Sigma_X), Y ~ N(beta'X + alpha*U, Sigma_Y)
//! with exchangeable covariances (2 on the diagonal, 1 off it) and unit
//! confounder loadings on the outcomes.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bootstrap::{bootstrap_test, BootstrapConfig};
use crate::dataset::{standardize, Dataset};
use crate::error::{Error, Result};
use crate::estimation::spc_estimate;
use crate::gamma::{fit_gamma, matrix_rows, GammaMatrix};
use crate::specificity::{score_all_pairs, KpBounds, ScoreConfig, ScoreMode};

/// Benchmark scenario selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// Confounding on the last treatment much larger than the causal effects.
    One,
    /// Confounding engineered to cancel the (3,5) causal effect exactly.
    Two,
    /// Scenario One plus small effects planted on the zero entries of
    /// treatment row 1 and outcome column 1.
    Sensitivity { magnitude: f64 },
}

/// Full data-generating configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub k: usize,
    pub p: usize,
    pub zeta: DVector<f64>,
    pub sigma_x: DMatrix<f64>,
    pub sigma_y: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub beta: DMatrix<f64>,
    /// Number of latent confounders; this artifact always uses 1.
    pub latent_dim: usize,
}

/// Active causal entries of the benchmark effect matrix (zero-based), one
/// cause per outcome, magnitude 1.
pub const ACTIVE_ENTRIES: [(usize, usize); 8] = [
    (0, 0),
    (0, 1),
    (1, 2),
    (1, 3),
    (2, 4),
    (2, 5),
    (4, 6),
    (3, 7),
];

/// Entries perturbed by the sensitivity scenario: the zero cells of outcome
/// column 1 followed by the zero cells of treatment row 1 (zero-based).
pub fn sensitivity_perturbed_entries() -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (1..5).map(|k| (k, 0)).collect();
    v.extend((2..8).map(|p| (0, p)));
    v
}

fn exchangeable(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if i == j { 2.0 } else { 1.0 })
}

fn base_beta(k: usize, p: usize) -> DMatrix<f64> {
    let mut beta = DMatrix::zeros(k, p);
    for &(i, j) in ACTIVE_ENTRIES.iter() {
        beta[(i, j)] = 1.0;
    }
    beta
}

/// Builds the benchmark configuration for a scenario.
pub fn scenario_config(which: Scenario) -> ScenarioConfig {
    let (k, p) = (5, 8);
    let zeta = match which {
        Scenario::One | Scenario::Sensitivity { .. } => {
            DVector::from_row_slice(&[0.4, 0.4, 0.4, 0.4, 2.0])
        }
        Scenario::Two => DVector::from_row_slice(&[0.4, 0.4, 2.0, 1.5, 0.4]),
    };
    let sigma_x = exchangeable(k);
    let sigma_y = exchangeable(p);
    let alpha = DVector::from_element(p, 1.0);
    let mut beta = base_beta(k, p);
    match which {
        Scenario::One => {}
        Scenario::Two => {
            // cancel the confounding bias on (3,5) exactly: beta_35 = -delta_3 * alpha_5
            let delta = delta_for(&sigma_x, &zeta);
            beta[(2, 4)] = -delta[2] * alpha[4];
        }
        Scenario::Sensitivity { magnitude } => {
            for (i, j) in sensitivity_perturbed_entries() {
                beta[(i, j)] = magnitude;
            }
        }
    }
    ScenarioConfig {
        k,
        p,
        zeta,
        sigma_x,
        sigma_y,
        alpha,
        beta,
        latent_dim: 1,
    }
}

fn delta_for(sigma_x: &DMatrix<f64>, zeta: &DVector<f64>) -> DVector<f64> {
    let exx = sigma_x + zeta * zeta.transpose();
    exx.cholesky()
        .expect("second-moment matrix of an SPD covariance is SPD")
        .solve(zeta)
}

/// Closed-form confounder-on-treatment coefficients `(Sigma_X + zeta zeta')^{-1} zeta`.
pub fn population_delta(config: &ScenarioConfig) -> DVector<f64> {
    delta_for(&config.sigma_x, &config.zeta)
}

/// Closed-form population cross-coefficient matrix `beta + delta * alpha'`.
pub fn population_gamma(config: &ScenarioConfig) -> Result<GammaMatrix> {
    let exx = &config.sigma_x + &config.zeta * config.zeta.transpose();
    let eig = exx.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let lambda_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !lambda_min.is_finite() || lambda_min <= 0.0 {
        return Err(Error::SingularGram);
    }
    let delta = exx.cholesky().ok_or(Error::SingularGram)?.solve(&config.zeta);
    let values = &config.beta + &delta * config.alpha.transpose();
    Ok(GammaMatrix::population(values, lambda_max / lambda_min))
}

/// Draws n i.i.d. observations from the configured process.
///
/// Per observation the stream order is fixed: the confounder draw, then the K
/// treatment innovations, then the P outcome innovations, so output is
/// reproducible from the seed alone.
pub fn generate(config: &ScenarioConfig, n: usize, seed: u64) -> Result<Dataset> {
    if config.latent_dim != 1 {
        return Err(Error::InvalidInput("only a single latent confounder is supported".into()));
    }
    let k = config.k;
    let p = config.p;
    if n < k + p {
        return Err(Error::InvalidInput(format!("need n >= K+P = {}, got {n}", k + p)));
    }
    let chol_x = Cholesky::new(config.sigma_x.clone())
        .ok_or_else(|| Error::InvalidInput("sigma_x is not positive definite".into()))?;
    let chol_y = Cholesky::new(config.sigma_y.clone())
        .ok_or_else(|| Error::InvalidInput("sigma_y is not positive definite".into()))?;
    let lx = chol_x.l();
    let ly = chol_y.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, k);
    let mut y = DMatrix::zeros(n, p);
    let mut zx = DVector::zeros(k);
    let mut zy = DVector::zeros(p);
    for row in 0..n {
        let u: f64 = StandardNormal.sample(&mut rng);
        for v in zx.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        for v in zy.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let ex = &lx * &zx;
        let ey = &ly * &zy;
        for j in 0..k {
            x[(row, j)] = config.zeta[j] * u + ex[j];
        }
        let xrow = x.row(row).transpose();
        let mean_y = config.beta.transpose() * xrow + &config.alpha * u;
        for j in 0..p {
            y[(row, j)] = mean_y[j] + ey[j];
        }
    }
    Dataset::new(
        x,
        y,
        (1..=k).map(|i| format!("X{i}")).collect(),
        (1..=p).map(|i| format!("Y{i}")).collect(),
    )
}

/// Two-sided p-values of the fitted coefficients under the Student-t reference.
pub fn ols_pvalues(data: &Dataset, gamma: &GammaMatrix) -> Result<DMatrix<f64>> {
    let n = data.n();
    let k = data.k();
    let p = data.p();
    let df = (n - k) as f64;
    let gram = data.treatments.transpose() * &data.treatments;
    let inv = gram
        .clone()
        .cholesky()
        .ok_or(Error::SingularGram)?
        .inverse();
    let resid = &data.outcomes - &data.treatments * &gamma.values;
    let tdist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidInput(format!("t reference: {e}")))?;
    let mut pv = DMatrix::zeros(k, p);
    for j in 0..p {
        let rss: f64 = resid.column(j).iter().map(|r| r * r).sum();
        let s2 = rss / df;
        for i in 0..k {
            let se = (s2 * inv[(i, i)]).sqrt();
            let t = gamma.values[(i, j)] / se;
            pv[(i, j)] = 2.0 * (1.0 - tdist.cdf(t.abs()));
        }
    }
    Ok(pv)
}

/// Testing method benchmarked by [`power_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    SpcTest,
    PvalueOls,
    Bspc,
}

impl TestMethod {
    pub fn label(self) -> &'static str {
        match self {
            TestMethod::SpcTest => "spc_test",
            TestMethod::PvalueOls => "pvalue_ols",
            TestMethod::Bspc => "bspc",
        }
    }
}

/// Estimator benchmarked by [`bias_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Ols,
    Spc,
    NcOracle,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::Spc => "spc",
            Estimator::NcOracle => "nc_oracle",
        }
    }
}

/// Fixed negative-control assignments for the oracle benchmark: the (5,5) pair
/// serves outcomes 1..4 and the (1,4) pair serves outcomes 5..8 (one-based).
pub const NC_FOR_FIRST_OUTCOMES: (usize, usize) = (4, 4);
pub const NC_FOR_LAST_OUTCOMES: (usize, usize) = (0, 3);

/// Aggregated Monte Carlo output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Per-replicate generator seeds, in replicate order.
    pub replicate_seeds: Vec<u64>,
    /// Method label -> K x P rejection frequency.
    pub rejection: BTreeMap<String, Vec<Vec<f64>>>,
    /// Estimator label -> K x P mean bias.
    pub bias: BTreeMap<String, Vec<Vec<f64>>>,
    /// Echo of the generating configuration behind the run.
    pub true_beta: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Knobs for [`power_experiment`].
#[derive(Debug, Clone)]
pub struct PowerParams {
    /// Critical value; `None` derives it from (K*, P*) = (1, 4).
    pub tau: Option<f64>,
    pub eta: f64,
    pub alpha_level: f64,
    /// Only used when the methods include [`TestMethod::Bspc`].
    pub bootstrap: Option<BootstrapConfig>,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            tau: None,
            eta: 0.0,
            alpha_level: 0.05,
            bootstrap: None,
        }
    }
}

fn replicate_seeds(seed: u64, reps: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps).map(|_| rng.random::<u64>()).collect()
}

fn check_failures<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let total = results.len();
    let ok: Vec<T> = results.into_iter().filter_map(|r| r.ok()).collect();
    let dropped = total - ok.len();
    if dropped * 20 > total {
        return Err(Error::TooManyFailures { dropped, total });
    }
    Ok(ok)
}

fn mean_of(mats: &[DMatrix<f64>], k: usize, p: usize) -> Vec<Vec<f64>> {
    let mut acc = DMatrix::zeros(k, p);
    for m in mats {
        acc += m;
    }
    acc /= mats.len() as f64;
    matrix_rows(&acc)
}

/// Per-pair rejection frequencies for the requested test methods.
pub fn power_experiment(
    config: &ScenarioConfig,
    n: usize,
    reps: usize,
    methods: &[TestMethod],
    params: &PowerParams,
    seed: u64,
) -> Result<ExperimentResult> {
    if reps < 50 {
        return Err(Error::InvalidInput(format!("need at least 50 replicates, got {reps}")));
    }
    let tau = match params.tau {
        Some(t) => t,
        None => crate::specificity::critical_value(config.k, config.p, 1, 4)?,
    };
    let seeds = replicate_seeds(seed, reps);
    let per_rep: Vec<Result<BTreeMap<&'static str, DMatrix<f64>>>> = seeds
        .par_iter()
        .map(|&rep_seed| -> Result<BTreeMap<&'static str, DMatrix<f64>>> {
            let raw = generate(config, n, rep_seed)?;
            let data = standardize(&raw)?;
            let gamma = fit_gamma(&data)?;
            let mut out = BTreeMap::new();
            for &m in methods {
                let rejections = match m {
                    TestMethod::SpcTest => {
                        let cfg = ScoreConfig {
                            bounds: KpBounds::Given { kstar: 1, pstar: 4 },
                            tau_override: Some(tau),
                            eta: params.eta,
                            mode: ScoreMode::Sample { n },
                            ..ScoreConfig::population()
                        };
                        let grid = score_all_pairs(&gamma, &cfg)?;
                        DMatrix::from_fn(config.k, config.p, |i, j| {
                            if grid.get(i, j).reject {
                                1.0
                            } else {
                                0.0
                            }
                        })
                    }
                    TestMethod::PvalueOls => {
                        let pv = ols_pvalues(&data, &gamma)?;
                        pv.map(|v| if v < params.alpha_level { 1.0 } else { 0.0 })
                    }
                    TestMethod::Bspc => {
                        let bcfg = params.bootstrap.ok_or_else(|| {
                            Error::InvalidInput("bspc method needs a bootstrap config".into())
                        })?;
                        let bcfg = BootstrapConfig {
                            seed: rep_seed ^ 0x5bf0_3635,
                            ..bcfg
                        };
                        let mut rej = DMatrix::zeros(config.k, config.p);
                        for i in 0..config.k {
                            for j in 0..config.p {
                                let out =
                                    bootstrap_test(&data, (i, j), tau, params.eta, &bcfg)?;
                                rej[(i, j)] = if out.reject { 1.0 } else { 0.0 };
                            }
                        }
                        rej
                    }
                };
                out.insert(m.label(), rejections);
            }
            Ok(out)
        })
        .collect();

    let per_rep = check_failures(per_rep)?;
    let reps_used = per_rep.len();
    let mut rejection = BTreeMap::new();
    for &m in methods {
        let mats: Vec<DMatrix<f64>> = per_rep.iter().map(|r| r[m.label()].clone()).collect();
        rejection.insert(m.label().to_string(), mean_of(&mats, config.k, config.p));
    }
    Ok(ExperimentResult {
        k: config.k,
        p: config.p,
        n,
        reps: reps_used,
        seed,
        replicate_seeds: seeds,
        rejection,
        bias: BTreeMap::new(),
        true_beta: matrix_rows(&config.beta),
        zeta: config.zeta.iter().copied().collect(),
        alpha: config.alpha.iter().copied().collect(),
    })
}

fn unstandardize(est: &DMatrix<f64>, data: &Dataset) -> DMatrix<f64> {
    let scaling = data
        .scaling
        .as_ref()
        .expect("bias pipeline standardizes before estimating");
    DMatrix::from_fn(est.nrows(), est.ncols(), |i, j| {
        est[(i, j)] * scaling.y_sds[j] / scaling.x_sds[i]
    })
}

/// Single-pair negative-control correction `gamma_kp - gamma_{k,p'} *
/// gamma_{k',p'}^{-1} * gamma_{k',p}` with the fixed assignments above.
fn nc_oracle_estimate(gamma: &GammaMatrix) -> DMatrix<f64> {
    let g = &gamma.values;
    DMatrix::from_fn(gamma.k(), gamma.p(), |i, j| {
        let (nk, np) = if j < 4 {
            NC_FOR_FIRST_OUTCOMES
        } else {
            NC_FOR_LAST_OUTCOMES
        };
        g[(i, j)] - g[(i, np)] / g[(nk, np)] * g[(nk, j)]
    })
}

/// Mean entrywise bias of the requested estimators against the configured
/// effect matrix, on the generating scale.
pub fn bias_experiment(
    config: &ScenarioConfig,
    n: usize,
    reps: usize,
    estimators: &[Estimator],
    seed: u64,
) -> Result<ExperimentResult> {
    if reps < 50 {
        return Err(Error::InvalidInput(format!("need at least 50 replicates, got {reps}")));
    }
    let seeds = replicate_seeds(seed, reps);
    let per_rep: Vec<Result<BTreeMap<&'static str, DMatrix<f64>>>> = seeds
        .par_iter()
        .map(|&rep_seed| -> Result<BTreeMap<&'static str, DMatrix<f64>>> {
            let raw = generate(config, n, rep_seed)?;
            let data = standardize(&raw)?;
            let gamma = fit_gamma(&data)?;
            let mut out = BTreeMap::new();
            for &e in estimators {
                let est_std = match e {
                    Estimator::Ols => gamma.values.clone(),
                    Estimator::Spc => spc_estimate(&gamma)?.beta,
                    Estimator::NcOracle => nc_oracle_estimate(&gamma),
                };
                let est = unstandardize(&est_std, &data);
                out.insert(e.label(), est - &config.beta);
            }
            Ok(out)
        })
        .collect();

    let per_rep = check_failures(per_rep)?;
    let reps_used = per_rep.len();
    let mut bias = BTreeMap::new();
    for &e in estimators {
        let mats: Vec<DMatrix<f64>> = per_rep.iter().map(|r| r[e.label()].clone()).collect();
        bias.insert(e.label().to_string(), mean_of(&mats, config.k, config.p));
    }
    Ok(ExperimentResult {
        k: config.k,
        p: config.p,
        n,
        reps: reps_used,
        seed,
        replicate_seeds: seeds,
        rejection: BTreeMap::new(),
        bias,
        true_beta: matrix_rows(&config.beta),
        zeta: config.zeta.iter().copied().collect(),
        alpha: config.alpha.iter().copied().collect(),
    })
}
