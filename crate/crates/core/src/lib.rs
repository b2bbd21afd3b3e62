//! Specificity-based unmeasured-confounding analysis for settings with
//! multiple treatments and multiple outcomes.
//!
//! The observed cross-coefficient matrix decomposes as
//! `gamma = beta + delta * alpha'`: causal effects plus a rank-one confounding
//! term. Treating every other treatment-outcome pair as a candidate negative
//! control yields a grid of confounding-bias probes for each target pair; the
//! specificity score measures how far the observed association departs from
//! those probes, and bounds on the breadth of true causal effects turn the
//! score into a test, a sensitivity analysis, and a full estimator of the
//! effect matrix.
//!
//! Modules:
//! - [`dataset`], [`gamma`], [`lts`]: data handling and the two numerical
//!   primitives (least squares, exact trimmed line fit).
//! - [`specificity`]: probes, scores, critical values, tests, eta-sensitivity.
//! - [`estimation`]: identification checks and the four-step effect estimator.
//! - [`bootstrap`]: the resampling test and estimator standard errors.
//! - [`mr`]: adapter for two-sample summary-statistic inputs.
//! - [`sim`]: benchmark generators and Monte Carlo experiments.
//! - [`heatmap`], [`io`]: rendering and file formats.
//!
//! ```
//! use spc_core::{fit_gamma, generate, scenario_config, score_all_pairs, standardize,
//!                Scenario, ScoreConfig, ScoreMode};
//! use spc_core::specificity::KpBounds;
//!
//! let config = scenario_config(Scenario::One);
//! let data = standardize(&generate(&config, 800, 42)?)?;
//! let gamma = fit_gamma(&data)?;
//! let cfg = ScoreConfig {
//!     bounds: KpBounds::Given { kstar: 1, pstar: 4 },
//!     mode: ScoreMode::Sample { n: data.n() },
//!     ..ScoreConfig::population()
//! };
//! let grid = score_all_pairs(&gamma, &cfg)?;
//! let rejected = grid.reports.iter().filter(|r| r.reject).count();
//! assert!(rejected >= 1);
//! # Ok::<(), spc_core::Error>(())
//! ```

pub mod bootstrap;
pub mod dataset;
pub mod error;
pub mod estimation;
pub mod gamma;
pub mod heatmap;
pub mod io;
pub mod lts;
pub mod mr;
pub mod sim;
pub mod specificity;

pub use bootstrap::{
    bootstrap_stderr, bootstrap_test, bspc_all_pairs, BootstrapConfig, BootstrapOutcome, BspcGrid,
};
pub use dataset::{standardize, Dataset, Scaling};
pub use error::{Error, Result};
pub use estimation::{
    check_identification, check_partial_identification, spc_estimate, spc_estimate_with,
    CausalPattern, EstimateOptions, IdentificationReport, SpcEstimate,
};
pub use gamma::{fit_gamma, fit_gamma_with, solve_normal_equations, GammaMatrix, GammaRecord};
pub use lts::{lts_line_fit, lts_line_fit_with_budget, LtsFit};
pub use mr::{mr_reduce, read_mr_summary, MrSummary};
pub use sim::{
    bias_experiment, generate, ols_pvalues, population_delta, population_gamma, power_experiment,
    scenario_config, Estimator, ExperimentResult, PowerParams, Scenario, ScenarioConfig,
    TestMethod,
};
pub use specificity::{
    critical_value, lambda_matrix, score_all_pairs, sensitivity_curve, specificity_score,
    specificity_test, KpBounds, LambdaMatrix, PairBounds, PairScore, ReportGrid, ScoreConfig,
    ScoreMode, SpecificityReport,
};
