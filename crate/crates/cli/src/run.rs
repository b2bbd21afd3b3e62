//! Implementations of the four subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spc_core::gamma::{matrix_rows as rows_of, GammaRecord};
use spc_core::heatmap::{render_svg, render_text, Heatmap};
use spc_core::io::atomic_write;
use spc_core::sim::{sensitivity_perturbed_entries, Estimator, TestMethod};
use spc_core::specificity::{KpBounds, PairBounds, ReportGrid};
use spc_core::{
    bias_experiment, bootstrap_stderr, bspc_all_pairs, fit_gamma, generate, mr_reduce,
    power_experiment, read_mr_summary, scenario_config, score_all_pairs, spc_estimate,
    standardize, BootstrapConfig, Error, ExperimentResult, GammaMatrix, PowerParams, Result,
    Scenario, ScoreConfig, ScoreMode, SpcEstimate,
};

use crate::{BootstrapFlags, Format, ScoreFlags};

/// Everything analyze/mr persist for later re-rendering.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisReports {
    pub treatment_names: Vec<String>,
    pub outcome_names: Vec<String>,
    pub standardized: bool,
    pub grids: Vec<ReportGrid>,
}

#[derive(Debug, Serialize)]
struct EstimateRecord {
    anchor: usize,
    alpha: Vec<f64>,
    delta: Vec<f64>,
    beta: Vec<Vec<f64>>,
    beta_lts: Vec<Vec<f64>>,
    null_sets_alpha: Vec<Vec<usize>>,
    null_sets_delta: Vec<Vec<usize>>,
    stderr: Option<Vec<Vec<f64>>>,
    alpha_fallbacks: Vec<usize>,
    delta_fallbacks: Vec<usize>,
    standardized: bool,
}

impl EstimateRecord {
    fn new(est: &SpcEstimate, standardized: bool) -> Self {
        Self {
            anchor: est.anchor,
            alpha: est.alpha.iter().copied().collect(),
            delta: est.delta.iter().copied().collect(),
            beta: rows_of(&est.beta),
            beta_lts: rows_of(&est.beta_lts),
            null_sets_alpha: est.null_sets_alpha.clone(),
            null_sets_delta: est.null_sets_delta.clone(),
            stderr: est.stderr.as_ref().map(rows_of),
            alpha_fallbacks: est.alpha_fallbacks.clone(),
            delta_fallbacks: est.delta_fallbacks.clone(),
            standardized,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    atomic_write(path, &(body + "\n"))
}

fn eta_grid(flags: &ScoreFlags, default: &[f64]) -> Result<Vec<f64>> {
    let grid = if flags.eta.is_empty() {
        default.to_vec()
    } else {
        flags.eta.clone()
    };
    if grid.iter().any(|e| !(0.0..1.0).contains(e)) {
        return Err(Error::InvalidInput("every eta must lie in [0, 1)".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("eta values must be ascending".into()));
    }
    Ok(grid)
}

fn read_kp_table(path: &Path) -> Result<Vec<PairBounds>> {
    let body = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("treatment")) {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected treatment,outcome,kstar,pstar, found {line:?}"),
            });
        }
        let nums: Vec<usize> = cells
            .iter()
            .map(|c| {
                c.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("cannot parse {c:?} as an index"),
                })
            })
            .collect::<Result<_>>()?;
        if nums[0] == 0 || nums[1] == 0 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: "treatment/outcome indices are one-based".into(),
            });
        }
        out.push(PairBounds {
            treatment: nums[0] - 1,
            outcome: nums[1] - 1,
            kstar: nums[2],
            pstar: nums[3],
        });
    }
    Ok(out)
}

fn score_config(flags: &ScoreFlags, mode: ScoreMode, eta: f64) -> Result<ScoreConfig> {
    let bounds = match (flags.kstar, flags.pstar) {
        (Some(kstar), Some(pstar)) => KpBounds::Given { kstar, pstar },
        (None, None) => KpBounds::Conservative,
        _ => {
            return Err(Error::InvalidInput(
                "--kstar and --pstar must be given together".into(),
            ))
        }
    };
    let per_pair = match &flags.kp_table {
        Some(path) => read_kp_table(path)?,
        None => Vec::new(),
    };
    Ok(ScoreConfig {
        bounds,
        per_pair,
        tau_override: flags.tau,
        eta,
        mode,
        zero_tol: flags.zero_tol,
    })
}

fn eta_tag(eta: f64) -> String {
    format!("{eta:.2}")
}

fn write_map(path: &Path, map: &Heatmap, format: Format) -> Result<()> {
    let body = match format {
        Format::Text => render_text(map),
        Format::Svg => render_svg(map),
    };
    atomic_write(path, &body)
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Text => "txt",
        Format::Svg => "svg",
    }
}

fn write_grid_maps(
    out: &Path,
    grid: &ReportGrid,
    rows: &[String],
    cols: &[String],
    format: Format,
) -> Result<()> {
    let tag = eta_tag(grid.eta);
    let scores = grid.scores();
    let map = Heatmap {
        title: &format!("specificity score (eta={tag})"),
        row_labels: rows,
        col_labels: cols,
        values: &scores,
        vmin: 0.0,
        vmax: 1.0,
    };
    write_map(&out.join(format!("score_eta{tag}.{}", ext(format))), &map, format)?;
    let rejections = grid.rejections();
    let map = Heatmap {
        title: &format!("specificity test (eta={tag}; dark = reject)"),
        row_labels: rows,
        col_labels: cols,
        values: &rejections,
        vmin: 0.0,
        vmax: 1.0,
    };
    write_map(&out.join(format!("test_eta{tag}.{}", ext(format))), &map, format)
}

/// Shared back end of `analyze` and `mr` once a gamma matrix exists.
#[allow(clippy::too_many_arguments)]
fn report_and_estimate(
    out: &Path,
    gamma: &GammaMatrix,
    treatment_names: &[String],
    outcome_names: &[String],
    flags: &ScoreFlags,
    mode: ScoreMode,
    standardized: bool,
    format: Format,
) -> Result<AnalysisReports> {
    std::fs::create_dir_all(out)?;
    write_json(
        &out.join("gamma.json"),
        &GammaRecord::from_gamma(gamma, treatment_names, outcome_names),
    )?;
    let mut grids = Vec::new();
    for &eta in &eta_grid(flags, &[0.0])? {
        let cfg = score_config(flags, mode, eta)?;
        let grid = score_all_pairs(gamma, &cfg)?;
        write_grid_maps(out, &grid, treatment_names, outcome_names, format)?;
        grids.push(grid);
    }
    let reports = AnalysisReports {
        treatment_names: treatment_names.to_vec(),
        outcome_names: outcome_names.to_vec(),
        standardized,
        grids,
    };
    write_json(&out.join("reports.json"), &reports)?;
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
pub fn analyze(
    input: &Path,
    out: &Path,
    score: &ScoreFlags,
    bootstrap: &BootstrapFlags,
    seed: u64,
    format: Format,
    raw_scale: bool,
) -> Result<()> {
    let raw = spc_core::io::read_dataset_csv(input)?;
    let data = if raw_scale { raw } else { standardize(&raw)? };
    let gamma = fit_gamma(&data).map_err(|e| {
        if matches!(e, Error::SingularGram | Error::IllConditioned { .. }) {
            eprintln!(
                "spectool: while fitting treatment columns [{}]",
                data.treatment_names.join(", ")
            );
        }
        e
    })?;
    let mode = ScoreMode::Sample { n: data.n() };
    report_and_estimate(
        out,
        &gamma,
        &data.treatment_names,
        &data.outcome_names,
        score,
        mode,
        data.standardized,
        format,
    )?;

    let mut est = spc_estimate(&gamma)?;
    if bootstrap.bootstrap_b > 0 {
        est.stderr = Some(bootstrap_stderr(&data, bootstrap.bootstrap_b, seed)?);
    }
    write_json(
        &out.join("estimate.json"),
        &EstimateRecord::new(&est, data.standardized),
    )?;

    if bootstrap.bootstrap_b > 0 {
        let first_eta = eta_grid(score, &[0.0])?[0];
        let cfg = score_config(score, mode, first_eta)?;
        let bcfg = BootstrapConfig::new(bootstrap.bootstrap_b, bootstrap.reject_fraction, seed);
        let sweep = bspc_all_pairs(&data, &cfg, &bcfg)?;
        write_json(&out.join("bspc.json"), &sweep)?;
    }
    Ok(())
}

fn parse_scenario(name: &str, perturb_magnitude: f64) -> Result<Scenario> {
    match name.to_ascii_lowercase().as_str() {
        "i" | "1" | "one" => Ok(Scenario::One),
        "ii" | "2" | "two" => Ok(Scenario::Two),
        "sensitivity" | "sens" => Ok(Scenario::Sensitivity {
            magnitude: perturb_magnitude,
        }),
        other => Err(Error::InvalidInput(format!("unknown scenario {other:?}"))),
    }
}

#[derive(Debug, Serialize)]
struct SimulationOutput {
    scenario: String,
    n: usize,
    reps: usize,
    seed: u64,
    etas: Vec<f64>,
    /// One power run per eta value.
    power: Vec<ExperimentResult>,
    bias: ExperimentResult,
    /// Entries carrying planted small effects in the sensitivity scenario.
    perturbed_entries: Option<Vec<(usize, usize)>>,
}

fn bias_bars(result: &ExperimentResult, outcome_cols: &[usize]) -> String {
    let mut outp = String::from("mean bias per entry\n");
    for &col in outcome_cols {
        outp.push_str(&format!("outcome Y{}\n", col + 1));
        for (label, bias) in &result.bias {
            outp.push_str(&format!("  {label}\n"));
            for (k, row) in bias.iter().enumerate() {
                let b = row[col];
                let len = ((b.abs() * 40.0).round() as usize).min(60);
                let bar = "#".repeat(len);
                outp.push_str(&format!("    X{} -> Y{}: {b:+.4} {bar}\n", k + 1, col + 1));
            }
        }
    }
    outp
}

fn bias_bars_svg(result: &ExperimentResult, outcome_cols: &[usize]) -> String {
    let row_h = 14usize;
    let mut rows: Vec<(String, f64)> = Vec::new();
    for &col in outcome_cols {
        for (label, bias) in &result.bias {
            for (k, row) in bias.iter().enumerate() {
                rows.push((format!("{label} X{} -> Y{}", k + 1, col + 1), row[col]));
            }
        }
    }
    let height = rows.len() * row_h + 30;
    let mid = 300.0;
    let scale = 200.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"{height}\">\n\
         <line x1=\"{mid}\" y1=\"10\" x2=\"{mid}\" y2=\"{}\" stroke=\"#999\"/>\n",
        height - 10
    );
    for (i, (label, b)) in rows.iter().enumerate() {
        let y = 20 + i * row_h;
        let w = (b.abs() * scale).min(280.0);
        let x = if *b < 0.0 { mid - w } else { mid };
        svg.push_str(&format!(
            "<g><title>{label}: {b:+.5}</title>\
             <text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">{label}</text>\
             <rect x=\"{x}\" y=\"{}\" width=\"{w}\" height=\"10\" fill=\"#555\"/></g>\n",
            y + 9,
            y
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    scenario_name: &str,
    n: usize,
    reps: usize,
    seed: u64,
    out: &Path,
    score: &ScoreFlags,
    perturb_magnitude: f64,
    dump_csv: Option<&Path>,
    format: Format,
) -> Result<()> {
    let scenario = parse_scenario(scenario_name, perturb_magnitude)?;
    let config = scenario_config(scenario);
    std::fs::create_dir_all(out)?;

    if let Some(path) = dump_csv {
        let data = generate(&config, n, seed)?;
        spc_core::io::write_dataset_csv(&data, path)?;
    }

    let reps = if reps < 50 {
        eprintln!("spectool: raising --reps {reps} to the statistical minimum of 50");
        50
    } else {
        reps
    };

    let etas = match scenario {
        Scenario::Sensitivity { .. } => eta_grid(score, &[0.0, 0.2, 0.4])?,
        _ => eta_grid(score, &[0.0])?,
    };
    let tau = match (score.tau, score.kstar, score.pstar) {
        (Some(t), _, _) => Some(t),
        (None, Some(kstar), Some(pstar)) => {
            Some(spc_core::critical_value(config.k, config.p, kstar, pstar)?)
        }
        // scenario defaults: the generator's effect pattern satisfies (K*, P*) = (1, 4)
        _ => None,
    };

    let mut power = Vec::new();
    for (i, &eta) in etas.iter().enumerate() {
        // the p-value benchmark does not depend on eta; run it once
        let methods: &[TestMethod] = if i == 0 {
            &[TestMethod::SpcTest, TestMethod::PvalueOls]
        } else {
            &[TestMethod::SpcTest]
        };
        let params = PowerParams {
            tau,
            eta,
            ..PowerParams::default()
        };
        let result = power_experiment(&config, n, reps, methods, &params, seed)?;
        for (label, grid) in &result.rejection {
            let map = Heatmap {
                title: &format!("rejection frequency: {label} (eta={})", eta_tag(eta)),
                row_labels: &config_treatment_names(&config),
                col_labels: &config_outcome_names(&config),
                values: grid,
                vmin: 0.0,
                vmax: 1.0,
            };
            write_map(
                &out.join(format!("power_{label}_eta{}.{}", eta_tag(eta), ext(format))),
                &map,
                format,
            )?;
        }
        power.push(result);
    }

    let bias = bias_experiment(
        &config,
        n,
        reps,
        &[Estimator::Ols, Estimator::Spc, Estimator::NcOracle],
        seed,
    )?;
    let bars = match format {
        Format::Text => bias_bars(&bias, &[0, 4]),
        Format::Svg => bias_bars_svg(&bias, &[0, 4]),
    };
    atomic_write(&out.join(format!("bias_bars.{}", ext(format))), &bars)?;

    let output = SimulationOutput {
        scenario: scenario_name.to_string(),
        n,
        reps,
        seed,
        etas,
        power,
        bias,
        perturbed_entries: match scenario {
            Scenario::Sensitivity { .. } => Some(sensitivity_perturbed_entries()),
            _ => None,
        },
    };
    write_json(&out.join("results.json"), &output)
}

fn config_treatment_names(config: &spc_core::ScenarioConfig) -> Vec<String> {
    (1..=config.k).map(|i| format!("X{i}")).collect()
}

fn config_outcome_names(config: &spc_core::ScenarioConfig) -> Vec<String> {
    (1..=config.p).map(|i| format!("Y{i}")).collect()
}

pub fn mr(inputs: &[PathBuf], out: &Path, score: &ScoreFlags, format: Format) -> Result<()> {
    if inputs.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected two --input files (instrument-outcome, instrument-exposure), got {}",
            inputs.len()
        )));
    }
    let summary = read_mr_summary(&inputs[0], &inputs[1])?;
    let gamma = mr_reduce(&summary)?;
    report_and_estimate(
        out,
        &gamma,
        &summary.exposure_names,
        &summary.outcome_names,
        score,
        ScoreMode::Population,
        false,
        format,
    )?;
    let est = spc_estimate(&gamma)?;
    write_json(&out.join("estimate.json"), &EstimateRecord::new(&est, false))
}

pub fn render(input: &Path, out: &Path, format: Format) -> Result<()> {
    let body = std::fs::read_to_string(input)?;
    let reports: AnalysisReports = serde_json::from_str(&body).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    std::fs::create_dir_all(out)?;
    for grid in &reports.grids {
        write_grid_maps(
            out,
            grid,
            &reports.treatment_names,
            &reports.outcome_names,
            format,
        )?;
    }
    Ok(())
}
