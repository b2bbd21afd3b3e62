//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers (run with `--nocapture` to see them).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spc_core::estimation::{check_identification, CausalPattern};
use spc_core::sim::{Estimator, TestMethod, ACTIVE_ENTRIES};
use spc_core::specificity::{
    critical_value, lambda_matrix, score_all_pairs, specificity_score, KpBounds, ScoreConfig,
    ScoreMode,
};
use spc_core::{
    bias_experiment, bootstrap_test, generate, lts_line_fit, mr_reduce, population_delta,
    population_gamma, power_experiment, scenario_config, spc_estimate, BootstrapConfig,
    GammaMatrix, MrSummary, PowerParams, Scenario,
};

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
}

/// A random sparse model obeying the specificity bounds for `target`:
/// outcome j has at most kstar causes (none of them treatment i), and the
/// outcome sets of row i and any other row jointly cover at most pstar columns.
struct NullModel {
    gamma: DMatrix<f64>,
    gamma_target: f64,
    kstar: usize,
    pstar: usize,
    target: (usize, usize),
    k: usize,
    p: usize,
}

fn random_null_model(rng: &mut ChaCha8Rng) -> NullModel {
    loop {
        let k = rng.random_range(4..=10);
        let p = rng.random_range(4..=10);
        let i = rng.random_range(0..k);
        let j = rng.random_range(0..p);
        let kstar = rng.random_range(0..k - 1);
        let pstar = rng.random_range(0..p - 1);

        let mut beta: DMatrix<f64> = DMatrix::zeros(k, p);
        // row i gets at most pstar/2 effects, never on outcome j
        let row_i_budget = pstar / 2;
        let mut row_i = 0usize;
        for _ in 0..row_i_budget {
            let col = rng.random_range(0..p);
            if col != j && beta[(i, col)] == 0.0 {
                beta[(i, col)] = signed(rng, 0.5, 2.0);
                row_i += 1;
            }
        }
        // other rows: at most pstar - |row i| effects each; column j capped at kstar
        let mut col_j_used = 0usize;
        for kk in 0..k {
            if kk == i {
                continue;
            }
            let budget = rng.random_range(0..=pstar.saturating_sub(row_i));
            for _ in 0..budget {
                let col = rng.random_range(0..p);
                if beta[(kk, col)] != 0.0 {
                    continue;
                }
                if col == j {
                    if col_j_used >= kstar {
                        continue;
                    }
                    col_j_used += 1;
                }
                beta[(kk, col)] = signed(rng, 0.5, 2.0);
            }
        }

        // verify the bounds directly (the generator above is conservative)
        let causes_j = (0..k).filter(|&kk| beta[(kk, j)] != 0.0).count();
        if causes_j > kstar {
            continue;
        }
        let outcomes_of = |kk: usize| -> Vec<usize> {
            (0..p).filter(|&pp| beta[(kk, pp)] != 0.0).collect()
        };
        let row_i_set = outcomes_of(i);
        let mut ok = true;
        for kk in 0..k {
            if kk == i {
                continue;
            }
            let mut union = row_i_set.clone();
            for v in outcomes_of(kk) {
                if !union.contains(&v) {
                    union.push(v);
                }
            }
            if union.len() > pstar {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }

        let delta = DVector::from_fn(k, |_, _| signed(rng, 0.3, 1.5));
        let alpha = DVector::from_fn(p, |_, _| signed(rng, 0.3, 1.5));
        let gamma = &beta + &delta * alpha.transpose();
        if gamma.iter().any(|v| v.abs() < 1e-6) {
            continue; // avoid accidental near-cancellations
        }
        return NullModel {
            gamma_target: gamma[(i, j)],
            gamma,
            kstar,
            pstar,
            target: (i, j),
            k,
            p,
        };
    }
}

#[test]
fn criterion_1_probe_count_and_score_bound() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..1000 {
        let m = random_null_model(&mut rng);
        let bound = (m.k - 1 - m.kstar) * (m.p - 1 - m.pstar);
        let gm = GammaMatrix::population(m.gamma.clone(), 1.0);
        let lam = lambda_matrix(&gm, m.target, 1e-8);
        let equal = lam
            .values
            .iter()
            .filter(|v| (**v - m.gamma_target).abs() <= 1e-9)
            .count();
        assert!(
            equal >= bound,
            "trial {trial}: only {equal} probes equal the target, bound {bound}"
        );
        let tau = critical_value(m.k, m.p, m.kstar, m.pstar).unwrap();
        let score = specificity_score(&lam, m.gamma_target, ScoreMode::Population, 0.0)
            .unwrap()
            .score;
        assert!(
            score <= tau + 1e-12,
            "trial {trial}: score {score} above tau {tau}"
        );
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 10.0, "criterion 1 took {dt:?}");
    println!("[PASS] criterion 1: probe-count bound and score <= tau on 1000/1000 null models ({dt:?})");
}

/// Random sparse model under the stronger two-outcome/half-treatment bounds.
fn random_identified_model(
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    loop {
        let k = rng.random_range(5..=9);
        let p = rng.random_range(5..=9);
        let mut beta: DMatrix<f64> = DMatrix::zeros(k, p);
        let mut per_row = vec![0usize; k];
        let row_cap = (p - 1) / 2;
        for j in 0..p {
            if rng.random_bool(0.3) {
                continue;
            }
            let kk = rng.random_range(0..k);
            if per_row[kk] >= row_cap {
                continue;
            }
            beta[(kk, j)] = signed(rng, 0.5, 2.0);
            per_row[kk] += 1;
        }
        let support = DMatrix::from_fn(k, p, |i, j| beta[(i, j)] != 0.0);
        if !check_identification(&CausalPattern { support }).ok {
            continue;
        }
        let delta = DVector::from_fn(k, |_, _| signed(rng, 0.2, 1.5));
        let mut alpha = DVector::from_fn(p, |_, _| signed(rng, 0.2, 1.5));
        alpha[0] = 1.0;
        let gamma = &beta + &delta * alpha.transpose();
        if (0..k).any(|i| gamma[(i, 0)].abs() < 0.05) {
            continue;
        }
        return (beta, alpha, delta);
    }
}

#[test]
fn criterion_2_population_identification() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..200 {
        let (beta, alpha, delta) = random_identified_model(&mut rng);
        let gamma = GammaMatrix::population(&beta + &delta * alpha.transpose(), 1.0);
        let est = spc_estimate(&gamma).unwrap();
        let max_err = est
            .beta
            .iter()
            .zip(beta.iter())
            .map(|(a, b)| (a - b).abs())
            .chain(est.alpha.iter().zip(alpha.iter()).map(|(a, b)| (a - b).abs()))
            .chain(est.delta.iter().zip(delta.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        assert!(max_err < 1e-9, "trial {trial}: max recovery error {max_err}");
    }
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "criterion 2 took {dt:?}");
    println!("[PASS] criterion 2: exact (beta, alpha, delta) recovery on 200/200 identified models ({dt:?})");
}

#[test]
fn criterion_3_scenario_one_power() {
    let start = std::time::Instant::now();
    let config = scenario_config(Scenario::One);
    let result = power_experiment(
        &config,
        5000,
        200,
        &[TestMethod::SpcTest, TestMethod::PvalueOls],
        &PowerParams::default(),
        301,
    )
    .unwrap();
    let spc = &result.rejection["spc_test"];
    let ols = &result.rejection["pvalue_ols"];
    let mut min_active: f64 = 1.0;
    let mut max_null: f64 = 0.0;
    for (i, row) in spc.iter().enumerate() {
        for (j, &freq) in row.iter().enumerate() {
            if ACTIVE_ENTRIES.contains(&(i, j)) {
                min_active = min_active.min(freq);
            } else {
                max_null = max_null.max(freq);
            }
        }
    }
    assert!(min_active >= 0.90, "active power {min_active}");
    assert!(max_null <= 0.05, "null rejection {max_null}");
    // large-confounding row: the p-value benchmark mass-rejects true nulls
    let ols_row5_null_max = (0..8)
        .filter(|&j| !ACTIVE_ENTRIES.contains(&(4, j)))
        .map(|j| ols[4][j])
        .fold(0.0, f64::max);
    assert!(ols_row5_null_max >= 0.50, "ols row-5 null rejection {ols_row5_null_max}");
    let dt = start.elapsed();
    assert!(dt.as_secs_f64() < 300.0, "criterion 3 took {dt:?}");
    println!(
        "[PASS] criterion 3: scenario I power (min active {min_active:.3}, max null {max_null:.3}, \
         ols row-5 false rejection {ols_row5_null_max:.3}) ({dt:?})"
    );
}

#[test]
fn criterion_4_scenario_two_weak_association() {
    let start = std::time::Instant::now();
    let config = scenario_config(Scenario::Two);
    let result = power_experiment(
        &config,
        5000,
        200,
        &[TestMethod::SpcTest, TestMethod::PvalueOls],
        &PowerParams::default(),
        401,
    )
    .unwrap();
    let spc = result.rejection["spc_test"][2][4];
    let ols = result.rejection["pvalue_ols"][2][4];
    assert!(spc >= 0.90, "specificity power at the cancelled effect: {spc}");
    assert!(ols <= 0.20, "p-value power at the cancelled effect: {ols}");
    let dt = start.elapsed();
    println!(
        "[PASS] criterion 4: scenario II cancelled effect (specificity {spc:.3}, p-value {ols:.3}) ({dt:?})"
    );
}

#[test]
fn criterion_5_bias_contrast() {
    let start = std::time::Instant::now();
    let config = scenario_config(Scenario::One);
    let result = bias_experiment(
        &config,
        5000,
        200,
        &[Estimator::Ols, Estimator::Spc],
        501,
    )
    .unwrap();
    let spc = &result.bias["spc"];
    let ols = &result.bias["ols"];
    let mut spc_max: f64 = 0.0;
    for row in spc {
        for &j in &[0usize, 4] {
            spc_max = spc_max.max(row[j].abs());
        }
    }
    assert!(spc_max <= 0.05, "spc bias on columns 1 and 5: {spc_max}");
    // entries whose confounding contribution |delta_k * alpha_p| is at least 0.3
    let delta = population_delta(&config);
    let mut ols_min: f64 = f64::INFINITY;
    for (i, row) in ols.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if (delta[i] * config.alpha[j]).abs() >= 0.3 {
                ols_min = ols_min.min(cell.abs());
            }
        }
    }
    assert!(ols_min >= 0.20, "ols bias under heavy confounding: {ols_min}");
    let dt = start.elapsed();
    println!(
        "[PASS] criterion 5: bias contrast (spc max |bias| {spc_max:.4}, ols min |bias| {ols_min:.3}) ({dt:?})"
    );
}

#[test]
fn criterion_6_sensitivity_suite() {
    let start = std::time::Instant::now();
    let config = scenario_config(Scenario::Sensitivity { magnitude: 0.15 });
    let perturbed = spc_core::sim::sensitivity_perturbed_entries();
    let etas = [0.0, 0.2, 0.4];
    let mut runs = Vec::new();
    for &eta in &etas {
        let params = PowerParams {
            eta,
            ..PowerParams::default()
        };
        let result =
            power_experiment(&config, 5000, 200, &[TestMethod::SpcTest], &params, 601).unwrap();
        runs.push(result.rejection["spc_test"].clone());
    }
    // monotone decline on every perturbed entry, vanishing at the top of the grid
    let mut max_at_top: f64 = 0.0;
    for &(i, j) in &perturbed {
        for w in 0..etas.len() - 1 {
            assert!(
                runs[w + 1][i][j] <= runs[w][i][j] + 1e-12,
                "perturbed ({i},{j}) rejection rose between eta {} and {}",
                etas[w],
                etas[w + 1]
            );
        }
        max_at_top = max_at_top.max(runs[etas.len() - 1][i][j]);
    }
    assert!(max_at_top <= 0.10, "perturbed rejection at eta=0.4: {max_at_top}");
    let robust = ACTIVE_ENTRIES
        .iter()
        .filter(|&&(i, j)| runs.iter().all(|r| r[i][j] >= 0.90))
        .count();
    assert!(robust >= 6, "only {robust} active entries keep power across the grid");
    let dt = start.elapsed();
    println!(
        "[PASS] criterion 6: sensitivity (perturbed rejection at eta=0.4 {max_at_top:.3}, \
         {robust}/8 actives robust) ({dt:?})"
    );
}

/// Independent brute-force trimmed fit: all h-subsets by bitmask.
fn brute_force_lts(xs: &[f64], ys: &[f64], h: usize) -> (f64, f64, Vec<usize>) {
    let m = xs.len();
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != h {
            continue;
        }
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let sxx: f64 = subset.iter().map(|&i| xs[i] * xs[i]).sum();
        let sxy: f64 = subset.iter().map(|&i| xs[i] * ys[i]).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let obj: f64 = subset
            .iter()
            .map(|&i| {
                let r = ys[i] - slope * xs[i];
                r * r
            })
            .sum();
        let better = match &best {
            None => true,
            Some((bs, bo, bsub)) => {
                obj < bo - 1e-12
                    || ((obj - bo).abs() <= 1e-12
                        && (slope.abs() < bs.abs()
                            || (slope.abs() == bs.abs() && subset < *bsub)))
            }
        };
        if better {
            best = Some((slope, obj, subset));
        }
    }
    best.unwrap()
}

#[test]
fn criterion_7_lts_matches_brute_force() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for trial in 0..500 {
        let m: usize = rng.random_range(5..=12);
        let h = rng.random_range(m.div_ceil(2)..=m);
        let slope_true = signed(&mut rng, 0.2, 3.0);
        let xs: Vec<f64> = (0..m).map(|_| signed(&mut rng, 0.2, 3.0)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| {
                if rng.random_bool(0.3) {
                    signed(&mut rng, 0.0, 20.0)
                } else {
                    slope_true * x + rng.random_range(-0.5..0.5)
                }
            })
            .collect();
        let fit = lts_line_fit(&xs, &ys, h).unwrap();
        assert!(fit.exact);
        let (_, obj, subset) = brute_force_lts(&xs, &ys, h);
        assert!(
            fit.subset == subset || (fit.objective - obj).abs() <= 1e-10,
            "trial {trial}: objective {} vs oracle {obj}",
            fit.objective
        );
        assert!((fit.objective - obj).abs() <= 1e-10, "trial {trial}");
    }
    let dt = start.elapsed();
    println!("[PASS] criterion 7: exact trimmed fit matches brute force on 500/500 instances ({dt:?})");
}

fn random_gamma(rng: &mut ChaCha8Rng, k: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, p, |_, _| signed(rng, 0.1, 3.0))
}

#[test]
fn criterion_8_invariance_suite() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);

    // scale invariance: counts identical after rescaling any row or column
    for trial in 0..1000 {
        let k = rng.random_range(3..=8);
        let p = rng.random_range(3..=8);
        let g0 = random_gamma(&mut rng, k, p);
        let mut g1 = g0.clone();
        let c = signed(&mut rng, 0.5, 2.0);
        if rng.random_bool(0.5) {
            let r = rng.random_range(0..k);
            for j in 0..p {
                g1[(r, j)] *= c;
            }
        } else {
            let cc = rng.random_range(0..p);
            for i in 0..k {
                g1[(i, cc)] *= c;
            }
        }
        let ga = GammaMatrix::population(g0, 1.0);
        let gb = GammaMatrix::population(g1, 1.0);
        for i in 0..k {
            for j in 0..p {
                let la = lambda_matrix(&ga, (i, j), 1e-8);
                let lb = lambda_matrix(&gb, (i, j), 1e-8);
                let sa =
                    specificity_score(&la, ga.values[(i, j)], ScoreMode::Population, 0.0).unwrap();
                let sb =
                    specificity_score(&lb, gb.values[(i, j)], ScoreMode::Population, 0.0).unwrap();
                assert_eq!(sa.q1, sb.q1, "trial {trial} target ({i},{j})");
                assert_eq!(sa.q2, sb.q2, "trial {trial} target ({i},{j})");
            }
        }
    }

    // eta monotonicity and q1 + q2 <= 1
    for trial in 0..1000 {
        let k = rng.random_range(3..=8);
        let p = rng.random_range(3..=8);
        let g = GammaMatrix::population(random_gamma(&mut rng, k, p), 1.0);
        let i = rng.random_range(0..k);
        let j = rng.random_range(0..p);
        let lam = lambda_matrix(&g, (i, j), 1e-8);
        let mode = if rng.random_bool(0.5) {
            ScoreMode::Population
        } else {
            ScoreMode::Sample {
                n: rng.random_range(50..5000),
            }
        };
        let mut last_q1 = f64::INFINITY;
        let mut last_q2 = f64::INFINITY;
        for eta in [0.0, 0.1, 0.25, 0.5, 0.8] {
            let s = specificity_score(&lam, g.values[(i, j)], mode, eta).unwrap();
            assert!(s.q1 + s.q2 <= 1.0 + 1e-15, "trial {trial}: q1+q2 > 1");
            assert!(s.q1 <= last_q1 && s.q2 <= last_q2, "trial {trial}: not monotone");
            last_q1 = s.q1;
            last_q2 = s.q2;
        }
    }
    let dt = start.elapsed();
    println!("[PASS] criterion 8: scale invariance, eta monotonicity, q1+q2 <= 1 on 1000-trial suites ({dt:?})");
}

#[test]
fn criterion_9_bootstrap_null_calibration() {
    let start = std::time::Instant::now();
    let mut config = scenario_config(Scenario::One);
    config.beta.fill(0.0); // pure confounding
    let tau = critical_value(5, 8, 1, 4).unwrap();
    let mut rejections = 0;
    for run in 0..100 {
        let data = generate(&config, 2000, 900 + run).unwrap();
        let cfg = BootstrapConfig::new(500, 0.95, 9000 + run);
        let out = bootstrap_test(&data, (0, 0), tau, 0.0, &cfg).unwrap();
        if out.reject {
            rejections += 1;
        }
    }
    assert!(rejections <= 10, "null BSPC rejected {rejections}/100 runs");
    let dt = start.elapsed();
    println!("[PASS] criterion 9: BSPC null calibration ({rejections}/100 rejections) ({dt:?})");
}

#[test]
fn criterion_10_mr_reduction_recovers_coefficients() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for trial in 0..100 {
        let l = rng.random_range(4..=12);
        let k = rng.random_range(3..=l.min(6));
        let p = rng.random_range(3..=8);
        let d = DMatrix::from_fn(l, k, |_, _| signed(&mut rng, 0.2, 2.0));
        let b = DMatrix::from_fn(k, p, |_, _| signed(&mut rng, 0.0, 2.0));
        let summary = MrSummary::new(
            &d * &b,
            d.clone(),
            (0..l).map(|i| format!("rs{i}")).collect(),
            (0..k).map(|i| format!("X{i}")).collect(),
            (0..p).map(|i| format!("Y{i}")).collect(),
        )
        .unwrap();
        let g = mr_reduce(&summary).unwrap();
        for (est, truth) in g.values.iter().zip(b.iter()) {
            assert!((est - truth).abs() <= 1e-10, "trial {trial}");
        }
    }
    let dt = start.elapsed();
    println!("[PASS] criterion 10: summary-statistic reduction recovers planted coefficients 100/100 ({dt:?})");
}

#[test]
fn scenario_one_population_grid_consistency() {
    // population pipeline replay: thresholds derived from the closed form
    // match the sampled pipeline's targets (sanity companion to criteria 3-6)
    let config = scenario_config(Scenario::One);
    let gamma = population_gamma(&config).unwrap();
    let cfg = ScoreConfig {
        bounds: KpBounds::Given { kstar: 1, pstar: 4 },
        ..ScoreConfig::population()
    };
    let grid = score_all_pairs(&gamma, &cfg).unwrap();
    for i in 0..5 {
        for j in 0..8 {
            assert_eq!(grid.get(i, j).reject, ACTIVE_ENTRIES.contains(&(i, j)));
        }
    }
}
