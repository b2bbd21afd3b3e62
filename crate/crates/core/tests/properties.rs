//! Property tests over arbitrary inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use spc_core::specificity::{
    critical_value, lambda_matrix, specificity_score, specificity_test, ScoreMode,
};
use spc_core::{lts_line_fit, GammaMatrix};

fn gamma_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (3usize..7, 3usize..7).prop_flat_map(|(k, p)| {
        proptest::collection::vec(-50.0f64..50.0, k * p)
            .prop_map(move |v| DMatrix::from_vec(k, p, v))
    })
}

proptest! {
    #[test]
    fn score_parts_are_consistent(
        g in gamma_strategy(),
        eta in 0.0f64..0.95,
        n in 2usize..100_000,
        population: bool,
        ti in 0usize..7,
        tj in 0usize..7,
    ) {
        let target = (ti % g.nrows(), tj % g.ncols());
        let gamma = GammaMatrix::population(g, 1.0);
        let lam = lambda_matrix(&gamma, target, 1e-8);
        let mode = if population { ScoreMode::Population } else { ScoreMode::Sample { n } };
        let s = specificity_score(&lam, gamma.values[target], mode, eta).unwrap();
        prop_assert!(s.q1 >= 0.0 && s.q1 <= 1.0);
        prop_assert!(s.q2 >= 0.0 && s.q2 <= 1.0);
        prop_assert!(s.q1 + s.q2 <= 1.0);
        prop_assert_eq!(s.score, s.q1.max(s.q2));
        // widening eta never raises either fraction
        let wider = specificity_score(&lam, gamma.values[target], mode, (eta + 0.04).min(0.99)).unwrap();
        prop_assert!(wider.q1 <= s.q1);
        prop_assert!(wider.q2 <= s.q2);
        // the decision is the threshold comparison, nothing else
        let rep = specificity_test(&s, 0.5).unwrap();
        prop_assert_eq!(rep.reject, s.score >= 0.5);
    }

    #[test]
    fn critical_value_lies_in_unit_interval(
        k in 2usize..40,
        p in 2usize..40,
        ks in 0usize..39,
        ps in 0usize..39,
    ) {
        prop_assume!(ks < k - 1 && ps < p - 1);
        let tau = critical_value(k, p, ks, ps).unwrap();
        prop_assert!((0.0..1.0).contains(&tau));
        // monotone in each bound
        if ks + 1 < k - 1 {
            prop_assert!(critical_value(k, p, ks + 1, ps).unwrap() >= tau);
        }
    }

    #[test]
    fn trimmed_fit_objective_dominated_by_any_subset(
        xs in proptest::collection::vec(0.1f64..5.0, 6..10),
        noise in proptest::collection::vec(-3.0f64..3.0, 10),
        slope in -4.0f64..4.0,
    ) {
        let m = xs.len();
        let h = m / 2 + 1;
        let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| slope * x + e).collect();
        let fit = lts_line_fit(&xs, &ys, h).unwrap();
        // no h-subset fitted by least squares beats the reported objective
        prop_assert!(fit.subset.len() == h);
        let sxx: f64 = fit.subset.iter().map(|&i| xs[i] * xs[i]).sum();
        let sxy: f64 = fit.subset.iter().map(|&i| xs[i] * ys[i]).sum();
        let refit = sxy / sxx;
        let obj: f64 = fit.subset.iter().map(|&i| {
            let r = ys[i] - refit * xs[i];
            r * r
        }).sum();
        prop_assert!((obj - fit.objective).abs() < 1e-9);
    }
}
