//! Exact univariate least-trimmed-squares line fit through the origin.
//!
//! Minimizes the sum of the `h` smallest squared residuals `(y_i - a*x_i)^2`
//! over the slope `a`. Up to the enumeration budget the global minimum is found
//! by searching all h-subsets, using the closed-form subset slope
//! `sum(x*y)/sum(x^2)`; beyond the budget a multi-restart concentration search
//! is used and the result is flagged approximate.

use crate::error::{Error, Result};

/// Exact search is used while `C(m, h)` stays at or below this many subsets.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LtsFit {
    pub slope: f64,
    /// Trimmed residual sum at `slope` over `subset`.
    pub objective: f64,
    /// The h indices achieving the objective, ascending.
    pub subset: Vec<usize>,
    /// False when the enumeration budget forced the concentration fallback.
    pub exact: bool,
}

fn binomial(m: u64, h: u64) -> u64 {
    let h = h.min(m - h);
    let mut acc: u128 = 1;
    for i in 0..h {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

fn subset_fit(xs: &[f64], ys: &[f64], subset: &[usize]) -> (f64, f64) {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &i in subset {
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    // all-zero-x subsets leave the slope free; pick 0 per the tie rule
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut obj = 0.0;
    for &i in subset {
        let r = ys[i] - slope * xs[i];
        obj += r * r;
    }
    (slope, obj)
}

struct Best {
    slope: f64,
    objective: f64,
    subset: Vec<usize>,
}

impl Best {
    fn consider(&mut self, slope: f64, objective: f64, subset: &[usize]) {
        if objective < self.objective - TIE_TOL {
            self.slope = slope;
            self.objective = objective;
            self.subset = subset.to_vec();
            return;
        }
        if objective > self.objective + TIE_TOL {
            return;
        }
        // tie: smallest |slope|, then lexicographically smallest index set
        if slope.abs() < self.slope.abs()
            || (slope.abs() == self.slope.abs() && subset < self.subset.as_slice())
        {
            self.slope = slope;
            self.objective = objective;
            self.subset = subset.to_vec();
        }
    }
}

fn enumerate_exact(xs: &[f64], ys: &[f64], h: usize) -> Best {
    let m = xs.len();
    let mut best = Best {
        slope: f64::INFINITY,
        objective: f64::INFINITY,
        subset: Vec::new(),
    };
    // lexicographic h-combinations of 0..m
    let mut idx: Vec<usize> = (0..h).collect();
    loop {
        let (slope, obj) = subset_fit(xs, ys, &idx);
        best.consider(slope, obj, &idx);
        // advance
        let mut i = h;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] != i + m - h {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        idx[i] += 1;
        for j in i + 1..h {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// One concentration pass: keep the h smallest residuals at the current slope,
/// refit on them, and repeat until the subset stabilizes.
fn concentrate(xs: &[f64], ys: &[f64], h: usize, mut subset: Vec<usize>) -> (f64, f64, Vec<usize>) {
    let m = xs.len();
    let mut slope = 0.0;
    let mut obj = f64::INFINITY;
    for _ in 0..100 {
        let (s, _) = subset_fit(xs, ys, &subset);
        slope = s;
        let mut resid: Vec<(f64, usize)> = (0..m)
            .map(|i| {
                let r = ys[i] - slope * xs[i];
                (r * r, i)
            })
            .collect();
        resid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut next: Vec<usize> = resid[..h].iter().map(|&(_, i)| i).collect();
        next.sort_unstable();
        obj = resid[..h].iter().map(|&(r, _)| r).sum();
        if next == subset {
            break;
        }
        subset = next;
    }
    (slope, obj, subset)
}

fn concentration_search(xs: &[f64], ys: &[f64], h: usize) -> Best {
    // seeds: every contiguous window of length h in sorted y/x ratio order
    let mut ratio_order: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] != 0.0).collect();
    ratio_order.sort_by(|&a, &b| (ys[a] / xs[a]).partial_cmp(&(ys[b] / xs[b])).unwrap());
    let mut best = Best {
        slope: f64::INFINITY,
        objective: f64::INFINITY,
        subset: Vec::new(),
    };
    for w in ratio_order.windows(h) {
        let mut seed = w.to_vec();
        seed.sort_unstable();
        let (slope, obj, subset) = concentrate(xs, ys, h, seed);
        best.consider(slope, obj, &subset);
    }
    best
}

/// Least-trimmed-squares slope of `ys` on `xs` through the origin.
///
/// Requires `m >= 3`, `ceil(m/2) <= h <= m`, and at least `h` nonzero `xs`.
pub fn lts_line_fit(xs: &[f64], ys: &[f64], h: usize) -> Result<LtsFit> {
    lts_line_fit_with_budget(xs, ys, h, ENUMERATION_BUDGET)
}

pub fn lts_line_fit_with_budget(xs: &[f64], ys: &[f64], h: usize, budget: u64) -> Result<LtsFit> {
    let m = xs.len();
    if ys.len() != m {
        return Err(Error::InvalidInput(format!(
            "xs has {m} entries but ys has {}",
            ys.len()
        )));
    }
    if m < 3 {
        return Err(Error::InvalidInput(format!("need m >= 3 points, got {m}")));
    }
    if h < m.div_ceil(2) || h > m {
        return Err(Error::InvalidInput(format!(
            "trim count h={h} outside [ceil(m/2), m] = [{}, {m}]",
            m.div_ceil(2)
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite design values".into()));
    }
    let nonzero = xs.iter().filter(|v| **v != 0.0).count();
    if nonzero < h {
        return Err(Error::DegenerateDesign { h });
    }

    let exact = binomial(m as u64, h as u64) <= budget;
    let best = if exact {
        enumerate_exact(xs, ys, h)
    } else {
        concentration_search(xs, ys, h)
    };
    Ok(LtsFit {
        slope: best.slope,
        objective: best.objective,
        subset: best.subset,
        exact,
    })
}
