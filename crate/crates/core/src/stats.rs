//! Small statistical helpers shared by the experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope x + intercept` with the standard error of
/// the slope (zero when there are only two points).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Regression {
    let n = xs.len();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Regression { slope, intercept, slope_se, points: n }
}

/// Weighted least squares with weights `1/se^2`; the slope error comes from the
/// supplied errors.
pub fn weighted_fit(xs: &[f64], ys: &[f64], se: &[f64]) -> Regression {
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(xs).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let slope = w.iter().zip(xs).zip(ys).map(|((w, x), y)| w * (x - mx) * (y - my)).sum::<f64>() / sxx;
    Regression { slope, intercept: my - slope * mx, slope_se: (1.0 / sxx).sqrt(), points: xs.len() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of observed counts against expected probabilities.
/// Cells with expected count below `min_expected` are pooled together.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> ChiSquare {
    let total: u64 = observed.iter().sum();
    let nt = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * nt;
        if e < min_expected {
            pool.0 += o as f64;
            pool.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool.1 > 0.0 {
        cells.push(pool);
    }
    two_way_or_gof(&cells)
}

fn two_way_or_gof(cells: &[(f64, f64)]) -> ChiSquare {
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquare { statistic, dof, p_value: chi_square_sf(statistic, dof) }
}

fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof as f64).unwrap().cdf(x)
}

/// Chi-square comparison of two weighted histograms over the same bins. Each
/// sample carries the weighted counts and the sum of squared weights per bin
/// (equal to the counts for unit weights).
pub fn chi_square_two_sample(a: &[(f64, f64)], b: &[(f64, f64)], min_count: f64) -> ChiSquare {
    let ta: f64 = a.iter().map(|x| x.0).sum();
    let tb: f64 = b.iter().map(|x| x.0).sum();
    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut pool = [(0.0, 0.0), (0.0, 0.0)];
    let mut term = |ca: (f64, f64), cb: (f64, f64)| {
        let (pa, pb) = (ca.0 / ta, cb.0 / tb);
        let var = ca.1 / (ta * ta) + cb.1 / (tb * tb);
        if var > 0.0 {
            statistic += (pa - pb).powi(2) / var;
            dof += 1;
        }
    };
    for (ca, cb) in a.iter().zip(b) {
        if ca.0 + cb.0 < min_count {
            pool[0].0 += ca.0;
            pool[0].1 += ca.1;
            pool[1].0 += cb.0;
            pool[1].1 += cb.1;
        } else {
            term(*ca, *cb);
        }
    }
    if pool[0].0 + pool[1].0 > 0.0 {
        term(pool[0], pool[1]);
    }
    // Proportions sum to one on both sides, which removes one degree of freedom.
    let dof = dof.saturating_sub(1);
    ChiSquare { statistic, dof, p_value: chi_square_sf(statistic, dof) }
}

/// Two-sample Kolmogorov-Smirnov statistic between weighted samples.
pub fn ks_weighted(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<(f64, f64, bool)> = a.iter().map(|&(x, w)| (x, w, true)).chain(b.iter().map(|&(x, w)| (x, w, false))).collect();
    xs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let wa: f64 = a.iter().map(|x| x.1).sum();
    let wb: f64 = b.iter().map(|x| x.1).sum();
    let (mut fa, mut fb, mut d) = (0.0f64, 0.0f64, 0.0f64);
    let mut k = 0;
    while k < xs.len() {
        let x = xs[k].0;
        while k < xs.len() && xs[k].0 == x {
            if xs[k].2 {
                fa += xs[k].1 / wa;
            } else {
                fb += xs[k].1 / wb;
            }
            k += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let wa: Vec<(f64, f64)> = a.iter().map(|&x| (x, 1.0)).collect();
    let wb: Vec<(f64, f64)> = b.iter().map(|&x| (x, 1.0)).collect();
    ks_weighted(&wa, &wb)
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Kish effective sample size of a set of weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 { 0.0 } else { s * s / s2 }
}
