//! Distances between parametrized curves.
//!
//! `rho` minimizes `sup |alpha(t) - t| + sup |c1(t) - c2(alpha(t))|` over
//! increasing reparametrizations; the discrete version ranges over monotone
//! staircase alignments of the two sample grids. `rho_hat` compares the curves
//! in their own time, holding each constant after its duration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::ParamCurve;
use crate::error::{Error, Result};

/// Above this many distinct time deviations the thresholds are thinned.
pub const EXACT_THRESHOLDS: usize = 512;

/// Monotone correspondence between two sample grids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pairs: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.first() != Some(&(0, 0)) {
            return Err(Error::Precondition("alignment must start at (0, 0)".into()));
        }
        for w in pairs.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(Error::Precondition(format!("non-staircase step {:?} -> {:?}", w[0], w[1])));
            }
        }
        Ok(Alignment { pairs })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `(max time deviation, max spatial deviation)` along the alignment.
    pub fn costs(&self, c1: &ParamCurve, c2: &ParamCurve) -> (f64, f64) {
        self.pairs.iter().fold((0.0, 0.0), |(a, b), &(i, j)| {
            (
                f64::max(a, (c1.times()[i] - c2.times()[j]).abs()),
                f64::max(b, (c1.points()[i] - c2.points()[j]).norm()),
            )
        })
    }

    /// CSV of index pairs.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j")?;
        for (i, j) in &self.pairs {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }
}

/// Bottleneck (min-max spatial cost) staircase path restricted to cells whose
/// time deviation is at most `tau`.
fn bottleneck(tcost: &[f64], scost: &[f64], n: usize, m: usize, tau: f64, best: &mut Vec<f64>) -> f64 {
    best.clear();
    best.resize(n * m, f64::INFINITY);
    for i in 0..n {
        for j in 0..m {
            let c = i * m + j;
            if tcost[c] > tau {
                continue;
            }
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut p = f64::INFINITY;
                if i > 0 {
                    p = p.min(best[c - m]);
                }
                if j > 0 {
                    p = p.min(best[c - 1]);
                }
                if i > 0 && j > 0 {
                    p = p.min(best[c - m - 1]);
                }
                p
            };
            if prev.is_finite() {
                best[c] = prev.max(scost[c]);
            }
        }
    }
    best[n * m - 1]
}

fn backtrack(best: &[f64], n: usize, m: usize) -> Vec<(usize, usize)> {
    let (mut i, mut j) = (n - 1, m - 1);
    let mut pairs = vec![(i, j)];
    while (i, j) != (0, 0) {
        let mut cand = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            cand.push((i - 1, j - 1));
        }
        if i > 0 {
            cand.push((i - 1, j));
        }
        if j > 0 {
            cand.push((i, j - 1));
        }
        let next = cand.into_iter().min_by(|a, b| best[a.0 * m + a.1].total_cmp(&best[b.0 * m + b.1])).unwrap();
        (i, j) = next;
        pairs.push(next);
    }
    pairs.reverse();
    pairs
}

/// Discrete `rho` with its optimal alignment. Exact over staircase alignments
/// when the number of distinct time deviations is at most `EXACT_THRESHOLDS`;
/// otherwise an upper bound from a thinned threshold set.
pub fn rho(c1: &ParamCurve, c2: &ParamCurve) -> (f64, Alignment) {
    let (n, m) = (c1.len(), c2.len());
    let mut tcost = Vec::with_capacity(n * m);
    let mut scost = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            tcost.push((c1.times()[i] - c2.times()[j]).abs());
            scost.push((c1.points()[i] - c2.points()[j]).norm());
        }
    }
    let floor = tcost[0].max(tcost[n * m - 1]);
    let mut taus: Vec<f64> = tcost.iter().copied().filter(|t| *t >= floor).collect();
    taus.sort_unstable_by(f64::total_cmp);
    taus.dedup();
    if taus.len() > EXACT_THRESHOLDS {
        let stride = taus.len().div_ceil(EXACT_THRESHOLDS);
        let last = *taus.last().unwrap();
        taus = taus.into_iter().step_by(stride).collect();
        if *taus.last().unwrap() != last {
            taus.push(last);
        }
    }
    let mut scratch = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_tau = *taus.last().unwrap();
    for &tau in &taus {
        if tau >= best_val {
            break;
        }
        let f = bottleneck(&tcost, &scost, n, m, tau, &mut scratch);
        if tau + f < best_val {
            best_val = tau + f;
            best_tau = tau;
        }
    }
    bottleneck(&tcost, &scost, n, m, best_tau, &mut scratch);
    let alignment = Alignment { pairs: backtrack(&scratch, n, m) };
    let (a, b) = alignment.costs(c1, c2);
    (a + b, alignment)
}

/// `|t1 - t2| + sup_t |c1(t ^ t1) - c2(t ^ t2)|`, exact for piecewise linear curves.
pub fn rho_hat(c1: &ParamCurve, c2: &ParamCurve) -> f64 {
    let mut times: Vec<f64> = c1.times().iter().chain(c2.times()).copied().collect();
    times.sort_unstable_by(f64::total_cmp);
    times.dedup();
    let sup = times.iter().map(|&t| (c1.eval(t) - c2.eval(t)).norm()).fold(0.0, f64::max);
    (c1.duration() - c2.duration()).abs() + sup
}
