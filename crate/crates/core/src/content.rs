//! Minkowski content of sampled curves.
//!
//! The `r`-neighbourhood of the polyline is rasterized on square cells of side
//! `r/8` (a cell counts when its centre is within `r`), and `area * r^(d-2)` is
//! extrapolated to small `r` by a log-log least-squares fit over the smallest
//! radii. The grid is anchored at the curve's bounding box, so translating a
//! curve translates its rasterization exactly.

use std::collections::HashSet;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::ParamCurve;
use crate::error::{Error, Result};

pub const DIMENSION: f64 = 1.25;
/// Log-log slopes beyond this are read as vanishing (or diverging) content.
pub const SLOPE_TOLERANCE: f64 = 0.2;
const FIT_RADII: usize = 4;
const CELLS_PER_RADIUS: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentStatus {
    Finite,
    Vanishing,
    Diverging,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r: f64,
    pub area: f64,
    pub scaled: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentProfile {
    pub d: f64,
    pub rows: Vec<ProfileRow>,
    pub content: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub status: ContentStatus,
}

impl ContentProfile {
    fn from_rows(d: f64, rows: Vec<ProfileRow>) -> Self {
        let tail = &rows[rows.len().saturating_sub(FIT_RADII)..];
        if tail.iter().any(|row| row.scaled <= 0.0) {
            return ContentProfile {
                d,
                content: 0.0,
                slope: f64::NAN,
                intercept: f64::NEG_INFINITY,
                residual: 0.0,
                status: ContentStatus::Vanishing,
                rows,
            };
        }
        let xs: Vec<f64> = tail.iter().map(|row| row.r.ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|row| row.scaled.ln()).collect();
        let (slope, intercept, residual) = fit_line(&xs, &ys);
        let r_min = tail.last().unwrap().r;
        let value = (intercept + slope * r_min.ln()).exp();
        let (content, status) = if slope > SLOPE_TOLERANCE {
            (0.0, ContentStatus::Vanishing)
        } else if slope < -SLOPE_TOLERANCE {
            (value, ContentStatus::Diverging)
        } else {
            (value, ContentStatus::Finite)
        };
        ContentProfile { d, rows, content, slope, intercept, residual, status }
    }

    /// CSV of (r, area, scaled).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,area,scaled")?;
        for row in &self.rows {
            writeln!(w, "{},{},{}", row.r, row.area, row.scaled)?;
        }
        Ok(())
    }
}

/// Least squares `y = a x + b`; returns slope, intercept and RMS residual.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if n < 2.0 || sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

fn seg_dist2(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    let s = if len2 > 0.0 { (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - a - ab * s).norm_sqr()
}

/// Cells of the `r`-neighbourhood of a polyline.
struct Raster {
    origin: Complex64,
    cell: f64,
    r: f64,
}

impl Raster {
    fn new(points: &[Complex64], r: f64) -> Self {
        let x0 = points.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
        let y0 = points.iter().map(|p| p.im).fold(f64::INFINITY, f64::min);
        Raster { origin: Complex64::new(x0 - r, y0 - r), cell: r / CELLS_PER_RADIUS, r }
    }

    fn center(&self, key: (i64, i64)) -> Complex64 {
        self.origin + Complex64::new((key.0 as f64 + 0.5) * self.cell, (key.1 as f64 + 0.5) * self.cell)
    }

    /// Calls `f` on every cell within `r` of the segment `[a, b]`.
    fn cover<F: FnMut((i64, i64))>(&self, a: Complex64, b: Complex64, mut f: F) {
        let lo = (a.re.min(b.re) - self.r, a.im.min(b.im) - self.r);
        let hi = (a.re.max(b.re) + self.r, a.im.max(b.im) + self.r);
        let idx = |v: f64, o: f64| ((v - o) / self.cell - 0.5).floor() as i64;
        let (i0, j0) = (idx(lo.0, self.origin.re), idx(lo.1, self.origin.im));
        let (i1, j1) = (idx(hi.0, self.origin.re) + 1, idx(hi.1, self.origin.im) + 1);
        let r2 = self.r * self.r;
        for i in i0..=i1 {
            for j in j0..=j1 {
                if seg_dist2(self.center((i, j)), a, b) < r2 {
                    f((i, j));
                }
            }
        }
    }

    fn cells(&self, points: &[Complex64]) -> Vec<(i64, i64)> {
        let mut keys = Vec::new();
        if points.len() == 1 {
            self.cover(points[0], points[0], |k| keys.push(k));
        }
        for w in points.windows(2) {
            self.cover(w[0], w[1], |k| keys.push(k));
        }
        keys.sort_unstable();
        keys.dedup();
        keys
    }
}

fn median_step(points: &[Complex64]) -> f64 {
    let mut steps: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).filter(|s| *s > 0.0).collect();
    if steps.is_empty() {
        return 0.0;
    }
    let mid = steps.len() / 2;
    *steps.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Dyadic radii from a quarter of the diameter down to four sampling steps, at
/// least four of them.
pub fn default_radii(curve: &ParamCurve) -> Vec<f64> {
    let pts = curve.points();
    let diam = bbox_diameter(pts);
    if diam == 0.0 {
        return (0..FIT_RADII).map(|k| 0.5f64.powi(k as i32)).collect();
    }
    let floor = 4.0 * median_step(pts);
    let mut radii = vec![diam / 4.0];
    while radii.len() < FIT_RADII || radii.last().unwrap() / 2.0 >= floor {
        let next = radii.last().unwrap() / 2.0;
        radii.push(next);
    }
    radii
}

fn bbox_diameter(pts: &[Complex64]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    (x1 - x0).hypot(y1 - y0)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Precondition("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("radii must be strictly decreasing".into()));
    }
    Ok(())
}

/// Content profile of the whole curve.
pub fn content_profile(curve: &ParamCurve, d: f64, radii: &[f64]) -> Result<ContentProfile> {
    Ok(shell_profiles(curve, d, radii, &[(0.0, f64::INFINITY)])?.remove(0))
}

/// Profiles of the curve restricted to each shell `s <= |z| < r` (cells are
/// assigned by the position of their centres, so shells add up exactly).
pub fn shell_profiles(curve: &ParamCurve, d: f64, radii: &[f64], shells: &[(f64, f64)]) -> Result<Vec<ContentProfile>> {
    check_radii(radii)?;
    for &(s, r) in shells {
        if !(s >= 0.0 && s < r) {
            return Err(Error::Precondition(format!("need 0 <= s < r, got ({s}, {r})")));
        }
    }
    let pts = curve.points();
    let mut rows: Vec<Vec<ProfileRow>> = vec![Vec::with_capacity(radii.len()); shells.len()];
    for &eps in radii {
        let raster = Raster::new(pts, eps);
        let cells = raster.cells(pts);
        let mut counts = vec![0usize; shells.len()];
        for key in cells {
            let m = raster.center(key).norm();
            for (c, &(s, r)) in counts.iter_mut().zip(shells) {
                if m >= s && m < r {
                    *c += 1;
                }
            }
        }
        for (row, c) in rows.iter_mut().zip(counts) {
            let area = c as f64 * raster.cell * raster.cell;
            row.push(ProfileRow { r: eps, area, scaled: area * eps.powf(d - 2.0) });
        }
    }
    Ok(rows.into_iter().map(|r| ContentProfile::from_rows(d, r)).collect())
}

/// Content of the curve inside the annulus `s <= |z| < r`, with the radii of
/// the whole curve.
pub fn annulus_content(curve: &ParamCurve, s: f64, r: f64, d: f64) -> Result<f64> {
    let radii = default_radii(curve);
    Ok(shell_profiles(curve, d, &radii, &[(s, r)])?[0].content)
}

/// Reparametrizes by cumulative content of initial segments. Each prefix is
/// extrapolated with the slope fitted on the whole curve, the start point's own
/// neighbourhood is subtracted and the result rescaled so that the duration is
/// the content of the whole curve. Points that add no content are dropped.
pub fn content_parametrize(curve: &ParamCurve, d: f64) -> Result<ParamCurve> {
    let radii = default_radii(curve);
    let whole = content_profile(curve, d, &radii)?;
    if whole.status == ContentStatus::Vanishing {
        return Err(Error::Precondition(format!("the {d}-content of the curve vanishes")));
    }
    let pts = curve.points();
    let fit = &radii[radii.len() - FIT_RADII..];
    let r_min = *fit.last().unwrap();
    let mut logs = vec![0.0; pts.len()];
    for &eps in fit {
        let raster = Raster::new(pts, eps);
        let mut seen: HashSet<(i64, i64)> = HashSet::new();
        raster.cover(pts[0], pts[0], |k| {
            seen.insert(k);
        });
        let unit = raster.cell * raster.cell * eps.powf(d - 2.0);
        logs[0] += (seen.len() as f64 * unit).ln() - whole.slope * eps.ln();
        for (k, w) in pts.windows(2).enumerate() {
            raster.cover(w[0], w[1], |key| {
                seen.insert(key);
            });
            logs[k + 1] += (seen.len() as f64 * unit).ln() - whole.slope * eps.ln();
        }
    }
    let m = fit.len() as f64;
    let values: Vec<f64> = logs.iter().map(|l| (l / m + whole.slope * r_min.ln()).exp()).collect();
    let total = *values.last().unwrap();
    let scale = total / (total - values[0]);
    let mut times = vec![0.0];
    let mut points = vec![pts[0]];
    for k in 1..pts.len() {
        let t = (values[k] - values[0]) * scale;
        if t > *times.last().unwrap() {
            times.push(t);
            points.push(pts[k]);
        } else if k == pts.len() - 1 && points.len() > 1 {
            *points.last_mut().unwrap() = pts[k];
        }
    }
    ParamCurve::new(times, points)
}
