//! Monte Carlo and exact experiment drivers shared by the CLI and the
//! acceptance suite.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::content::{default_radii, content_profile, shell_profiles, DIMENSION};
use crate::error::{Error, Result};
use crate::lattice::{approximate, DomainSpec, Edge, LatticeDomain, Site};
use crate::lerw::{
    exact_distribution, map_radial, one_point_frequency, tail_escapes, ChordalSampler, RadialSampler, Target, Workspace,
};
use crate::loewner::{radial_first_hit, radial_sle2_adaptive, SleOptions};
use crate::rng;
use crate::rnweights::{
    chordal_stopped, h_ratio_check, martingale_check, reweight_exact, DiskTarget, HRatio, HRatioOptions, StopRule,
};
use crate::stats::{chi_square_gof, linear_fit, mean_se, weighted_fit, ChiSquare, Regression};

/// One point of a log-log regression: `(x, y, standard error of y)` before logs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub points: Vec<FitPoint>,
    pub regression: Regression,
}

impl ExponentFit {
    fn weighted(points: Vec<FitPoint>) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.x.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y.ln()).collect();
        let se: Vec<f64> = points.iter().map(|p| (p.se / p.y).max(1e-12)).collect();
        let regression = weighted_fit(&xs, &ys, &se);
        ExponentFit { points, regression }
    }

    fn plain(points: Vec<FitPoint>) -> Self {
        let xs: Vec<f64> = points.iter().map(|p| p.x.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.y.ln()).collect();
        let regression = linear_fit(&xs, &ys);
        ExponentFit { points, regression }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,se")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.se)?;
        }
        Ok(())
    }
}

/// Lattice approximation with start edge nearest `N a` and the scale.
pub fn setup(spec: &DomainSpec, n: u32) -> Result<(LatticeDomain, Edge, Edge)> {
    let domain = approximate(spec, n)?;
    let a = domain.nearest_boundary_edge(spec.a(), n);
    let b = domain.nearest_boundary_edge(spec.b(), n);
    Ok((domain, a, b))
}

/// Dyadic-ish radii between `lo` and `hi` (ratio `sqrt 2`), rounded to integers.
fn radii_between(lo: f64, hi: f64) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::new();
    let mut r = lo;
    while r <= hi + 1e-9 {
        let k = r.round() as i32;
        if out.last() != Some(&k) {
            out.push(k);
        }
        r *= std::f64::consts::SQRT_2;
    }
    out
}

/// `P{z in eta}` for radial LERW against `|z|`, averaged over the four axis
/// directions, for `8 <= |z| <= N/4`.
pub fn one_point_exponent(spec: &DomainSpec, n: u32, samples: u64, seed: u64) -> Result<ExponentFit> {
    let (domain, a, _) = setup(spec, n)?;
    let radii = radii_between(8.0, n as f64 / 4.0);
    if radii.len() < 2 {
        return Err(Error::Precondition(format!("N = {n} leaves fewer than two radii in [8, N/4]")));
    }
    let mut sites = Vec::new();
    for &r in &radii {
        sites.extend([Site::new(r, 0), Site::new(0, r), Site::new(-r, 0), Site::new(0, -r)]);
    }
    let freq = one_point_frequency(&domain, a, &sites, samples, seed)?;
    let points = radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let f = &freq[4 * k..4 * k + 4];
            let y = f.iter().map(|s| s.frequency).sum::<f64>() / 4.0;
            let se = f.iter().map(|s| s.stderr.powi(2)).sum::<f64>().sqrt() / 4.0;
            FitPoint { x: r as f64, y, se }
        })
        .collect();
    Ok(ExponentFit::weighted(points))
}

/// Mean number of steps of radial LERW against `N`.
pub fn length_exponent(spec: &DomainSpec, ns: &[u32], samples: u64, seed: u64) -> Result<ExponentFit> {
    if ns.len() < 2 || samples < 2 {
        return Err(Error::Precondition("length regression needs at least two scales and two samples".into()));
    }
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let (domain, a, _) = setup(spec, n)?;
        let sampler = RadialSampler::new(&domain, a)?;
        let steps: Vec<f64> = map_radial(&sampler, samples, seed, &format!("length-{n}"), |p, _| p.len() as f64);
        let (m, se) = mean_se(&steps);
        points.push(FitPoint { x: n as f64, y: m, se });
    }
    Ok(ExponentFit::weighted(points))
}

/// Adaptive radial SLE_2 settings used for content measurements.
pub fn content_options() -> SleOptions {
    SleOptions { dt: 2e-3, max_jump: Some(1.0 / 256.0), focus: Some(0.5), max_halvings: 14 }
}

pub const CONTENT_CAPACITY: f64 = 2.5;
/// Neighbourhood radii for shell contents (fixed across shells).
pub const CONTENT_RADII: [f64; 4] = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
pub const CONTENT_SHELLS: [f64; 4] = [1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5];

/// Mean `5/4`-content of radial SLE_2 inside `|z| < r` against `r`.
pub fn content_exponent(samples: u64, seed: u64) -> Result<ExponentFit> {
    if samples < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let shells: Vec<(f64, f64)> = CONTENT_SHELLS.iter().map(|&r| (0.0, r)).collect();
    let per: Vec<Result<Vec<f64>>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let g = radial_sle2_adaptive(CONTENT_CAPACITY, content_options(), rng::stream(seed, "content", i))?;
            let ps = shell_profiles(&g.trace()?, DIMENSION, &CONTENT_RADII, &shells)?;
            Ok(ps.iter().map(|p| p.content).collect())
        })
        .collect();
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let points = CONTENT_SHELLS
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let (m, se) = mean_se(&per.iter().map(|v| v[k]).collect::<Vec<_>>());
            FitPoint { x: r, y: m, se }
        })
        .collect();
    Ok(ExponentFit::plain(points))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub s: f64,
    pub p: f64,
    pub se: f64,
}

/// Probability that radial LERW, after first entering `|z| < s^2 N`, leaves
/// `|z| < s N` again.
pub fn tail_profile(spec: &DomainSpec, n: u32, ss: &[f64], samples: u64, seed: u64) -> Result<Vec<TailRow>> {
    let (domain, a, _) = setup(spec, n)?;
    let sampler = RadialSampler::new(&domain, a)?;
    let nf = n as f64;
    let hits: Vec<Vec<bool>> = map_radial(&sampler, samples, seed, "tail", |p, _| {
        let path: Vec<Site> = p.iter().map(|&i| sampler.site(i)).collect();
        ss.iter().map(|&s| tail_escapes(&path, nf, s)).collect()
    });
    Ok(ss
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let p = hits.iter().filter(|h| h[k]).count() as f64 / samples as f64;
            TailRow { s, p, se: (p * (1.0 - p) / samples as f64).sqrt() }
        })
        .collect())
}

/// Tail rows (ordered by decreasing `s`) are non-increasing and `p(s) / s`
/// stays below the ratio at the largest `s`, both up to two standard errors.
pub fn tail_regular(rows: &[TailRow]) -> bool {
    let first = rows[0];
    let c = first.p / first.s;
    let monotone = rows.windows(2).all(|w| w[1].p <= w[0].p + 2.0 * (w[0].se.hypot(w[1].se)));
    let bounded = rows.iter().all(|r| r.p <= c * r.s + 2.0 * r.se.hypot(r.s / first.s * first.se));
    monotone && bounded
}

/// Angles of the first vertices of radial LERW paths inside `|z| <= r N`.
pub fn lerw_first_hit_angles(spec: &DomainSpec, n: u32, r: f64, samples: u64, seed: u64) -> Result<Vec<f64>> {
    let (domain, a, _) = setup(spec, n)?;
    let sampler = RadialSampler::new(&domain, a)?;
    let lim = r * n as f64;
    Ok(map_radial(&sampler, samples, seed, "first-hit-lerw", |p, _| {
        let z = p.iter().map(|&i| sampler.site(i)).find(|s| s.norm() <= lim).unwrap_or(Site::ORIGIN);
        z.to_complex().arg()
    }))
}

/// Angles where radial SLE_2 from 1 first reaches `|z| = r`.
pub fn sle_first_hit_angles(r: f64, samples: u64, seed: u64) -> Result<Vec<f64>> {
    let v: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let opts = SleOptions::adaptive(1e-3, 0.02);
            Ok(radial_first_hit(r, 50.0, opts, rng::stream(seed, "first-hit-sle", i))?.arg())
        })
        .collect();
    v.into_iter().collect()
}

/// Mean and standard error of `M^SLE` over guarded chordal SLE_2 samples in the
/// disk from 1 to -1, stopped at capacity `t` or sine `delta`.
pub fn sle_weight_mean(t: f64, delta: f64, samples: u64, seed: u64) -> Result<(f64, f64)> {
    let stop = StopRule::capacity(t).with_sine_floor(delta);
    let target = DiskTarget::new(std::f64::consts::PI)?;
    let w: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = chordal_stopped(&stop, &target, t, SleOptions::adaptive(1e-3, 0.02), rng::stream(seed, "m-sle", i))?;
            Ok(s.weight)
        })
        .collect();
    Ok(mean_se(&w.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Summary of exact checks over a family of small domains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub cases: usize,
    pub max_deviation: f64,
    pub max_total_variation: f64,
    pub max_excluded_mass: f64,
}

/// Pearson test of the exact LERW sampler (radial when `target` is the origin)
/// against the enumerated law. Paths missing from the enumeration get their
/// own cell of expected count zero, which forces a failure.
pub fn sampler_gof(domain: &LatticeDomain, a: Edge, target: Target, samples: u64, seed: u64) -> Result<ChiSquare> {
    let exact = exact_distribution(domain, a, target)?;
    let index: HashMap<Vec<Site>, usize> = exact.iter().enumerate().map(|(i, (s, _))| (s.vertices().to_vec(), i)).collect();
    let mut probs: Vec<f64> = exact.iter().map(|(_, p)| *p).collect();
    probs.push(0.0);
    let missing = probs.len() - 1;
    let draw = |f: &(dyn Fn(&mut rng::LabRng, &mut Workspace) -> crate::saw::Saw + Sync)| -> Vec<usize> {
        (0..samples)
            .into_par_iter()
            .map_init(Workspace::default, |ws, i| {
                let mut r = rng::stream(seed, "sampler-gof", i);
                index.get(f(&mut r, ws).vertices()).copied().unwrap_or(missing)
            })
            .collect()
    };
    let hits = match target {
        Target::Origin => {
            let s = RadialSampler::new(domain, a)?;
            draw(&|r, ws| s.sample(r, ws))
        }
        Target::Edge(b) => {
            let s = ChordalSampler::new(domain, a, b)?;
            draw(&|r, ws| s.sample(r, ws))
        }
    };
    let mut counts = vec![0u64; probs.len()];
    for h in hits {
        counts[h] += 1;
    }
    if counts[missing] > 0 {
        return Ok(ChiSquare { statistic: f64::INFINITY, dof: probs.len() - 1, p_value: 0.0 });
    }
    Ok(chi_square_gof(&counts, &probs, 5.0))
}

/// Small domains for the exhaustive weight checks: all simply connected
/// domains up to `max_size` sites plus the 3x3 square.
pub fn exact_family(max_size: usize) -> Vec<LatticeDomain> {
    let mut v = crate::lattice::enumerate_domains(max_size);
    v.push(LatticeDomain::rectangle(-1, 1, -1, 1).expect("square"));
    v
}

/// Martingale and stopped-law checks for every ordered pair of boundary edges
/// of every domain, with stops after `1..=max_steps` steps.
pub fn exact_weight_checks(domains: &[LatticeDomain], max_steps: usize) -> Result<ExactSummary> {
    let per: Vec<Result<ExactSummary>> = domains
        .par_iter()
        .map(|d| {
            let mut s = ExactSummary::default();
            for &a in d.boundary_edges() {
                for &b in d.boundary_edges() {
                    if a == b {
                        continue;
                    }
                    let m = martingale_check(d, a, b)?;
                    s.max_deviation = s.max_deviation.max(m.max_deviation);
                    for j in 1..=max_steps {
                        let r = reweight_exact(d, a, b, &StopRule::steps(j), 1.0)?;
                        s.max_total_variation = s.max_total_variation.max(r.total_variation);
                        s.max_excluded_mass = s.max_excluded_mass.max(r.excluded_radial_mass);
                    }
                    s.cases += 1;
                }
            }
            Ok(s)
        })
        .collect();
    let mut out = ExactSummary::default();
    for s in per {
        let s = s?;
        out.cases += s.cases;
        out.max_deviation = out.max_deviation.max(s.max_deviation);
        out.max_total_variation = out.max_total_variation.max(s.max_total_variation);
        out.max_excluded_mass = out.max_excluded_mass.max(s.max_excluded_mass);
    }
    Ok(out)
}

/// 4-connected lattice path from the start edge of `spec` at scale `n`
/// following the straight segment towards 0, up to and including its first
/// vertex in `|z| < s`.
pub fn straight_path(domain: &LatticeDomain, a: Edge, s: f64) -> Result<Vec<Site>> {
    let start = a.inner;
    let dir = -start.to_complex();
    let len = dir.norm();
    let mut path = vec![a.outer, start];
    let mut cur = start;
    while cur.norm() >= s {
        if cur == Site::ORIGIN {
            break;
        }
        // step to the neighbour closest to the segment that makes progress
        let next = cur
            .neighbors()
            .into_iter()
            .filter(|v| v.norm() < cur.norm())
            .min_by(|p, q| {
                let dist = |v: &Site| {
                    let z = v.to_complex() - start.to_complex();
                    (z * dir.conj()).im.abs() / len
                };
                dist(p).total_cmp(&dist(q))
            })
            .ok_or_else(|| Error::InvalidPath("no progress towards 0".into()))?;
        if !domain.contains(next) {
            return Err(Error::PathLeavesDomain(next));
        }
        path.push(next);
        cur = next;
    }
    Ok(path)
}

/// Harmonic-ratio comparisons for a straight path from `a` towards 0 stopped at
/// radius `r N`, target `b` of the spec, at each scale.
pub fn h_ratio_study(spec: &DomainSpec, ns: &[u32], r: f64, delta: f64, refinement: u32, budget: usize) -> Result<Vec<(u32, HRatio)>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let (domain, a, b) = setup(spec, n)?;
        let s = r * n as f64;
        let eta = straight_path(&domain, a, s)?;
        let opts = HRatioOptions { s, delta, refinement, budget };
        out.push((n, h_ratio_check(&domain, &eta, b, &opts)?));
    }
    Ok(out)
}

/// Planted or measured mean step counts at several scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CstarRow {
    pub n: u32,
    pub mean_steps: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CstarFit {
    pub c_star: f64,
    pub se: f64,
    pub ci: (f64, f64),
    /// Per-scale estimates `E[k - 1/2] / (N^{5/4} content)`.
    pub per_scale: Vec<(u32, f64, f64)>,
    /// Slope of the per-scale estimates against `log N`, with its error.
    pub trend: f64,
    pub trend_se: f64,
    pub flat: bool,
}

/// `c_star` making the mean rescaled duration `(k - 1/2) / (c N^{5/4})` equal
/// to `target` at every scale: inverse-variance mean of the per-scale values.
pub fn fit_cstar(rows: &[CstarRow], target: f64) -> Result<CstarFit> {
    if rows.len() < 3 {
        return Err(Error::Precondition("c_star calibration needs at least three scales".into()));
    }
    if !(target > 0.0) {
        return Err(Error::Precondition("target duration must be positive".into()));
    }
    let per_scale: Vec<(u32, f64, f64)> = rows
        .iter()
        .map(|r| {
            let unit = (r.n as f64).powf(1.25) * target;
            (r.n, (r.mean_steps - 0.5) / unit, r.se.max(1e-300) / unit)
        })
        .collect();
    let wsum: f64 = per_scale.iter().map(|p| 1.0 / (p.2 * p.2)).sum();
    let c_star = per_scale.iter().map(|p| p.1 / (p.2 * p.2)).sum::<f64>() / wsum;
    let se = (1.0 / wsum).sqrt();
    let xs: Vec<f64> = per_scale.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = per_scale.iter().map(|p| p.1).collect();
    let ses: Vec<f64> = per_scale.iter().map(|p| p.2).collect();
    let reg = weighted_fit(&xs, &ys, &ses);
    let flat = reg.slope.abs() <= 2.0 * reg.slope_se;
    Ok(CstarFit {
        c_star,
        se,
        ci: (c_star - 1.96 * se, c_star + 1.96 * se),
        per_scale,
        trend: reg.slope,
        trend_se: reg.slope_se,
        flat,
    })
}

/// Mean `5/4`-content of radial SLE_2 in the unit disk up to capacity `t`.
pub fn sle_mean_content(t: f64, samples: u64, seed: u64) -> Result<(f64, f64)> {
    let opts = SleOptions { dt: 2e-3, max_jump: Some(1.0 / 128.0), focus: Some(0.5), max_halvings: 14 };
    let v: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let tr = radial_sle2_adaptive(t, opts, rng::stream(seed, "sle-content", i))?.trace()?;
            Ok(content_profile(&tr, DIMENSION, &default_radii(&tr))?.content)
        })
        .collect();
    Ok(mean_se(&v.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Mean radial LERW step counts at each scale.
pub fn lerw_mean_steps(spec: &DomainSpec, ns: &[u32], samples: u64, seed: u64) -> Result<Vec<CstarRow>> {
    ns.iter()
        .map(|&n| {
            let (domain, a, _) = setup(spec, n)?;
            let sampler = RadialSampler::new(&domain, a)?;
            let steps: Vec<f64> = map_radial(&sampler, samples, seed, &format!("cstar-{n}"), |p, _| p.len() as f64);
            let (m, se) = mean_se(&steps);
            Ok(CstarRow { n, mean_steps: m, se })
        })
        .collect()
}

/// Unit disk with `a = 1` and `b = i`.
pub fn quarter_disk_spec() -> DomainSpec {
    DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, 0.0, std::f64::consts::FRAC_PI_2)
}
