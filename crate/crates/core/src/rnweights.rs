//! Radon-Nikodym weights between chordal and radial processes.
//!
//! A chordal path stopped at a stopping time and weighted by `M` has the law
//! of the radial path stopped at the same time. For SLE_2 in the half-plane
//! with `w` the image of the interior target,
//! `M = (S_t / S_0)^2 Im w / Im g_t(w)`. For LERW in `A` from `a`,
//! `M = [H_{A_eta}(0, a') / H_A(0, a)] [H_dA(a, b) / H_{dA_eta}(a', b)]`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{DirichletSolver, SlitSolverFactory};
use crate::lattice::{approximate, DomainSpec, Edge, LatticeDomain, Shape, Site};
use crate::lerw::{exact_distribution, ChordalSampler, RadialSampler, Target, Workspace};
use crate::loewner::{first_entry, Geometry, LoewnerChain, SleGrower, SleOptions};
use crate::rng::{self, LabRng};
use crate::stats::effective_sample_size;

/// Stopping rule; the stop is the first time any of the set parts fires.
///
/// For lattice paths `radius` is in units of the scale `N` and `steps` counts
/// vertices after the start; the sine floor is evaluated at the stop and
/// logged. For Loewner chains `capacity` is the half-plane or disk capacity
/// of the chain being grown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub radius: Option<f64>,
    pub capacity: Option<f64>,
    pub sine_floor: Option<f64>,
    pub steps: Option<usize>,
}

impl StopRule {
    pub fn radius(r: f64) -> Self {
        StopRule { radius: Some(r), ..Default::default() }
    }

    pub fn capacity(t: f64) -> Self {
        StopRule { capacity: Some(t), ..Default::default() }
    }

    pub fn steps(j: usize) -> Self {
        StopRule { steps: Some(j), ..Default::default() }
    }

    pub fn with_sine_floor(self, delta: f64) -> Self {
        StopRule { sine_floor: Some(delta), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.radius {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Precondition(format!("stop radius must be positive, got {r}")));
            }
        }
        if let Some(t) = self.capacity {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Precondition(format!("stop capacity must be non-negative, got {t}")));
            }
        }
        if let Some(d) = self.sine_floor {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::Precondition(format!("sine floor must lie in (0, 1), got {d}")));
            }
        }
        if self.radius.is_none() && self.capacity.is_none() && self.steps.is_none() && self.sine_floor.is_none() {
            return Err(Error::Precondition("empty stop rule".into()));
        }
        Ok(())
    }

    /// Stopping index of a lattice path (first vertex is outside the domain):
    /// the first `j >= 1` at which the rule fires, the path reaches the origin,
    /// or the path ends.
    pub fn lattice_index(&self, path: &[Site], n: f64) -> usize {
        let last = path.len() - 1;
        (1..=last)
            .find(|&j| {
                path[j] == Site::ORIGIN
                    || j == last
                    || self.steps.is_some_and(|s| j >= s)
                    || self.radius.is_some_and(|r| path[j].norm() <= r * n)
            })
            .unwrap_or(last)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Radius,
    Capacity,
    Steps,
    Sine,
    /// Target reached (lattice) or capacity horizon exhausted (SLE).
    Exhausted,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Radius => "radius",
            StopReason::Capacity => "capacity",
            StopReason::Steps => "steps",
            StopReason::Sine => "sine",
            StopReason::Exhausted => "exhausted",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSample {
    pub id: u64,
    pub position: Complex64,
    pub weight: f64,
    /// Sine at the stop (NaN when not evaluated).
    pub sine: f64,
    pub reason: StopReason,
    /// Guard violated (sine at or below the floor, or not stopped by the rule).
    pub excluded: bool,
}

/// Weighted stopped samples. Excluded samples keep their weight for the
/// bookkeeping but do not enter comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEnsemble {
    pub samples: Vec<WeightedSample>,
    pub note: String,
}

impl WeightedEnsemble {
    pub fn retained(&self) -> impl Iterator<Item = &WeightedSample> {
        self.samples.iter().filter(|s| !s.excluded)
    }

    pub fn total_weight(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    pub fn excluded_weight(&self) -> f64 {
        self.samples.iter().filter(|s| s.excluded).map(|s| s.weight).sum()
    }

    /// Mean weight over all samples.
    pub fn mean_weight(&self) -> f64 {
        self.total_weight() / self.samples.len() as f64
    }

    /// Effective sample size of the retained weights.
    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.retained().map(|s| s.weight).collect::<Vec<_>>())
    }

    /// `(angle in (-pi, pi], weight)` of the retained stopped positions.
    pub fn angles(&self) -> Vec<(f64, f64)> {
        self.retained().map(|s| (s.position.arg(), s.weight)).collect()
    }

    /// Weighted counts and squared-weight sums in `bins` equal angular bins.
    pub fn angle_histogram(&self, bins: usize) -> Vec<(f64, f64)> {
        let mut h = vec![(0.0, 0.0); bins];
        for (a, w) in self.angles() {
            let k = (((a + PI) / (2.0 * PI)) * bins as f64).floor() as usize;
            let k = k.min(bins - 1);
            h[k].0 += w;
            h[k].1 += w * w;
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id,x,y,weight,sine,reason,excluded")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.id,
                s.position.re,
                s.position.im,
                s.weight,
                s.sine,
                s.reason.as_str(),
                s.excluded
            )?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// SLE

/// `(S_t / S_0)^2 Im w / Im g_t(w)` for a chordal chain in the upper half-plane.
pub fn m_sle(chain: &LoewnerChain, w: Complex64) -> Result<f64> {
    let z0 = w - chain.drive()[0];
    let s0 = z0.im / z0.norm();
    let s = chain.sine_chordal(w)?;
    if !(s > 0.0) {
        return Err(Error::SineFloor { value: s, floor: 0.0 });
    }
    Ok((s / s0).powi(2) * chain.im_ratio(w)?)
}

/// Unit disk with `a = 1` and `b = e^{i beta}`, with the Möbius map to the upper
/// half-plane sending `a` to 0 and `b` to infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskTarget {
    pub beta: f64,
    lambda: Complex64,
}

impl DiskTarget {
    pub fn new(beta: f64) -> Result<Self> {
        let eb = Complex64::cis(beta);
        if (eb - 1.0).norm() < 1e-9 {
            return Err(Error::Precondition("b must differ from a".into()));
        }
        let z3 = Complex64::cis(beta.rem_euclid(2.0 * PI) / 2.0 + PI);
        let q = (z3 - 1.0) / (z3 - eb);
        let mut lambda = q.conj() / q.norm();
        let w = lambda / eb;
        if w.im < 0.0 {
            lambda = -lambda;
        }
        Ok(DiskTarget { beta, lambda })
    }

    pub fn to_half_plane(&self, z: Complex64) -> Complex64 {
        self.lambda * (z - 1.0) / (z - Complex64::cis(self.beta))
    }

    pub fn to_disk(&self, zeta: Complex64) -> Complex64 {
        (zeta * Complex64::cis(self.beta) - self.lambda) / (zeta - self.lambda)
    }

    /// Image of the origin.
    pub fn w(&self) -> Complex64 {
        self.to_half_plane(Complex64::new(0.0, 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SleStop {
    /// Position in the disk (interpolated onto the circle for radius stops).
    pub position: Complex64,
    pub capacity: f64,
    pub sine: f64,
    pub weight: f64,
    pub reason: StopReason,
}

fn check_sle_rule(stop: &StopRule) -> Result<()> {
    stop.validate()?;
    if stop.steps.is_some() {
        return Err(Error::Precondition("step-count rules apply to lattice paths only".into()));
    }
    Ok(())
}

/// Chordal SLE_2 from 1 to `b` in the unit disk, grown in the half-plane and
/// stopped by `stop`, with its weight `M^SLE` at the stop.
pub fn chordal_stopped(
    stop: &StopRule,
    target: &DiskTarget,
    horizon: f64,
    opts: SleOptions,
    rng: LabRng,
) -> Result<SleStop> {
    check_sle_rule(stop)?;
    let w = target.w();
    let s0 = w.im / w.norm();
    let opts = SleOptions { max_jump: opts.max_jump.or(Some(0.02)), ..opts };
    let mut g = SleGrower::new(Geometry::Chordal, opts, rng)?;
    let make = |chain: &LoewnerChain, k: usize, gw: Complex64, pos: Complex64, reason| -> SleStop {
        let z = gw - chain.drive()[k];
        let s = z.im / z.norm();
        SleStop {
            position: pos,
            capacity: chain.times()[k],
            sine: s,
            weight: (s / s0).powi(2) * w.im / gw.im,
            reason,
        }
    };
    if stop.capacity == Some(0.0) {
        return Ok(make(g.chain(), 0, w, Complex64::new(1.0, 0.0), StopReason::Capacity));
    }
    let horizon = stop.capacity.map_or(horizon, |c| c.min(horizon));
    let mut gw = w;
    let mut done = 0usize;
    let mut prev_disk = Complex64::new(1.0, 0.0);
    while g.chain().capacity() < horizon * (1.0 - 1e-12) {
        g.advance(horizon)?;
        let chain = g.chain();
        for k in done + 1..=chain.steps() {
            gw = chain.forward_step(gw, k);
            if !gw.is_finite() || gw.im <= 0.0 {
                return Err(Error::Swallowed);
            }
            let tip = target.to_disk(g.tips()[k]);
            if let Some(r) = stop.radius {
                if let Some((_, p)) = first_entry(&[prev_disk, tip], Complex64::new(0.0, 0.0), r) {
                    return Ok(make(chain, k, gw, p, StopReason::Radius));
                }
            }
            prev_disk = tip;
            let z = gw - chain.drive()[k];
            if stop.sine_floor.is_some_and(|d| z.im / z.norm() <= d) {
                return Ok(make(chain, k, gw, tip, StopReason::Sine));
            }
        }
        done = chain.steps();
    }
    let k = g.chain().steps();
    let reason = if stop.capacity.is_some_and(|c| c <= horizon) { StopReason::Capacity } else { StopReason::Exhausted };
    Ok(make(g.chain(), k, gw, prev_disk, reason))
}

/// Radial SLE_2 from 1 in the unit disk stopped by `stop`, with the sine of the
/// marked point `e^{i beta}` tracked along the way. Weight 1.
pub fn radial_stopped(stop: &StopRule, beta: f64, horizon: f64, opts: SleOptions, rng: LabRng) -> Result<SleStop> {
    check_sle_rule(stop)?;
    let opts = SleOptions { max_jump: opts.max_jump.or(Some(0.02)), ..opts };
    let mut g = SleGrower::new(Geometry::Radial, opts, rng)?;
    let mut theta = (beta - g.chain().drive()[0]).rem_euclid(2.0 * PI) / 2.0;
    if theta == 0.0 {
        return Err(Error::Swallowed);
    }
    let make = |chain: &LoewnerChain, k: usize, theta: f64, pos: Complex64, reason| SleStop {
        position: pos,
        capacity: chain.times()[k],
        sine: theta.sin(),
        weight: 1.0,
        reason,
    };
    if stop.capacity == Some(0.0) {
        return Ok(make(g.chain(), 0, theta, Complex64::new(1.0, 0.0), StopReason::Capacity));
    }
    let horizon = stop.capacity.map_or(horizon, |c| c.min(horizon));
    let mut done = 0usize;
    while g.chain().capacity() < horizon * (1.0 - 1e-12) {
        g.advance(horizon)?;
        let chain = g.chain();
        for k in done + 1..=chain.steps() {
            let d = chain.times()[k] - chain.times()[k - 1];
            theta -= (chain.drive()[k] - chain.drive()[k - 1]) / 2.0;
            if !(theta > 0.0 && theta < PI) {
                return Err(Error::Swallowed);
            }
            theta = ((-d).exp() * theta.cos()).acos();
            let tips = g.tips();
            if let Some(r) = stop.radius {
                if let Some((_, p)) = first_entry(&tips[k - 1..=k], Complex64::new(0.0, 0.0), r) {
                    return Ok(make(chain, k, theta, p, StopReason::Radius));
                }
            }
            if stop.sine_floor.is_some_and(|dl| theta.sin() <= dl) {
                return Ok(make(chain, k, theta, tips[k], StopReason::Sine));
            }
        }
        done = chain.steps();
    }
    let k = g.chain().steps();
    let reason = if stop.capacity.is_some_and(|c| c <= horizon) { StopReason::Capacity } else { StopReason::Exhausted };
    Ok(make(g.chain(), k, theta, g.tip(), reason))
}

fn sle_ensemble<F>(samples: u64, stop: &StopRule, note: String, run: F) -> Result<WeightedEnsemble>
where
    F: Fn(u64) -> Result<SleStop> + Sync,
{
    let stops: Vec<Result<SleStop>> = (0..samples).into_par_iter().map(&run).collect();
    let mut out = Vec::with_capacity(stops.len());
    for (id, s) in stops.into_iter().enumerate() {
        let s = s?;
        let wanted = match s.reason {
            StopReason::Radius => stop.radius.is_some(),
            StopReason::Capacity => stop.capacity.is_some() && stop.radius.is_none(),
            _ => false,
        };
        out.push(WeightedSample {
            id: id as u64,
            position: s.position,
            weight: s.weight,
            sine: s.sine,
            reason: s.reason,
            excluded: !wanted,
        });
    }
    Ok(WeightedEnsemble { samples: out, note })
}

/// Chordal SLE_2 in the unit disk from 1 to `e^{i beta}`, stopped and weighted
/// by `M^SLE`. Samples stopped by the sine floor or the capacity horizon
/// (rather than the radius) are excluded.
pub fn reweight_sle(
    horizon: f64,
    stop: &StopRule,
    samples: u64,
    seed: u64,
    target: &DiskTarget,
    opts: SleOptions,
) -> Result<WeightedEnsemble> {
    check_sle_rule(stop)?;
    let note = format!("chordal SLE_2 to angle {} weighted by M^SLE, {stop:?}", target.beta);
    sle_ensemble(samples, stop, note, |i| {
        chordal_stopped(stop, target, horizon, opts, rng::stream(seed, "reweight-sle", i))
    })
}

/// Direct radial SLE_2 stopped by the same rule, unit weights.
pub fn direct_radial_sle(
    horizon: f64,
    stop: &StopRule,
    samples: u64,
    seed: u64,
    beta: f64,
    opts: SleOptions,
) -> Result<WeightedEnsemble> {
    check_sle_rule(stop)?;
    let note = format!("radial SLE_2 with marked angle {beta}, {stop:?}");
    sle_ensemble(samples, stop, note, |i| radial_stopped(stop, beta, horizon, opts, rng::stream(seed, "radial-sle", i)))
}

// ---------------------------------------------------------------------------
// LERW

/// Pieces of one LERW weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParts {
    /// `H_{A_eta}(0, a')`
    pub h0: f64,
    /// `H_{dA_eta}(a', b)`
    pub hd: f64,
    pub m: f64,
}

/// Evaluates `M^LERW` for prefixes of paths in a fixed `(A, a, b)`.
pub struct LerwWeights {
    domain: LatticeDomain,
    a: Edge,
    b: Edge,
    factory: SlitSolverFactory,
    h0a: f64,
    hdab: f64,
}

impl LerwWeights {
    pub fn new(domain: &LatticeDomain, a: Edge, b: Edge) -> Result<Self> {
        if !domain.is_boundary_edge(&a) || !domain.is_boundary_edge(&b) || a == b {
            return Err(Error::Precondition("a and b must be distinct boundary edges".into()));
        }
        let factory = SlitSolverFactory::new(domain)?;
        let x = factory.full()?.unit_solve(domain.index_of(a.inner).unwrap());
        let h0a = x[domain.origin_index()];
        let hdab = x[domain.index_of(b.inner).unwrap()] / 4.0;
        if !(h0a > 0.0 && hdab > 0.0) {
            return Err(Error::Unreachable);
        }
        Ok(LerwWeights { domain: domain.clone(), a, b, factory, h0a, hdab })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    /// `H_A(0, a)`
    pub fn h0a(&self) -> f64 {
        self.h0a
    }

    /// `H_dA(a, b)`
    pub fn hdab(&self) -> f64 {
        self.hdab
    }

    fn removed_mask(&self, prefix: &[Site], next: Site) -> Result<Vec<bool>> {
        if prefix.first() != Some(&self.a.outer) {
            return Err(Error::InvalidPath("prefix must start at the outer end of a".into()));
        }
        if prefix.len() >= 2 && prefix[1] != self.a.inner {
            return Err(Error::InvalidPath("prefix must enter through a".into()));
        }
        if prefix.len() == 1 && next != self.a.inner {
            return Err(Error::InvalidPath("first step must cross a".into()));
        }
        let mut removed = vec![false; self.domain.len()];
        for (j, s) in prefix.iter().enumerate().skip(1) {
            if !prefix[j - 1].is_adjacent(*s) {
                return Err(Error::NonAdjacentStep { index: j });
            }
            let i = self.domain.index_of(*s).ok_or(Error::PathLeavesDomain(*s))?;
            if removed[i] {
                return Err(Error::InvalidPath(format!("{s:?} repeats")));
            }
            removed[i] = true;
        }
        if !prefix.last().unwrap().is_adjacent(next) || prefix.contains(&next) {
            return Err(Error::InvalidPath(format!("{next:?} does not extend the prefix")));
        }
        Ok(removed)
    }

    /// Weight of the prefix `eta` (starting at `a.outer`) extended by `next`.
    /// Zero when `next` leaves the domain or is cut off from 0.
    pub fn parts(&self, prefix: &[Site], next: Site) -> Result<WeightParts> {
        let removed = self.removed_mask(prefix, next)?;
        let Some(w) = self.domain.index_of(next) else {
            return Ok(WeightParts { h0: 0.0, hd: 0.0, m: 0.0 });
        };
        let origin = self.domain.origin_index();
        // a prefix through 0 is not a radial prefix
        if removed[origin] {
            return Ok(WeightParts { h0: 0.0, hd: f64::NAN, m: 0.0 });
        }
        let bi = self.domain.index_of(self.b.inner).unwrap();
        if removed[bi] {
            return Err(Error::Precondition("the prefix occupies b".into()));
        }
        let x = self.factory.solver(&removed)?.unit_solve(w);
        let tiny = 1e-14 * x[w];
        let h0 = if x[origin] > tiny { x[origin] } else { 0.0 };
        let hd = x[bi] / 4.0;
        if !(hd > tiny) {
            return Err(Error::Precondition("H_dA(a', b) vanishes: b is cut off from a'".into()));
        }
        Ok(WeightParts { h0, hd, m: (h0 / self.h0a) * (self.hdab / hd) })
    }

    pub fn weight(&self, prefix: &[Site], next: Site) -> Result<f64> {
        Ok(self.parts(prefix, next)?.m)
    }

    /// Discrete sine of the slit domain after `prefix` extended by `next`, seen
    /// from 0, with the tip at `next` and target `b`.
    pub fn sine(&self, prefix: &[Site], next: Site) -> Result<f64> {
        self.removed_mask(prefix, next)?;
        let removed: BTreeSet<Site> = prefix.iter().skip(1).copied().chain([next]).collect();
        discrete_sine(&self.domain, &removed, next, self.b)
    }
}

/// `M^LERW` for one prefix and next vertex.
pub fn m_lerw(domain: &LatticeDomain, a: Edge, b: Edge, prefix: &[Site], next: Site) -> Result<f64> {
    LerwWeights::new(domain, a, b)?.weight(prefix, next)
}

/// `sin(pi omega)` with `omega` the harmonic measure from 0, in the component
/// of 0 of `A` minus `removed`, of the boundary arc running counterclockwise
/// from `b` to the boundary edges whose outer end is `tip`. The two ends count
/// with weight one half.
pub fn discrete_sine(domain: &LatticeDomain, removed: &BTreeSet<Site>, tip: Site, b: Edge) -> Result<f64> {
    let comp = domain.component_of_zero(removed)?;
    if !comp.is_boundary_edge(&b) {
        return Err(Error::Precondition("b is not on the boundary of the component of 0".into()));
    }
    let cycle = comp.boundary_cycle()?;
    let x = DirichletSolver::new(&comp)?.unit_solve(comp.origin_index());
    let h = |e: &Edge| x[comp.index_of(e.inner).unwrap()];
    let start = cycle.iter().position(|e| *e == b).unwrap();
    let n = cycle.len();
    let group: f64 = cycle.iter().filter(|e| e.outer == tip).map(h).sum();
    if group == 0.0 {
        return Err(Error::Precondition(format!("{tip:?} does not touch the component of 0")));
    }
    let mut omega = 0.5 * h(&b);
    for k in 1..n {
        let e = &cycle[(start + k) % n];
        if e.outer == tip {
            break;
        }
        omega += h(e);
    }
    omega += 0.5 * group;
    Ok((PI * omega).sin())
}

/// Exhaustive check of the one-step martingale property of `M^LERW` under the
/// chordal law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub prefixes: usize,
    /// Prefixes left out because some radial continuation is cut off from `b`.
    pub skipped: usize,
    pub max_deviation: f64,
}

fn prefix_probabilities(dist: &[(crate::saw::Saw, f64)]) -> HashMap<Vec<Site>, f64> {
    let mut out: HashMap<Vec<Site>, f64> = HashMap::new();
    for (saw, p) in dist {
        let v = saw.vertices();
        for k in 2..=v.len() {
            *out.entry(v[..k].to_vec()).or_default() += p;
        }
    }
    out
}

pub fn martingale_check(domain: &LatticeDomain, a: Edge, b: Edge) -> Result<MartingaleReport> {
    let ctx = LerwWeights::new(domain, a, b)?;
    let dist = exact_distribution(domain, a, Target::Edge(b))?;
    let probs = prefix_probabilities(&dist);
    let mut report = MartingaleReport { prefixes: 0, skipped: 0, max_deviation: 0.0 };
    'prefix: for (eta, &p) in &probs {
        let tip = *eta.last().unwrap();
        if tip == Site::ORIGIN || tip == b.outer || p <= 0.0 {
            continue;
        }
        let mut expected = 0.0;
        for w in tip.neighbors() {
            if eta.contains(&w) {
                continue;
            }
            let mut child = eta.clone();
            child.push(w);
            let pc = probs.get(&child).copied().unwrap_or(0.0);
            let m = match ctx.parts(eta, w) {
                Ok(parts) => parts.m,
                Err(Error::Precondition(_)) => {
                    report.skipped += 1;
                    continue 'prefix;
                }
                Err(e) => return Err(e),
            };
            expected += pc / p * m;
        }
        let here = ctx.weight(&eta[..eta.len() - 1], tip)?;
        report.prefixes += 1;
        report.max_deviation = report.max_deviation.max((expected - here).abs());
    }
    Ok(report)
}

/// Exact comparison of the weighted chordal and the direct radial stopped laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactReweight {
    pub total_variation: f64,
    /// Radial mass on stopped prefixes cut off from `b`, where the weight is undefined.
    pub excluded_radial_mass: f64,
    pub support: usize,
}

pub fn reweight_exact(domain: &LatticeDomain, a: Edge, b: Edge, stop: &StopRule, n: f64) -> Result<ExactReweight> {
    stop.validate()?;
    let ctx = LerwWeights::new(domain, a, b)?;
    let mut weighted: HashMap<Vec<Site>, f64> = HashMap::new();
    let mut memo: HashMap<Vec<Site>, f64> = HashMap::new();
    for (saw, p) in exact_distribution(domain, a, Target::Edge(b))? {
        let v = saw.vertices();
        let j = stop.lattice_index(v, n);
        let key = v[..=j].to_vec();
        let m = match memo.get(&key) {
            Some(m) => *m,
            None => {
                let m = ctx.weight(&v[..j], v[j])?;
                memo.insert(key.clone(), m);
                m
            }
        };
        if m > 0.0 {
            *weighted.entry(key).or_default() += p * m;
        }
    }
    let mut direct: HashMap<Vec<Site>, f64> = HashMap::new();
    for (saw, p) in exact_distribution(domain, a, Target::Origin)? {
        let v = saw.vertices();
        let j = stop.lattice_index(v, n);
        *direct.entry(v[..=j].to_vec()).or_default() += p;
    }
    let mut excluded = 0.0;
    let mut tv = 0.0;
    let keys: HashSet<&Vec<Site>> = weighted.keys().chain(direct.keys()).collect();
    for key in &keys {
        let q = weighted.get(*key).copied().unwrap_or(0.0);
        let r = direct.get(*key).copied().unwrap_or(0.0);
        if q == 0.0 {
            let j = key.len() - 1;
            if let Err(Error::Precondition(_)) = ctx.parts(&key[..j], key[j]) {
                excluded += r;
                continue;
            }
        }
        tv += (q - r).abs();
    }
    Ok(ExactReweight { total_variation: tv / 2.0, excluded_radial_mass: excluded, support: keys.len() })
}

fn lattice_sample(
    id: u64,
    path: &[Site],
    stop: &StopRule,
    n: f64,
    weight: impl FnOnce(&[Site], Site) -> Result<f64>,
    sine: impl FnOnce(&[Site], Site) -> Result<f64>,
) -> Result<WeightedSample> {
    let j = stop.lattice_index(path, n);
    let tip = path[j];
    let reason = if tip == Site::ORIGIN || j == path.len() - 1 {
        if stop.radius.is_some_and(|r| tip.norm() <= r * n) { StopReason::Radius } else { StopReason::Exhausted }
    } else if stop.steps.is_some_and(|s| j >= s) {
        StopReason::Steps
    } else {
        StopReason::Radius
    };
    let weight = weight(&path[..j], tip)?;
    let (s, low) = match stop.sine_floor {
        Some(d) if reason != StopReason::Exhausted && weight > 0.0 => {
            let s = sine(&path[..j], tip)?;
            (s, s <= d)
        }
        _ => (f64::NAN, false),
    };
    Ok(WeightedSample {
        id,
        position: tip.to_complex() / n,
        weight,
        sine: s,
        reason,
        excluded: reason == StopReason::Exhausted || low,
    })
}

fn check_lattice_rule(stop: &StopRule) -> Result<()> {
    stop.validate()?;
    if stop.capacity.is_some() {
        return Err(Error::Precondition("capacity rules apply to Loewner chains only".into()));
    }
    if stop.radius.is_none() && stop.steps.is_none() {
        return Err(Error::Precondition("lattice stop needs a radius or a step count".into()));
    }
    Ok(())
}

/// Chordal LERW samples stopped by `stop` and weighted by `M^LERW`. Positions
/// are divided by `n`. Samples reaching `b` before the stop get weight 0.
pub fn reweight_lerw(
    domain: &LatticeDomain,
    a: Edge,
    b: Edge,
    stop: &StopRule,
    n: f64,
    samples: u64,
    seed: u64,
) -> Result<WeightedEnsemble> {
    check_lattice_rule(stop)?;
    let ctx = LerwWeights::new(domain, a, b)?;
    let sampler = ChordalSampler::new(domain, a, b)?;
    let out: Vec<Result<WeightedSample>> = (0..samples)
        .into_par_iter()
        .map_init(Workspace::default, |ws, i| {
            let saw = sampler.sample(&mut rng::stream(seed, "reweight-lerw", i), ws);
            lattice_sample(i, saw.vertices(), stop, n, |p, t| ctx.weight(p, t), |p, t| ctx.sine(p, t))
        })
        .collect();
    Ok(WeightedEnsemble {
        samples: out.into_iter().collect::<Result<_>>()?,
        note: format!("chordal LERW weighted by M^LERW, {stop:?}"),
    })
}

/// Radial LERW samples stopped by `stop`, unit weights.
pub fn direct_radial_lerw(
    domain: &LatticeDomain,
    a: Edge,
    b: Edge,
    stop: &StopRule,
    n: f64,
    samples: u64,
    seed: u64,
) -> Result<WeightedEnsemble> {
    check_lattice_rule(stop)?;
    let sampler = RadialSampler::new(domain, a)?;
    let out: Vec<Result<WeightedSample>> = (0..samples)
        .into_par_iter()
        .map_init(Workspace::default, |ws, i| {
            let saw = sampler.sample(&mut rng::stream(seed, "radial-lerw", i), ws);
            lattice_sample(
                i,
                saw.vertices(),
                stop,
                n,
                |_, _| Ok(1.0),
                |p, t| {
                    let removed: BTreeSet<Site> = p.iter().skip(1).copied().chain([t]).collect();
                    discrete_sine(domain, &removed, t, b)
                },
            )
        })
        .collect();
    Ok(WeightedEnsemble {
        samples: out.into_iter().collect::<Result<_>>()?,
        note: format!("radial LERW, {stop:?}"),
    })
}

// ---------------------------------------------------------------------------
// Boundary Poisson kernel and harmonic ratios

/// Continuum sine of a disk domain seen from the origin.
pub fn continuum_sine(spec: &DomainSpec) -> Result<f64> {
    let Shape::Disk { center, radius } = spec.shape else {
        return Err(Error::Precondition("closed-form sine is available for disks only".into()));
    };
    let c = Complex64::new(center[0], center[1]);
    let p = -c / radius;
    let mobius = |z: Complex64| {
        let u = (z - c) / radius;
        (u - p) / (1.0 - p.conj() * u)
    };
    let delta = (mobius(spec.b()) / mobius(spec.a())).arg();
    Ok((delta.abs() / 2.0).sin())
}

pub const KL_SINE_FLOOR: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlRow {
    pub n: u32,
    pub sine: f64,
    pub c_hat: f64,
    pub h_boundary: f64,
    pub h0a: f64,
    pub h0b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlTable {
    pub rows: Vec<KlRow>,
    /// `(max - min) / mean` of the estimates.
    pub spread: f64,
}

impl KlTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,sine,c_hat,h_boundary,h0a,h0b")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.n, r.sine, r.c_hat, r.h_boundary, r.h0a, r.h0b)?;
        }
        Ok(())
    }
}

/// `H_dA(a, b) S^2 / (H_A(0, a) H_A(0, b))` for the lattice approximations of
/// `spec` at each scale.
pub fn kl_constant(spec: &DomainSpec, ns: &[u32]) -> Result<KlTable> {
    let sine = continuum_sine(spec)?;
    if sine < KL_SINE_FLOOR {
        return Err(Error::SineFloor { value: sine, floor: KL_SINE_FLOOR });
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let domain = approximate(spec, n)?;
        let a = domain.nearest_boundary_edge(spec.a(), n);
        let b = domain.nearest_boundary_edge(spec.b(), n);
        if a == b {
            return Err(Error::Precondition(format!("a and b share an edge at N = {n}")));
        }
        let solver = DirichletSolver::new(&domain)?;
        let (ia, ib) = (domain.index_of(a.inner).unwrap(), domain.index_of(b.inner).unwrap());
        let x0 = solver.unit_solve(domain.origin_index());
        let xa = solver.unit_solve(ia);
        let h_boundary = xa[ib] / 4.0;
        let (h0a, h0b) = (x0[ia], x0[ib]);
        rows.push(KlRow { n, sine, c_hat: h_boundary * sine * sine / (h0a * h0b), h_boundary, h0a, h0b });
    }
    let vals: Vec<f64> = rows.iter().map(|r| r.c_hat).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = (vals.iter().copied().fold(f64::MIN, f64::max) - vals.iter().copied().fold(f64::MAX, f64::min)) / mean;
    Ok(KlTable { rows, spread })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HRatioOptions {
    /// Radius of the disk the path must enter at its last step.
    pub s: f64,
    /// Floor for the discrete sine along the path.
    pub delta: f64,
    pub refinement: u32,
    /// Largest refined domain, in vertices.
    pub budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
    /// Smallest discrete sine along the path.
    pub min_sine: f64,
}

/// Sites of the `m`-fold refinement whose squares lie in the union of the
/// squares of `sites`.
fn refine(sites: &HashSet<Site>, m: i32) -> Vec<Site> {
    // refined square of v: [2v - 1, 2v + 1]; coarse square of s: [2ms - m, 2ms + m]
    let covering = |v: i32| -> (i32, i32) {
        let lo = (2 * v - 1 + m).div_euclid(2 * m);
        let hi = (2 * v + 1 + m - 1).div_euclid(2 * m);
        (lo, hi)
    };
    let mut cand = HashSet::new();
    for s in sites {
        for dx in -m..=m {
            for dy in -m..=m {
                cand.insert(Site::new(m * s.x + dx, m * s.y + dy));
            }
        }
    }
    let mut out: Vec<Site> = cand
        .into_iter()
        .filter(|v| {
            let (x0, x1) = covering(v.x);
            let (y0, y1) = covering(v.y);
            (x0..=x1).all(|x| (y0..=y1).all(|y| sites.contains(&Site::new(x, y))))
        })
        .collect();
    out.sort_unstable();
    out
}

/// Refined vertices whose squares overlap the square of some site of `sites`.
fn refined_overlapping(sites: &[Site], m: i32) -> HashSet<Site> {
    let mut out = HashSet::new();
    for s in sites {
        for dx in -m..=m {
            for dy in -m..=m {
                let v = Site::new(m * s.x + dx, m * s.y + dy);
                let ox = (2 * v.x - 1) < 2 * m * s.x + m && (2 * v.x + 1) > 2 * m * s.x - m;
                let oy = (2 * v.y - 1) < 2 * m * s.y + m && (2 * v.y + 1) > 2 * m * s.y - m;
                if ox && oy {
                    out.insert(v);
                }
            }
        }
    }
    out
}

fn h_ratio_on(domain: &LatticeDomain, removed: &[bool], b: Edge) -> Result<f64> {
    let factory = SlitSolverFactory::new(domain)?;
    let bi = domain.index_of(b.inner).unwrap();
    let full = factory.full()?.unit_solve(domain.origin_index())[bi];
    let slit = factory.solver(removed)?.unit_solve(domain.origin_index())[bi];
    if !(slit > 0.0) {
        return Err(Error::Precondition("b is cut off from 0 by the path".into()));
    }
    Ok(full / slit)
}

/// `H_A(0, b) / H_{A_eta}(0, b)` at scale `N` against the same ratio on the
/// `m`-fold refinement of the squares of `A` and of `eta`. The path `eta`
/// starts at the outer end of its entry edge, stays outside the disk of radius
/// `s` except at its last vertex, and keeps every discrete sine at least
/// `delta`.
pub fn h_ratio_check(domain: &LatticeDomain, eta: &[Site], b: Edge, opts: &HRatioOptions) -> Result<HRatio> {
    if !domain.is_boundary_edge(&b) {
        return Err(Error::Precondition("b must be a boundary edge".into()));
    }
    let m = opts.refinement as i32;
    if m < 1 {
        return Err(Error::Precondition("refinement must be at least 1".into()));
    }
    let needed = domain.len() * (m as usize).pow(2);
    if needed > opts.budget {
        return Err(Error::MemoryBudget { needed, budget: opts.budget });
    }
    let interior: Vec<Site> = eta.iter().skip(1).copied().collect();
    if interior.is_empty() {
        return Ok(HRatio { lhs: 1.0, rhs: 1.0, relative_error: 0.0, min_sine: f64::NAN });
    }
    if !domain.is_boundary_edge(&Edge::new(eta[1], eta[0])) {
        return Err(Error::InvalidPath("path must enter through a boundary edge".into()));
    }
    let mut removed = vec![false; domain.len()];
    for (j, s) in interior.iter().enumerate() {
        if !eta[j].is_adjacent(*s) {
            return Err(Error::NonAdjacentStep { index: j + 1 });
        }
        let i = domain.index_of(*s).ok_or(Error::PathLeavesDomain(*s))?;
        if removed[i] {
            return Err(Error::InvalidPath(format!("{s:?} repeats")));
        }
        removed[i] = true;
    }
    let k = interior.len() - 1;
    let inside = |s: &Site| s.norm() < opts.s;
    if interior[..k].iter().any(inside) || !inside(&interior[k]) {
        return Err(Error::Precondition(format!("path does not first enter the disk of radius {} at its last step", opts.s)));
    }
    if removed[domain.index_of(b.inner).unwrap()] || interior.contains(&Site::ORIGIN) {
        return Err(Error::Precondition("path occupies b or the origin".into()));
    }
    let mut min_sine = f64::INFINITY;
    for j in 1..eta.len() {
        let set: BTreeSet<Site> = eta[1..=j].iter().copied().collect();
        let s = discrete_sine(domain, &set, eta[j], b)?;
        min_sine = min_sine.min(s);
        if s < opts.delta {
            return Err(Error::SineFloor { value: s, floor: opts.delta });
        }
    }
    let lhs = h_ratio_on(domain, &removed, b)?;

    let coarse: HashSet<Site> = domain.sites().iter().copied().collect();
    let fine = LatticeDomain::new(refine(&coarse, m))?;
    let cut = refined_overlapping(&interior, m);
    let fine_removed: Vec<bool> = fine.sites().iter().map(|v| cut.contains(v)).collect();
    let mid = b.midpoint();
    let fb = fine
        .boundary_edges()
        .iter()
        .filter(|e| !cut.contains(&e.inner))
        .min_by(|e, f| {
            let d = |x: &Edge| (x.midpoint() - mid * m as f64).norm_sqr();
            d(e).total_cmp(&d(f))
        })
        .copied()
        .ok_or_else(|| Error::InvalidDomain("refined domain has no boundary".into()))?;
    let rhs = h_ratio_on(&fine, &fine_removed, fb)?;
    Ok(HRatio { lhs, rhs, relative_error: (lhs - rhs).abs() / rhs, min_sine })
}

/// `(S_eta / S)^2 H_A(0, b) / H_{A_eta}(0, b)` with discrete sines: the
/// approximation of `M^LERW` through the boundary Poisson kernel estimate.
pub fn m_lerw_sine_form(ctx: &LerwWeights, prefix: &[Site], next: Site) -> Result<f64> {
    let domain = ctx.domain();
    let s0 = discrete_sine(domain, &BTreeSet::new(), ctx.a.outer, ctx.b)?;
    let s = ctx.sine(prefix, next)?;
    let mut removed = vec![false; domain.len()];
    for v in prefix.iter().skip(1).chain([&next]) {
        removed[domain.index_of(*v).ok_or(Error::PathLeavesDomain(*v))?] = true;
    }
    Ok((s / s0).powi(2) * h_ratio_on(domain, &removed, ctx.b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: i32, y: i32) -> Site {
        Site::new(x, y)
    }

    fn square(r: i32) -> LatticeDomain {
        LatticeDomain::rectangle(-r, r, -r, r).unwrap()
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::radius(0.0).validate().is_err());
        assert!(StopRule::radius(0.3).with_sine_floor(1.0).validate().is_err());
        assert!(StopRule::default().validate().is_err());
        assert!(StopRule::capacity(0.0).validate().is_ok());
        let path = [s(4, 0), s(3, 0), s(2, 0), s(1, 0), s(0, 0)];
        assert_eq!(StopRule::steps(2).lattice_index(&path, 1.0), 2);
        assert_eq!(StopRule::radius(1.5).lattice_index(&path, 1.0), 3);
        assert_eq!(StopRule::steps(10).lattice_index(&path, 1.0), 4);
    }

    #[test]
    fn m_sle_at_time_zero_is_one() {
        let chain = LoewnerChain::empty(Geometry::Chordal);
        assert_eq!(m_sle(&chain, Complex64::new(0.3, 1.2)).unwrap(), 1.0);
    }

    #[test]
    fn disk_target_maps() {
        for beta in [PI, 2.0, 4.0] {
            let t = DiskTarget::new(beta).unwrap();
            assert!(t.to_half_plane(Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(t.w().im > 0.0);
            for k in 0..8 {
                let z = Complex64::from_polar(1.0, 0.3 + k as f64);
                assert!(t.to_half_plane(z).im.abs() < 1e-9);
                let p = Complex64::new(0.1 * k as f64 - 0.3, 0.2);
                assert!((t.to_disk(t.to_half_plane(p)) - p).norm() < 1e-12);
            }
        }
        let t = DiskTarget::new(PI).unwrap();
        assert!((t.w() - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn capacity_zero_gives_unit_weights() {
        let e = reweight_sle(1.0, &StopRule::capacity(0.0), 20, 1, &DiskTarget::new(PI).unwrap(), SleOptions::adaptive(1e-3, 0.02)).unwrap();
        assert!(e.samples.iter().all(|s| s.weight == 1.0 && !s.excluded));
    }

    #[test]
    fn empty_prefix_weight_is_one() {
        let d = square(2);
        let a = Edge::new(s(2, 0), s(3, 0));
        let b = Edge::new(s(-2, 1), s(-3, 1));
        let m = m_lerw(&d, a, b, &[a.outer], a.inner).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cut_off_origin_gives_zero() {
        // corridor: 0 reachable only through (1, 0)
        let sites = [s(0, 0), s(1, 0), s(2, 0), s(2, 1), s(2, -1), s(3, 1), s(3, -1)];
        let d = LatticeDomain::new(sites).unwrap();
        let a = Edge::new(s(3, 1), s(4, 1));
        let b = Edge::new(s(3, -1), s(4, -1));
        let prefix = [a.outer, s(3, 1), s(2, 1), s(2, 0)];
        let ctx = LerwWeights::new(&d, a, b).unwrap();
        assert!(ctx.weight(&prefix[..3], s(2, 0)).unwrap() > 0.0);
        // stepping to (1, 0) cuts b off
        assert!(matches!(ctx.weight(&prefix, s(1, 0)), Err(Error::Precondition(_))));
        // stepping to (2, -1) leaves 0 behind the slit
        assert_eq!(ctx.weight(&prefix, s(2, -1)).unwrap(), 0.0);
        // leaving the domain
        assert_eq!(ctx.weight(&[a.outer, s(3, 1)], s(3, 2)).unwrap(), 0.0);
    }

    #[test]
    fn occupying_b_is_an_error() {
        let d = square(1);
        let a = Edge::new(s(1, 0), s(2, 0));
        let b = Edge::new(s(1, 1), s(1, 2));
        assert!(m_lerw(&d, a, b, &[a.outer, s(1, 0)], s(1, 1)).unwrap() > 0.0);
        assert!(matches!(m_lerw(&d, a, b, &[a.outer, s(1, 0), s(1, 1)], s(0, 1)), Err(Error::Precondition(_))));
    }

    #[test]
    fn martingale_on_small_domain() {
        let d = square(1);
        let a = Edge::new(s(1, 0), s(2, 0));
        let b = Edge::new(s(-1, 1), s(-1, 2));
        let r = martingale_check(&d, a, b).unwrap();
        assert!(r.prefixes > 10);
        assert!(r.max_deviation < 1e-10, "{r:?}");
    }

    #[test]
    fn exact_reweight_matches_radial() {
        let d = square(1);
        let a = Edge::new(s(1, 0), s(2, 0));
        let b = Edge::new(s(-1, -1), s(-2, -1));
        for j in 1..5 {
            let r = reweight_exact(&d, a, b, &StopRule::steps(j), 1.0).unwrap();
            assert!(r.total_variation < 1e-10, "{j} {r:?}");
        }
    }

    #[test]
    fn discrete_sine_symmetric_square() {
        // a and b opposite on a symmetric square: the arc holds half the measure
        let d = square(3);
        let a = Edge::new(s(3, 0), s(4, 0));
        let b = Edge::new(s(-3, 0), s(-4, 0));
        let v = discrete_sine(&d, &BTreeSet::new(), a.outer, b).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn continuum_sine_of_unit_disk() {
        assert!((continuum_sine(&DomainSpec::unit_disk()).unwrap() - 1.0).abs() < 1e-12);
        let q = DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, 0.0, PI / 2.0);
        assert!((continuum_sine(&q).unwrap() - (PI / 4.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_small_sine() {
        let q = DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0, 0.0, 0.2);
        assert!(matches!(kl_constant(&q, &[20]), Err(Error::SineFloor { .. })));
    }

    #[test]
    fn h_ratio_empty_path() {
        let d = square(4);
        let b = Edge::new(s(-4, 0), s(-5, 0));
        let opts = HRatioOptions { s: 2.0, delta: 0.1, refinement: 2, budget: 1 << 20 };
        let r = h_ratio_check(&d, &[s(5, 0)], b, &opts).unwrap();
        assert_eq!((r.lhs, r.rhs, r.relative_error), (1.0, 1.0, 0.0));
    }

    #[test]
    fn refinement_covers_squares() {
        let one: HashSet<Site> = [s(0, 0)].into_iter().collect();
        // m = 2: refined squares of side 1/2 centred at multiples of 1/2; only
        // the central one stays strictly inside [-1/2, 1/2]^2 without crossing out
        assert_eq!(refine(&one, 2), vec![s(0, 0)]);
        assert_eq!(refine(&one, 3).len(), 9);
        assert_eq!(refined_overlapping(&[s(0, 0)], 3).len(), 9);
        assert_eq!(refined_overlapping(&[s(0, 0)], 2).len(), 9);
    }

    #[test]
    fn h_ratio_budget() {
        let d = square(4);
        let b = Edge::new(s(-4, 0), s(-5, 0));
        let opts = HRatioOptions { s: 2.0, delta: 0.1, refinement: 4, budget: 100 };
        assert!(matches!(h_ratio_check(&d, &[s(5, 0)], b, &opts), Err(Error::MemoryBudget { .. })));
    }

    #[test]
    fn h_ratio_on_straight_slit() {
        let mut errors = Vec::new();
        for n in [8, 16, 32] {
            let d = square(n);
            let b = Edge::new(s(0, n), s(0, n + 1));
            let eta: Vec<Site> = (n / 2..=n + 1).rev().map(|x| s(x, 0)).collect();
            let opts = HRatioOptions { s: n as f64 / 2.0 + 0.5, delta: 0.1, refinement: 2, budget: 1 << 20 };
            let r = h_ratio_check(&d, &eta, b, &opts).unwrap();
            assert!(r.lhs > 1.0 && r.rhs > 1.0);
            errors.push(r.relative_error);
        }
        assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    }
}
