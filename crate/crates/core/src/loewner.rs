//! Loewner chains built from elementary slit maps.
//!
//! A chain is a sequence of steps `(u_k, d_k)`: a driving value and a capacity
//! increment. In the chordal picture step `k` is the vertical-slit map
//! `z -> u + sqrt((z - u)^2 + 4 d)` of the upper half-plane (half-plane capacity
//! `d`). In the radial picture it is the radial-slit map of the unit disk that
//! fixes 0, grows a slit from `e^{iu}` and has derivative `e^{2d}` at the origin,
//! so the conformal radius after capacity `s` is `e^{-2s}`.
//!
//! `g_t` is the composition of the forward step maps in order; tips are obtained by
//! pushing the driving point back through the inverse steps.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curve::ParamCurve;
use crate::error::{Error, Result};
use crate::rng::{self, LabRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Chordal,
    Radial,
}

impl Geometry {
    /// Variance of the driving increment per unit capacity for kappa = 2.
    pub fn driving_rate(self) -> f64 {
        match self {
            Geometry::Chordal => 2.0,
            Geometry::Radial => 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    geometry: Geometry,
}

impl DrivingFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, geometry: Geometry) -> Result<Self> {
        check_grid(&times, &values)?;
        Ok(DrivingFunction { times, values, geometry })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Number of steps (grid intervals).
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn check_grid(times: &[f64], values: &[f64]) -> Result<()> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::Precondition("driving grid and values must be nonempty and of equal length".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::Precondition("driving grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("driving grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

fn uniform_grid(t: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() || !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Precondition(format!("need 0 < dt and T >= 0, got dt = {dt}, T = {t}")));
    }
    if t == 0.0 {
        return Ok(vec![0.0]);
    }
    if dt > t {
        return Err(Error::Precondition(format!("dt = {dt} exceeds horizon {t}")));
    }
    let n = ((t / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    times.push(t);
    Ok(times)
}

fn brownian_drive(t: f64, dt: f64, geometry: Geometry, rng: &mut LabRng) -> Result<DrivingFunction> {
    let times = uniform_grid(t, dt)?;
    let rate = geometry.driving_rate();
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    for w in times.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        values.push(values.last().unwrap() + (rate * (w[1] - w[0])).sqrt() * z);
    }
    DrivingFunction::new(times, values, geometry)
}

/// Brownian driving function for chordal SLE_2: increments have variance `2 dt`.
pub fn chordal_sle2_drive(t: f64, dt: f64, seed: u64) -> Result<DrivingFunction> {
    brownian_drive(t, dt, Geometry::Chordal, &mut rng::seeded(seed))
}

/// Angular driving function for radial SLE_2: increments have variance `4 ds`.
pub fn radial_sle2_drive(t: f64, dt: f64, seed: u64) -> Result<DrivingFunction> {
    brownian_drive(t, dt, Geometry::Radial, &mut rng::seeded(seed))
}

/// Principal square root without trigonometry.
#[inline]
fn csqrt(q: Complex64) -> Complex64 {
    let (a, b) = (q.re, q.im);
    let mut r = (a * a + b * b).sqrt();
    if !r.is_finite() {
        r = a.hypot(b);
    }
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let t = (0.5 * (r + a.abs())).sqrt();
    if a >= 0.0 {
        Complex64::new(t, b / (2.0 * t))
    } else {
        Complex64::new(b.abs() / (2.0 * t), t.copysign(b))
    }
}

/// Square root in the closed upper half-plane; on the positive real axis the sign
/// follows `hint` so that real points keep their side of the slit.
#[inline]
fn sqrt_up(q: Complex64, hint: f64) -> Complex64 {
    let r = csqrt(q);
    if r.im < 0.0 || (r.im == 0.0 && hint < 0.0) {
        -r
    } else {
        r
    }
}

#[inline]
fn chordal_inv(z: Complex64, u: f64, d: f64) -> Complex64 {
    let w = z - u;
    u + sqrt_up(w * w - 4.0 * d, w.re)
}

#[inline]
fn koebe(z: Complex64) -> Complex64 {
    let p = 1.0 + z;
    z / (p * p)
}

#[inline]
fn koebe_inv(v: Complex64) -> Complex64 {
    2.0 * v / (1.0 - 2.0 * v + csqrt(1.0 - 4.0 * v))
}

#[inline]
fn radial_inv(z: Complex64, u: f64, d: f64) -> Complex64 {
    let e = Complex64::cis(u);
    e * koebe_inv(koebe(z / e) * (-2.0 * d).exp())
}

/// Cached parameters of one elementary map: the rotation `e^{iu}` and the
/// capacity factor (`4d` chordal, `e^{-2d}` radial).
#[derive(Clone, Copy, Debug, PartialEq)]
struct StepMap {
    rot: Complex64,
    factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoewnerChain {
    geometry: Geometry,
    times: Vec<f64>,
    drive: Vec<f64>,
    maps: Vec<StepMap>,
}

impl LoewnerChain {
    fn raw(geometry: Geometry, times: Vec<f64>, drive: Vec<f64>) -> Self {
        let mut chain = LoewnerChain { geometry, times: vec![times[0]], drive: vec![drive[0]], maps: vec![] };
        for k in 1..times.len() {
            chain.append(drive[k], times[k] - times[k - 1], times[k]);
        }
        chain
    }

    fn append(&mut self, u: f64, d: f64, t: f64) {
        let map = match self.geometry {
            Geometry::Chordal => StepMap { rot: Complex64::new(1.0, 0.0), factor: 4.0 * d },
            Geometry::Radial => StepMap { rot: Complex64::cis(u), factor: (-2.0 * d).exp() },
        };
        self.times.push(t);
        self.drive.push(u);
        self.maps.push(map);
    }

    pub fn empty(geometry: Geometry) -> Self {
        LoewnerChain::raw(geometry, vec![0.0], vec![0.0])
    }

    /// Step `k` uses the driving value at the right end of its interval.
    pub fn from_driving(driving: &DrivingFunction) -> Self {
        LoewnerChain::raw(driving.geometry, driving.times.clone(), driving.values.clone())
    }

    /// Chain made of the first `k` steps.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.min(self.steps());
        LoewnerChain {
            geometry: self.geometry,
            times: self.times[..=k].to_vec(),
            drive: self.drive[..=k].to_vec(),
            maps: self.maps[..k].to_vec(),
        }
    }

    pub fn from_steps(geometry: Geometry, start: f64, steps: &[(f64, f64)]) -> Result<Self> {
        let mut chain = LoewnerChain::raw(geometry, vec![0.0], vec![start]);
        for &(u, d) in steps {
            chain.push(u, d)?;
        }
        Ok(chain)
    }

    pub fn push(&mut self, u: f64, d: f64) -> Result<()> {
        if !(d > 0.0) || !d.is_finite() || !u.is_finite() {
            return Err(Error::Precondition(format!("invalid step (u = {u}, d = {d})")));
        }
        let t = self.capacity() + d;
        self.append(u, d, t);
        Ok(())
    }

    fn pop(&mut self) {
        if self.times.len() > 1 {
            self.times.pop();
            self.drive.pop();
            self.maps.pop();
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn drive(&self) -> &[f64] {
        &self.drive
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn capacity(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn driving(&self) -> DrivingFunction {
        DrivingFunction { times: self.times.clone(), values: self.drive.clone(), geometry: self.geometry }
    }

    /// Driving value at the current time (the image of the tip).
    pub fn current_drive(&self) -> f64 {
        *self.drive.last().unwrap()
    }

    #[inline]
    fn step(&self, k: usize) -> (f64, f64) {
        (self.drive[k], self.times[k] - self.times[k - 1])
    }

    #[inline]
    fn apply_fwd(&self, z: Complex64, k: usize) -> Complex64 {
        let m = self.maps[k - 1];
        match self.geometry {
            Geometry::Chordal => {
                let u = self.drive[k];
                let w = z - u;
                u + sqrt_up(w * w + m.factor, w.re)
            }
            Geometry::Radial => m.rot * koebe_inv(koebe(z * m.rot.conj()) / m.factor),
        }
    }

    #[inline]
    fn apply_inv(&self, z: Complex64, k: usize) -> Complex64 {
        let m = self.maps[k - 1];
        match self.geometry {
            Geometry::Chordal => {
                let u = self.drive[k];
                let w = z - u;
                u + sqrt_up(w * w - m.factor, w.re)
            }
            Geometry::Radial => m.rot * koebe_inv(koebe(z * m.rot.conj()) * m.factor),
        }
    }

    /// Image under the elementary map of step `k` alone (`1 <= k <= steps`).
    pub fn forward_step(&self, z: Complex64, k: usize) -> Complex64 {
        self.apply_fwd(z, k)
    }

    /// `g_t(z)` after the first `k` steps.
    pub fn forward_upto(&self, z: Complex64, k: usize) -> Complex64 {
        (1..=k.min(self.steps())).fold(z, |z, j| self.apply_fwd(z, j))
    }

    pub fn forward(&self, z: Complex64) -> Complex64 {
        self.forward_upto(z, self.steps())
    }

    /// Inverse of the first `k` steps.
    pub fn inverse_upto(&self, w: Complex64, k: usize) -> Complex64 {
        (1..=k.min(self.steps())).rev().fold(w, |w, j| self.apply_inv(w, j))
    }

    pub fn inverse(&self, w: Complex64) -> Complex64 {
        self.inverse_upto(w, self.steps())
    }

    fn driving_point(&self, k: usize) -> Complex64 {
        match self.geometry {
            Geometry::Chordal => Complex64::new(self.drive[k], 0.0),
            Geometry::Radial => Complex64::cis(self.drive[k]),
        }
    }

    fn raw_tip(&self, k: usize) -> Complex64 {
        self.inverse_upto(self.driving_point(k), k)
    }

    /// Tip of the hull after `k` steps.
    pub fn tip(&self, k: usize) -> Result<Complex64> {
        let z = self.raw_tip(k);
        if z.is_finite() {
            return Ok(z);
        }
        // The last step split into 2^j identical pieces composes to the same map.
        let (u, d) = self.step(k);
        for j in 1..=4 {
            let pieces = 1usize << j;
            let dd = d / pieces as f64;
            let mut w = self.driving_point(k);
            for _ in 0..pieces {
                w = match self.geometry {
                    Geometry::Chordal => chordal_inv(w, u, dd),
                    Geometry::Radial => radial_inv(w, u, dd),
                };
            }
            let z = self.inverse_upto(w, k - 1);
            if z.is_finite() {
                return Ok(z);
            }
        }
        Err(Error::NumericalBlowUp(format!("tip at step {k} is not finite")))
    }

    /// Tip positions at the grid times, parametrized by capacity.
    pub fn trace(&self) -> Result<ParamCurve> {
        let points = (0..=self.steps()).map(|k| self.tip(k)).collect::<Result<Vec<_>>>()?;
        ParamCurve::new(self.times.clone(), points)
    }

    /// `Im w / Im g_t(w)` for a point of the upper half-plane.
    pub fn im_ratio(&self, w: Complex64) -> Result<f64> {
        let g = self.checked_image(w)?;
        Ok(w.im / g.im)
    }

    /// `sin(arg(g_t(w) - W_t))`.
    pub fn sine_chordal(&self, w: Complex64) -> Result<f64> {
        let g = self.checked_image(w)?;
        let z = g - self.current_drive();
        Ok(z.im / z.norm())
    }

    fn checked_image(&self, w: Complex64) -> Result<Complex64> {
        if self.geometry != Geometry::Chordal {
            return Err(Error::Precondition("chordal chain required".into()));
        }
        if !(w.im > 0.0) {
            return Err(Error::Precondition(format!("{w} is not in the upper half-plane")));
        }
        let g = self.forward(w);
        if !g.is_finite() || g.im <= 1e-14 * (1.0 + g.norm()) {
            return Err(Error::Swallowed);
        }
        Ok(g)
    }

    /// Conformal radius of the slit disk seen from 0, from the bookkeeping.
    pub fn conformal_radius(&self) -> f64 {
        (-2.0 * self.capacity()).exp()
    }

    /// Conformal radius measured from the composed inverse map near 0.
    pub fn conformal_radius_measured(&self) -> Result<f64> {
        if self.geometry != Geometry::Radial {
            return Err(Error::Precondition("radial chain required".into()));
        }
        let eps = 1e-7;
        Ok(self.inverse(Complex64::new(eps, 0.0)).norm() / eps)
    }

    /// Half-angles `theta_t` of the marked boundary point `e^{i b}` relative to the
    /// tip, so that `f_t(b) = e^{i (W_t + 2 theta_t)}`. Sines are `sin theta_t`.
    pub fn radial_angles(&self, b: f64) -> Result<Vec<f64>> {
        if self.geometry != Geometry::Radial {
            return Err(Error::Precondition("radial chain required".into()));
        }
        let phi = (b - self.drive[0]).rem_euclid(std::f64::consts::TAU);
        if phi == 0.0 {
            return Err(Error::Swallowed);
        }
        let mut theta = phi / 2.0;
        let mut out = Vec::with_capacity(self.times.len());
        out.push(theta);
        for k in 1..=self.steps() {
            let (u, d) = self.step(k);
            theta -= (u - self.drive[k - 1]) / 2.0;
            if !(theta > 0.0 && theta < std::f64::consts::PI) {
                return Err(Error::Swallowed);
            }
            theta = ((-d).exp() * theta.cos()).acos();
            out.push(theta);
        }
        Ok(out)
    }

    /// Sine process `S_t = sin theta_t` for the marked point `e^{i b}`.
    pub fn sine_radial(&self, b: f64) -> Result<Vec<f64>> {
        Ok(self.radial_angles(b)?.into_iter().map(f64::sin).collect())
    }

    /// CSV of (capacity time, driving value).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,driving")?;
        for (t, u) in self.times.iter().zip(&self.drive) {
            writeln!(w, "{t},{u}")?;
        }
        Ok(())
    }
}

/// Chordal chain mapping out a sampled curve of the closed upper half-plane with
/// one vertical slit per segment (the zipper). The composed map is hydrodynamically
/// normalized.
pub fn mapout(curve: &ParamCurve) -> Result<LoewnerChain> {
    let pts = curve.points();
    let scale = pts.iter().map(|p| p.norm()).fold(1.0, f64::max);
    if pts[0].im.abs() > 1e-9 * scale {
        return Err(Error::Precondition(format!("curve starts at {} off the real axis", pts[0])));
    }
    let mut chain = LoewnerChain::raw(Geometry::Chordal, vec![0.0], vec![pts[0].re]);
    for (j, p) in pts.iter().enumerate().skip(1) {
        if p.im < -1e-12 * scale {
            return Err(Error::ExitsHalfPlane(j));
        }
        let q = chain.forward(*p);
        if !q.is_finite() || q.im < -1e-12 * scale {
            return Err(Error::ExitsHalfPlane(j));
        }
        let d = q.im.max(0.0).powi(2) / 4.0;
        if d > 0.0 {
            chain.push(q.re, d)?;
        }
    }
    Ok(chain)
}

/// Tip-jump control for adaptive SLE sampling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SleOptions {
    /// Nominal capacity step.
    pub dt: f64,
    /// Largest accepted tip displacement per step; `None` disables tip tracking.
    pub max_jump: Option<f64>,
    /// Outside this radius the jump threshold grows linearly with `|tip|`.
    pub focus: Option<f64>,
    pub max_halvings: u32,
}

impl SleOptions {
    pub fn uniform(dt: f64) -> Self {
        SleOptions { dt, max_jump: None, focus: None, max_halvings: 0 }
    }

    pub fn adaptive(dt: f64, max_jump: f64) -> Self {
        SleOptions { dt, max_jump: Some(max_jump), focus: None, max_halvings: 12 }
    }

    fn threshold(&self, tip: Complex64) -> f64 {
        let h = self.max_jump.unwrap_or(f64::INFINITY);
        match self.focus {
            Some(r) => h * (tip.norm() / r).max(1.0),
            None => h,
        }
    }
}

/// Grows an SLE_2 chain step by step. Steps whose tip jumps too far are split
/// with Brownian-bridge midpoints, so refinement never changes the driving path
/// at previously sampled times.
pub struct SleGrower {
    chain: LoewnerChain,
    tips: Vec<Complex64>,
    opts: SleOptions,
    rng: LabRng,
    last_len: f64,
}

impl SleGrower {
    pub fn new(geometry: Geometry, opts: SleOptions, rng: LabRng) -> Result<Self> {
        if !(opts.dt > 0.0) || !opts.dt.is_finite() {
            return Err(Error::Precondition(format!("invalid step {}", opts.dt)));
        }
        let chain = LoewnerChain::empty(geometry);
        let tips = vec![chain.driving_point(0)];
        Ok(SleGrower { chain, tips, opts, rng, last_len: opts.dt })
    }

    pub fn chain(&self) -> &LoewnerChain {
        &self.chain
    }

    pub fn into_chain(self) -> LoewnerChain {
        self.chain
    }

    /// Tips at every accepted step (only the start when jumps are not tracked).
    pub fn tips(&self) -> &[Complex64] {
        &self.tips
    }

    pub fn tip(&self) -> Complex64 {
        *self.tips.last().unwrap()
    }

    pub fn trace(&self) -> Result<ParamCurve> {
        if self.opts.max_jump.is_some() {
            ParamCurve::new(self.chain.times.clone(), self.tips.clone())
        } else {
            self.chain.trace()
        }
    }

    /// Advances by one nominal step, truncated at `horizon`. With tip tracking the
    /// nominal step is at most twice the last accepted one. Returns the number of
    /// accepted sub-steps.
    pub fn advance(&mut self, horizon: f64) -> Result<usize> {
        let t0 = self.chain.capacity();
        let mut h = self.opts.dt.min(horizon - t0);
        if self.opts.max_jump.is_some() && 2.0 * self.last_len < h {
            h = 2.0 * self.last_len;
        }
        if !(h > 0.0) {
            return Ok(0);
        }
        let rate = self.chain.geometry.driving_rate();
        let w0 = self.chain.current_drive();
        let z: f64 = self.rng.sample(StandardNormal);
        let w1 = w0 + (rate * h).sqrt() * z;
        if self.opts.max_jump.is_none() {
            self.chain.push(w1, h)?;
            return Ok(1);
        }
        let mut stack = vec![(h, w1, 0u32)];
        let mut accepted = 0;
        while let Some((len, w_end, depth)) = stack.pop() {
            let w_start = self.chain.current_drive();
            self.chain.push(w_end, len)?;
            let k = self.chain.steps();
            let tip = self.chain.raw_tip(k);
            let prev = self.tip();
            let ok = tip.is_finite() && (tip - prev).norm() <= self.opts.threshold(prev);
            if ok || depth >= self.opts.max_halvings {
                let tip = if tip.is_finite() { tip } else { self.chain.tip(k)? };
                self.tips.push(tip);
                self.last_len = len;
                accepted += 1;
                continue;
            }
            self.chain.pop();
            let z: f64 = self.rng.sample(StandardNormal);
            let mid = 0.5 * (w_start + w_end) + (rate * len / 4.0).sqrt() * z;
            stack.push((len / 2.0, w_end, depth + 1));
            stack.push((len / 2.0, mid, depth + 1));
        }
        Ok(accepted)
    }

    /// Grows until capacity `horizon` or until `stop` returns true on the tip list.
    pub fn grow_until<F: FnMut(&[Complex64]) -> bool>(&mut self, horizon: f64, mut stop: F) -> Result<bool> {
        while self.chain.capacity() < horizon * (1.0 - 1e-12) {
            self.advance(horizon)?;
            if stop(&self.tips) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Chordal SLE_2 in the upper half-plane from 0 up to capacity `t`.
pub fn chordal_sle2(t: f64, opts: SleOptions, seed: u64) -> Result<SleGrower> {
    let mut g = SleGrower::new(Geometry::Chordal, opts, rng::seeded(seed))?;
    g.grow_until(t, |_| false)?;
    Ok(g)
}

/// Radial SLE_2 in the unit disk from 1 towards 0 up to capacity `t`.
pub fn radial_sle2(t: f64, dt: f64, seed: u64) -> Result<LoewnerChain> {
    Ok(LoewnerChain::from_driving(&radial_sle2_drive(t, dt, seed)?))
}

/// Adaptive radial SLE_2 up to capacity `t`.
pub fn radial_sle2_adaptive(t: f64, opts: SleOptions, rng: LabRng) -> Result<SleGrower> {
    let mut g = SleGrower::new(Geometry::Radial, opts, rng)?;
    g.grow_until(t, |_| false)?;
    Ok(g)
}

/// First point where the polyline through `tips` enters the closed disk of radius
/// `r` about `center`, with the index of the segment end.
pub fn first_entry(tips: &[Complex64], center: Complex64, r: f64) -> Option<(usize, Complex64)> {
    if (tips.first()? - center).norm() <= r {
        return Some((0, tips[0]));
    }
    for (j, w) in tips.windows(2).enumerate() {
        if (w[1] - center).norm() <= r {
            // Solve |p + s q - center| = r for the first s in [0, 1].
            let p = w[0] - center;
            let q = w[1] - w[0];
            let a = q.norm_sqr();
            let b = 2.0 * (p.re * q.re + p.im * q.im);
            let c = p.norm_sqr() - r * r;
            let disc = (b * b - 4.0 * a * c).max(0.0);
            let s = ((-b - disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
            return Some((j + 1, w[0] + s * q));
        }
    }
    None
}

/// Radial SLE_2 from 1 grown until the trace first reaches the circle of radius
/// `r`; returns the hitting point. Fails if capacity `horizon` is exhausted.
pub fn radial_first_hit(r: f64, horizon: f64, opts: SleOptions, rng: LabRng) -> Result<Complex64> {
    let mut g = SleGrower::new(Geometry::Radial, SleOptions { max_jump: opts.max_jump.or(Some(0.02)), ..opts }, rng)?;
    let mut hit = None;
    g.grow_until(horizon, |tips| {
        let n = tips.len();
        if tips[n - 1].norm() <= r {
            hit = first_entry(&tips[n - 2..], Complex64::new(0.0, 0.0), r).map(|h| h.1);
            true
        } else {
            false
        }
    })?;
    hit.ok_or_else(|| Error::NumericalBlowUp(format!("radius {r} not reached by capacity {horizon}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselPath {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    /// For each queried level `delta`, the first time `theta <= delta` (or
    /// `theta >= pi - delta`), if any.
    pub hits: Vec<(f64, Option<f64>)>,
}

impl BesselPath {
    pub fn terminal(&self) -> f64 {
        *self.theta.last().unwrap()
    }
}

/// Euler-Maruyama for `d theta = cot(theta) dt + dW`. A step that would leave
/// `(0, pi)` is rejected and replaced by two half steps whose Brownian increments
/// are drawn from the bridge.
pub fn bessel_theta(theta0: f64, t: f64, dt: f64, seed: u64, deltas: &[f64]) -> Result<BesselPath> {
    bessel_theta_with(theta0, t, dt, &mut rng::seeded(seed), deltas)
}

pub fn bessel_theta_with(theta0: f64, t: f64, dt: f64, rng: &mut LabRng, deltas: &[f64]) -> Result<BesselPath> {
    use std::f64::consts::PI;
    if !(theta0 > 0.0 && theta0 < PI) {
        return Err(Error::Precondition(format!("theta0 = {theta0} outside (0, pi)")));
    }
    let times = uniform_grid(t, dt)?;
    let mut hits: Vec<(f64, Option<f64>)> = deltas.iter().map(|&d| (d, None)).collect();
    let record = |theta: f64, time: f64, hits: &mut Vec<(f64, Option<f64>)>| {
        for h in hits.iter_mut() {
            if h.1.is_none() && (theta <= h.0 || theta >= PI - h.0) {
                h.1 = Some(time);
            }
        }
    };
    record(theta0, 0.0, &mut hits);
    let mut theta = theta0;
    let mut path = Vec::with_capacity(times.len());
    path.push(theta);
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let dw = h.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let mut stack = vec![(h, dw, 0u32)];
        let mut now = w[0];
        while let Some((len, dw, depth)) = stack.pop() {
            let next = theta + len / theta.tan() + dw;
            if next > 0.0 && next < PI {
                theta = next;
                now += len;
                record(theta, now, &mut hits);
            } else if depth < 48 {
                let dw1 = 0.5 * dw + (len / 4.0).sqrt() * rng.sample::<f64, _>(StandardNormal);
                stack.push((len / 2.0, dw - dw1, depth + 1));
                stack.push((len / 2.0, dw1, depth + 1));
            } else {
                theta = if next <= 0.0 { 0.5 * theta } else { 0.5 * (theta + PI) };
                now += len;
                record(theta, now, &mut hits);
            }
        }
        path.push(theta);
    }
    Ok(BesselPath { times, theta: path, hits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn drive_is_deterministic_and_has_right_variance() {
        let a = chordal_sle2_drive(1.0, 1e-5, 7).unwrap();
        let b = chordal_sle2_drive(1.0, 1e-5, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps(), 100_000);
        let inc = a.increments();
        let n = inc.len() as f64;
        let var = inc.iter().map(|x| x * x).sum::<f64>() / n;
        let se = 2.0 * 1e-5 * (2.0 / n).sqrt();
        assert!((var - 2e-5).abs() < 3.0 * se, "{var}");
        assert_eq!(chordal_sle2_drive(0.0, 0.1, 1).unwrap().steps(), 0);
        assert!(chordal_sle2_drive(0.1, 0.2, 1).is_err());
    }

    #[test]
    fn constant_driving_traces_vertical_segment() {
        let d = DrivingFunction::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.0; 4], Geometry::Chordal).unwrap();
        let tr = LoewnerChain::from_driving(&d).trace().unwrap();
        assert_eq!(tr.duration(), 1.0);
        for (t, p) in tr.times().iter().zip(tr.points()) {
            assert!((p - c(0.0, 2.0 * t.sqrt())).norm() < 1e-12);
        }
    }

    #[test]
    fn vertical_slit_mapout_matches_closed_form() {
        let y = 1.7;
        let pts: Vec<_> = (0..=50).map(|k| c(0.0, y * k as f64 / 50.0)).collect();
        let chain = mapout(&ParamCurve::uniform(pts, 1.0).unwrap()).unwrap();
        assert!((chain.capacity() - y * y / 4.0).abs() < 1e-12);
        for k in 0..10 {
            let z = c(-2.0 + 0.45 * k as f64, 0.1 + 0.3 * k as f64);
            let expect = sqrt_up(z * z + y * y, z.re);
            assert!((chain.forward(z) - expect).norm() < 1e-6);
        }
        let empty = mapout(&ParamCurve::constant(c(0.3, 0.0), 1.0)).unwrap();
        assert_eq!(empty.steps(), 0);
        assert_eq!(empty.forward(c(0.2, 0.5)), c(0.2, 0.5));
    }

    #[test]
    fn mapout_rejects_lower_half_plane() {
        let pts = vec![c(0.0, 0.0), c(0.0, 0.5), c(1.0, -0.5)];
        assert!(matches!(mapout(&ParamCurve::uniform(pts, 1.0).unwrap()), Err(Error::ExitsHalfPlane(2))));
    }

    #[test]
    fn im_ratio_and_sines() {
        let empty = LoewnerChain::empty(Geometry::Chordal);
        assert_eq!(empty.im_ratio(c(0.3, 2.0)).unwrap(), 1.0);
        assert!((empty.sine_chordal(c(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((empty.sine_chordal(c(1.0, 1.0)).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        let slit = LoewnerChain::from_steps(Geometry::Chordal, 0.0, &[(0.0, 0.25)]).unwrap();
        assert!((slit.im_ratio(c(0.0, 2.0)).unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!(matches!(slit.im_ratio(c(0.0, 1.0)), Err(Error::Swallowed)));
        assert!((slit.im_ratio(c(0.0, 1e4)).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chordal_evaluation_keeps_half_plane() {
        let g = chordal_sle2(1.0, SleOptions::uniform(1e-3), 3).unwrap();
        let chain = g.chain();
        for k in 0..20 {
            let z = c(-3.0 + 0.3 * k as f64, 0.05 + 0.2 * k as f64);
            let mut prev = z.im;
            for j in (0..=chain.steps()).step_by(50) {
                let w = chain.forward_upto(z, j);
                assert!(w.im >= 0.0 && w.im <= prev + 1e-12);
                prev = w.im;
            }
        }
    }

    #[test]
    fn capacity_is_additive_under_mapout() {
        let g = chordal_sle2(0.5, SleOptions::adaptive(1e-3, 0.02), 11).unwrap();
        let curve = g.trace().unwrap();
        let whole = mapout(&curve).unwrap();
        let half = curve.len() / 2;
        let first = mapout(&ParamCurve::new(curve.times()[..=half].to_vec(), curve.points()[..=half].to_vec()).unwrap())
            .unwrap();
        let rest: Vec<_> = curve.points()[half..].iter().map(|p| first.forward(*p)).collect();
        let rest = ParamCurve::uniform(rest, 1.0).unwrap();
        let second = mapout(&rest).unwrap();
        let total = first.capacity() + second.capacity();
        assert!((total - whole.capacity()).abs() < 1e-6 * whole.capacity());
        assert!((whole.capacity() - 0.5).abs() < 0.05, "{}", whole.capacity());
    }

    #[test]
    fn slit_capacity_scales_quadratically() {
        let pts: Vec<_> = (0..=40).map(|k| c(0.3 * k as f64 / 40.0, 0.8 * k as f64 / 40.0)).collect();
        let curve = ParamCurve::uniform(pts, 1.0).unwrap();
        let a = mapout(&curve).unwrap().capacity();
        for r in [0.5, 3.0] {
            let b = mapout(&curve.map_points(|z| z * r)).unwrap().capacity();
            assert!((b / a - r * r).abs() < 1e-9 * r * r);
        }
    }

    #[test]
    fn refined_trace_is_close() {
        let mut coarse = SleGrower::new(Geometry::Chordal, SleOptions::uniform(1e-3), rng::seeded(5)).unwrap();
        coarse.grow_until(0.2, |_| false).unwrap();
        // Refine the same driving path by bridge midpoints.
        let mut r = rng::seeded(99);
        let d = coarse.chain().driving();
        let mut times = vec![0.0];
        let mut vals = vec![0.0];
        for k in 1..d.times().len() {
            let (t0, t1) = (d.times()[k - 1], d.times()[k]);
            let (w0, w1) = (d.values()[k - 1], d.values()[k]);
            let mid = 0.5 * (w0 + w1) + (2.0 * (t1 - t0) / 4.0).sqrt() * r.sample::<f64, _>(StandardNormal);
            times.extend([0.5 * (t0 + t1), t1]);
            vals.extend([mid, w1]);
        }
        let fine = LoewnerChain::from_driving(&DrivingFunction::new(times, vals, Geometry::Chordal).unwrap());
        let a = coarse.chain().trace().unwrap();
        let b = fine.trace().unwrap();
        let sup = (0..a.len()).map(|k| (a.points()[k] - b.points()[2 * k]).norm()).fold(0.0, f64::max);
        assert!(sup < 0.1, "{sup}");
    }

    #[test]
    fn radial_conformal_radius_decays() {
        let chain = radial_sle2(1.0, 1e-3, 4).unwrap();
        let mut xs = vec![];
        let mut ys = vec![];
        for k in (0..=chain.steps()).step_by(100) {
            let sub = chain.prefix(k);
            xs.push(sub.capacity());
            ys.push(sub.conformal_radius_measured().unwrap().ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 2.0).abs() < 1e-3, "{slope}");
        let id = radial_sle2(0.0, 0.1, 1).unwrap();
        assert_eq!(id.forward(c(0.3, 0.2)), c(0.3, 0.2));
    }

    #[test]
    fn radial_evaluation_stays_in_disk() {
        let chain = radial_sle2(0.5, 1e-3, 8).unwrap();
        for k in 0..20 {
            let z = Complex64::from_polar(0.05 * k as f64, 0.7 * k as f64);
            let w = chain.forward(z);
            assert!(w.norm() <= 1.0 + 1e-12);
        }
        assert!(chain.forward(c(0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn radial_trace_approaches_origin() {
        let mut g = SleGrower::new(Geometry::Radial, SleOptions::adaptive(2e-3, 0.05), rng::seeded(2)).unwrap();
        let mut last = f64::INFINITY;
        for t in [0.25, 0.5, 1.0, 1.5] {
            g.grow_until(t, |_| false).unwrap();
            let r = g.tip().norm();
            assert!(r < last);
            assert!(r >= g.chain().conformal_radius() / 4.0 - 1e-9);
            last = r;
        }
    }

    #[test]
    fn sine_radial_starts_balanced() {
        let chain = radial_sle2(0.3, 1e-3, 1).unwrap();
        let s = chain.sine_radial(PI).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!(s.iter().all(|&v| v > 0.0 && v <= 1.0));
        let angles = chain.radial_angles(PI).unwrap();
        // Direct check against the forward map applied to the marked point.
        let k = chain.steps();
        let img = chain.forward(Complex64::from_polar(1.0 - 1e-12, PI));
        let expect = chain.drive()[k] + 2.0 * angles[k];
        assert!((img.arg().rem_euclid(2.0 * PI) - expect.rem_euclid(2.0 * PI)).abs() < 1e-5);
    }

    #[test]
    fn bessel_drift_vanishes_at_half_pi() {
        let theta = PI / 2.0;
        assert!((theta + 0.01 / theta.tan() - theta).abs() < 1e-15);
        let p = bessel_theta(PI / 2.0, 0.5, 1e-3, 3, &[0.1]).unwrap();
        assert!(p.theta.iter().all(|&t| t > 0.0 && t < PI));
        assert_eq!(p.times.len(), p.theta.len());
    }

    #[test]
    fn fast_sqrt_matches_library() {
        for k in 0..200 {
            let z = Complex64::from_polar(0.1 + k as f64 * 0.37, k as f64 * 0.71 - 70.0);
            assert!((csqrt(z) - z.sqrt()).norm() < 1e-12 * (1.0 + z.norm()));
        }
        assert_eq!(csqrt(c(-4.0, 0.0)), c(0.0, 2.0));
    }

    #[test]
    fn first_entry_interpolates() {
        let tips = [c(1.0, 0.0), c(0.8, 0.0), c(0.4, 0.0)];
        let (j, p) = first_entry(&tips, c(0.0, 0.0), 0.5).unwrap();
        assert_eq!(j, 2);
        assert!((p - c(0.5, 0.0)).norm() < 1e-12);
    }
}
