//! Loop-erased random walk: loop erasure, exact enumeration of the radial and
//! chordal path measures, exact samplers, and natural parametrization.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::curve::ParamCurve;
use crate::error::{Error, Result};
use crate::harmonic::{boundary_poisson_with, green, DirichletSolver, GreenTable};
use crate::lattice::{Edge, LatticeDomain, Site};
use crate::rng::{self, LabRng};
pub use crate::saw::{Roles, Saw};

/// Largest domain accepted by [`exact_distribution`].
pub const ENUMERATION_LIMIT: usize = 12;

/// Chronological loop erasure of a nearest-neighbour walk.
pub fn loop_erase(walk: &[Site]) -> Result<Saw> {
    if walk.is_empty() {
        return Err(Error::InvalidPath("empty walk".into()));
    }
    for (i, w) in walk.windows(2).enumerate() {
        if !w[0].is_adjacent(w[1]) {
            return Err(Error::NonAdjacentStep { index: i + 1 });
        }
    }
    let mut path: Vec<Site> = Vec::new();
    let mut pos: HashMap<Site, usize> = HashMap::new();
    for &v in walk {
        if let Some(&p) = pos.get(&v) {
            for u in path.drain(p + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(v, path.len());
            path.push(v);
        }
    }
    Saw::new(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Origin,
    Edge(Edge),
}

/// Incremental Cholesky factor of `G[V, V]` as vertices are pushed and
/// popped, tracking `log det`.
struct BlockDet<'g> {
    g: &'g GreenTable,
    idx: Vec<usize>,
    rows: Vec<Vec<f64>>,
    log_det: Vec<f64>,
}

impl<'g> BlockDet<'g> {
    fn new(g: &'g GreenTable) -> Self {
        BlockDet { g, idx: Vec::new(), rows: Vec::new(), log_det: vec![0.0] }
    }

    fn push(&mut self, v: usize) {
        let k = self.idx.len();
        let mut y = vec![0.0; k + 1];
        let mut dd = self.g.get(v, v);
        for j in 0..k {
            let mut s = self.g.get(self.idx[j], v);
            for l in 0..j {
                s -= self.rows[j][l] * y[l];
            }
            y[j] = s / self.rows[j][j];
            dd -= y[j] * y[j];
        }
        y[k] = dd.sqrt();
        self.idx.push(v);
        self.rows.push(y);
        let last = *self.log_det.last().unwrap();
        self.log_det.push(last + dd.ln());
    }

    fn pop(&mut self) {
        self.idx.pop();
        self.rows.pop();
        self.log_det.pop();
    }

    fn value(&self) -> f64 {
        self.log_det.last().unwrap().exp()
    }
}

/// Unnormalized radial measure `sum p(eta) Lambda_eta(A)` over `W_{A,a,0}`
/// for every boundary edge `a`, in boundary-edge order. The walks are
/// enumerated backwards from the origin.
pub fn radial_mass_by_edge(domain: &LatticeDomain) -> Result<Vec<f64>> {
    if domain.len() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { size: domain.len(), limit: ENUMERATION_LIMIT });
    }
    let g = green(domain)?;
    let edges = domain.boundary_edges();
    let mut mass = vec![0.0; edges.len()];
    let mut det = BlockDet::new(&g);
    let mut on = vec![false; domain.len()];
    fn dfs(
        domain: &LatticeDomain,
        u: usize,
        depth: usize,
        det: &mut BlockDet,
        on: &mut [bool],
        mass: &mut [f64],
    ) {
        det.push(u);
        on[u] = true;
        let w = 0.25f64.powi(depth as i32) * det.value();
        let site = domain.sites()[u];
        for (k, e) in domain.boundary_edges().iter().enumerate() {
            if e.inner == site {
                mass[k] += w;
            }
        }
        for v in domain.neighbor_indices(u).into_iter().flatten() {
            if !on[v] {
                dfs(domain, v, depth + 1, det, on, mass);
            }
        }
        on[u] = false;
        det.pop();
    }
    dfs(domain, domain.origin_index(), 1, &mut det, &mut on, &mut mass);
    Ok(mass)
}

/// Largest deviation `|sum p Lambda - H_A(0, a)|` over the boundary edges.
pub fn radial_identity_residual(domain: &LatticeDomain) -> Result<f64> {
    let mass = radial_mass_by_edge(domain)?;
    let solver = DirichletSolver::new(domain)?;
    let h0 = solver.unit_solve(domain.origin_index());
    let mut worst: f64 = 0.0;
    for (m, e) in mass.iter().zip(domain.boundary_edges()) {
        let h = h0[domain.index_of(e.inner).unwrap()];
        worst = worst.max((m - h).abs());
    }
    Ok(worst)
}

/// Every SAW with the given roles together with `p(eta) Lambda_eta(A)`
/// (unnormalized), and the normalizing harmonic quantity `H_A(0, a)` or
/// `H_dA(a, b)`.
pub fn exact_measure(domain: &LatticeDomain, a: Edge, target: Target) -> Result<(Vec<(Saw, f64)>, f64)> {
    if domain.len() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { size: domain.len(), limit: ENUMERATION_LIMIT });
    }
    if !domain.is_boundary_edge(&a) {
        return Err(Error::Precondition(format!("{a:?} is not a boundary edge")));
    }
    if let Target::Edge(b) = target {
        if !domain.is_boundary_edge(&b) || b == a {
            return Err(Error::Precondition("b must be a boundary edge different from a".into()));
        }
    }
    let g = green(domain)?;
    let solver = DirichletSolver::new(domain)?;
    let norm = match target {
        Target::Origin => solver.unit_solve(domain.origin_index())[domain.index_of(a.inner).unwrap()],
        Target::Edge(b) => boundary_poisson_with(&solver, domain, &a, &b)?,
    };
    struct Ctx<'a, 'g> {
        domain: &'a LatticeDomain,
        a: Edge,
        target: Target,
        det: BlockDet<'g>,
        on: Vec<bool>,
        path: Vec<Site>,
        out: Vec<(Saw, f64)>,
    }
    fn dfs(c: &mut Ctx, u: usize) {
        let site = c.domain.sites()[u];
        c.det.push(u);
        c.on[u] = true;
        c.path.push(site);
        match c.target {
            Target::Origin if site == Site::ORIGIN => {
                let k = c.path.len() - 1;
                let w = 0.25f64.powi(k as i32) * c.det.value();
                let saw = Saw::from_parts_unchecked(c.path.clone(), Roles::Radial { start: c.a });
                c.out.push((saw, w));
            }
            Target::Edge(b) if site == b.inner => {
                let mut v = c.path.clone();
                v.push(b.outer);
                let k = v.len() - 1;
                let w = 0.25f64.powi(k as i32) * c.det.value();
                c.out.push((Saw::from_parts_unchecked(v, Roles::Chordal { start: c.a, end: b }), w));
            }
            _ => {
                for v in c.domain.neighbor_indices(u).into_iter().flatten() {
                    if !c.on[v] {
                        dfs(c, v);
                    }
                }
            }
        }
        c.path.pop();
        c.on[u] = false;
        c.det.pop();
    }
    let mut ctx = Ctx {
        domain,
        a,
        target,
        det: BlockDet::new(&g),
        on: vec![false; domain.len()],
        path: vec![a.outer],
        out: Vec::new(),
    };
    dfs(&mut ctx, domain.index_of(a.inner).unwrap());
    Ok((ctx.out, norm))
}

/// Exact law of radial (`Target::Origin`) or chordal LERW from `a`.
pub fn exact_distribution(domain: &LatticeDomain, a: Edge, target: Target) -> Result<Vec<(Saw, f64)>> {
    let (measure, norm) = exact_measure(domain, a, target)?;
    if norm <= 0.0 {
        return Err(Error::Unreachable);
    }
    Ok(measure.into_iter().map(|(s, w)| (s, w / norm)).collect())
}

const OUT: u32 = u32::MAX;

/// Walk conditioned by a Doob transform to leave the domain through one
/// given edge. Transition probabilities are `h(y) / (4 h(x))` with `h` the
/// Poisson kernel of that edge.
pub struct ConditionedWalk {
    sites: Vec<Site>,
    next: Vec<[u32; 4]>,
    cum: Vec<[f64; 4]>,
    exit: Edge,
}

impl ConditionedWalk {
    pub fn new(domain: &LatticeDomain, exit: Edge) -> Result<Self> {
        let solver = DirichletSolver::new(domain)?;
        Self::with_solver(domain, &solver, exit)
    }

    pub fn with_solver(domain: &LatticeDomain, solver: &DirichletSolver, exit: Edge) -> Result<Self> {
        if !domain.is_boundary_edge(&exit) {
            return Err(Error::Precondition(format!("{exit:?} is not a boundary edge")));
        }
        let h = solver.unit_solve(domain.index_of(exit.inner).unwrap());
        let n = domain.len();
        let mut next = Vec::with_capacity(n);
        let mut cum = Vec::with_capacity(n);
        for i in 0..n {
            let s = domain.sites()[i];
            let nb = domain.neighbor_indices(i);
            let mut q = [0.0; 4];
            let mut nx = [OUT; 4];
            for d in 0..4 {
                match nb[d] {
                    Some(j) => {
                        q[d] = h[j].max(0.0);
                        nx[d] = j as u32;
                    }
                    None if s == exit.inner && s.neighbors()[d] == exit.outer => q[d] = 1.0,
                    None => {}
                }
            }
            let tot: f64 = q.iter().sum();
            if !(tot > 0.0) || !(h[i] > 0.0) {
                return Err(Error::Unreachable);
            }
            let last = (0..4).rev().find(|&d| q[d] > 0.0).unwrap();
            let mut c = [f64::INFINITY; 4];
            let mut acc = 0.0;
            for d in 0..last {
                acc += q[d] / tot;
                c[d] = acc;
            }
            next.push(nx);
            cum.push(c);
        }
        Ok(ConditionedWalk { sites: domain.sites().to_vec(), next, cum, exit })
    }

    /// Runs the walk from vertex index `start` until it leaves through the
    /// exit edge, loop-erasing on the fly. Returns the erased path as vertex
    /// indices (the exit is implicit) and the number of walk steps.
    pub fn run_erased(&self, start: usize, rng: &mut LabRng, ws: &mut Workspace) -> (Vec<u32>, u64) {
        ws.ensure(self.sites.len());
        let mut path: Vec<u32> = Vec::with_capacity(256);
        let mut x = start as u32;
        ws.pos[x as usize] = 0;
        path.push(x);
        let mut steps = 0u64;
        loop {
            let u: f64 = rng.random();
            let c = &self.cum[x as usize];
            let d = if u < c[0] {
                0
            } else if u < c[1] {
                1
            } else if u < c[2] {
                2
            } else {
                3
            };
            steps += 1;
            let y = self.next[x as usize][d];
            if y == OUT {
                break;
            }
            let p = ws.pos[y as usize] as usize;
            if p < path.len() && path[p] == y {
                path.truncate(p + 1);
            } else {
                ws.pos[y as usize] = path.len() as u32;
                path.push(y);
            }
            x = y;
        }
        (path, steps)
    }

    pub fn site(&self, i: u32) -> Site {
        self.sites[i as usize]
    }

    pub fn exit(&self) -> Edge {
        self.exit
    }
}

/// Per-thread scratch space for on-the-fly loop erasure.
#[derive(Default)]
pub struct Workspace {
    pos: Vec<u32>,
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        if self.pos.len() < n {
            self.pos = vec![u32::MAX; n];
        }
    }
}

/// Exact radial LERW sampler for `(A, a)`.
pub struct RadialSampler {
    walk: ConditionedWalk,
    origin: usize,
    start: Edge,
}

impl RadialSampler {
    pub fn new(domain: &LatticeDomain, a: Edge) -> Result<Self> {
        Ok(RadialSampler { walk: ConditionedWalk::new(domain, a)?, origin: domain.origin_index(), start: a })
    }

    pub fn with_solver(domain: &LatticeDomain, solver: &DirichletSolver, a: Edge) -> Result<Self> {
        Ok(RadialSampler {
            walk: ConditionedWalk::with_solver(domain, solver, a)?,
            origin: domain.origin_index(),
            start: a,
        })
    }

    /// Vertex indices from `a.inner` to the origin (the outer endpoint of `a`
    /// is implicit) and the length of the underlying walk.
    pub fn sample_indices(&self, rng: &mut LabRng, ws: &mut Workspace) -> (Vec<u32>, u64) {
        let (mut path, steps) = self.walk.run_erased(self.origin, rng, ws);
        path.reverse();
        (path, steps)
    }

    pub fn sample(&self, rng: &mut LabRng, ws: &mut Workspace) -> Saw {
        let (path, _) = self.sample_indices(rng, ws);
        let mut v = Vec::with_capacity(path.len() + 1);
        v.push(self.start.outer);
        v.extend(path.iter().map(|&i| self.walk.site(i)));
        Saw::from_parts_unchecked(v, Roles::Radial { start: self.start })
    }

    pub fn site(&self, i: u32) -> Site {
        self.walk.site(i)
    }
}

/// Exact chordal LERW sampler for `(A, a, b)`.
pub struct ChordalSampler {
    walk: ConditionedWalk,
    start_index: usize,
    start: Edge,
}

impl ChordalSampler {
    pub fn new(domain: &LatticeDomain, a: Edge, b: Edge) -> Result<Self> {
        let solver = DirichletSolver::new(domain)?;
        Self::with_solver(domain, &solver, a, b)
    }

    pub fn with_solver(domain: &LatticeDomain, solver: &DirichletSolver, a: Edge, b: Edge) -> Result<Self> {
        if a == b || !domain.is_boundary_edge(&a) {
            return Err(Error::Precondition("a must be a boundary edge different from b".into()));
        }
        Ok(ChordalSampler {
            walk: ConditionedWalk::with_solver(domain, solver, b)?,
            start_index: domain.index_of(a.inner).unwrap(),
            start: a,
        })
    }

    pub fn sample_indices(&self, rng: &mut LabRng, ws: &mut Workspace) -> (Vec<u32>, u64) {
        self.walk.run_erased(self.start_index, rng, ws)
    }

    pub fn sample(&self, rng: &mut LabRng, ws: &mut Workspace) -> Saw {
        let (path, _) = self.sample_indices(rng, ws);
        let b = self.walk.exit();
        let mut v = Vec::with_capacity(path.len() + 2);
        v.push(self.start.outer);
        v.extend(path.iter().map(|&i| self.walk.site(i)));
        v.push(b.outer);
        Saw::from_parts_unchecked(v, Roles::Chordal { start: self.start, end: b })
    }

    pub fn site(&self, i: u32) -> Site {
        self.walk.site(i)
    }
}

pub fn sample_radial_lerw(domain: &LatticeDomain, a: Edge, seed: u64) -> Result<Saw> {
    let s = RadialSampler::new(domain, a)?;
    Ok(s.sample(&mut rng::seeded(seed), &mut Workspace::default()))
}

pub fn sample_chordal_lerw(domain: &LatticeDomain, a: Edge, b: Edge, seed: u64) -> Result<Saw> {
    let s = ChordalSampler::new(domain, a, b)?;
    Ok(s.sample(&mut rng::seeded(seed), &mut Workspace::default()))
}

/// Rescaled, naturally parametrized curve of a SAW: positions divided by
/// `n`, every lattice edge traversed in time `1 / (c_star n^{5/4})`, the
/// curve starting at the midpoint of the first edge.
///
/// Radial and role-free walks end at their last vertex after lattice time
/// `k - 1/2`. Chordal walks end at the midpoint of the exit edge, after
/// lattice time `k - 1`.
pub fn parametrize(eta: &Saw, n: u32, c_star: f64) -> Result<ParamCurve> {
    if !(c_star > 0.0) || n == 0 {
        return Err(Error::Precondition("c_star and N must be positive".into()));
    }
    let v = eta.vertices();
    if v.len() < 2 {
        return Ok(ParamCurve::constant(v[0].to_complex() / n as f64, 0.0));
    }
    let unit = 1.0 / (c_star * (n as f64).powf(1.25));
    let scale = 1.0 / n as f64;
    let mid = |p: Site, q: Site| (p.to_complex() + q.to_complex()) * 0.5;
    let mut pts: Vec<Complex64> = vec![mid(v[0], v[1])];
    let mut lattice_t = vec![0.0];
    let last = match eta.roles() {
        Roles::Chordal { .. } => v.len() - 1,
        _ => v.len(),
    };
    for (j, s) in v.iter().enumerate().take(last).skip(1) {
        pts.push(s.to_complex());
        lattice_t.push(j as f64 - 0.5);
    }
    if let Roles::Chordal { .. } = eta.roles() {
        let k = v.len() - 1;
        pts.push(mid(v[k - 1], v[k]));
        lattice_t.push(k as f64 - 1.0);
    }
    ParamCurve::new(
        lattice_t.iter().map(|t| t * unit).collect(),
        pts.iter().map(|p| p * scale).collect(),
    )
}

/// Hit frequency of one site with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteFrequency {
    pub site: Site,
    pub frequency: f64,
    pub stderr: f64,
}

/// Runs `m` radial samples in parallel (replica `i` uses stream `i`) and
/// hands each erased path (vertex indices from `a.inner` to 0) to `f`.
pub fn map_radial<T, F>(sampler: &RadialSampler, m: u64, seed: u64, label: &str, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[u32], u64) -> T + Sync,
{
    (0..m)
        .into_par_iter()
        .map_init(Workspace::default, |ws, i| {
            let mut r = rng::stream(seed, label, i);
            let (path, steps) = sampler.sample_indices(&mut r, ws);
            f(&path, steps)
        })
        .collect()
}

/// Monte Carlo estimate of `P{z in eta}` for radial LERW from `a`.
pub fn one_point_frequency(
    domain: &LatticeDomain,
    a: Edge,
    sites: &[Site],
    m: u64,
    seed: u64,
) -> Result<Vec<SiteFrequency>> {
    if m == 0 {
        return Err(Error::Precondition("sample count must be positive".into()));
    }
    let sampler = RadialSampler::new(domain, a)?;
    let idx: Vec<Option<u32>> = sites.iter().map(|s| domain.index_of(*s).map(|i| i as u32)).collect();
    let mut lookup = vec![u32::MAX; domain.len()];
    for (k, i) in idx.iter().enumerate() {
        if let Some(i) = i {
            lookup[*i as usize] = k as u32;
        }
    }
    let hits: Vec<Vec<u32>> = map_radial(&sampler, m, seed, "one-point", |path, _| {
        path.iter()
            .filter_map(|&v| {
                let k = lookup[v as usize];
                (k != u32::MAX).then_some(k)
            })
            .collect()
    });
    let mut counts = vec![0u64; sites.len()];
    for h in &hits {
        for &k in h {
            counts[k as usize] += 1;
        }
    }
    // duplicated query sites share the first slot
    let mut first: HashMap<Site, usize> = HashMap::new();
    for (k, s) in sites.iter().enumerate() {
        first.entry(*s).or_insert(k);
    }
    Ok(sites
        .iter()
        .map(|s| {
            let c = counts[first[s]] as f64;
            let f = c / m as f64;
            SiteFrequency { site: *s, frequency: f, stderr: (f * (1.0 - f) / m as f64).sqrt() }
        })
        .collect())
}

/// Whether the part of a radial path after its first visit to
/// `C_{s^2 n}` leaves `C_{s n}`, where `C_r = {|z| < r}`.
pub fn tail_escapes(path: &[Site], n: f64, s: f64) -> bool {
    let inner = s * s * n;
    let outer = s * n;
    match path.iter().position(|z| z.norm() < inner) {
        Some(m) => path[m..].iter().any(|z| z.norm() >= outer),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: i32, y: i32) -> Site {
        Site::new(x, y)
    }

    #[test]
    fn loop_erase_hand_trace() {
        let w = [s(0, 0), s(1, 0), s(1, 1), s(0, 1), s(0, 0), s(0, -1)];
        assert_eq!(loop_erase(&w).unwrap().vertices(), &[s(0, 0), s(0, -1)]);
        let straight = [s(0, 0), s(1, 0), s(2, 0)];
        assert_eq!(loop_erase(&straight).unwrap().vertices(), &straight);
        assert!(matches!(loop_erase(&[s(0, 0), s(2, 0)]), Err(Error::NonAdjacentStep { index: 1 })));
    }

    #[test]
    fn single_site_distributions() {
        let a = LatticeDomain::single_site();
        let e = a.boundary_edges();
        let d = exact_distribution(&a, e[0], Target::Origin).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].1 - 1.0).abs() < 1e-12);
        let d = exact_distribution(&a, e[0], Target::Edge(e[2])).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].0.vertices().len(), 3);
        assert!((d[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_radial_from_left() {
        let a = LatticeDomain::rectangle(0, 1, 0, 0).unwrap();
        let left = Edge::new(s(0, 0), s(-1, 0));
        let (m, h) = exact_measure(&a, left, Target::Origin).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].1 - h).abs() < 1e-14);
        assert!((h - 4.0 / 15.0).abs() < 1e-14);
        let right = Edge::new(s(1, 0), s(2, 0));
        let d = exact_distribution(&a, right, Target::Origin).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].0.vertices(), &[s(2, 0), s(1, 0), s(0, 0)]);
    }

    #[test]
    fn guard() {
        let a = LatticeDomain::rectangle(-2, 2, -2, 2).unwrap();
        let e = a.boundary_edges()[0];
        assert!(matches!(
            exact_distribution(&a, e, Target::Origin),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn parametrize_single_edge() {
        let a = LatticeDomain::single_site();
        let e = a.boundary_edges()[3];
        let saw = Saw::radial(&a, e, vec![e.outer, e.inner]).unwrap();
        let c = parametrize(&saw, 1, 1.0).unwrap();
        assert_eq!(c.duration(), 0.5);
        assert_eq!(c.start(), Complex64::new(0.5, 0.0));
        assert_eq!(c.end(), Complex64::new(0.0, 0.0));
        let c2 = parametrize(&saw, 1, 2.0).unwrap();
        assert_eq!(c2.duration(), 0.25);
    }

    #[test]
    fn samplers_respect_roles() {
        let a = LatticeDomain::rectangle(-3, 3, -3, 3).unwrap();
        let e = a.boundary_edges()[5];
        let b = a.boundary_edges()[20];
        for seed in 0..20 {
            let r = sample_radial_lerw(&a, e, seed).unwrap();
            Saw::radial(&a, e, r.vertices().to_vec()).unwrap();
            let c = sample_chordal_lerw(&a, e, b, seed).unwrap();
            Saw::chordal(&a, e, b, c.vertices().to_vec()).unwrap();
        }
    }

    #[test]
    fn tail_escape_predicate() {
        let p = [s(30, 0), s(1, 0), s(0, 5), s(0, 0)];
        assert!(tail_escapes(&p, 10.0, 0.4));
        assert!(!tail_escapes(&p, 10.0, 0.6));
    }
}
