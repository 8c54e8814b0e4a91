//! Lattice domains, their union-of-squares geometry, and grid approximations
//! of analytic planar domains.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const ORIGIN: Site = Site { x: 0, y: 0 };

    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }

    /// Neighbours in lexicographic order.
    pub fn neighbors(self) -> [Site; 4] {
        NEIGHBOR_OFFSETS.map(|(dx, dy)| Site::new(self.x + dx, self.y + dy))
    }

    pub fn is_adjacent(self, other: Site) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x as f64, self.y as f64)
    }

    pub fn norm(self) -> f64 {
        self.to_complex().norm()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

pub const NEIGHBOR_OFFSETS: [(i32, i32); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];

/// Directed boundary edge from a vertex of the domain to a lattice neighbour
/// outside it. The derived order is lexicographic in `(inner, outer)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub inner: Site,
    pub outer: Site,
}

impl Edge {
    pub fn new(inner: Site, outer: Site) -> Self {
        Edge { inner, outer }
    }

    pub fn midpoint(&self) -> Complex64 {
        (self.inner.to_complex() + self.outer.to_complex()) * 0.5
    }

    /// Unit vector pointing out of the domain.
    pub fn direction(&self) -> (i32, i32) {
        (self.outer.x - self.inner.x, self.outer.y - self.inner.y)
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}->{:?}", self.inner, self.outer)
    }
}

/// Finite, connected set of lattice sites containing the origin, with its
/// boundary edges and a dense index over the bounding box.
#[derive(Clone)]
pub struct LatticeDomain {
    sites: Vec<Site>,
    boundary: Vec<Edge>,
    x0: i32,
    y0: i32,
    width: usize,
    height: usize,
    grid: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl PartialEq for LatticeDomain {
    fn eq(&self, other: &Self) -> bool {
        self.sites == other.sites
    }
}

impl Eq for LatticeDomain {}

impl fmt::Debug for LatticeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeDomain")
            .field("len", &self.sites.len())
            .field("boundary_edges", &self.boundary.len())
            .finish()
    }
}

impl LatticeDomain {
    /// Builds and fully validates a domain: the origin must be present, the
    /// sites 4-connected, and the complement 8-connected to infinity.
    pub fn new<I: IntoIterator<Item = Site>>(sites: I) -> Result<Self> {
        let dom = Self::build(sites.into_iter().collect())?;
        if !dom.is_connected() {
            return Err(Error::InvalidDomain("sites are not connected".into()));
        }
        if !dom.is_simply_connected() {
            return Err(Error::InvalidDomain("domain has holes".into()));
        }
        Ok(dom)
    }

    /// Builds a domain without the connectivity certificates. The origin
    /// must still be present.
    pub(crate) fn build(set: BTreeSet<Site>) -> Result<Self> {
        if !set.contains(&Site::ORIGIN) {
            return Err(Error::InvalidDomain("origin is not a vertex".into()));
        }
        let sites: Vec<Site> = set.into_iter().collect();
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (0, 0, 0, 0);
        for s in &sites {
            xmin = xmin.min(s.x);
            xmax = xmax.max(s.x);
            ymin = ymin.min(s.y);
            ymax = ymax.max(s.y);
        }
        let width = (xmax - xmin + 1) as usize;
        let height = (ymax - ymin + 1) as usize;
        let mut grid = vec![ABSENT; width * height];
        for (i, s) in sites.iter().enumerate() {
            grid[(s.y - ymin) as usize * width + (s.x - xmin) as usize] = i as u32;
        }
        let mut dom = LatticeDomain {
            sites,
            boundary: Vec::new(),
            x0: xmin,
            y0: ymin,
            width,
            height,
            grid,
        };
        let mut boundary = Vec::new();
        for &s in &dom.sites {
            for n in s.neighbors() {
                if !dom.contains(n) {
                    boundary.push(Edge::new(s, n));
                }
            }
        }
        dom.boundary = boundary;
        Ok(dom)
    }

    pub fn single_site() -> Self {
        Self::build(BTreeSet::from([Site::ORIGIN])).expect("origin present")
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`; must contain the origin.
    pub fn rectangle(x0: i32, x1: i32, y0: i32, y1: i32) -> Result<Self> {
        let mut set = BTreeSet::new();
        for x in x0..=x1 {
            for y in y0..=y1 {
                set.insert(Site::new(x, y));
            }
        }
        Self::new(set)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sites in lexicographic order; positions in this slice are the vertex
    /// indices used by every solver.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        let dx = s.x - self.x0;
        let dy = s.y - self.y0;
        if dx < 0 || dy < 0 || dx as usize >= self.width || dy as usize >= self.height {
            return None;
        }
        let v = self.grid[dy as usize * self.width + dx as usize];
        (v != ABSENT).then_some(v as usize)
    }

    pub fn contains(&self, s: Site) -> bool {
        self.index_of(s).is_some()
    }

    pub fn origin_index(&self) -> usize {
        self.index_of(Site::ORIGIN).expect("origin is a vertex")
    }

    /// Neighbour indices of vertex `i` inside the domain, in lexicographic
    /// order, with `None` for neighbours outside.
    pub fn neighbor_indices(&self, i: usize) -> [Option<usize>; 4] {
        self.sites[i].neighbors().map(|n| self.index_of(n))
    }

    /// Boundary edges sorted by inner vertex, then direction.
    pub fn boundary_edges(&self) -> &[Edge] {
        &self.boundary
    }

    pub fn is_boundary_edge(&self, e: &Edge) -> bool {
        self.boundary.binary_search(e).is_ok()
    }

    pub fn bounding_box(&self) -> (Site, Site) {
        (
            Site::new(self.x0, self.y0),
            Site::new(self.x0 + self.width as i32 - 1, self.y0 + self.height as i32 - 1),
        )
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        let start = self.origin_index();
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in self.neighbor_indices(i).into_iter().flatten() {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.len()
    }

    /// Flood-fills the complement (8-adjacency) inside the bounding box grown
    /// by two cells and checks that it forms a single component.
    pub fn is_simply_connected(&self) -> bool {
        let w = self.width + 4;
        let h = self.height + 4;
        let inside = |cx: usize, cy: usize| -> bool {
            let s = Site::new(self.x0 + cx as i32 - 2, self.y0 + cy as i32 - 2);
            self.contains(s)
        };
        let mut seen = vec![false; w * h];
        let mut total = 0usize;
        for cy in 0..h {
            for cx in 0..w {
                if !inside(cx, cy) {
                    total += 1;
                }
            }
        }
        seen[0] = true;
        let mut stack = vec![(0usize, 0usize)];
        let mut reached = 1usize;
        while let Some((cx, cy)) = stack.pop() {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = cx as i32 + dx;
                    let ny = cy as i32 + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if !seen[ny * w + nx] && !inside(nx, ny) {
                        seen[ny * w + nx] = true;
                        reached += 1;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        reached == total
    }

    /// Boundary edge whose midpoint is closest to `n * w`; ties go to the
    /// first edge in boundary order.
    pub fn nearest_boundary_edge(&self, w: Complex64, n: u32) -> Edge {
        let target = w * n as f64;
        let mut best = self.boundary[0];
        let mut best_d = f64::INFINITY;
        for e in &self.boundary {
            let d = (e.midpoint() - target).norm_sqr();
            if d < best_d {
                best_d = d;
                best = *e;
            }
        }
        best
    }

    /// Connected component of the origin in the domain with `blocked` removed.
    pub fn component_of_zero(&self, blocked: &BTreeSet<Site>) -> Result<Self> {
        if blocked.contains(&Site::ORIGIN) {
            return Err(Error::OriginBlocked);
        }
        let mut keep = vec![false; self.len()];
        let start = self.origin_index();
        keep[start] = true;
        let mut stack = vec![start];
        let mut set = BTreeSet::new();
        set.insert(Site::ORIGIN);
        while let Some(i) = stack.pop() {
            for j in self.neighbor_indices(i).into_iter().flatten() {
                if !keep[j] && !blocked.contains(&self.sites[j]) {
                    keep[j] = true;
                    set.insert(self.sites[j]);
                    stack.push(j);
                }
            }
        }
        Self::build(set)
    }

    /// Boundary edges in counterclockwise order along the contour of the
    /// union of squares, starting from the first edge in boundary order.
    ///
    /// Each boundary edge corresponds to one unit side of the contour,
    /// traversed with the domain on the left. At a corner shared with a
    /// diagonal neighbour the tracer turns left first, so it hugs the current
    /// square and never crosses a pinch point.
    pub fn boundary_cycle(&self) -> Result<Vec<Edge>> {
        // corners in doubled coordinates
        let side = |e: &Edge| -> ((i32, i32), (i32, i32)) {
            let (dx, dy) = e.direction();
            let (tx, ty) = (-dy, dx);
            let cx = 2 * e.inner.x + dx;
            let cy = 2 * e.inner.y + dy;
            ((cx - tx, cy - ty), (tx, ty))
        };
        let mut by_start: HashMap<((i32, i32), (i32, i32)), usize> = HashMap::new();
        for (k, e) in self.boundary.iter().enumerate() {
            by_start.insert(side(e), k);
        }
        let n = self.boundary.len();
        let mut order = Vec::with_capacity(n);
        let mut used = vec![false; n];
        let mut k = 0usize;
        loop {
            if used[k] {
                break;
            }
            used[k] = true;
            order.push(self.boundary[k]);
            let ((sx, sy), (tx, ty)) = side(&self.boundary[k]);
            let end = (sx + 2 * tx, sy + 2 * ty);
            let turns = [(-ty, tx), (tx, ty), (ty, -tx)];
            let next = turns.iter().find_map(|&t| by_start.get(&(end, t)).copied());
            match next {
                Some(j) => k = j,
                None => return Err(Error::InvalidDomain("open boundary contour".into())),
            }
        }
        if order.len() != n || k != 0 {
            return Err(Error::InvalidDomain("boundary contour is not a single cycle".into()));
        }
        Ok(order)
    }

    /// Writes the domain file: a header line carrying `N` and the spec as
    /// JSON, then one `x y` pair per line.
    pub fn write_to<W: Write>(&self, mut w: W, n: u32, spec: Option<&DomainSpec>) -> Result<()> {
        let spec_json = match spec {
            Some(s) => serde_json::to_string(s).map_err(|e| Error::Parse(e.to_string()))?,
            None => "null".to_string(),
        };
        writeln!(w, "# lerwlab-domain v1 N={n} spec={spec_json}")?;
        for s in &self.sites {
            writeln!(w, "{} {}", s.x, s.y)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<DomainFile> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty domain file".into()))??;
        let rest = header
            .strip_prefix("# lerwlab-domain v1 N=")
            .ok_or_else(|| Error::Parse("bad domain file header".into()))?;
        let (n_str, spec_str) = rest
            .split_once(" spec=")
            .ok_or_else(|| Error::Parse("bad domain file header".into()))?;
        let n: u32 = n_str
            .parse()
            .map_err(|_| Error::Parse(format!("bad N: {n_str}")))?;
        let spec: Option<DomainSpec> =
            serde_json::from_str(spec_str).map_err(|e| Error::Parse(e.to_string()))?;
        let mut set = BTreeSet::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |t: Option<&str>| -> Result<i32> {
                t.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad vertex on line {}", lineno + 2)))
            };
            let x = parse(it.next())?;
            let y = parse(it.next())?;
            set.insert(Site::new(x, y));
        }
        let domain = LatticeDomain::new(set)?;
        Ok(DomainFile { n, spec, domain })
    }
}

/// Contents of a domain file.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFile {
    pub n: u32,
    pub spec: Option<DomainSpec>,
    pub domain: LatticeDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// Ellipse with semi-axes along the directions at `angle` and
    /// `angle + pi/2`.
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        angle: f64,
    },
    /// Star-shaped domain whose radial function about `center` is the
    /// Fourier truncation (to `modes` harmonics) of the radial function of
    /// the polygon with the given vertices.
    SmoothPolygon {
        center: [f64; 2],
        vertices: Vec<[f64; 2]>,
        modes: usize,
    },
}

/// Analytic domain with two marked boundary points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

const RADIAL_SAMPLES: usize = 1024;

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl DomainSpec {
    /// Disk with marked points at the given boundary angles.
    pub fn disk(center: Complex64, radius: f64, angle_a: f64, angle_b: f64) -> Self {
        let pa = center + Complex64::from_polar(radius, angle_a);
        let pb = center + Complex64::from_polar(radius, angle_b);
        DomainSpec {
            shape: Shape::Disk {
                center: [center.re, center.im],
                radius,
            },
            a: [pa.re, pa.im],
            b: [pb.re, pb.im],
        }
    }

    /// Unit disk with `a = 1` and `b = -1`.
    pub fn unit_disk() -> Self {
        Self::disk(Complex64::new(0.0, 0.0), 1.0, 0.0, std::f64::consts::PI)
    }

    pub fn a(&self) -> Complex64 {
        c(self.a)
    }

    pub fn b(&self) -> Complex64 {
        c(self.b)
    }

    pub fn center(&self) -> Complex64 {
        match &self.shape {
            Shape::Disk { center, .. }
            | Shape::Ellipse { center, .. }
            | Shape::SmoothPolygon { center, .. } => c(*center),
        }
    }

    fn radial_coeffs(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let Shape::SmoothPolygon { center, vertices, modes } = &self.shape else {
            return None;
        };
        let z0 = c(*center);
        let samples: Vec<f64> = (0..RADIAL_SAMPLES)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / RADIAL_SAMPLES as f64;
                polygon_ray(z0, vertices, th)
            })
            .collect();
        let m = *modes;
        let mut ca = vec![0.0; m + 1];
        let mut sa = vec![0.0; m + 1];
        for (k, r) in samples.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * k as f64 / RADIAL_SAMPLES as f64;
            for j in 0..=m {
                ca[j] += r * (j as f64 * th).cos();
                sa[j] += r * (j as f64 * th).sin();
            }
        }
        let scale = 2.0 / RADIAL_SAMPLES as f64;
        for j in 0..=m {
            ca[j] *= scale;
            sa[j] *= scale;
        }
        ca[0] *= 0.5;
        Some((ca, sa))
    }

    /// Signed level function: negative inside, zero on the boundary.
    fn level_with(&self, p: Complex64, coeffs: Option<&(Vec<f64>, Vec<f64>)>) -> f64 {
        match &self.shape {
            Shape::Disk { center, radius } => (p - c(*center)).norm() / radius - 1.0,
            Shape::Ellipse { center, semi_axes, angle } => {
                let q = (p - c(*center)) * Complex64::from_polar(1.0, -angle);
                ((q.re / semi_axes[0]).powi(2) + (q.im / semi_axes[1]).powi(2)).sqrt() - 1.0
            }
            Shape::SmoothPolygon { center, .. } => {
                let q = p - c(*center);
                let (ca, sa) = coeffs.expect("coefficients for smooth polygon");
                q.norm() / fourier_eval(ca, sa, q.arg()) - 1.0
            }
        }
    }

    pub fn contains(&self, p: Complex64) -> bool {
        let coeffs = self.radial_coeffs();
        self.level_with(p, coeffs.as_ref()) < 0.0
    }

    fn boundary_point_with(&self, th: f64, coeffs: Option<&(Vec<f64>, Vec<f64>)>) -> Complex64 {
        match &self.shape {
            Shape::Disk { center, radius } => c(*center) + Complex64::from_polar(*radius, th),
            Shape::Ellipse { center, semi_axes, angle } => {
                c(*center)
                    + Complex64::new(semi_axes[0] * th.cos(), semi_axes[1] * th.sin())
                        * Complex64::from_polar(1.0, *angle)
            }
            Shape::SmoothPolygon { center, .. } => {
                let (ca, sa) = coeffs.expect("coefficients for smooth polygon");
                c(*center) + Complex64::from_polar(fourier_eval(ca, sa, th), th)
            }
        }
    }

    /// Distance from the origin to the boundary.
    pub fn inradius(&self) -> f64 {
        let coeffs = self.radial_coeffs();
        let f = |th: f64| self.boundary_point_with(th, coeffs.as_ref()).norm();
        let m = 4096;
        let step = 2.0 * std::f64::consts::PI / m as f64;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..m {
            let th = k as f64 * step;
            let v = f(th);
            if v < best.0 {
                best = (v, th);
            }
        }
        // golden-section refinement around the coarse minimum
        let (mut lo, mut hi) = (best.1 - step, best.1 + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best.0.min(f(0.5 * (lo + hi)))
    }

    /// Maximum distance from the origin to the boundary (coarse).
    pub fn outer_radius(&self) -> f64 {
        let coeffs = self.radial_coeffs();
        (0..4096)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 4096.0;
                self.boundary_point_with(th, coeffs.as_ref()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |p: [f64; 2]| p[0].is_finite() && p[1].is_finite();
        match &self.shape {
            Shape::Disk { center, radius } => {
                if !finite(*center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSpec("disk needs a finite positive radius".into()));
                }
            }
            Shape::Ellipse { center, semi_axes, angle } => {
                if !finite(*center)
                    || !angle.is_finite()
                    || !semi_axes.iter().all(|s| s.is_finite() && *s > 0.0)
                {
                    return Err(Error::InvalidSpec("ellipse needs finite positive semi-axes".into()));
                }
            }
            Shape::SmoothPolygon { center, vertices, modes } => {
                if !finite(*center) || vertices.len() < 3 || !vertices.iter().all(|v| finite(*v)) {
                    return Err(Error::InvalidSpec("polygon needs at least 3 finite vertices".into()));
                }
                if *modes == 0 || *modes > RADIAL_SAMPLES / 4 {
                    return Err(Error::InvalidSpec(format!("modes must be in 1..={}", RADIAL_SAMPLES / 4)));
                }
                let z0 = c(*center);
                for k in 0..RADIAL_SAMPLES {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / RADIAL_SAMPLES as f64;
                    if !polygon_ray(z0, vertices, th).is_finite() {
                        return Err(Error::InvalidSpec("polygon is not star-shaped about its center".into()));
                    }
                }
                let (ca, sa) = self.radial_coeffs().expect("smooth polygon");
                for k in 0..RADIAL_SAMPLES {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / RADIAL_SAMPLES as f64;
                    if fourier_eval(&ca, &sa, th) <= 0.0 {
                        return Err(Error::InvalidSpec("smoothed radial function is not positive".into()));
                    }
                }
            }
        }
        if !finite(self.a) || !finite(self.b) {
            return Err(Error::InvalidSpec("marked points must be finite".into()));
        }
        let coeffs = self.radial_coeffs();
        if self.level_with(Complex64::new(0.0, 0.0), coeffs.as_ref()) >= 0.0 {
            return Err(Error::InvalidSpec("origin is not inside the domain".into()));
        }
        let r = self.inradius();
        if !(1.0 - 1e-12..=2.0 + 1e-12).contains(&r) {
            return Err(Error::InvalidSpec(format!("inradius {r} is outside [1, 2]")));
        }
        for (name, p) in [("a", self.a()), ("b", self.b())] {
            if self.level_with(p, coeffs.as_ref()).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!("{name} is not on the boundary")));
            }
        }
        if (self.a() - self.b()).norm() < 1e-12 {
            return Err(Error::InvalidSpec("a and b coincide".into()));
        }
        Ok(())
    }

    fn square_inside(&self, s: Site, n: f64, coeffs: Option<&(Vec<f64>, Vec<f64>)>) -> bool {
        let convex = !matches!(self.shape, Shape::SmoothPolygon { .. });
        let per_side = if convex { 1 } else { 16 };
        let (x, y) = (s.x as f64, s.y as f64);
        let corners = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        for k in 0..4 {
            let (ax, ay) = corners[k];
            let (bx, by) = corners[(k + 1) % 4];
            for j in 0..per_side {
                let t = j as f64 / per_side as f64;
                let p = Complex64::new(x + ax + t * (bx - ax), y + ay + t * (by - ay)) / n;
                if self.level_with(p, coeffs) >= 0.0 {
                    return false;
                }
            }
        }
        true
    }
}

fn fourier_eval(ca: &[f64], sa: &[f64], th: f64) -> f64 {
    let mut v = ca[0];
    for j in 1..ca.len() {
        let a = j as f64 * th;
        v += ca[j] * a.cos() + sa[j] * a.sin();
    }
    v
}

/// Distance from `z0` along the ray at angle `th` to the polygon boundary;
/// infinite when the ray misses it.
fn polygon_ray(z0: Complex64, vertices: &[[f64; 2]], th: f64) -> f64 {
    let d = Complex64::from_polar(1.0, th);
    let mut best = f64::INFINITY;
    for k in 0..vertices.len() {
        let p = c(vertices[k]) - z0;
        let q = c(vertices[(k + 1) % vertices.len()]) - z0;
        let e = q - p;
        // solve t d = p + u e
        let det = d.re * (-e.im) - d.im * (-e.re);
        if det.abs() < 1e-15 {
            continue;
        }
        let t = (p.re * (-e.im) - p.im * (-e.re)) / det;
        let u = (d.re * p.im - d.im * p.re) / det;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = best.min(t);
        }
    }
    best
}

/// Largest simply connected union-of-squares domain containing the origin
/// whose closure lies in `n * D`.
pub fn approximate(spec: &DomainSpec, n: u32) -> Result<LatticeDomain> {
    if n == 0 {
        return Err(Error::InvalidSpec("N must be positive".into()));
    }
    spec.validate()?;
    let coeffs = spec.radial_coeffs();
    let nf = n as f64;
    if !spec.square_inside(Site::ORIGIN, nf, coeffs.as_ref()) {
        return Err(Error::ScaleTooCoarse { n });
    }
    let reach = (spec.outer_radius() * nf).ceil() as i32 + 1;
    let w = (2 * reach + 1) as usize;
    let mut fits = vec![false; w * w];
    let idx = |s: Site| ((s.y + reach) as usize) * w + (s.x + reach) as usize;
    for y in -reach..=reach {
        for x in -reach..=reach {
            let s = Site::new(x, y);
            fits[idx(s)] = spec.square_inside(s, nf, coeffs.as_ref());
        }
    }
    let mut set = BTreeSet::new();
    let mut queue = VecDeque::from([Site::ORIGIN]);
    set.insert(Site::ORIGIN);
    while let Some(s) = queue.pop_front() {
        for nb in s.neighbors() {
            if nb.x.abs() <= reach && nb.y.abs() <= reach && fits[idx(nb)] && set.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    let dom = LatticeDomain::build(set)?;
    // For the star-shaped and convex shapes supported here the squares that
    // fit can never enclose a hole; a failure would mean a containment bug.
    if !dom.is_simply_connected() {
        return Err(Error::InvalidDomain(
            "approximation enclosed a hole in the complement".into(),
        ));
    }
    Ok(dom)
}

/// Every simply connected domain with at most `max_size` sites (all
/// connected site sets containing the origin, filtered by the complement
/// test), in a deterministic order.
pub fn enumerate_domains(max_size: usize) -> Vec<LatticeDomain> {
    let mut level: BTreeSet<Vec<Site>> = BTreeSet::from([vec![Site::ORIGIN]]);
    let mut out = Vec::new();
    for size in 1..=max_size {
        let mut next = BTreeSet::new();
        for cells in &level {
            if let Ok(d) = LatticeDomain::build(cells.iter().copied().collect()) {
                if d.is_simply_connected() {
                    out.push(d);
                }
            }
            if size == max_size {
                continue;
            }
            for c in cells {
                for nb in c.neighbors() {
                    if cells.binary_search(&nb).is_err() {
                        let mut grown = cells.clone();
                        let at = grown.binary_search(&nb).unwrap_err();
                        grown.insert(at, nb);
                        next.insert(grown);
                    }
                }
            }
        }
        level = next;
    }
    out
}
