//! Discrete potential theory on lattice domains: Poisson kernels, Green's
//! functions, boundary Poisson kernels and the loop mass.
//!
//! Everything reduces to the Dirichlet matrix `M = 4I - Adj` restricted to the
//! domain. With `G = 4 M^{-1}` the Green's function (expected visits),
//!
//! * `H_A(z, a) = M^{-1}[z, a.inner]`,
//! * `H_dA(a, b) = M^{-1}[a.inner, b.inner] / 4`, counting both crossing steps,
//! * `Lambda_eta(A) = det G[V, V]` for the vertex set `V` of `eta`.

use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{Edge, LatticeDomain, Site};
use crate::saw::Saw;

const NONE: u32 = u32::MAX;
const DENSE_LIMIT: usize = 64;

enum Factor {
    Dense(Vec<f64>),
    Sparse(Llt<usize, f64>),
}

/// Factorized Dirichlet matrix of a domain, optionally with some vertices
/// removed (those become decoupled identity rows).
pub struct DirichletSolver {
    nbr: Arc<Vec<[u32; 4]>>,
    removed: Option<Vec<bool>>,
    factor: Factor,
}

fn neighbor_table(domain: &LatticeDomain) -> Vec<[u32; 4]> {
    (0..domain.len())
        .map(|i| domain.neighbor_indices(i).map(|j| j.map_or(NONE, |j| j as u32)))
        .collect()
}

fn dense_cholesky(n: usize, nbr: &[[u32; 4]], removed: Option<&[bool]>) -> Result<Vec<f64>> {
    let gone = |i: usize| removed.is_some_and(|r| r[i]);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        if gone(i) {
            a[i * n + i] = 1.0;
            continue;
        }
        a[i * n + i] = 4.0;
        for &j in &nbr[i] {
            if j != NONE && !gone(j as usize) {
                a[i * n + j as usize] = -1.0;
            }
        }
    }
    for j in 0..n {
        let mut d: f64 = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(Error::Solver("matrix is not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(a)
}

fn dense_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn sparse_pattern(nbr: &[[u32; 4]]) -> Result<SparseColMat<usize, f64>> {
    let mut trip = Vec::with_capacity(nbr.len() * 5);
    for (i, row) in nbr.iter().enumerate() {
        trip.push(Triplet::new(i, i, 4.0));
        for &j in row {
            if j != NONE {
                trip.push(Triplet::new(i, j as usize, -1.0));
            }
        }
    }
    SparseColMat::try_new_from_triplets(nbr.len(), nbr.len(), &trip)
        .map_err(|e| Error::Solver(format!("{e:?}")))
}

fn apply_removed(mat: &mut SparseColMat<usize, f64>, removed: &[bool]) {
    let col_ptr = mat.symbolic().col_ptr().to_vec();
    let row_idx = mat.symbolic().row_idx().to_vec();
    let val = mat.val_mut();
    for j in 0..removed.len() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            let i = row_idx[p];
            if removed[i] || removed[j] {
                val[p] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
}

impl DirichletSolver {
    pub fn new(domain: &LatticeDomain) -> Result<Self> {
        let nbr = Arc::new(neighbor_table(domain));
        let n = nbr.len();
        let factor = if n <= DENSE_LIMIT {
            Factor::Dense(dense_cholesky(n, &nbr, None)?)
        } else {
            let mat = sparse_pattern(&nbr)?;
            Factor::Sparse(
                mat.sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Solver(format!("{e:?}")))?,
            )
        };
        Ok(DirichletSolver { nbr, removed: None, factor })
    }

    pub fn len(&self) -> usize {
        self.nbr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nbr.is_empty()
    }

    fn is_removed(&self, i: usize) -> bool {
        self.removed.as_ref().is_some_and(|r| r[i])
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            if self.is_removed(i) {
                out[i] = x[i];
                continue;
            }
            let mut s = 4.0 * x[i];
            for &j in &self.nbr[i] {
                if j != NONE && !self.is_removed(j as usize) {
                    s -= x[j as usize];
                }
            }
            out[i] = s;
        }
    }

    fn raw_solve(&self, cols: &mut [Vec<f64>]) {
        let n = self.len();
        match &self.factor {
            Factor::Dense(l) => {
                for c in cols.iter_mut() {
                    dense_solve(l, n, c);
                }
            }
            Factor::Sparse(llt) => {
                let rhs = Mat::<f64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
                let sol = llt.solve(&rhs);
                for (j, c) in cols.iter_mut().enumerate() {
                    for (i, v) in c.iter_mut().enumerate() {
                        *v = sol[(i, j)];
                    }
                }
            }
        }
    }

    /// Solves `M x = b` for each right-hand side, with one step of
    /// iterative refinement.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut x: Vec<Vec<f64>> = rhs.to_vec();
        self.raw_solve(&mut x);
        let mut r: Vec<Vec<f64>> = Vec::with_capacity(rhs.len());
        let mut mx = vec![0.0; n];
        for (b, xi) in rhs.iter().zip(&x) {
            self.apply(xi, &mut mx);
            r.push(b.iter().zip(&mx).map(|(b, m)| b - m).collect());
        }
        self.raw_solve(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            for (a, b) in xi.iter_mut().zip(ri) {
                *a += b;
            }
        }
        x
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.solve_many(&[rhs.to_vec()]).pop().unwrap()
    }

    /// `M^{-1} e_i`.
    pub fn unit_solve(&self, i: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.len()];
        b[i] = 1.0;
        self.solve(&b)
    }

    /// Largest absolute residual `|b - M x|`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut mx = vec![0.0; x.len()];
        self.apply(x, &mut mx);
        mx.iter().zip(b).map(|(m, b)| (m - b).abs()).fold(0.0, f64::max)
    }
}

/// Builds solvers for `A` with vertex subsets removed, reusing the symbolic
/// factorization of `A`.
pub struct SlitSolverFactory {
    nbr: Arc<Vec<[u32; 4]>>,
    sparse: Option<(SparseColMat<usize, f64>, SymbolicLlt<usize>)>,
}

impl SlitSolverFactory {
    pub fn new(domain: &LatticeDomain) -> Result<Self> {
        let nbr = Arc::new(neighbor_table(domain));
        let sparse = if nbr.len() > DENSE_LIMIT {
            let mat = sparse_pattern(&nbr)?;
            let sym = SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                .map_err(|e| Error::Solver(format!("{e:?}")))?;
            Some((mat, sym))
        } else {
            None
        };
        Ok(SlitSolverFactory { nbr, sparse })
    }

    pub fn full(&self) -> Result<DirichletSolver> {
        self.solver(&vec![false; self.nbr.len()])
    }

    /// Solver for the domain with `removed[i] == true` vertices deleted.
    /// Values on other components than the origin's are harmless: they
    /// decouple from it.
    pub fn solver(&self, removed: &[bool]) -> Result<DirichletSolver> {
        let n = self.nbr.len();
        let factor = match &self.sparse {
            None => Factor::Dense(dense_cholesky(n, &self.nbr, Some(removed))?),
            Some((base, sym)) => {
                let mut mat = base.clone();
                apply_removed(&mut mat, removed);
                Factor::Sparse(
                    Llt::try_new_with_symbolic(sym.clone(), mat.as_ref(), Side::Lower)
                        .map_err(|e| Error::Solver(format!("{e:?}")))?,
                )
            }
        };
        Ok(DirichletSolver {
            nbr: self.nbr.clone(),
            removed: Some(removed.to_vec()),
            factor,
        })
    }
}

/// Vertex-indexed solution of a Dirichlet problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSolve {
    pub values: Vec<f64>,
    pub description: String,
}

impl HarmonicSolve {
    pub fn at(&self, domain: &LatticeDomain, s: Site) -> f64 {
        domain.index_of(s).map_or(0.0, |i| self.values[i])
    }

    /// `x,y,value` rows with a header.
    pub fn write_csv<W: Write>(&self, domain: &LatticeDomain, mut w: W) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for (s, v) in domain.sites().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", s.x, s.y, v)?;
        }
        Ok(())
    }
}

fn check_edge(domain: &LatticeDomain, e: &Edge) -> Result<usize> {
    if !domain.is_boundary_edge(e) {
        return Err(Error::Precondition(format!("{e:?} is not a boundary edge")));
    }
    Ok(domain.index_of(e.inner).expect("inner vertex"))
}

/// `H_A(z, a)` for every vertex `z`.
pub fn poisson_kernel(domain: &LatticeDomain, a: &Edge) -> Result<HarmonicSolve> {
    let solver = DirichletSolver::new(domain)?;
    poisson_kernel_with(&solver, domain, a)
}

pub fn poisson_kernel_with(solver: &DirichletSolver, domain: &LatticeDomain, a: &Edge) -> Result<HarmonicSolve> {
    let i = check_edge(domain, a)?;
    Ok(HarmonicSolve {
        values: solver.unit_solve(i),
        description: format!("poisson kernel, exit through {a:?}"),
    })
}

/// Column `G_A(., w)`.
pub fn green_column(domain: &LatticeDomain, w: Site) -> Result<Vec<f64>> {
    let j = domain
        .index_of(w)
        .ok_or_else(|| Error::Precondition(format!("{w:?} is not in the domain")))?;
    let solver = DirichletSolver::new(domain)?;
    Ok(solver.unit_solve(j).into_iter().map(|v| 4.0 * v).collect())
}

/// Dense symmetric table of `G_A`.
#[derive(Debug, Clone)]
pub struct GreenTable {
    n: usize,
    data: Vec<f64>,
}

impl GreenTable {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn green(domain: &LatticeDomain) -> Result<GreenTable> {
    let n = domain.len();
    let solver = DirichletSolver::new(domain)?;
    let rhs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut b = vec![0.0; n];
            b[i] = 4.0;
            b
        })
        .collect();
    let cols = solver.solve_many(&rhs);
    let mut data = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    Ok(GreenTable { n, data })
}

/// `H_dA(a, b)`: walk measure of paths entering through `a` and leaving
/// through `b`, both crossing steps counted.
pub fn boundary_poisson(domain: &LatticeDomain, a: &Edge, b: &Edge) -> Result<f64> {
    let solver = DirichletSolver::new(domain)?;
    boundary_poisson_with(&solver, domain, a, b)
}

pub fn boundary_poisson_with(solver: &DirichletSolver, domain: &LatticeDomain, a: &Edge, b: &Edge) -> Result<f64> {
    let i = check_edge(domain, a)?;
    let j = check_edge(domain, b)?;
    Ok(solver.unit_solve(i)[j] / 4.0)
}

/// `log Lambda` of a vertex set, as `log det G[V, V]`.
pub fn log_loop_mass_of_sites(domain: &LatticeDomain, sites: &[Site]) -> Result<f64> {
    let idx: Vec<usize> = sites
        .iter()
        .map(|s| domain.index_of(*s).ok_or(Error::PathLeavesDomain(*s)))
        .collect::<Result<_>>()?;
    if idx.is_empty() {
        return Ok(0.0);
    }
    let solver = DirichletSolver::new(domain)?;
    let n = domain.len();
    let rhs: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let mut b = vec![0.0; n];
            b[i] = 4.0;
            b
        })
        .collect();
    let cols = solver.solve_many(&rhs);
    let k = idx.len();
    // sequential pivots: pivot j is G on A minus the first j vertices
    let mut g: Vec<f64> = (0..k * k).map(|p| cols[p % k][idx[p / k]]).collect();
    let mut log_det = 0.0;
    for j in 0..k {
        let d = g[j * k + j];
        if d <= 0.0 {
            return Err(Error::Solver("Green block is not positive definite".into()));
        }
        log_det += d.ln();
        for r in j + 1..k {
            let f = g[r * k + j] / d;
            for c in j + 1..k {
                g[r * k + c] -= f * g[j * k + c];
            }
        }
    }
    Ok(log_det)
}

/// `Lambda_eta(A)`, the exponential of the loop measure of loops in `A`
/// meeting the interior vertices of `eta`.
pub fn loop_mass(domain: &LatticeDomain, eta: &Saw) -> Result<f64> {
    Ok(log_loop_mass(domain, eta)?.exp())
}

pub fn log_loop_mass(domain: &LatticeDomain, eta: &Saw) -> Result<f64> {
    log_loop_mass_of_sites(domain, eta.interior_sites())
}
