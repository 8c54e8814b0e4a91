//! Python bindings. Sites are `(x, y)` integer pairs, boundary edges are
//! `(inner, outer)` pairs of sites and curves are lists of `(t, x, y)`.

use std::path::PathBuf;

use lerwlab::content::{content_profile, default_radii};
use lerwlab::experiments::{content_options, setup};
use lerwlab::lab::{self, CommandReport, ExperimentConfig};
use lerwlab::lattice::approximate;
use lerwlab::loewner::{mapout, radial_sle2_adaptive};
use lerwlab::rnweights::{self, StopRule};
use lerwlab::{curvemetric, lerw, rng, Edge, LatticeDomain, ParamCurve, Site};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

type Pair = (i32, i32);
type PyEdge = (Pair, Pair);

fn err(e: lerwlab::Error) -> PyErr {
    match e {
        lerwlab::Error::Io(e) => PyIOError::new_err(e.to_string()),
        lerwlab::Error::Solver(_) | lerwlab::Error::NumericalBlowUp(_) | lerwlab::Error::MemoryBudget { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn site(p: Pair) -> Site {
    Site::new(p.0, p.1)
}

fn pair(s: Site) -> Pair {
    (s.x, s.y)
}

fn edge(e: PyEdge) -> Edge {
    Edge::new(site(e.0), site(e.1))
}

fn py_edge(e: Edge) -> PyEdge {
    (pair(e.inner), pair(e.outer))
}

fn curve(c: Vec<(f64, f64, f64)>) -> PyResult<ParamCurve> {
    let times = c.iter().map(|p| p.0).collect();
    let points = c.iter().map(|p| Complex64::new(p.1, p.2)).collect();
    ParamCurve::new(times, points).map_err(err)
}

fn py_curve(c: &ParamCurve) -> Vec<(f64, f64, f64)> {
    c.times().iter().zip(c.points()).map(|(t, p)| (*t, p.re, p.im)).collect()
}

fn config(text: Option<&str>) -> PyResult<ExperimentConfig> {
    match text {
        Some(t) => ExperimentConfig::from_toml(t).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Finite simply connected subset of Z^2 containing the origin.
#[pyclass(name = "Domain", module = "lerwlab_py", frozen)]
struct PyDomain {
    inner: LatticeDomain,
}

#[pymethods]
impl PyDomain {
    #[new]
    fn new(sites: Vec<Pair>) -> PyResult<Self> {
        Ok(PyDomain { inner: LatticeDomain::new(sites.into_iter().map(site)).map_err(err)? })
    }

    #[staticmethod]
    fn rectangle(x0: i32, x1: i32, y0: i32, y1: i32) -> PyResult<Self> {
        Ok(PyDomain { inner: LatticeDomain::rectangle(x0, x1, y0, y1).map_err(err)? })
    }

    /// Lattice approximation at scale `n` of the domain in a TOML config
    /// (the default quarter-disk setup when `config` is omitted).
    #[staticmethod]
    #[pyo3(signature = (n, config=None))]
    fn approximate(n: u32, config: Option<&str>) -> PyResult<Self> {
        let cfg = self::config(config)?;
        Ok(PyDomain { inner: approximate(&cfg.domain, n).map_err(err)? })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(path)?;
        let file = LatticeDomain::read_from(std::io::BufReader::new(f)).map_err(err)?;
        Ok(PyDomain { inner: file.domain })
    }

    fn write(&self, path: PathBuf, n: u32) -> PyResult<()> {
        let f = std::fs::File::create(path)?;
        self.inner.write_to(std::io::BufWriter::new(f), n, None).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Domain(sites={}, boundary_edges={})", self.inner.len(), self.inner.boundary_edges().len())
    }

    fn sites(&self) -> Vec<Pair> {
        self.inner.sites().iter().map(|s| pair(*s)).collect()
    }

    fn boundary_edges(&self) -> Vec<PyEdge> {
        self.inner.boundary_edges().iter().map(|e| py_edge(*e)).collect()
    }

    fn contains(&self, s: Pair) -> bool {
        self.inner.contains(site(s))
    }

    fn is_simply_connected(&self) -> bool {
        self.inner.is_simply_connected()
    }

    /// Boundary edge closest to `n * (x + iy)`.
    fn nearest_boundary_edge(&self, x: f64, y: f64, n: u32) -> PyEdge {
        py_edge(self.inner.nearest_boundary_edge(Complex64::new(x, y), n))
    }
}

/// Marked domain `(A, a, b)` at scale `n` for a TOML config.
#[pyfunction]
#[pyo3(signature = (n, config=None))]
fn marked_domain(n: u32, config: Option<&str>) -> PyResult<(PyDomain, PyEdge, PyEdge)> {
    let cfg = self::config(config)?;
    let (d, a, b) = setup(&cfg.domain, n).map_err(err)?;
    Ok((PyDomain { inner: d }, py_edge(a), py_edge(b)))
}

/// Radial LERW from the boundary edge `a` to the origin, starting at `a.outer`.
#[pyfunction]
fn sample_radial_lerw(domain: &PyDomain, a: PyEdge, seed: u64) -> PyResult<Vec<Pair>> {
    let saw = lerw::sample_radial_lerw(&domain.inner, edge(a), seed).map_err(err)?;
    Ok(saw.vertices().iter().map(|s| pair(*s)).collect())
}

/// Chordal LERW from `a.outer` to `b.outer`.
#[pyfunction]
fn sample_chordal_lerw(domain: &PyDomain, a: PyEdge, b: PyEdge, seed: u64) -> PyResult<Vec<Pair>> {
    let saw = lerw::sample_chordal_lerw(&domain.inner, edge(a), edge(b), seed).map_err(err)?;
    Ok(saw.vertices().iter().map(|s| pair(*s)).collect())
}

/// Largest deviation between the enumerated radial measure and `H_A(0, a)`.
#[pyfunction]
fn radial_identity_residual(domain: &PyDomain) -> PyResult<f64> {
    lerw::radial_identity_residual(&domain.inner).map_err(err)
}

/// Weight of the chordal prefix extended by `next`.
#[pyfunction]
fn m_lerw(domain: &PyDomain, a: PyEdge, b: PyEdge, prefix: Vec<Pair>, next: Pair) -> PyResult<f64> {
    let prefix: Vec<Site> = prefix.into_iter().map(site).collect();
    rnweights::m_lerw(&domain.inner, edge(a), edge(b), &prefix, site(next)).map_err(err)
}

/// Weighted chordal samples stopped on entering `|z| <= radius * n`.
#[pyfunction]
fn reweight_lerw<'py>(
    py: Python<'py>,
    domain: &PyDomain,
    a: PyEdge,
    b: PyEdge,
    radius: f64,
    n: f64,
    samples: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let stop = StopRule::radius(radius);
    let ens = rnweights::reweight_lerw(&domain.inner, edge(a), edge(b), &stop, n, samples, seed).map_err(err)?;
    let out = PyDict::new(py);
    let pos: Vec<(f64, f64)> = ens.samples.iter().map(|s| (s.position.re, s.position.im)).collect();
    out.set_item("positions", pos)?;
    out.set_item("weights", ens.samples.iter().map(|s| s.weight).collect::<Vec<_>>())?;
    out.set_item("excluded", ens.samples.iter().map(|s| s.excluded).collect::<Vec<_>>())?;
    out.set_item("reasons", ens.samples.iter().map(|s| s.reason.as_str()).collect::<Vec<_>>())?;
    out.set_item("mean_weight", ens.mean_weight())?;
    out.set_item("ess", ens.ess())?;
    Ok(out)
}

/// Radial SLE_2 trace in the unit disk from 1, up to capacity `t`.
#[pyfunction]
fn radial_sle2(t: f64, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
    let g = radial_sle2_adaptive(t, content_options(), rng::seeded(seed)).map_err(err)?;
    Ok(py_curve(&g.trace().map_err(err)?))
}

/// Half-plane capacity of a curve in the closed upper half-plane.
#[pyfunction]
fn hcap(points: Vec<(f64, f64)>) -> PyResult<f64> {
    let pts = points.into_iter().map(|p| Complex64::new(p.0, p.1)).collect();
    let c = ParamCurve::uniform(pts, 1.0).map_err(err)?;
    Ok(mapout(&c).map_err(err)?.capacity())
}

/// `d`-dimensional Minkowski content estimate with default radii.
#[pyfunction]
#[pyo3(signature = (curve, d=1.25))]
fn content(curve: Vec<(f64, f64, f64)>, d: f64) -> PyResult<f64> {
    let c = self::curve(curve)?;
    Ok(content_profile(&c, d, &default_radii(&c)).map_err(err)?.content)
}

/// Discrete curve distance and its optimal alignment.
#[pyfunction]
fn rho(c1: Vec<(f64, f64, f64)>, c2: Vec<(f64, f64, f64)>) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let (v, al) = curvemetric::rho(&curve(c1)?, &curve(c2)?);
    Ok((v, al.pairs().to_vec()))
}

#[pyfunction]
fn rho_hat(c1: Vec<(f64, f64, f64)>, c2: Vec<(f64, f64, f64)>) -> PyResult<f64> {
    Ok(curvemetric::rho_hat(&curve(c1)?, &curve(c2)?))
}

/// Default configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml().map_err(err)
}

#[pyfunction]
#[pyo3(signature = (config=None))]
fn config_hash(config: Option<&str>) -> PyResult<String> {
    Ok(self::config(config)?.hash())
}

fn report<'py>(py: Python<'py>, r: &CommandReport) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("command", &r.command)?;
    out.set_item("config_hash", &r.config_hash)?;
    out.set_item("passed", r.passed())?;
    let checks = PyList::empty(py);
    for c in &r.checks {
        let d = PyDict::new(py);
        d.set_item("name", &c.name)?;
        d.set_item("value", c.value)?;
        d.set_item("criterion", &c.criterion)?;
        d.set_item("pass", c.pass)?;
        checks.append(d)?;
    }
    out.set_item("checks", checks)?;
    out.set_item("files", &r.files)?;
    out.set_item("warnings", &r.warnings)?;
    Ok(out)
}

/// Runs a lab command (`domain`, `exponents`, `rn`, `couple` or
/// `calibrate-cstar`) writing into `out`.
#[pyfunction]
#[pyo3(signature = (command, out, config=None, seed=None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    out: PathBuf,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = self::config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.out = out.to_string_lossy().into_owned();
    cfg.validate().map_err(err)?;
    let r = match command {
        "domain" => lab::cmd_domain(&cfg, &out),
        "exponents" => lab::cmd_exponents(&cfg, &out),
        "rn" => lab::cmd_rn(&cfg, &out),
        "couple" => lab::cmd_couple(&cfg, &out),
        "calibrate-cstar" => lab::cmd_calibrate_cstar(&cfg, &out),
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    }
    .map_err(err)?;
    report(py, &r)
}

#[pymodule]
fn lerwlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_function(wrap_pyfunction!(marked_domain, m)?)?;
    m.add_function(wrap_pyfunction!(sample_radial_lerw, m)?)?;
    m.add_function(wrap_pyfunction!(sample_chordal_lerw, m)?)?;
    m.add_function(wrap_pyfunction!(radial_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(m_lerw, m)?)?;
    m.add_function(wrap_pyfunction!(reweight_lerw, m)?)?;
    m.add_function(wrap_pyfunction!(radial_sle2, m)?)?;
    m.add_function(wrap_pyfunction!(hcap, m)?)?;
    m.add_function(wrap_pyfunction!(content, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(rho_hat, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
