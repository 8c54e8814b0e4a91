//! Experiment configuration, output plumbing and the CLI commands.
//!
//! Every command is a function of the configuration and seed. Outputs are CSV
//! tables plus a JSON-lines manifest `<command>.manifest.jsonl` whose lines all
//! carry the configuration hash; re-running a command overwrites its files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::content::{content_parametrize, DIMENSION};
use crate::curvemetric::{rho, rho_hat};
use crate::error::{Error, Result};
use crate::experiments::*;
use crate::lattice::DomainSpec;
use crate::lerw::{parametrize, sample_radial_lerw};
use crate::loewner::radial_sle2_adaptive;
use crate::rng;
use crate::rnweights::{
    direct_radial_lerw, direct_radial_sle, kl_constant, reweight_lerw, reweight_sle, DiskTarget, StopRule,
};
use crate::stats::{chi_square_two_sample, ks_two_sample, ks_weighted};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleCounts {
    pub one_point: u64,
    pub length: u64,
    pub content: u64,
    pub rn: u64,
    pub couple: u64,
    pub calibrate: u64,
}

/// Missing keys in a TOML file take their default values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: String,
    /// Scales for the length regression, LERW coupling and calibration.
    pub ns: Vec<u32>,
    /// Scale of the one-point and first-hit experiments.
    pub n_fine: u32,
    /// Scale of the weighted LERW comparison.
    pub n_couple: u32,
    /// Scales of the boundary Poisson kernel table.
    pub kl_ns: Vec<u32>,
    /// Scales and refinement of the harmonic-ratio study.
    pub h_ratio_ns: Vec<u32>,
    pub refinement: u32,
    /// Stop radius `r` (fraction of the scale) and sine floor `delta`.
    pub stop_radius: f64,
    pub sine_floor: f64,
    pub c_star: f64,
    pub samples: SampleCounts,
    pub domain: DomainSpec,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts { one_point: 100_000, length: 1000, content: 1000, rn: 10_000, couple: 10_000, calibrate: 500 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            out: "out".into(),
            ns: vec![64, 128, 256, 512],
            n_fine: 200,
            n_couple: 100,
            kl_ns: vec![50, 100, 200],
            h_ratio_ns: vec![32, 64, 128],
            refinement: 4,
            stop_radius: 0.3,
            sine_floor: 0.1,
            c_star: 1.0,
            samples: SampleCounts::default(),
            domain: quarter_disk_spec(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.samples;
        if [s.one_point, s.length, s.content, s.rn, s.couple, s.calibrate].contains(&0) {
            return Err(Error::Precondition("all sample counts must be positive".into()));
        }
        for list in [&self.ns, &self.kl_ns, &self.h_ratio_ns] {
            if list.is_empty() || list.contains(&0) {
                return Err(Error::Precondition("scale lists must be non-empty and positive".into()));
            }
        }
        if self.n_fine == 0 || self.n_couple == 0 || self.refinement == 0 {
            return Err(Error::Precondition("scales and refinement must be positive".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Precondition("seed must fit in a signed 64-bit integer".into()));
        }
        StopRule::radius(self.stop_radius).with_sine_floor(self.sine_floor).validate()?;
        if !(self.c_star > 0.0) || !self.c_star.is_finite() {
            return Err(Error::Precondition("c_star must be positive".into()));
        }
        self.domain.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON form, in hex. The output directory is
    /// not part of the hash.
    pub fn hash(&self) -> String {
        let inputs = ExperimentConfig { out: String::new(), ..self.clone() };
        let bytes = serde_json::to_vec(&inputs).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Result of one check inside a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub criterion: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, criterion: &str, pass: bool) -> Self {
        Check { name: name.into(), value, criterion: criterion.into(), pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandReport {
    pub command: String,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

impl CommandReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Output directory of one command run.
pub struct Output {
    dir: PathBuf,
    report: CommandReport,
    seed: u64,
}

impl Output {
    pub fn new(cfg: &ExperimentConfig, dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            seed: cfg.seed,
            report: CommandReport {
                command: command.into(),
                config_hash: cfg.hash(),
                checks: Vec::new(),
                files: Vec::new(),
                warnings: Vec::new(),
            },
        })
    }

    pub fn file<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        write(&mut w)?;
        w.flush()?;
        self.report.files.push(name.into());
        Ok(())
    }

    pub fn check(&mut self, check: Check) {
        self.report.checks.push(check);
    }

    pub fn warn(&mut self, msg: String) {
        self.report.warnings.push(msg);
    }

    /// Writes the manifest and returns the report.
    pub fn finish(self) -> Result<CommandReport> {
        let r = &self.report;
        let mut w = BufWriter::new(fs::File::create(self.dir.join(format!("{}.manifest.jsonl", r.command)))?);
        let base = |kind: &str| json!({"command": r.command, "config_hash": r.config_hash, "seed": self.seed, "kind": kind});
        for f in &r.files {
            let mut v = base("file");
            v["file"] = json!(f);
            writeln!(w, "{v}")?;
        }
        for c in &r.checks {
            let mut v = base("check");
            v["check"] = serde_json::to_value(c).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(w, "{v}")?;
        }
        for m in &r.warnings {
            let mut v = base("warning");
            v["message"] = json!(m);
            writeln!(w, "{v}")?;
        }
        let mut v = base("summary");
        v["pass"] = json!(r.passed());
        writeln!(w, "{v}")?;
        w.flush()?;
        Ok(self.report)
    }
}

/// Lattice domains at every scale of `ns`, with a vertex-count summary.
pub fn cmd_domain(cfg: &ExperimentConfig, dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    let mut out = Output::new(cfg, dir, "domain")?;
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let (d, a, b) = setup(&cfg.domain, n)?;
        out.file(&format!("domain_n{n}.txt"), |w| d.write_to(w, n, Some(&cfg.domain)))?;
        rows.push((n, d.len(), d.boundary_edges().len(), a, b, d.is_simply_connected()));
    }
    out.file("domains.csv", |w| {
        writeln!(w, "n,vertices,boundary_edges,a_inner_x,a_inner_y,b_inner_x,b_inner_y,simply_connected")?;
        for (n, v, e, a, b, sc) in &rows {
            writeln!(w, "{n},{v},{e},{},{},{},{},{sc}", a.inner.x, a.inner.y, b.inner.x, b.inner.y)?;
        }
        Ok(())
    })?;
    for (n, _, _, _, _, sc) in &rows {
        out.check(Check::new(&format!("simply_connected_n{n}"), f64::from(u8::from(*sc)), "== 1", *sc));
    }
    out.finish()
}

pub const ONE_POINT_WINDOW: (f64, f64) = (-0.90, -0.60);
pub const LENGTH_WINDOW: (f64, f64) = (1.15, 1.35);
pub const CONTENT_WINDOW: (f64, f64) = (1.05, 1.45);

fn window_check(name: &str, slope: f64, w: (f64, f64)) -> Check {
    Check::new(name, slope, &format!("in [{}, {}]", w.0, w.1), slope >= w.0 && slope <= w.1)
}

/// One-point, length and content exponents.
pub fn cmd_exponents(cfg: &ExperimentConfig, dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    if cfg.ns.len() < 3 {
        return Err(Error::Precondition("the exponent regressions need at least three scales".into()));
    }
    let mut out = Output::new(cfg, dir, "exponents")?;
    let one = one_point_exponent(&cfg.domain, cfg.n_fine, cfg.samples.one_point, cfg.seed)?;
    let len = length_exponent(&cfg.domain, &cfg.ns, cfg.samples.length, cfg.seed)?;
    let con = content_exponent(cfg.samples.content, cfg.seed)?;
    out.file("one_point.csv", |w| one.write_csv(w))?;
    out.file("length.csv", |w| len.write_csv(w))?;
    out.file("content.csv", |w| con.write_csv(w))?;
    let table = [("one_point", &one, ONE_POINT_WINDOW), ("length", &len, LENGTH_WINDOW), ("content", &con, CONTENT_WINDOW)];
    out.file("exponents.csv", |w| {
        writeln!(w, "quantity,slope,slope_se,lo,hi,pass")?;
        for (q, f, win) in &table {
            let s = f.regression.slope;
            writeln!(w, "{q},{s},{},{},{},{}", f.regression.slope_se, win.0, win.1, s >= win.0 && s <= win.1)?;
        }
        Ok(())
    })?;
    for (q, f, win) in &table {
        if f.points.iter().any(|p| p.y <= 0.0 || p.se > 0.5 * p.y) {
            out.warn(format!("{q}: some points are poorly resolved; increase the sample count"));
        }
        out.check(window_check(&format!("{q}_slope"), f.regression.slope, *win));
    }
    out.finish()
}

/// Weight martingale, boundary Poisson kernel table, harmonic-ratio study and
/// the SLE weight mean.
pub fn cmd_rn(cfg: &ExperimentConfig, dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    let mut out = Output::new(cfg, dir, "rn")?;
    let exact = exact_weight_checks(&exact_family(4), 3)?;
    out.check(Check::new("martingale_max_deviation", exact.max_deviation, "< 1e-10", exact.max_deviation < 1e-10));
    out.check(Check::new("exact_reweight_tv", exact.max_total_variation, "< 1e-10", exact.max_total_variation < 1e-10));
    let kl = kl_constant(&cfg.domain, &cfg.kl_ns)?;
    out.file("kl_constant.csv", |w| kl.write_csv(w))?;
    out.check(Check::new("kl_spread", kl.spread, "< 0.1", kl.spread < 0.1));
    let study = h_ratio_study(&cfg.domain, &cfg.h_ratio_ns, 0.5, cfg.sine_floor, cfg.refinement, 4_000_000)?;
    out.file("h_ratio.csv", |w| {
        writeln!(w, "n,lhs,rhs,relative_error,min_sine")?;
        for (n, r) in &study {
            writeln!(w, "{n},{},{},{},{}", r.lhs, r.rhs, r.relative_error, r.min_sine)?;
        }
        Ok(())
    })?;
    let errs: Vec<f64> = study.iter().map(|s| s.1.relative_error).collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = *errs.last().unwrap();
    out.check(Check::new("h_ratio_final_error", last, "< 0.1 and non-increasing", monotone && last < 0.1));
    let (m, se) = sle_weight_mean(0.2, cfg.sine_floor, cfg.samples.rn, cfg.seed)?;
    out.file("m_sle.csv", |w| {
        writeln!(w, "mean,se,samples")?;
        writeln!(w, "{m},{se},{}", cfg.samples.rn)?;
        Ok(())
    })?;
    out.check(Check::new("m_sle_mean", m, "within 3 SE of 1", (m - 1.0).abs() <= 3.0 * se));
    out.finish()
}

/// Two-route comparisons: weighted chordal against direct radial (exact on
/// small domains, chi-square and KS otherwise), LERW against SLE first hits,
/// and curve distances between content-parametrized representatives.
pub fn cmd_couple(cfg: &ExperimentConfig, dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    let mut out = Output::new(cfg, dir, "couple")?;
    let exact = exact_weight_checks(&exact_family(4), 3)?;
    out.check(Check::new("exact_reweight_tv", exact.max_total_variation, "< 1e-10", exact.max_total_variation < 1e-10));

    let n = cfg.n_couple;
    let (d, a, b) = setup(&cfg.domain, n)?;
    let stop = StopRule::radius(cfg.stop_radius);
    let weighted = reweight_lerw(&d, a, b, &stop, n as f64, cfg.samples.couple, cfg.seed)?;
    let direct = direct_radial_lerw(&d, a, b, &stop, n as f64, cfg.samples.couple, cfg.seed)?;
    out.file("reweight_lerw.csv", |w| weighted.write_csv(w))?;
    out.file("direct_lerw.csv", |w| direct.write_csv(w))?;
    let chi = chi_square_two_sample(&weighted.angle_histogram(16), &direct.angle_histogram(16), 20.0);
    out.check(Check::new("lerw_reweight_chi2_p", chi.p_value, "> 0.001", chi.p_value > 0.001));

    let target = DiskTarget::new(std::f64::consts::PI)?;
    let sle_stop = StopRule::radius(0.5).with_sine_floor(cfg.sine_floor);
    let opts = crate::loewner::SleOptions::adaptive(1e-3, 0.02);
    let ws = reweight_sle(20.0, &sle_stop, cfg.samples.couple, cfg.seed, &target, opts)?;
    let ds = direct_radial_sle(20.0, &sle_stop, cfg.samples.couple, cfg.seed, std::f64::consts::PI, opts)?;
    out.file("reweight_sle.csv", |w| ws.write_csv(w))?;
    let ks = ks_weighted(&ws.angles(), &ds.angles());
    out.check(Check::new("sle_reweight_ks", ks, "< 0.05", ks < 0.05));

    let la = lerw_first_hit_angles(&cfg.domain, cfg.n_fine, 0.5, cfg.samples.couple, cfg.seed)?;
    let sa = sle_first_hit_angles(0.5, cfg.samples.couple, cfg.seed)?;
    out.file("first_hit.csv", |w| {
        writeln!(w, "route,angle")?;
        for x in &la {
            writeln!(w, "lerw,{x}")?;
        }
        for x in &sa {
            writeln!(w, "sle,{x}")?;
        }
        Ok(())
    })?;
    let ks = ks_two_sample(&la, &sa);
    out.check(Check::new("first_hit_ks", ks, "< 0.05", ks < 0.05));

    // representative pair: one LERW and one SLE curve, both by content
    let (dom, ea, _) = setup(&cfg.domain, cfg.n_fine)?;
    let eta = sample_radial_lerw(&dom, ea, cfg.seed)?;
    let lattice = parametrize(&eta, cfg.n_fine, cfg.c_star)?;
    let rot = Complex64::from_polar(1.0, -cfg.domain.a().arg());
    let sle = radial_sle2_adaptive(CONTENT_CAPACITY, content_options(), rng::stream(cfg.seed, "couple-sle", 0))?.trace()?;
    match (content_parametrize(&lattice.map_points(|z| z * rot), DIMENSION), content_parametrize(&sle, DIMENSION)) {
        (Ok(lc), Ok(sc)) => {
            let (r, _) = rho(&thin(&lc, RHO_POINTS), &thin(&sc, RHO_POINTS));
            let rh = rho_hat(&lc, &sc);
            let self_rho = rho_hat(&lc, &lc);
            out.file("distances.csv", |w| {
                writeln!(w, "pair,rho,rho_hat")?;
                writeln!(w, "lerw_vs_sle,{r},{rh}")?;
                writeln!(w, "lerw_vs_self,0,{self_rho}")?;
                Ok(())
            })?;
            out.check(Check::new("rho_hat_self", self_rho, "== 0", self_rho == 0.0));
        }
        (Err(e), _) | (_, Err(e)) => out.warn(format!("curve distances skipped: {e}")),
    }
    out.finish()
}

const RHO_POINTS: usize = 400;

/// Every `k`-th sample point (always keeping the last), so that at most about
/// `max` points remain.
fn thin(c: &crate::curve::ParamCurve, max: usize) -> crate::curve::ParamCurve {
    let step = c.len().div_ceil(max).max(1);
    let mut idx: Vec<usize> = (0..c.len()).step_by(step).collect();
    if *idx.last().unwrap() != c.len() - 1 {
        idx.push(c.len() - 1);
    }
    crate::curve::ParamCurve::new(idx.iter().map(|&i| c.times()[i]).collect(), idx.iter().map(|&i| c.points()[i]).collect())
        .expect("subsequence of a valid curve")
}

/// Fits `c_star` so that the mean rescaled LERW duration matches the mean SLE
/// content at every scale, and writes a config overlay.
pub fn cmd_calibrate_cstar(cfg: &ExperimentConfig, dir: &Path) -> Result<CommandReport> {
    cfg.validate()?;
    if cfg.ns.len() < 3 {
        return Err(Error::Precondition("c_star calibration needs at least three scales".into()));
    }
    let mut out = Output::new(cfg, dir, "calibrate-cstar")?;
    let (content, content_se) = sle_mean_content(4.0, cfg.samples.content, cfg.seed)?;
    let rows = lerw_mean_steps(&cfg.domain, &cfg.ns, cfg.samples.calibrate, cfg.seed)?;
    let fit = fit_cstar(&rows, content)?;
    out.file("cstar.csv", |w| {
        writeln!(w, "n,mean_steps,se,c_estimate,c_se")?;
        for (r, p) in rows.iter().zip(&fit.per_scale) {
            writeln!(w, "{},{},{},{},{}", r.n, r.mean_steps, r.se, p.1, p.2)?;
        }
        writeln!(w, "# sle_content={content} sle_content_se={content_se} c_star={} ci=[{}, {}]", fit.c_star, fit.ci.0, fit.ci.1)?;
        Ok(())
    })?;
    out.file("cstar_overlay.toml", |w| {
        writeln!(w, "c_star = {}", fit.c_star)?;
        writeln!(w, "# 95% interval [{}, {}]", fit.ci.0, fit.ci.1)?;
        Ok(())
    })?;
    if !fit.flat {
        out.warn(format!("per-scale estimates drift with N (slope {} +- {})", fit.trend, fit.trend_se));
    }
    out.check(Check::new("c_star", fit.c_star, "> 0", fit.c_star > 0.0));
    out.finish()
}
