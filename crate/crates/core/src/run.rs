//! Experiment orchestration behind the `optomag` binary.
//!
//! Every command writes its outputs atomically into the output directory
//! and returns a [`RunManifest`] with per-file checksums. Sweeps fan out
//! over the worker pool but results are gathered in parameter order, so
//! CSV and PGM bytes do not depend on the thread count.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis;
use crate::config::{Detuning, ExperimentConfig, FluxSpec, SchemeKind, SiteSpec};
use crate::floquet::{self, FloquetSpectrum, ModulatedLinkModel, StaircaseParams};
use crate::hofstadter::{self, HofstadterModel, LDOSCurve};
use crate::io::{self, fmt_e, Csv};
use crate::lattice::{self, LatticeGraph, PhaseField, Scheme};
use crate::linalg;
use crate::par::{self, Execution};
use crate::pert;
use crate::response::{self, ConversionModel, ConversionParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Butterfly,
    Ldos,
    Transport,
    Abscan,
    Ladder,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Butterfly => "butterfly",
            Command::Ldos => "ldos",
            Command::Transport => "transport",
            Command::Abscan => "abscan",
            Command::Ladder => "ladder",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `run.output`.
    pub out: Option<PathBuf>,
    /// Overrides both `run.threads` and the environment.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scheme: String,
    pub config_hash: String,
    pub version: String,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    /// Invariant checks of the `validate` command.
    pub checks: Vec<Check>,
    pub convergence: Vec<pert::ConvergenceRow>,
    pub metrics: Vec<(String, f64)>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Process exit status for an error: 2 for configuration and usage
/// problems, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Configuration(_) | Error::Argument(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Io(_) => 2,
        _ => 3,
    }
}

pub fn run(config: &ExperimentConfig, command: Command, opts: &RunOptions) -> Result<RunReport> {
    faer::set_global_parallelism(faer::Par::Seq);
    let threads = par::resolve_threads(opts.threads.or_else(par::env_threads).or(config.threads));
    let dir = opts.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let started_unix = now();
    let mut ctx = Context { cfg: config, out: Outputs::new(dir), metrics: Vec::new(), checks: Vec::new(), convergence: Vec::new() };
    par::with_threads(threads, || match command {
        Command::Butterfly => butterfly(&mut ctx, false),
        Command::Ldos => butterfly(&mut ctx, true),
        Command::Transport => transport(&mut ctx),
        Command::Abscan => abscan(&mut ctx),
        Command::Ladder => ladder(&mut ctx),
        Command::Validate => validate(&mut ctx),
    })?;
    let Context { out, metrics, checks, convergence, .. } = ctx;
    if !metrics.is_empty() {
        append_analysis(&out.dir, &metrics, &config.hash())?;
    }
    let manifest = RunManifest {
        command: command.name().into(),
        scheme: config.scheme.name().into(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").into(),
        threads,
        started_unix,
        finished_unix: now(),
        outputs: out.records,
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.into()))?;
    io::write_atomic(&out.dir.join("manifest.json"), &json)?;
    Ok(RunReport { manifest, checks, convergence, metrics })
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

struct Outputs {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Self {
        Outputs { dir, records: Vec::new() }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_atomic(&self.dir.join(name), bytes)?;
        self.records.push(OutputRecord { file: name.into(), sha256: io::sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.into()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    out: Outputs,
    metrics: Vec<(String, f64)>,
    checks: Vec<Check>,
    convergence: Vec<pert::ConvergenceRow>,
}

impl Context<'_> {
    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }
}

/// Appends `(metric_name, value, parameters_hash)` rows, rewriting the file
/// atomically.
fn append_analysis(dir: &Path, metrics: &[(String, f64)], hash: &str) -> Result<()> {
    let path = dir.join("analysis.csv");
    let mut text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => "metric_name,value,parameters_hash\n".into(),
        Err(e) => return Err(e.into()),
    };
    for (name, value) in metrics {
        text.push_str(&format!("{name},{},{hash}\n", fmt_e(*value)));
    }
    io::write_atomic(&path, text.as_bytes())
}

fn usage(command: &str, scheme: SchemeKind) -> Error {
    Error::Configuration(format!("command `{command}` does not support scheme `{}`", scheme.name()))
}

/// One flux setting: a uniform value, or a phase field read from a file.
struct FluxPoint {
    value: f64,
    field: Option<PhaseField>,
}

fn flux_points(cfg: &ExperimentConfig) -> Result<Vec<FluxPoint>> {
    Ok(match &cfg.flux {
        FluxSpec::PhaseFile(path) => vec![FluxPoint { value: f64::NAN, field: Some(read_phase_file(path)?) }],
        _ => cfg.flux_values().into_iter().map(|value| FluxPoint { value, field: None }).collect(),
    })
}

fn single_flux(cfg: &ExperimentConfig, command: &str) -> Result<FluxPoint> {
    let mut points = flux_points(cfg)?;
    if points.len() != 1 {
        return Err(Error::Configuration(format!("command `{command}` needs a single flux value")));
    }
    Ok(points.remove(0))
}

/// `i,j,phase` rows; a header line is skipped.
pub fn read_phase_file(path: &Path) -> Result<PhaseField> {
    let text = std::fs::read_to_string(path)?;
    let mut field = PhaseField::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [i, j, p] => (|| Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?, p.parse::<f64>().ok()?)))(),
            _ => None,
        };
        match parsed {
            Some((i, j, p)) => field.set(i, j, p),
            None if n == 0 => {}
            None => {
                return Err(Error::Configuration(format!("{}:{}: expected `i,j,phase`", path.display(), n + 1)));
            }
        }
    }
    Ok(field)
}

fn ideal_model(cfg: &ExperimentConfig, fp: &FluxPoint) -> HofstadterModel {
    let p = &cfg.params;
    let mut m = HofstadterModel::landau_rect(cfg.rows, cfg.cols, p.j_eff, if fp.field.is_some() { 0.0 } else { fp.value }, p.kappa);
    if let Some(f) = &fp.field {
        m.phases = f.clone();
    }
    m
}

pub fn staircase_params(cfg: &ExperimentConfig) -> Result<StaircaseParams> {
    let p = &cfg.params;
    let j_rung = match p.j_rung {
        Some(x) => x,
        None => pert::jeff_modulated(p.j, p.j, p.g0beta, -p.step, p.step)?.magnitude,
    };
    Ok(StaircaseParams {
        j: p.j,
        g0beta: p.g0beta,
        omega: p.omega_mod,
        kappa: p.kappa,
        step: p.step,
        j_rung,
        interface_rungs: cfg.interface_rungs,
    })
}

fn modulated_model(cfg: &ExperimentConfig, fp: &FluxPoint) -> Result<ModulatedLinkModel> {
    let p = staircase_params(cfg)?;
    match &fp.field {
        None => ModulatedLinkModel::staircase(cfg.rows, cfg.cols, &p, fp.value),
        Some(f) => ModulatedLinkModel::staircase(cfg.rows, cfg.cols, &p, 0.0)?.with_effective_phases(f),
    }
}

fn conversion_model(cfg: &ExperimentConfig, fp: &FluxPoint) -> Result<ConversionModel> {
    let p = &cfg.params;
    match cfg.scheme {
        SchemeKind::Conversion => {
            let cp = ConversionParams { g: p.g, j: p.j, delta: p.delta, kappa: p.kappa, gamma: p.gamma };
            match &fp.field {
                None => ConversionModel::uniform_flux(cfg.rows, cfg.cols, &cp, fp.value),
                Some(f) => {
                    let m = ConversionModel::uniform_flux(cfg.rows, cfg.cols, &cp, 0.0)?;
                    m.with_phases(&lattice::lift_optical_phases(&m.graph, f)?)
                }
            }
        }
        SchemeKind::AbRing => {
            let m = ConversionModel::new(lattice::build_ab_ring(p.g, p.j, if fp.field.is_some() { 0.0 } else { fp.value }), p.delta, p.kappa, p.gamma)?;
            match &fp.field {
                None => Ok(m),
                Some(f) => m.with_phases(f),
            }
        }
        SchemeKind::Ladder => {
            ConversionModel::new(lattice::build_synthetic_ladder(cfg.cols, fp.value, p.g, p.j, p.k)?, p.delta, p.kappa, p.gamma)
        }
        s => Err(usage("transport", s)),
    }
}

/// Resolves a site specification against a lattice. `center` is the
/// optical site nearest the middle (the optical rail for a ladder).
pub fn resolve_site(graph: &LatticeGraph, spec: SiteSpec) -> Result<usize> {
    let grid = graph.optical_grid();
    let optical_rows = if graph.scheme == Scheme::SyntheticLadder { 1 } else { grid.rows };
    match spec {
        SiteSpec::Center => Ok(grid.node(graph, optical_rows / 2, grid.cols / 2)),
        SiteSpec::Index(i) if i < graph.site_count() => Ok(i),
        SiteSpec::Index(i) => Err(Error::Configuration(format!("probe site {i} out of range ({} sites)", graph.site_count()))),
        SiteSpec::Grid { row, col } if row < optical_rows && col < grid.cols => Ok(grid.node(graph, row, col)),
        SiteSpec::Grid { row, col } => Err(Error::Configuration(format!(
            "probe ({row}, {col}) outside the {optical_rows}×{} optical grid",
            grid.cols
        ))),
    }
}

fn require_detuning(cfg: &ExperimentConfig, command: &str) -> Result<Detuning> {
    cfg.detuning
        .ok_or_else(|| Error::Configuration(format!("command `{command}` needs probe.detuning")))
}

/// Frequency grid measured from the probed site's bare frequency.
fn relative_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let p = &cfg.params;
    match (cfg.omega, cfg.scheme) {
        (Some(s), _) => s.values(),
        (None, SchemeKind::Ideal) => hofstadter::default_grid(-4.0 * p.j_eff, 4.0 * p.j_eff, p.kappa),
        (None, _) => hofstadter::default_grid(-p.omega_mod / 2.0, p.omega_mod / 2.0, p.kappa),
    }
}

fn spectral_support(cfg: &ExperimentConfig) -> (f64, f64) {
    match cfg.scheme {
        SchemeKind::Ideal => (-4.0 * cfg.params.j_eff, 4.0 * cfg.params.j_eff),
        _ => (-cfg.params.omega_mod / 2.0, cfg.params.omega_mod / 2.0),
    }
}

/// Largest LDOS change accepted when the truncation is doubled.
const TRUNCATION_TOL: f64 = 1e-8;

struct LdosResult {
    flux: f64,
    curve: LDOSCurve,
    truncation: usize,
    truncation_change: Option<f64>,
}

/// `butterfly` sweeps the flux; `ldos` additionally checks the Fourier
/// truncation by doubling and evaluates the sum rule.
fn butterfly(ctx: &mut Context, checked: bool) -> Result<()> {
    let cfg = ctx.cfg;
    let name = if checked { "ldos" } else { "butterfly" };
    let points = flux_points(cfg)?;
    let rel = relative_grid(cfg);
    let results: Vec<LdosResult> = match cfg.scheme {
        SchemeKind::Ideal => {
            let site = resolve_site(&lattice::build_ideal_lattice(cfg.rows, cfg.cols, 1.0, false)?, cfg.probe)?;
            par::try_map(&points, |fp| -> Result<LdosResult> {
                let model = ideal_model(cfg, fp);
                let spec = hofstadter::spectrum(&hofstadter::build_hofstadter_hamiltonian(&model)?)?;
                let curve = hofstadter::ldos_with(&spec, site, &rel, model.kappa, Execution::Sequential)?;
                Ok(LdosResult { flux: fp.value, curve, truncation: 0, truncation_change: None })
            })?
        }
        SchemeKind::Modulated => par::try_map(&points, |fp| -> Result<LdosResult> {
            let model = modulated_model(cfg, fp)?;
            let site = resolve_site(&model.graph, cfg.probe)?;
            let base = model.graph.sites[site].omega;
            let grid: Vec<f64> = rel.iter().map(|w| base + w).collect();
            let m = cfg.truncation;
            let curve = FloquetSpectrum::compute(&model, m, 0)?.ldos_with(site, &grid, Execution::Sequential)?;
            if !checked {
                return Ok(LdosResult { flux: fp.value, curve, truncation: m, truncation_change: None });
            }
            let doubled = FloquetSpectrum::compute(&model, 2 * m, 0)?.ldos_with(site, &grid, Execution::Sequential)?;
            let change = curve.rho.iter().zip(&doubled.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let (curve, used) = if change <= TRUNCATION_TOL { (curve, m) } else { (doubled, 2 * m) };
            Ok(LdosResult { flux: fp.value, curve, truncation: used, truncation_change: Some(change) })
        })?,
        s => return Err(usage(name, s)),
    };

    let site = results[0].curve.site;
    let base = results[0].curve.omega[0] - rel[0];
    let mut csv = Csv::new(&["flux", "omega", "rho"]);
    for r in &results {
        for (w, rho) in rel.iter().zip(&r.curve.rho) {
            csv.row(&[fmt_e(r.flux), fmt_e(*w), fmt_e(*rho)]);
        }
    }
    if cfg.scheme == SchemeKind::Modulated {
        let mut fl = Csv::new(&["flux", "omega", "rho", "site", "M_used"]);
        for r in &results {
            for (w, rho) in r.curve.omega.iter().zip(&r.curve.rho) {
                fl.row(&[fmt_e(r.flux), fmt_e(*w), fmt_e(*rho), site.to_string(), r.truncation.to_string()]);
            }
        }
        ctx.out.write("floquet_ldos.csv", fl.as_bytes())?;
    }
    if checked {
        if cfg.scheme == SchemeKind::Ideal {
            ctx.out.write("ldos.csv", csv.as_bytes())?;
        }
        let support = spectral_support(cfg);
        let support = (base + support.0, base + support.1);
        for r in &results {
            let s = analysis::ldos_sum_rule_check(&r.curve, support)?;
            ctx.metric(format!("sum_rule_deviation[flux={}]", fmt_e(r.flux)), s.deviation);
            ctx.metric(format!("sum_rule_coverage_ok[flux={}]", fmt_e(r.flux)), if s.coverage_ok { 1.0 } else { 0.0 });
            if let Some(c) = r.truncation_change {
                ctx.metric(format!("truncation_doubling_change[flux={}]", fmt_e(r.flux)), c);
                ctx.metric(format!("truncation_used[flux={}]", fmt_e(r.flux)), r.truncation as f64);
            }
        }
        return Ok(());
    }

    ctx.out.write("butterfly.csv", csv.as_bytes())?;
    // One image row per flux, frequency along x.
    let values: Vec<f64> = results.iter().flat_map(|r| r.curve.rho.iter().copied()).collect();
    let (lo, hi) = io::min_max(&values);
    ctx.out.write("butterfly.pgm", &io::pgm16(rel.len(), results.len(), &values))?;
    ctx.out.json(
        "butterfly.json",
        &serde_json::json!({
            "width": rel.len(),
            "height": results.len(),
            "min": lo,
            "max": hi,
            "x": "omega",
            "y": "flux",
            "site": site,
            "site_omega": base,
        }),
    )?;
    Ok(())
}

fn transport(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let fp = single_flux(cfg, "transport")?;
    let detuning = require_detuning(cfg, "transport")?;
    match cfg.scheme {
        SchemeKind::Modulated => {
            let model = modulated_model(cfg, &fp)?;
            let site = resolve_site(&model.graph, cfg.probe)?;
            let base = model.graph.sites[site].omega;
            let omegas: Vec<f64> = detuning.values().iter().map(|d| base + d).collect();
            let cols = par::try_map(&omegas, |&w| floquet::floquet_transmission(&model, w, site, cfg.truncation))?;
            let mut csv = Csv::new(&["omega", "m", "site_j", "re_t", "im_t", "abs_t"]);
            for t in &cols {
                for (k, j, z) in t.entries() {
                    csv.row(&[fmt_e(t.omega), k.to_string(), j.to_string(), fmt_e(z.re), fmt_e(z.im), fmt_e(z.norm())]);
                }
            }
            ctx.out.write("transmission.csv", csv.as_bytes())?;
            Ok(())
        }
        SchemeKind::Conversion | SchemeKind::AbRing | SchemeKind::Ladder => {
            let model = conversion_model(cfg, &fp)?;
            let probe = resolve_site(&model.graph, cfg.probe)?;
            match detuning {
                Detuning::Value(dp) => response_outputs(ctx, &model, probe, dp, fp.value),
                Detuning::Sweep(s) => {
                    let dps = s.values();
                    let rows = par::try_map(&dps, |&dp| -> Result<(f64, f64)> {
                        let t = response::transmission(&model, dp, probe)?;
                        let out: f64 = t.iter().enumerate().filter(|(j, _)| *j != probe).map(|(_, z)| z.norm_sqr()).sum();
                        Ok((out, t[probe].norm_sqr()))
                    })?;
                    let mut csv = Csv::new(&["detuning", "output_power", "reflection"]);
                    for (dp, (o, r)) in dps.iter().zip(rows) {
                        csv.row(&[fmt_e(*dp), fmt_e(o), fmt_e(r)]);
                    }
                    ctx.out.write("detuning_scan.csv", csv.as_bytes())
                }
            }
        }
        s => Err(usage("transport", s)),
    }
}

fn response_outputs(ctx: &mut Context, model: &ConversionModel, probe: usize, dp: f64, flux: f64) -> Result<()> {
    let cfg = ctx.cfg;
    let map = response::response_map(model, dp, probe, Complex64::new(1.0, 0.0))?;
    let g = &model.graph;
    let mut csv = Csv::new(&["site_row", "site_col", "kind", "re_amp", "im_amp", "intensity"]);
    for s in &g.sites {
        let a = map.amplitudes[s.id];
        csv.row(&[s.row.to_string(), s.col.to_string(), s.kind.name().to_string(), fmt_e(a.re), fmt_e(a.im), fmt_e(a.norm_sqr())]);
    }
    ctx.out.write("response.csv", csv.as_bytes())?;

    let width = g.cols;
    let mut image = vec![0.0; g.rows * width];
    for s in &g.sites {
        image[s.row * width + s.col] = map.amplitudes[s.id].norm_sqr();
    }
    let (lo, hi) = io::min_max(&image);
    ctx.out.write("response.pgm", &io::pgm16(width, g.rows, &image))?;
    ctx.out.json(
        "response.json",
        &serde_json::json!({
            "width": width,
            "height": g.rows,
            "min": lo,
            "max": hi,
            "probe": probe,
            "detuning": dp,
            "flux": if flux.is_nan() { serde_json::Value::Null } else { flux.into() },
        }),
    )?;

    let total: f64 = response::transmission(model, dp, probe)?
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != probe)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    ctx.metric("output_power", total);
    if cfg.scheme == SchemeKind::Conversion {
        ctx.metric("ring_radius", analysis::ring_radius(g, &map, cfg.ring_bin));
        let (fwd, bwd) = analysis::chebyshev_arcs(g, probe, cfg.arc_radius, cfg.edge_axis);
        if !fwd.is_empty() && !bwd.is_empty() {
            ctx.metric("edge_chirality_ratio", analysis::edge_chirality_metric(&map, &fwd, &bwd)?.ratio);
        }
        let j_eff = pert::jeff_conversion(Complex64::new(cfg.params.g, 0.0), Complex64::new(cfg.params.g, 0.0), cfg.params.delta)?.norm();
        if flux > 0.0 && flux <= PI && j_eff > 0.0 {
            let lp = analysis::landau_parameters(j_eff, flux, 1)?;
            ctx.metric("landau_orbit_radius_n1", lp.orbit_radius);
            ctx.metric("cyclotron_frequency", lp.cyclotron_frequency);
        }
    }
    Ok(())
}

fn abscan(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    if !matches!(cfg.scheme, SchemeKind::AbRing | SchemeKind::Conversion) {
        return Err(usage("abscan", cfg.scheme));
    }
    let fluxes = match &cfg.flux {
        FluxSpec::PhaseFile(_) => return Err(Error::Configuration("abscan needs flux.value or flux.sweep".into())),
        _ => cfg.flux_values(),
    };
    let dp = match require_detuning(cfg, "abscan")? {
        Detuning::Value(v) => v,
        Detuning::Sweep(_) => return Err(Error::Configuration("abscan needs a single probe.detuning".into())),
    };
    let first = conversion_model(cfg, &FluxPoint { value: fluxes[0], field: None })?;
    let input = resolve_site(&first.graph, cfg.probe)?;
    let output = match cfg.output_site {
        Some(s) => resolve_site(&first.graph, s)?,
        None if cfg.scheme == SchemeKind::AbRing => lattice::ab_ring_ports(&first.graph).1,
        None => return Err(Error::Configuration("abscan needs probe.output".into())),
    };
    let scan = response::ab_flux_scan(
        |phi| conversion_model(cfg, &FluxPoint { value: phi, field: None }),
        dp,
        input,
        output,
        &fluxes,
        Execution::Parallel,
    )?;
    let mut csv = Csv::new(&["flux", "t_abs2_normalized"]);
    for (f, t) in scan.fluxes.iter().zip(&scan.normalized) {
        csv.row(&[fmt_e(*f), fmt_e(*t)]);
    }
    ctx.out.write("abscan.csv", csv.as_bytes())?;
    if fluxes.len() >= 3 {
        let fit = analysis::fit_cosine(&scan.fluxes, &scan.normalized)?;
        ctx.metric("ab_fit_offset", fit.offset);
        ctx.metric("ab_fit_amplitude", fit.amplitude);
        ctx.metric("ab_fit_phase", fit.phase);
        ctx.metric("ab_fit_max_residual", fit.max_residual);
    }
    Ok(())
}

fn ladder(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    if cfg.scheme != SchemeKind::Ladder {
        return Err(usage("ladder", cfg.scheme));
    }
    let dp = match require_detuning(cfg, "ladder")? {
        Detuning::Value(v) => v,
        Detuning::Sweep(_) => return Err(Error::Configuration("ladder needs a single probe.detuning".into())),
    };
    let dphis = cfg.flux_values();
    let conv = par::try_map(&dphis, |&dphi| -> Result<f64> {
        let model = conversion_model(cfg, &FluxPoint { value: dphi, field: None })?;
        let probe = resolve_site(&model.graph, cfg.probe)?;
        Ok(response::ladder_response(&model, dp, probe)?.conversion)
    })?;
    let mut csv = Csv::new(&["dphi", "conversion"]);
    for (d, c) in dphis.iter().zip(&conv) {
        csv.row(&[fmt_e(*d), fmt_e(*c)]);
    }
    ctx.out.write("ladder.csv", csv.as_bytes())?;
    let best = conv.iter().enumerate().fold(0, |b, (i, &c)| if c > conv[b] { i } else { b });
    ctx.metric("ladder_peak_dphi", dphis[best]);
    ctx.metric("ladder_peak_conversion", conv[best]);
    Ok(())
}

fn check(checks: &mut Vec<Check>, name: &str, value: f64, tolerance: f64, passed: bool) {
    checks.push(Check { name: name.into(), value, tolerance, passed });
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Deterministic pseudo-random gauge function.
fn gauge_function(n: usize, seed: f64) -> Vec<f64> {
    (0..n).map(|k| 3.0 * (1.37 * k as f64 + seed).sin()).collect()
}

/// The invariant suite. Sizes are small so that it finishes in seconds.
pub fn invariant_checks() -> Result<(Vec<Check>, Vec<pert::ConvergenceRow>)> {
    let mut c = Vec::new();
    let phi = 2.0 * PI / 5.0;

    let h = hofstadter::build_hofstadter_hamiltonian(&HofstadterModel::landau(6, 0.108, phi, 0.01))?;
    let dev = linalg::hermitian_deviation(&h);
    check(&mut c, "hofstadter_hermitian", dev, 1e-12, dev <= 1e-12);

    let sp = StaircaseParams::reference(0.05);
    let small = ModulatedLinkModel::staircase(2, 5, &sp, PI / 3.0)?;
    let dev = linalg::hermitian_deviation(&floquet::build_floquet_hamiltonian(&small, 3)?.matrix);
    check(&mut c, "floquet_hermitian", dev, 1e-12, dev <= 1e-12);

    let g = lattice::build_ideal_lattice(5, 5, 1.0, false)?;
    let fl = lattice::plaquette_fluxes(&g, &lattice::landau_gauge_phases(5, 5, phi));
    let err = fl.flux.iter().map(|f| (f - phi).abs()).fold(0.0, f64::max);
    check(&mut c, "landau_flux_audit", err, 1e-12, err <= 1e-12 && !fl.is_empty());

    let lg = lattice::build_synthetic_ladder(6, 0.3, 0.1, 0.1, 0.1)?;
    let fl = lattice::plaquette_fluxes(&lg, &lg.phase_field());
    let err = fl.flux.iter().map(|f| (f - 0.3).abs()).fold(0.0, f64::max);
    check(&mut c, "ladder_flux_audit", err, 1e-12, err <= 1e-12 && !fl.is_empty());

    let model = HofstadterModel::landau(5, 0.108, phi, 0.05);
    let site = model.central_site();
    let grid = hofstadter::default_grid(-0.5, 0.5, 0.05);
    let base = hofstadter::ldos(&hofstadter::spectrum(&hofstadter::build_hofstadter_hamiltonian(&model)?)?, site, &grid, 0.05)?;
    let gauged = HofstadterModel { phases: lattice::apply_gauge_transform(&model.phases, &gauge_function(25, 0.4))?, ..model.clone() };
    let other = hofstadter::ldos(&hofstadter::spectrum(&hofstadter::build_hofstadter_hamiltonian(&gauged)?)?, site, &grid, 0.05)?;
    let d = max_abs_diff(&base.rho, &other.rho);
    check(&mut c, "gauge_invariance_ldos", d, 1e-10, d <= 1e-10);

    let sum = analysis::ldos_sum_rule_check(&base, (-0.5, 0.5))?;
    check(&mut c, "ldos_sum_rule", sum.deviation, 1e-2, sum.deviation < 1e-2);

    let cp = ConversionParams { g: 0.2, j: 0.13, delta: 0.3, kappa: 0.01, gamma: 0.001 };
    let conv = ConversionModel::uniform_flux(3, 3, &cp, 0.7)?;
    let probe = conv.central_site();
    let i0 = response::response_map(&conv, 1.3, probe, Complex64::new(1.0, 0.0))?.intensities();
    let gauged = conv.with_phases(&lattice::apply_gauge_transform(&conv.graph.phase_field(), &gauge_function(conv.site_count(), 1.1))?)?;
    let i1 = response::response_map(&gauged, 1.3, probe, Complex64::new(1.0, 0.0))?.intensities();
    let d = max_abs_diff(&i0, &i1);
    check(&mut c, "gauge_invariance_response", d, 1e-10, d <= 1e-10);

    let fwd = response::transmission_matrix(&conv, 1.3)?;
    let bwd = response::transmission_matrix(&ConversionModel::uniform_flux(3, 3, &cp, -0.7)?, 1.3)?;
    let n = fwd.nrows();
    let mut d: f64 = 0.0;
    let mut power: f64 = 0.0;
    for l in 0..n {
        let mut col = 0.0;
        for j in 0..n {
            d = d.max((fwd[(j, l)] - bwd[(l, j)]).norm());
            col += fwd[(j, l)].norm_sqr();
        }
        power = power.max(col);
    }
    check(&mut c, "onsager_reciprocity", d, 1e-10, d <= 1e-10);
    check(&mut c, "passivity", power, 1.0 + 1e-10, power <= 1.0 + 1e-10);

    let lin1 = response::response_map(&conv, 1.3, probe, Complex64::new(1.0, 0.0))?;
    let lin2 = response::response_map(&conv, 1.3, probe, Complex64::new(0.3, -2.0))?;
    let d = lin1
        .amplitudes
        .iter()
        .zip(&lin2.amplitudes)
        .map(|(a, b)| (a * Complex64::new(0.3, -2.0) - b).norm())
        .fold(0.0, f64::max);
    check(&mut c, "linearity", d, 1e-12, d <= 1e-12);

    let three = ModulatedLinkModel::staircase(1, 3, &sp, 0.0)?;
    let w = hofstadter::uniform_grid(-0.5, 1.5, 0.01);
    let eig = floquet::floquet_ldos_eigen(&three, 0, &w, 6)?;
    let res = floquet::floquet_ldos(&three, 0, &w, 6)?;
    let scale = eig.rho.iter().copied().fold(0.0, f64::max);
    let d = max_abs_diff(&eig.rho, &res.rho) / scale;
    check(&mut c, "floquet_ldos_dual_route", d, 1e-8, d <= 1e-8);

    let ring = |f: f64| ConversionModel::new(lattice::build_ab_ring(0.01, 0.001, f), 0.1, 0.01, 0.001);
    let mut d: f64 = 0.0;
    for k in 0..8 {
        let f = 0.8 * k as f64;
        let a = response::transmission(&ring(f)?, 1.103, 0)?[5].norm_sqr();
        let b = response::transmission(&ring(f + 2.0 * PI)?, 1.103, 0)?[5].norm_sqr();
        d = d.max((a - b).abs());
    }
    check(&mut c, "ab_periodicity", d, 1e-10, d <= 1e-10);

    let j = pert::jeff_modulated(0.3, 0.3, 0.3, -0.5, 0.5)?.magnitude;
    check(&mut c, "jeff_closed_form", (j - 0.108).abs(), 1e-15, (j - 0.108).abs() <= 1e-15);

    let table = pert::convergence_table(&[0.1, 0.05, 0.025])?;
    let ratio = table.windows(2).map(|w| w[0].rel_err / w[1].rel_err).fold(f64::INFINITY, f64::min);
    check(&mut c, "splitting_quadratic_convergence", ratio, 3.0, ratio >= 3.0);
    Ok((c, table))
}

fn validate(ctx: &mut Context) -> Result<()> {
    let (checks, table) = invariant_checks()?;
    let mut csv = Csv::new(&["check", "value", "tolerance", "passed"]);
    for ch in &checks {
        csv.row(&[ch.name.clone(), fmt_e(ch.value), fmt_e(ch.tolerance), ch.passed.to_string()]);
    }
    ctx.out.write("validation.csv", csv.as_bytes())?;
    let mut conv = Csv::new(&["epsilon", "splitting_exact", "two_jeff", "rel_err"]);
    for r in &table {
        conv.row(&[fmt_e(r.epsilon), fmt_e(r.splitting_exact), fmt_e(r.two_jeff), fmt_e(r.rel_err)]);
    }
    ctx.out.write("convergence.csv", conv.as_bytes())?;
    ctx.checks = checks;
    ctx.convergence = table;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_with_preset;

    fn small(preset: &str, extra: &str) -> ExperimentConfig {
        parse_with_preset(extra, Some(preset)).unwrap()
    }

    #[test]
    fn invariant_suite_passes() {
        let (checks, table) = invariant_checks().unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(table.len(), 3);
    }

    #[test]
    fn center_of_ladder_is_optical() {
        let g = lattice::build_synthetic_ladder(10, 0.2, 0.1, 0.1, 0.1).unwrap();
        let s = resolve_site(&g, SiteSpec::Center).unwrap();
        assert!(g.sites[s].kind.is_optical());
        assert!(resolve_site(&g, SiteSpec::Grid { row: 1, col: 0 }).is_err());
    }

    #[test]
    fn command_scheme_mismatch_is_a_usage_error() {
        let cfg = small("fig3d", "");
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out: Some(dir.path().into()), threads: Some(1) };
        let e = run(&cfg, Command::Butterfly, &opts).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn ideal_butterfly_outputs() {
        let cfg = small("fig2a", "[lattice]\nrows = 4\ncols = 4\n[flux]\nsweep = { start = 0.0, stop = 1.0, steps = 3 }\n[omega]\nstart = -0.5\nstop = 0.5\nsteps = 11\n");
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions { out: Some(dir.path().into()), threads: Some(1) };
        let report = run(&cfg, Command::Butterfly, &opts).unwrap();
        let names: Vec<&str> = report.manifest.outputs.iter().map(|o| o.file.as_str()).collect();
        assert_eq!(names, vec!["butterfly.csv", "butterfly.pgm", "butterfly.json"]);
        let csv = std::fs::read_to_string(dir.path().join("butterfly.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 11);
        assert!(csv.starts_with("flux,omega,rho\n0.000000000000e+00,-5.000000000000e-01,"));
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn phase_file_reproduces_uniform_flux() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phases.csv");
        let mut text = String::from("i,j,phase\n");
        for (i, j, p) in lattice::landau_gauge_phases(3, 3, 0.9).iter() {
            text.push_str(&format!("{i},{j},{p}\n"));
        }
        std::fs::write(&path, text).unwrap();
        let base = "scheme = \"conversion\"\n[lattice]\nrows = 3\ncols = 3\n[params]\ng = 0.2\nj = 0.13\ndelta = 0.3\nkappa = 0.01\ngamma = 0.001\n";
        let a = crate::config::parse_config(&format!("{base}[flux]\nvalue = 0.9\n")).unwrap();
        let b = crate::config::parse_config(&format!("{base}[flux]\nphase_file = \"{}\"\n", path.display())).unwrap();
        let fa = flux_points(&a).unwrap();
        let fb = flux_points(&b).unwrap();
        let ma = conversion_model(&a, &fa[0]).unwrap();
        let mb = conversion_model(&b, &fb[0]).unwrap();
        let ia = response::response_map(&ma, 1.3, 4, Complex64::new(1.0, 0.0)).unwrap().intensities();
        let ib = response::response_map(&mb, 1.3, 4, Complex64::new(1.0, 0.0)).unwrap().intensities();
        assert!(max_abs_diff(&ia, &ib) < 1e-12);
    }

    #[test]
    fn analysis_rows_accumulate() {
        let dir = tempfile::tempdir().unwrap();
        append_analysis(dir.path(), &[("a".into(), 1.0)], "h").unwrap();
        append_analysis(dir.path(), &[("b".into(), 2.0)], "h").unwrap();
        let text = std::fs::read_to_string(dir.path().join("analysis.csv")).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), vec!["metric_name,value,parameters_hash", "a,1.000000000000e+00,h", "b,2.000000000000e+00,h"]);
    }
}
