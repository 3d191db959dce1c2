//! Experiment configuration.
//!
//! Configurations are TOML documents:
//!
//! ```toml
//! scheme = "conversion"        # ideal | modulated | conversion | ab_ring | ladder
//!
//! [lattice]
//! rows = 22                    # ladder: rows may be omitted, cols = rungs
//! cols = 22                    # modulated: grid positions per row
//! interface_rungs = true       # modulated only
//!
//! [params]
//! j = 0.13                     # photon hopping (modulated: A–I–B hopping)
//! j_eff = 0.108                # ideal model hopping
//! j_rung = 0.108               # modulated: row-to-row hopping
//! g0beta = 0.3                 # modulated: depth g₀|β|
//! omega_mod = 1.0              # modulated: modulation frequency Ω
//! step = 0.5                   # modulated: staircase step
//! g = 0.2                      # conversion: |g| per link
//! delta = 0.3                  # conversion: detuning from the red sideband
//! k = 0.1                      # ladder: phonon hopping
//! kappa = 0.01
//! gamma = 0.001
//!
//! [flux]                       # exactly one of value, sweep, phase_file
//! value = 0.7853981633974483
//! # sweep = { start = 0.0, stop = 6.283185307179586, steps = 64 }
//! # phase_file = "phases.csv"  # i,j,phase on the optical grid
//!
//! [probe]
//! site = "center"              # "center", an id, or { row = 21, col = 11 }
//! output = 5                   # abscan output site
//! detuning = 1.278             # or { start, stop, steps }
//!
//! [omega]                      # LDOS grid relative to the probed site
//! start = -0.6
//! stop = 0.6
//! steps = 600
//!
//! [analysis]
//! arc_radius = 5.0
//! edge_axis = 0.0
//! ring_bin = 0.25
//!
//! [run]
//! truncation = 8
//! threads = 4
//! output = "out"
//! ```
//!
//! Bundled presets (`fig2`, `fig2a`, `fig2b`, `fig3a`, `fig3b`, `fig3d`,
//! `fig4b`) are merged underneath the user document.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Ideal,
    Modulated,
    Conversion,
    AbRing,
    Ladder,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ideal => "ideal",
            SchemeKind::Modulated => "modulated",
            SchemeKind::Conversion => "conversion",
            SchemeKind::AbRing => "ab_ring",
            SchemeKind::Ladder => "ladder",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Ideal, Self::Modulated, Self::Conversion, Self::AbRing, Self::Ladder]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// `steps` evenly spaced points from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxSpec {
    Value(f64),
    Sweep(Sweep),
    PhaseFile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteSpec {
    Center,
    Index(usize),
    /// Row and column on the optical grid.
    Grid { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detuning {
    Value(f64),
    Sweep(Sweep),
}

impl Detuning {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Detuning::Value(v) => vec![*v],
            Detuning::Sweep(s) => s.values(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Params {
    pub j: f64,
    pub j_eff: f64,
    pub j_rung: Option<f64>,
    pub g0beta: f64,
    pub omega_mod: f64,
    pub step: f64,
    pub g: f64,
    pub delta: f64,
    pub k: f64,
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub rows: usize,
    pub cols: usize,
    pub interface_rungs: bool,
    pub params: Params,
    pub flux: FluxSpec,
    pub probe: SiteSpec,
    pub output_site: Option<SiteSpec>,
    pub detuning: Option<Detuning>,
    pub omega: Option<Sweep>,
    pub arc_radius: f64,
    pub edge_axis: f64,
    pub ring_bin: f64,
    pub truncation: usize,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
    /// Canonical serialization of the merged document without `[run]`.
    pub canonical: String,
}

const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3b", include_str!("../presets/fig3b.toml")),
    ("fig3d", include_str!("../presets/fig3d.toml")),
    ("fig4b", include_str!("../presets/fig4b.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Configuration(format!("unknown preset `{name}` (known: {})", preset_names().join(", "))))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_with_preset(text, None)
}

/// Parses `text` on top of an optional bundled preset.
pub fn parse_with_preset(text: &str, preset: Option<&str>) -> Result<ExperimentConfig> {
    let user = parse_table(text)?;
    let merged = match preset {
        Some(name) => {
            let mut base = parse_table(preset_text(name)?)?;
            if let (Some(Value::Table(u)), Some(Value::Table(b))) = (user.get("flux"), base.get_mut("flux")) {
                if FLUX_KEYS.iter().any(|k| u.contains_key(*k)) {
                    b.retain(|k, _| !FLUX_KEYS.iter().any(|f| *f == k));
                }
            }
            merge(&mut base, user);
            base
        }
        None => user,
    };
    from_table(&merged)
}

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Configuration(format!("malformed document: {}", e.message())))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

struct Reader<'a> {
    root: &'a Table,
    errors: Vec<String>,
}

const FLUX_KEYS: &[&str] = &["value", "sweep", "phase_file"];

const ALLOWED: &[(&str, &[&str])] = &[
    ("lattice", &["rows", "cols", "interface_rungs"]),
    ("params", &["j", "j_eff", "j_rung", "g0beta", "omega_mod", "step", "g", "delta", "k", "kappa", "gamma"]),
    ("flux", FLUX_KEYS),
    ("probe", &["site", "output", "detuning"]),
    ("omega", &["start", "stop", "steps"]),
    ("analysis", &["arc_radius", "edge_axis", "ring_bin"]),
    ("run", &["truncation", "threads", "output"]),
];

impl<'a> Reader<'a> {
    fn get(&self, path: &str) -> Option<&'a Value> {
        let mut parts = path.split('.');
        let mut v = self.root.get(parts.next()?)?;
        for p in parts {
            v = v.as_table()?.get(p)?;
        }
        Some(v)
    }

    fn float(&mut self, path: &str) -> Option<f64> {
        match self.get(path)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.errors.push(format!("{path}: expected a number"));
                None
            }
        }
    }

    fn required_float(&mut self, path: &str) -> f64 {
        if self.get(path).is_none() {
            self.errors.push(format!("{path}: missing required key"));
            return f64::NAN;
        }
        self.float(path).unwrap_or(f64::NAN)
    }

    fn rate(&mut self, path: &str) -> f64 {
        let v = self.required_float(path);
        if !v.is_nan() && !(v > 0.0) {
            self.errors.push(format!("{path}: must be positive, got {v}"));
        }
        v
    }

    fn nonneg(&mut self, path: &str, required: bool) -> f64 {
        let v = if required { self.required_float(path) } else { self.float(path).unwrap_or(0.0) };
        if !v.is_nan() && !(v >= 0.0) {
            self.errors.push(format!("{path}: must be nonnegative, got {v}"));
        }
        v
    }

    fn count(&mut self, path: &str, required: bool) -> Option<usize> {
        match self.get(path) {
            None => {
                if required {
                    self.errors.push(format!("{path}: missing required key"));
                }
                None
            }
            Some(Value::Integer(i)) if *i >= 1 => Some(*i as usize),
            Some(_) => {
                self.errors.push(format!("{path}: expected an integer ≥ 1"));
                None
            }
        }
    }

    fn sweep(&mut self, path: &str, v: &Value) -> Option<Sweep> {
        let t = match v.as_table() {
            Some(t) => t,
            None => {
                self.errors.push(format!("{path}: expected a table with start, stop, steps"));
                return None;
            }
        };
        for k in t.keys() {
            if !["start", "stop", "steps"].contains(&k.as_str()) {
                self.errors.push(format!("{path}.{k}: unknown key"));
            }
        }
        let num = |x: Option<&Value>| match x {
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            _ => None,
        };
        let start = num(t.get("start"));
        let stop = num(t.get("stop"));
        let steps = match t.get("steps") {
            Some(Value::Integer(i)) if *i >= 1 => Some(*i as usize),
            _ => None,
        };
        if start.is_none() {
            self.errors.push(format!("{path}.start: missing or not a number"));
        }
        if stop.is_none() {
            self.errors.push(format!("{path}.stop: missing or not a number"));
        }
        if steps.is_none() {
            self.errors.push(format!("{path}.steps: missing or not an integer ≥ 1"));
        }
        Some(Sweep { start: start?, stop: stop?, steps: steps? })
    }

    fn site(&mut self, path: &str) -> Option<SiteSpec> {
        match self.get(path)? {
            Value::String(s) if s == "center" => Some(SiteSpec::Center),
            Value::Integer(i) if *i >= 0 => Some(SiteSpec::Index(*i as usize)),
            Value::Table(t) => {
                let row = t.get("row").and_then(Value::as_integer).filter(|i| *i >= 0);
                let col = t.get("col").and_then(Value::as_integer).filter(|i| *i >= 0);
                if t.keys().any(|k| k != "row" && k != "col") || row.is_none() || col.is_none() {
                    self.errors.push(format!("{path}: expected {{ row, col }} with nonnegative integers"));
                    return None;
                }
                Some(SiteSpec::Grid { row: row? as usize, col: col? as usize })
            }
            _ => {
                self.errors.push(format!("{path}: expected \"center\", a site id or {{ row, col }}"));
                None
            }
        }
    }

    fn check_unknown(&mut self) {
        for (k, v) in self.root {
            if k == "scheme" {
                continue;
            }
            match ALLOWED.iter().find(|(s, _)| s == k) {
                None => self.errors.push(format!("{k}: unknown key")),
                Some((_, keys)) => match v.as_table() {
                    None => self.errors.push(format!("{k}: expected a table")),
                    Some(t) => {
                        for key in t.keys() {
                            if !keys.contains(&key.as_str()) {
                                self.errors.push(format!("{k}.{key}: unknown key"));
                            }
                        }
                    }
                },
            }
        }
    }
}

fn from_table(root: &Table) -> Result<ExperimentConfig> {
    let mut r = Reader { root, errors: Vec::new() };
    r.check_unknown();

    let scheme = match root.get("scheme") {
        None => {
            r.errors.push("scheme: missing required key".into());
            None
        }
        Some(Value::String(s)) => SchemeKind::parse(s).or_else(|| {
            r.errors.push(format!("scheme: unknown scheme `{s}`"));
            None
        }),
        Some(_) => {
            r.errors.push("scheme: expected a string".into());
            None
        }
    };

    let needs_dims = !matches!(scheme, Some(SchemeKind::AbRing) | Some(SchemeKind::Ladder));
    let rows = r.count("lattice.rows", needs_dims);
    let cols = r.count("lattice.cols", needs_dims || scheme == Some(SchemeKind::Ladder));
    if scheme == Some(SchemeKind::Ladder) && rows.is_some_and(|n| n != 2) {
        r.errors.push("lattice.rows: a ladder has exactly 2 rows".into());
    }
    let interface_rungs = match r.get("lattice.interface_rungs") {
        None => true,
        Some(Value::Boolean(b)) => *b,
        Some(_) => {
            r.errors.push("lattice.interface_rungs: expected a boolean".into());
            true
        }
    };

    let mut p = Params { kappa: r.rate("params.kappa"), ..Params::default() };
    match scheme {
        Some(SchemeKind::Ideal) => p.j_eff = r.nonneg("params.j_eff", true),
        Some(SchemeKind::Modulated) => {
            p.j = r.nonneg("params.j", true);
            p.g0beta = r.nonneg("params.g0beta", true);
            p.omega_mod = r.rate("params.omega_mod");
            p.step = r.rate("params.step");
            p.j_rung = r.float("params.j_rung");
            if p.j_rung.is_some_and(|x| !(x >= 0.0)) {
                r.errors.push("params.j_rung: must be nonnegative".into());
            }
        }
        Some(SchemeKind::Conversion) | Some(SchemeKind::AbRing) | Some(SchemeKind::Ladder) => {
            p.g = r.nonneg("params.g", true);
            p.j = r.nonneg("params.j", true);
            p.delta = r.required_float("params.delta");
            p.gamma = r.rate("params.gamma");
            if scheme == Some(SchemeKind::Ladder) {
                p.k = r.nonneg("params.k", true);
            }
        }
        None => {}
    }

    let flux_keys: Vec<&str> = ["value", "sweep", "phase_file"]
        .into_iter()
        .filter(|k| r.get(&format!("flux.{k}")).is_some())
        .collect();
    let flux = match flux_keys.as_slice() {
        [] => {
            r.errors.push("flux: one of flux.value, flux.sweep, flux.phase_file is required".into());
            None
        }
        ["value"] => r.float("flux.value").map(FluxSpec::Value),
        ["sweep"] => {
            let v = r.get("flux.sweep").expect("present");
            r.sweep("flux.sweep", v).map(FluxSpec::Sweep)
        }
        ["phase_file"] => match r.get("flux.phase_file") {
            Some(Value::String(s)) => Some(FluxSpec::PhaseFile(PathBuf::from(s))),
            _ => {
                r.errors.push("flux.phase_file: expected a path string".into());
                None
            }
        },
        _ => {
            r.errors.push("flux: give exactly one of value, sweep, phase_file".into());
            None
        }
    };
    if scheme == Some(SchemeKind::Ladder) && matches!(flux, Some(FluxSpec::PhaseFile(_))) {
        r.errors.push("flux.phase_file: not supported for the ladder (use value or sweep for dphi)".into());
    }

    let probe = r.site("probe.site").unwrap_or(SiteSpec::Center);
    let output_site = r.site("probe.output");
    let detuning = match r.get("probe.detuning") {
        None => None,
        Some(v @ Value::Table(_)) => r.sweep("probe.detuning", v).map(Detuning::Sweep),
        Some(_) => r.float("probe.detuning").map(Detuning::Value),
    };
    let omega = match r.get("omega") {
        Some(v @ Value::Table(_)) => r.sweep("omega", v),
        _ => None,
    };

    let arc_radius = r.float("analysis.arc_radius").unwrap_or(5.0);
    let edge_axis = r.float("analysis.edge_axis").unwrap_or(0.0);
    let ring_bin = r.float("analysis.ring_bin").unwrap_or(0.25);
    if !(ring_bin > 0.0) {
        r.errors.push("analysis.ring_bin: must be positive".into());
    }
    let truncation = r.count("run.truncation", false).unwrap_or(crate::floquet::DEFAULT_TRUNCATION);
    let threads = r.count("run.threads", false);
    let output_dir = match r.get("run.output") {
        None => PathBuf::from("out"),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(_) => {
            r.errors.push("run.output: expected a path string".into());
            PathBuf::from("out")
        }
    };

    if !r.errors.is_empty() {
        return Err(Error::Configuration(r.errors.join("; ")));
    }
    let scheme = scheme.expect("checked");
    let (rows, cols) = match scheme {
        SchemeKind::AbRing => (2, 2),
        SchemeKind::Ladder => (2, cols.expect("checked")),
        _ => (rows.expect("checked"), cols.expect("checked")),
    };
    Ok(ExperimentConfig {
        scheme,
        rows,
        cols,
        interface_rungs,
        params: p,
        flux: flux.expect("checked"),
        probe,
        output_site,
        detuning,
        omega,
        arc_radius,
        edge_axis,
        ring_bin,
        truncation,
        threads,
        output_dir,
        canonical: canonical(root),
    })
}

/// Physics part of the document; the `[run]` table does not change
/// results and is left out.
fn canonical(root: &Table) -> String {
    let mut t = root.clone();
    t.remove("run");
    toml::to_string(&t).unwrap_or_default()
}

impl ExperimentConfig {
    /// Flux values of the run (a single value for constant or file fluxes).
    pub fn flux_values(&self) -> Vec<f64> {
        match &self.flux {
            FluxSpec::Value(v) => vec![*v],
            FluxSpec::Sweep(s) => s.values(),
            FluxSpec::PhaseFile(_) => vec![f64::NAN],
        }
    }

    /// Short hash of the physics parameters.
    pub fn hash(&self) -> String {
        crate::io::sha256_hex(self.canonical.as_bytes())[..16].to_string()
    }
}
