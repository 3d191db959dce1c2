//! Lattice geometries and gauge-field bookkeeping.
//!
//! Every scheme lives on a rectangular grid of positions. `row` grows
//! downward and `col` to the right, matching the heatmaps written by
//! [`crate::io`]. Plaquettes are traversed counterclockwise as seen on that
//! picture (bottom edge left to right, right edge upward, top edge right to
//! left, left edge downward), and counterclockwise flux is positive.
//!
//! Interface and mechanical mid-sites sit on the horizontal optical links, so
//! plaquettes are always the squares of the optical sublattice. The phase of
//! a horizontal optical link is the sum of the phases along its sub-links.
//!
//! A link `i → j` with amplitude `A` and phase `θ` contributes the matrix
//! element `H[j, i] = -A·e^{iθ}` (and its conjugate) to the Hamiltonian.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{self, CMat};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteKind {
    OpticalA,
    OpticalB,
    Interface,
    Mechanical,
}

impl SiteKind {
    pub fn is_optical(self) -> bool {
        !matches!(self, SiteKind::Mechanical)
    }

    pub fn name(self) -> &'static str {
        match self {
            SiteKind::OpticalA => "A",
            SiteKind::OpticalB => "B",
            SiteKind::Interface => "I",
            SiteKind::Mechanical => "b",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub id: usize,
    pub kind: SiteKind,
    pub row: usize,
    pub col: usize,
    /// On-site frequency (for conversion lattices: offset from the
    /// rotating-frame frequency of the sublattice).
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkKind {
    PhotonHop,
    PhononHop,
    OptomechanicalCoupling,
    ModulatedNeighbor,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::PhotonHop => "photon_hop",
            LinkKind::PhononHop => "phonon_hop",
            LinkKind::OptomechanicalCoupling => "optomechanical",
            LinkKind::ModulatedNeighbor => "modulated_neighbor",
        }
    }
}

/// A directed link `i → j`; the reverse direction carries the conjugate
/// coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub kind: LinkKind,
    pub amplitude: f64,
    pub phase: f64,
}

impl Link {
    pub fn reversed(&self) -> Link {
        Link { i: self.j, j: self.i, phase: -self.phase, ..self.clone() }
    }

    /// Complex hopping factor `amplitude·e^{iθ}` for `i → j`.
    pub fn factor(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ModulatedLink,
    Conversion,
    ABRing,
    SyntheticLadder,
    IdealHofstadter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGraph {
    pub sites: Vec<Site>,
    pub links: Vec<Link>,
    /// Grid rows.
    pub rows: usize,
    /// Grid positions per row (mid-sites included).
    pub cols: usize,
    pub scheme: Scheme,
    /// Periodic wrap-around links (ideal lattice only).
    pub periodic: bool,
}

/// The optical sublattice seen as a plain square grid.
#[derive(Debug, Clone)]
pub struct OpticalGrid {
    pub rows: usize,
    pub cols: usize,
    /// Grid positions between horizontally adjacent nodes.
    pub stride: usize,
}

impl OpticalGrid {
    pub fn node(&self, graph: &LatticeGraph, r: usize, c: usize) -> usize {
        r * graph.cols + c * self.stride
    }
}

impl LatticeGraph {
    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site_at(&self, row: usize, col: usize) -> Option<usize> {
        (row < self.rows && col < self.cols).then(|| row * self.cols + col)
    }

    /// Position in lattice units (optical lattice constant a = 1).
    pub fn position(&self, id: usize) -> (f64, f64) {
        let s = &self.sites[id];
        (s.col as f64 * self.col_scale(), s.row as f64)
    }

    fn col_scale(&self) -> f64 {
        match self.scheme {
            Scheme::ModulatedLink | Scheme::Conversion | Scheme::ABRing => 0.5,
            Scheme::SyntheticLadder | Scheme::IdealHofstadter => 1.0,
        }
    }

    pub fn optical_grid(&self) -> OpticalGrid {
        match self.scheme {
            Scheme::ModulatedLink | Scheme::Conversion | Scheme::ABRing => OpticalGrid {
                rows: self.rows,
                cols: self.cols.div_ceil(2),
                stride: 2,
            },
            Scheme::SyntheticLadder | Scheme::IdealHofstadter => OpticalGrid {
                rows: self.rows,
                cols: self.cols,
                stride: 1,
            },
        }
    }

    /// Index of the link joining `i` and `j` in either direction.
    pub fn find_link(&self, i: usize, j: usize) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.i == i && l.j == j) || (l.i == j && l.j == i))
    }

    fn link_map(&self) -> BTreeMap<(usize, usize), usize> {
        self.links
            .iter()
            .enumerate()
            .map(|(k, l)| ((l.i.min(l.j), l.i.max(l.j)), k))
            .collect()
    }

    /// Phase of the step `i → j` along an existing link.
    fn step_phase(&self, map: &BTreeMap<(usize, usize), usize>, i: usize, j: usize) -> Option<f64> {
        map.get(&(i.min(j), i.max(j))).map(|&k| {
            let l = &self.links[k];
            if l.i == i { l.phase } else { -l.phase }
        })
    }

    pub fn is_connected(&self) -> bool {
        let n = self.sites.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for l in &self.links {
            adj[l.i].push(l.j);
            adj[l.j].push(l.i);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Static Hermitian Hamiltonian of the graph (on-site frequencies plus
    /// links).
    pub fn hamiltonian(&self) -> CMat {
        let mut h = linalg::zeros(self.sites.len());
        for s in &self.sites {
            h[(s.id, s.id)] += Complex64::new(s.omega, 0.0);
        }
        for l in &self.links {
            let t = -l.factor();
            h[(l.j, l.i)] += t;
            h[(l.i, l.j)] += t.conj();
        }
        h
    }

    /// Adds a per-site frequency offset (disorder) to every site.
    pub fn with_disorder(mut self, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != self.sites.len() {
            return Err(Error::Argument(format!(
                "disorder field has {} entries for {} sites",
                offsets.len(),
                self.sites.len()
            )));
        }
        for (s, d) in self.sites.iter_mut().zip(offsets) {
            s.omega += d;
        }
        Ok(self)
    }

    /// Copies link phases from `field`. Every link must be covered.
    pub fn with_phases(mut self, field: &PhaseField) -> Result<Self> {
        for l in &mut self.links {
            l.phase = field.get(l.i, l.j).ok_or_else(|| {
                Error::Configuration(format!("phase field has no entry for link {} -> {}", l.i, l.j))
            })?;
        }
        Ok(self)
    }

    /// Phases currently carried by the links.
    pub fn phase_field(&self) -> PhaseField {
        let mut f = PhaseField::new();
        for l in &self.links {
            f.set(l.i, l.j, l.phase);
        }
        f
    }

    fn push_link(&mut self, i: usize, j: usize, kind: LinkKind, amplitude: f64, phase: f64) {
        self.links.push(Link { i, j, kind, amplitude, phase });
    }

    fn empty(rows: usize, cols: usize, scheme: Scheme) -> Self {
        LatticeGraph { sites: Vec::new(), links: Vec::new(), rows, cols, scheme, periodic: false }
    }
}

/// Per-link Peierls phases, stored antisymmetrically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseField {
    phases: BTreeMap<(usize, usize), f64>,
}

impl PhaseField {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the phase for `i → j` (and `-phase` for `j → i`).
    pub fn set(&mut self, i: usize, j: usize, phase: f64) {
        if i <= j {
            self.phases.insert((i, j), phase);
        } else {
            self.phases.insert((j, i), -phase);
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i <= j {
            self.phases.get(&(i, j)).copied()
        } else {
            self.phases.get(&(j, i)).map(|p| -p)
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Entries as `(i, j, phase of i → j)` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.phases.iter().map(|(&(i, j), &p)| (i, j, p))
    }
}

/// Per-plaquette flux in `(-π, π]`, plaquettes row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxPattern {
    pub rows: usize,
    pub cols: usize,
    pub flux: Vec<f64>,
}

impl FluxPattern {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.flux[r * self.cols + c]
    }

    pub fn is_empty(&self) -> bool {
        self.flux.is_empty()
    }
}

/// Reduces an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// On-site frequency ladder along a row of the modulated-link lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaProfile {
    /// `omega(col) = step·col`.
    Staircase { step: f64 },
    /// Explicit frequency per grid column.
    Columns(Vec<f64>),
}

impl OmegaProfile {
    pub fn omega(&self, col: usize) -> Result<f64> {
        match self {
            OmegaProfile::Staircase { step } => Ok(step * col as f64),
            OmegaProfile::Columns(v) => v.get(col).copied().ok_or_else(|| {
                Error::Argument(format!("frequency profile has no entry for column {col}"))
            }),
        }
    }
}

/// Inter-row photon hopping of the modulated-link lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rungs {
    pub amplitude: f64,
    /// Whether interface sites are also joined vertically.
    pub include_interface: bool,
}

/// Modulated-link lattice: each row reads A, I, B, I, A, … with hopping `j`
/// between neighbours; rows are joined by phase-free photon hopping.
pub fn build_modulated_link_lattice(
    rows: usize,
    cols: usize,
    profile: &OmegaProfile,
    j: f64,
    rungs: Rungs,
) -> Result<LatticeGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension { rows, cols });
    }
    let mut g = LatticeGraph::empty(rows, cols, Scheme::ModulatedLink);
    for r in 0..rows {
        for c in 0..cols {
            let kind = match c % 4 {
                0 => SiteKind::OpticalA,
                2 => SiteKind::OpticalB,
                _ => SiteKind::Interface,
            };
            g.sites.push(Site { id: r * cols + c, kind, row: r, col: c, omega: profile.omega(c)? });
        }
    }
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            g.push_link(r * cols + c, r * cols + c + 1, LinkKind::ModulatedNeighbor, j, 0.0);
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols {
            if c % 2 == 1 && !rungs.include_interface {
                continue;
            }
            g.push_link(r * cols + c, (r + 1) * cols + c, LinkKind::PhotonHop, rungs.amplitude, 0.0);
        }
    }
    Ok(g)
}

/// Wavelength-conversion lattice with `cols` optical sites per row and a
/// mechanical site between each neighbouring pair.
///
/// `coupling(row, k)` is the complex factor of the `k`-th horizontal link of
/// `row`, directed left to right: `H[right, left] = -coupling`. For an
/// A–b–B cell with drive couplings `g_A`, `g_B` this is `conj(g_A)` then
/// `g_B`.
pub fn build_conversion_lattice(
    rows: usize,
    cols: usize,
    coupling: impl Fn(usize, usize) -> Complex64,
    j: f64,
) -> Result<LatticeGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension { rows, cols });
    }
    let width = 2 * cols - 1;
    let mut g = LatticeGraph::empty(rows, width, Scheme::Conversion);
    for r in 0..rows {
        for c in 0..width {
            let kind = if c % 2 == 1 {
                SiteKind::Mechanical
            } else if (c / 2) % 2 == 0 {
                SiteKind::OpticalA
            } else {
                SiteKind::OpticalB
            };
            g.sites.push(Site { id: r * width + c, kind, row: r, col: c, omega: 0.0 });
        }
    }
    for r in 0..rows {
        for k in 0..width - 1 {
            let z = coupling(r, k);
            g.push_link(r * width + k, r * width + k + 1, LinkKind::OptomechanicalCoupling, z.norm(), z.arg());
        }
    }
    for r in 0..rows.saturating_sub(1) {
        for c in (0..width).step_by(2) {
            g.push_link(r * width + c, (r + 1) * width + c, LinkKind::PhotonHop, j, 0.0);
        }
    }
    Ok(g)
}

/// Minimal symmetric Aharonov-Bohm ring: one conversion plaquette whose two
/// rows are joined by photon hopping. The probe enters at grid position
/// (0, 0) and leaves at the diagonally opposite optical site, so the two
/// paths are conversion-then-hop and hop-then-conversion. The flux is spread
/// evenly over the four conversion links.
pub fn build_ab_ring(g: f64, j: f64, flux: f64) -> LatticeGraph {
    let quarter = wrap_angle(flux) / 4.0;
    let mut graph = build_conversion_lattice(
        2,
        2,
        |row, _| Complex64::from_polar(g, if row == 0 { -quarter } else { quarter }),
        j,
    )
    .expect("fixed 2x2 ring dimensions are valid");
    graph.scheme = Scheme::ABRing;
    graph
}

/// Sites where the AB-ring probe enters and leaves.
pub fn ab_ring_ports(graph: &LatticeGraph) -> (usize, usize) {
    (0, graph.site_count() - 1)
}

/// Optomechanical synthetic ladder: optical rail (row 0, hopping `j`),
/// mechanical rail (row 1, hopping `k`) and rungs with drive phase
/// `φ_c = c·dphi`, i.e. `H[b_c, a_c] = -g·e^{-iφ_c}`.
pub fn build_synthetic_ladder(n: usize, dphi: f64, g: f64, j: f64, k: f64) -> Result<LatticeGraph> {
    if n < 2 {
        return Err(Error::Dimension { rows: 2, cols: n });
    }
    let mut graph = LatticeGraph::empty(2, n, Scheme::SyntheticLadder);
    for r in 0..2 {
        for c in 0..n {
            let kind = if r == 0 { SiteKind::OpticalA } else { SiteKind::Mechanical };
            graph.sites.push(Site { id: r * n + c, kind, row: r, col: c, omega: 0.0 });
        }
    }
    for c in 0..n - 1 {
        graph.push_link(c, c + 1, LinkKind::PhotonHop, j, 0.0);
        graph.push_link(n + c, n + c + 1, LinkKind::PhononHop, k, 0.0);
    }
    for c in 0..n {
        graph.push_link(c, n + c, LinkKind::OptomechanicalCoupling, g, -(c as f64) * dphi);
    }
    Ok(graph)
}

/// Drive phases `φ_c` of the ladder rungs (phase of `b_c → a_c`).
pub fn ladder_rung_phases(graph: &LatticeGraph) -> Vec<f64> {
    let n = graph.cols;
    (0..n)
        .map(|c| {
            let k = graph.find_link(c, n + c).expect("ladder rung");
            let l = &graph.links[k];
            if l.i == c { -l.phase } else { l.phase }
        })
        .collect()
}

/// Plain square lattice of optical sites with hopping `j`, the substrate of
/// the ideal Peierls model. `periodic` adds wrap-around links.
pub fn build_ideal_lattice(rows: usize, cols: usize, j: f64, periodic: bool) -> Result<LatticeGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension { rows, cols });
    }
    if periodic && (rows < 3 || cols < 3) {
        return Err(Error::Argument("periodic lattices need at least 3x3 sites".into()));
    }
    let mut g = LatticeGraph::empty(rows, cols, Scheme::IdealHofstadter);
    g.periodic = periodic;
    for r in 0..rows {
        for c in 0..cols {
            g.sites.push(Site { id: r * cols + c, kind: SiteKind::OpticalA, row: r, col: c, omega: 0.0 });
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                g.push_link(id, id + 1, LinkKind::PhotonHop, j, 0.0);
            } else if periodic {
                g.push_link(id, r * cols, LinkKind::PhotonHop, j, 0.0);
            }
            if r + 1 < rows {
                g.push_link(id, id + cols, LinkKind::PhotonHop, j, 0.0);
            } else if periodic {
                g.push_link(id, c, LinkKind::PhotonHop, j, 0.0);
            }
        }
    }
    Ok(g)
}

/// Landau gauge on a `rows × cols` optical grid (site id `r·cols + c`):
/// horizontal links of row `y` carry `y·flux`, vertical links carry zero.
/// Wrap-around links of a periodic grid are included.
pub fn landau_gauge_phases(rows: usize, cols: usize, flux: f64) -> PhaseField {
    let mut f = PhaseField::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols {
                f.set(id, id + 1, r as f64 * flux);
            } else if cols >= 3 {
                f.set(id, r * cols, r as f64 * flux);
            }
            if r + 1 < rows {
                f.set(id, id + cols, 0.0);
            } else if rows >= 3 {
                f.set(id, c, 0.0);
            }
        }
    }
    f
}

/// Maps phases given on the optical grid (site id `r·cols + c` of the
/// [`OpticalGrid`]) onto the links of `graph`. A horizontal optical link
/// with mid-site gets its phase split evenly over the two sub-links.
pub fn lift_optical_phases(graph: &LatticeGraph, optical: &PhaseField) -> Result<PhaseField> {
    let grid = graph.optical_grid();
    let mut out = PhaseField::new();
    for l in &graph.links {
        out.set(l.i, l.j, 0.0);
    }
    let lookup = |r: usize, c: usize, r2: usize, c2: usize| -> Result<f64> {
        optical.get(r * grid.cols + c, r2 * grid.cols + c2).ok_or_else(|| {
            Error::Configuration(format!("missing phase for optical link ({r},{c})->({r2},{c2})"))
        })
    };
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let a = grid.node(graph, r, c);
            if c + 1 < grid.cols {
                let theta = lookup(r, c, r, c + 1)?;
                if grid.stride == 1 {
                    out.set(a, a + 1, theta);
                } else {
                    out.set(a, a + 1, theta / 2.0);
                    out.set(a + 1, a + 2, theta / 2.0);
                }
            }
            if r + 1 < grid.rows && graph.scheme != Scheme::SyntheticLadder {
                let b = grid.node(graph, r + 1, c);
                if graph.find_link(a, b).is_some() {
                    out.set(a, b, lookup(r, c, r + 1, c)?);
                }
            }
        }
    }
    Ok(out)
}

/// Counterclockwise phase sum around every optical plaquette, reduced into
/// `(-π, π]`. Links missing from `phases` use the phase stored on the graph.
/// Grids without plaquettes give an empty pattern.
pub fn plaquette_fluxes(graph: &LatticeGraph, phases: &PhaseField) -> FluxPattern {
    let grid = graph.optical_grid();
    let map = graph.link_map();
    let step = |i: usize, j: usize| -> Option<f64> {
        phases.get(i, j).or_else(|| graph.step_phase(&map, i, j))
    };
    // Horizontal optical link (r, c) -> (r, c + 1), through any mid-site.
    let horizontal = |r: usize, c: usize| -> Option<f64> {
        let a = grid.node(graph, r, c);
        (0..grid.stride).try_fold(0.0, |acc, s| Some(acc + step(a + s, a + s + 1)?))
    };
    if grid.rows < 2 || grid.cols < 2 {
        return FluxPattern { rows: 0, cols: 0, flux: Vec::new() };
    }
    let (pr, pc) = (grid.rows - 1, grid.cols - 1);
    let mut flux = Vec::with_capacity(pr * pc);
    for r in 0..pr {
        for c in 0..pc {
            // Row r is drawn above row r + 1.
            let top_l = grid.node(graph, r, c);
            let top_r = grid.node(graph, r, c + 1);
            let bot_l = grid.node(graph, r + 1, c);
            let bot_r = grid.node(graph, r + 1, c + 1);
            let sum = (|| {
                Some(horizontal(r + 1, c)? + step(bot_r, top_r)? - horizontal(r, c)? + step(top_l, bot_l)?)
            })();
            match sum {
                Some(s) => flux.push(wrap_angle(s)),
                None => return FluxPattern { rows: 0, cols: 0, flux: Vec::new() },
            }
        }
    }
    FluxPattern { rows: pr, cols: pc, flux }
}

/// Gauge transformation `θ(i → j) ← θ(i → j) + ξ_j − ξ_i`.
pub fn apply_gauge_transform(phases: &PhaseField, xi: &[f64]) -> Result<PhaseField> {
    let mut out = PhaseField::new();
    for (i, j, p) in phases.iter() {
        let (xi_i, xi_j) = match (xi.get(i), xi.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Argument(format!("gauge function undefined on link {i} -> {j}"))),
        };
        out.set(i, j, p + xi_j - xi_i);
    }
    Ok(out)
}
