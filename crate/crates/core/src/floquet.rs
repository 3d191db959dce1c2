//! Time-periodic treatment of the modulated-link lattice in the extended
//! (Sambe) space of sites ⊗ Fourier modes.
//!
//! For a modulation `ω_I(t) = ω̄_I + 2g₀|β| cos(Ωt + φ)` and periodic states
//! `u(t) = Σ_m u_m e^{imΩt}`, the Floquet operator `−i∂_t + H(t)` has
//! diagonal blocks `H₀ + mΩ` and off-diagonal blocks
//!
//! * `(m, m+1)`: `g₀|β| e^{−iφ}` on the interface diagonal,
//! * `(m, m−1)`: `g₀|β| e^{+iφ}`.
//!
//! In the driven response `a(t) = Σ_m u_m e^{−i(ω − mΩ)t}` the Fourier block
//! `m` therefore oscillates at `ω − mΩ`; light leaving at `ω + kΩ` (up-
//! converted `k` times) lives in block `−k`. Functions that talk about
//! sidebands use the physical count `k`; functions that take a block index
//! say so.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::hofstadter::{self, LDOSCurve, Spectrum};
use crate::lattice::{self, LatticeGraph, OmegaProfile, PhaseField, Rungs, Scheme, SiteKind};
use crate::linalg::{self, CMat};
use crate::par::{self, Execution};
use crate::{pert, Error, Result};

/// Default Fourier truncation.
pub const DEFAULT_TRUNCATION: usize = 8;

/// Tolerance for an eigenvalue sitting on the Floquet zone edge.
pub const ZONE_EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    /// `g₀|β|`.
    pub amp: f64,
    /// Drive phase `φ`.
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub struct ModulatedLinkModel {
    pub graph: LatticeGraph,
    /// Modulation frequency Ω.
    pub omega: f64,
    /// Modulation of every interface site, keyed by site id.
    pub modulation: BTreeMap<usize, Modulation>,
    /// Optical decay rate per site.
    pub kappa: Vec<f64>,
}

/// Parameters of a staircase modulated-link lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaircaseParams {
    pub j: f64,
    pub g0beta: f64,
    pub omega: f64,
    pub kappa: f64,
    /// Frequency step between neighbouring grid positions.
    pub step: f64,
    /// Photon hopping between rows.
    pub j_rung: f64,
    pub interface_rungs: bool,
}

impl StaircaseParams {
    /// Parameters of the modulated-link butterfly: J = g₀|β| = 0.3, Ω = 1,
    /// staircase 0.5, rows joined at the effective hopping rate.
    pub fn reference(kappa: f64) -> Self {
        let j_rung = pert::jeff_modulated(0.3, 0.3, 0.3, -0.5, 0.5).expect("nonzero denominators").magnitude;
        StaircaseParams { j: 0.3, g0beta: 0.3, omega: 1.0, kappa, step: 0.5, j_rung, interface_rungs: true }
    }
}

impl ModulatedLinkModel {
    /// Uniform modulation amplitude and zero phase on every interface site,
    /// uniform decay everywhere.
    pub fn new(graph: LatticeGraph, omega: f64, amp: f64, kappa: f64) -> Result<Self> {
        let modulation = graph
            .sites
            .iter()
            .filter(|s| s.kind == SiteKind::Interface)
            .map(|s| (s.id, Modulation { amp, phase: 0.0 }))
            .collect();
        let kappa = vec![kappa; graph.site_count()];
        let model = ModulatedLinkModel { graph, omega, modulation, kappa };
        model.validate()?;
        Ok(model)
    }

    /// Staircase lattice with uniform flux per optical plaquette.
    pub fn staircase(rows: usize, cols: usize, p: &StaircaseParams, flux: f64) -> Result<Self> {
        let graph = lattice::build_modulated_link_lattice(
            rows,
            cols,
            &OmegaProfile::Staircase { step: p.step },
            p.j,
            Rungs { amplitude: p.j_rung, include_interface: p.interface_rungs },
        )?;
        let model = Self::new(graph, p.omega, p.g0beta, p.kappa)?;
        let grid = model.graph.optical_grid();
        model.with_effective_phases(&lattice::landau_gauge_phases(grid.rows, grid.cols, flux))
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.scheme != Scheme::ModulatedLink {
            return Err(Error::Configuration("Floquet model needs a modulated-link lattice".into()));
        }
        if !(self.omega > 0.0) {
            return Err(Error::Configuration(format!("Omega must be positive, got {}", self.omega)));
        }
        if self.kappa.len() != self.graph.site_count() {
            return Err(Error::Configuration("decay rates must be given for every site".into()));
        }
        if let Some(k) = self.kappa.iter().find(|k| !(**k >= 0.0)) {
            return Err(Error::Configuration(format!("decay rate must be nonnegative, got {k}")));
        }
        for s in &self.graph.sites {
            let has = self.modulation.contains_key(&s.id);
            if has != (s.kind == SiteKind::Interface) {
                return Err(Error::Configuration(format!("modulation must be defined exactly on interface sites (site {})", s.id)));
            }
        }
        if let Some(m) = self.modulation.values().find(|m| !(m.amp >= 0.0)) {
            return Err(Error::Configuration(format!("modulation amplitude must be nonnegative, got {}", m.amp)));
        }
        Ok(())
    }

    pub fn site_count(&self) -> usize {
        self.graph.site_count()
    }

    /// The common decay rate, if all sites share one.
    pub fn uniform_kappa(&self) -> Option<f64> {
        let k = *self.kappa.first()?;
        self.kappa.iter().all(|&x| x == k).then_some(k)
    }

    /// Sets interface drive phases so that the effective optical hopping
    /// left → right across each interface carries the phase given in
    /// `optical` (indexed on the optical grid). Photons hopping to the right
    /// are up-converted and pick up `−φ`, so `φ = −θ`.
    pub fn with_effective_phases(mut self, optical: &PhaseField) -> Result<Self> {
        let grid = self.graph.optical_grid();
        for (&id, m) in self.modulation.iter_mut() {
            let s = &self.graph.sites[id];
            let left = s.row * grid.cols + (s.col - 1) / 2;
            if s.col.div_ceil(2) >= grid.cols {
                continue;
            }
            let theta = optical.get(left, left + 1).ok_or_else(|| {
                Error::Configuration(format!("missing effective phase across interface site {id}"))
            })?;
            m.phase = -theta;
        }
        Ok(self)
    }

    /// Adds `c` to every drive phase.
    pub fn shift_phases(mut self, c: f64) -> Self {
        for m in self.modulation.values_mut() {
            m.phase += c;
        }
        self
    }

    /// Effective Peierls phases on the links of the graph: the left link of
    /// each interface carries `−φ`, everything else zero.
    pub fn effective_phase_field(&self) -> PhaseField {
        let mut f = self.graph.phase_field();
        for (i, j, _) in f.clone().iter() {
            f.set(i, j, 0.0);
        }
        for (&id, m) in &self.modulation {
            if let Some(left) = self.graph.site_at(self.graph.sites[id].row, self.graph.sites[id].col - 1) {
                f.set(left, id, -m.phase);
            }
        }
        f
    }

    /// Interior optical site nearest the centre of the grid.
    pub fn central_site(&self) -> usize {
        let grid = self.graph.optical_grid();
        let (r, c) = (grid.rows / 2, grid.cols / 2);
        grid.node(&self.graph, r, c)
    }
}

/// Truncated Floquet operator (Hermitian; loss enters the resolvent).
#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub sites: usize,
    pub truncation: usize,
    pub omega: f64,
    pub matrix: CMat,
}

impl FloquetOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row of `(site, block)` with `block ∈ −M..=M`.
    pub fn index(&self, site: usize, block: i64) -> usize {
        sambe_index(self.sites, self.truncation, site, block)
    }
}

fn sambe_index(sites: usize, truncation: usize, site: usize, block: i64) -> usize {
    (block + truncation as i64) as usize * sites + site
}

pub fn build_floquet_hamiltonian(model: &ModulatedLinkModel, truncation: usize) -> Result<FloquetOperator> {
    if truncation < 1 {
        return Err(Error::Argument("Fourier truncation must be at least 1".into()));
    }
    model.validate()?;
    let s = model.site_count();
    let blocks = 2 * truncation + 1;
    let h0 = model.graph.hamiltonian();
    let mut h = linalg::zeros(s * blocks);
    for b in 0..blocks {
        let shift = (b as f64 - truncation as f64) * model.omega;
        let off = b * s;
        for j in 0..s {
            for i in 0..s {
                h[(off + i, off + j)] = h0[(i, j)];
            }
            h[(off + j, off + j)] += Complex64::new(shift, 0.0);
        }
        if b + 1 < blocks {
            for (&id, m) in &model.modulation {
                let z = Complex64::from_polar(m.amp, -m.phase);
                h[(off + id, off + s + id)] = z;
                h[(off + s + id, off + id)] = z.conj();
            }
        }
    }
    Ok(FloquetOperator { sites: s, truncation, omega: model.omega, matrix: h })
}

/// Physical quasienergies folded into `[−Ω/2, Ω/2)`, one per site.
///
/// The representative of each Floquet state is the eigenvector with the
/// largest weight in the central Fourier block. Eigenvalues within
/// [`ZONE_EDGE_TOL`] of the zone edge are reported as an error rather than
/// folded arbitrarily.
pub fn quasienergies(op: &FloquetOperator) -> Result<Vec<f64>> {
    let (values, vectors) = linalg::eigh(&op.matrix)?;
    let central: Vec<f64> = (0..values.len())
        .map(|k| (0..op.sites).map(|j| vectors[(op.index(j, 0), k)].norm_sqr()).sum())
        .collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| central[b].total_cmp(&central[a]).then(a.cmp(&b)));
    let mut folded = Vec::with_capacity(op.sites);
    for &k in order.iter().take(op.sites) {
        folded.push(fold(values[k], op.omega)?);
    }
    folded.sort_by(f64::total_cmp);
    Ok(folded)
}

/// Folds `e` into `[−Ω/2, Ω/2)`.
pub fn fold(e: f64, omega: f64) -> Result<f64> {
    let x = (e + omega / 2.0).rem_euclid(omega);
    if x < ZONE_EDGE_TOL || omega - x < ZONE_EDGE_TOL {
        return Err(Error::ZoneEdge { value: e, tol: ZONE_EDGE_TOL });
    }
    Ok(x - omega / 2.0)
}

/// Response to a unit source at `(probe, block 0)`.
#[derive(Debug, Clone)]
pub struct FloquetGreens {
    pub omega: f64,
    pub probe: usize,
    pub sites: usize,
    pub truncation: usize,
    values: Vec<Complex64>,
}

impl FloquetGreens {
    /// `G(ω, block; site, probe)` by Fourier block index.
    pub fn block(&self, site: usize, block: i64) -> Complex64 {
        if block.unsigned_abs() as usize > self.truncation {
            return Complex64::new(0.0, 0.0);
        }
        self.values[sambe_index(self.sites, self.truncation, site, block)]
    }

    /// Component emitted at `ω + kΩ` (`k` up-conversions).
    pub fn sideband(&self, site: usize, k: i64) -> Complex64 {
        self.block(site, -k)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// `ω − 𝓗 + iκ/2` for a fixed operator.
fn resolvent_matrix(model: &ModulatedLinkModel, op: &FloquetOperator, omega: f64) -> CMat {
    let n = op.dim();
    let mut a = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = -op.matrix[(i, j)];
        }
        let site = j % op.sites;
        a[(j, j)] += Complex64::new(omega, model.kappa[site] / 2.0);
    }
    a
}

/// One linear solve of `(ω − 𝓗 + iκ/2) G = e_(probe, 0)`.
pub fn floquet_greens(model: &ModulatedLinkModel, omega: f64, probe: usize, truncation: usize) -> Result<FloquetGreens> {
    let op = build_floquet_hamiltonian(model, truncation)?;
    greens_with(model, &op, omega, probe)
}

fn greens_with(model: &ModulatedLinkModel, op: &FloquetOperator, omega: f64, probe: usize) -> Result<FloquetGreens> {
    if probe >= op.sites {
        return Err(Error::Argument(format!("probe site {probe} out of range")));
    }
    let a = resolvent_matrix(model, op, omega);
    let values = linalg::solve_unit(&a, op.index(probe, 0))?;
    Ok(FloquetGreens { omega, probe, sites: op.sites, truncation: op.truncation, values })
}

/// Resolvent route: `ρ(ω) = −2 Im G(ω, 0; j, j)` at every grid point.
pub fn floquet_ldos(model: &ModulatedLinkModel, site: usize, omega: &[f64], truncation: usize) -> Result<LDOSCurve> {
    floquet_ldos_with(model, site, omega, truncation, Execution::Parallel)
}

pub fn floquet_ldos_with(
    model: &ModulatedLinkModel,
    site: usize,
    omega: &[f64],
    truncation: usize,
    exec: Execution,
) -> Result<LDOSCurve> {
    if omega.is_empty() {
        return Err(Error::Argument("empty frequency grid".into()));
    }
    let op = build_floquet_hamiltonian(model, truncation)?;
    let rho = par::map_with(exec, omega, |&w| {
        greens_with(model, &op, w, site).map(|g| -2.0 * g.block(site, 0).im)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(LDOSCurve { omega: omega.to_vec(), rho, site, kappa: model.kappa[site] })
}

/// Eigen-decomposition of the Floquet operator with the weights needed for
/// Lorentzian-sum LDOS in a chosen Fourier block.
#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    pub truncation: usize,
    pub block: i64,
    pub kappa: f64,
    spectrum: Spectrum,
}

impl FloquetSpectrum {
    /// Requires a uniform decay rate. `block` selects the Fourier block whose
    /// site weights are kept (0 for the ordinary LDOS).
    pub fn compute(model: &ModulatedLinkModel, truncation: usize, block: i64) -> Result<Self> {
        let kappa = model
            .uniform_kappa()
            .ok_or_else(|| Error::Configuration("eigenstate LDOS needs a uniform decay rate".into()))?;
        if block.unsigned_abs() as usize > truncation {
            return Err(Error::Argument(format!("block {block} outside truncation {truncation}")));
        }
        let op = build_floquet_hamiltonian(model, truncation)?;
        let (values, vectors) = linalg::eigh(&op.matrix)?;
        let rows: Vec<usize> = (0..op.sites).map(|j| op.index(j, block)).collect();
        Ok(FloquetSpectrum { truncation, block, kappa, spectrum: Spectrum::from_parts(values, &vectors, &rows) })
    }

    pub fn quasienergies(&self) -> &[f64] {
        &self.spectrum.eigenvalues
    }

    /// `Σ_k κ|⟨j,block|φ_k⟩|² / ((ω − ε_k)² + κ²/4)`.
    pub fn ldos(&self, site: usize, omega: &[f64]) -> Result<LDOSCurve> {
        self.ldos_with(site, omega, Execution::Parallel)
    }

    pub fn ldos_with(&self, site: usize, omega: &[f64], exec: Execution) -> Result<LDOSCurve> {
        hofstadter::ldos_with(&self.spectrum, site, omega, self.kappa, exec)
    }
}

/// Eigenstate-sum LDOS in Fourier block 0.
pub fn floquet_ldos_eigen(model: &ModulatedLinkModel, site: usize, omega: &[f64], truncation: usize) -> Result<LDOSCurve> {
    FloquetSpectrum::compute(model, truncation, 0)?.ldos(site, omega)
}

/// Sideband-resolved transmission column for a probe at `ω`.
#[derive(Debug, Clone)]
pub struct FloquetTransmission {
    pub omega: f64,
    pub probe: usize,
    pub sites: usize,
    pub truncation: usize,
    values: Vec<Complex64>,
}

impl FloquetTransmission {
    /// Amplitude leaving `site` at `ω + kΩ`.
    pub fn get(&self, site: usize, k: i64) -> Complex64 {
        if k.unsigned_abs() as usize > self.truncation {
            return Complex64::new(0.0, 0.0);
        }
        self.values[sambe_index(self.sites, self.truncation, site, -k)]
    }

    /// `(k, site, t)` in ascending `k`, then site.
    pub fn entries(&self) -> impl Iterator<Item = (i64, usize, Complex64)> + '_ {
        let m = self.truncation as i64;
        (-m..=m).flat_map(move |k| (0..self.sites).map(move |j| (k, j, self.get(j, k))))
    }
}

/// `t(j, k) = δ_jl δ_k0 − i√(κ_j κ_l) G(ω, −k; j, l)`.
pub fn floquet_transmission(model: &ModulatedLinkModel, omega: f64, probe: usize, truncation: usize) -> Result<FloquetTransmission> {
    let g = floquet_greens(model, omega, probe, truncation)?;
    let s = g.sites;
    let mut values = vec![Complex64::new(0.0, 0.0); g.values.len()];
    let m = truncation as i64;
    for block in -m..=m {
        for j in 0..s {
            let idx = sambe_index(s, truncation, j, block);
            let rate = (model.kappa[j] * model.kappa[probe]).sqrt();
            let direct = if j == probe && block == 0 { 1.0 } else { 0.0 };
            values[idx] = Complex64::new(direct, 0.0) - Complex64::i() * rate * g.values[idx];
        }
    }
    Ok(FloquetTransmission { omega, probe, sites: s, truncation, values })
}

/// Result of a truncation-doubling check.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// Smallest truncation tried whose doubling changed no LDOS value by
    /// more than the tolerance.
    pub converged_at: Option<usize>,
    /// `(M, max |ρ_2M − ρ_M|)` for every doubling tried.
    pub history: Vec<(usize, f64)>,
}

/// Doubles the truncation from `start` up to `max` until the eigenstate
/// LDOS at `site` changes by at most `tol` everywhere on the grid.
pub fn truncation_check(
    model: &ModulatedLinkModel,
    site: usize,
    omega: &[f64],
    start: usize,
    max: usize,
    tol: f64,
) -> Result<TruncationReport> {
    let mut m = start.max(1);
    let mut prev = floquet_ldos_eigen(model, site, omega, m)?;
    let mut history = Vec::new();
    while 2 * m <= max {
        let next = floquet_ldos_eigen(model, site, omega, 2 * m)?;
        let change = prev.rho.iter().zip(&next.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        history.push((m, change));
        if change <= tol {
            return Ok(TruncationReport { converged_at: Some(m), history });
        }
        prev = next;
        m *= 2;
    }
    Ok(TruncationReport { converged_at: None, history })
}

/// Anti-crossing of the resonant pair in a single A–I–B block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splitting {
    /// Minimum gap between the two dressed levels.
    pub gap: f64,
    /// Modulation frequency at which the minimum occurs.
    pub omega: f64,
}

/// Parameters of a single A–I–B block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeSite {
    pub omega_a: f64,
    pub omega_i: f64,
    pub omega_b: f64,
    pub j: f64,
    pub g0beta: f64,
}

impl ThreeSite {
    fn model(&self, omega: f64) -> Result<ModulatedLinkModel> {
        let graph = lattice::build_modulated_link_lattice(
            1,
            3,
            &OmegaProfile::Columns(vec![self.omega_a, self.omega_i, self.omega_b]),
            self.j,
            Rungs { amplitude: 0.0, include_interface: false },
        )?;
        ModulatedLinkModel::new(graph, omega, self.g0beta, 1.0)
    }

    /// Gap between the two Floquet levels with the largest weight on
    /// `(A, block 0)` and `(B, block −1)` at modulation frequency `omega`.
    pub fn pair_gap(&self, omega: f64, truncation: usize) -> Result<f64> {
        let op = build_floquet_hamiltonian(&self.model(omega)?, truncation)?;
        let (values, vectors) = linalg::eigh(&op.matrix)?;
        let (ia, ib) = (op.index(0, 0), op.index(2, -1));
        let mut idx: Vec<usize> = (0..values.len()).collect();
        let w = |k: usize| vectors[(ia, k)].norm_sqr() + vectors[(ib, k)].norm_sqr();
        idx.sort_by(|&a, &b| w(b).total_cmp(&w(a)).then(a.cmp(&b)));
        Ok((values[idx[0]] - values[idx[1]]).abs())
    }

    /// Minimizes the pair gap over Ω in `[lo, hi]` by golden-section search.
    pub fn splitting(&self, lo: f64, hi: f64, truncation: usize) -> Result<Splitting> {
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.pair_gap(c, truncation)?;
        let mut fd = self.pair_gap(d, truncation)?;
        while b - a > 1e-10 * (1.0 + a.abs()) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.pair_gap(c, truncation)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.pair_gap(d, truncation)?;
            }
        }
        let omega = (a + b) / 2.0;
        Ok(Splitting { gap: self.pair_gap(omega, truncation)?, omega })
    }

    /// Minimum gap searched around the resonance predicted from the
    /// dispersive shifts, `Ω ≈ ω̃_B − ω̃_A`.
    pub fn resonant_splitting(&self, truncation: usize) -> Result<Splitting> {
        let da = self.omega_a - self.omega_i;
        let db = self.omega_b - self.omega_i;
        if da == 0.0 || db == 0.0 {
            return Err(Error::DegenerateDenominator("interface frequency equals a neighbour"));
        }
        let guess = (self.omega_b + self.j * self.j / db) - (self.omega_a + self.j * self.j / da);
        let width = 4.0 * pert::jeff_modulated(self.j, self.j, self.g0beta, da, db)?.magnitude + 0.05 * guess.abs();
        self.splitting(guess - width, guess + width, truncation)
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn chain(cols: usize, j: f64, amp: f64, kappa: f64) -> ModulatedLinkModel {
        let g = lattice::build_modulated_link_lattice(
            1,
            cols,
            &OmegaProfile::Staircase { step: 0.5 },
            j,
            Rungs { amplitude: 0.0, include_interface: false },
        )
        .unwrap();
        ModulatedLinkModel::new(g, 1.0, amp, kappa).unwrap()
    }

    #[test]
    fn truncation_below_one_is_rejected() {
        assert!(matches!(build_floquet_hamiltonian(&chain(3, 0.3, 0.3, 0.01), 0), Err(Error::Argument(_))));
    }

    #[test]
    fn undriven_operator_is_block_diagonal() {
        let model = chain(3, 0.3, 0.0, 0.01);
        let op = build_floquet_hamiltonian(&model, 2).unwrap();
        let mut e = linalg::eigvalsh(&op.matrix).unwrap();
        let stat = linalg::eigvalsh(&model.graph.hamiltonian()).unwrap();
        let mut want: Vec<f64> = (-2..=2).flat_map(|m| stat.iter().map(move |x| x + m as f64)).collect();
        want.sort_by(f64::total_cmp);
        e.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_hermitian_with_expected_couplings() {
        let model = chain(3, 0.3, 0.3, 0.01).shift_phases(0.4);
        let op = build_floquet_hamiltonian(&model, 2).unwrap();
        assert!(linalg::hermitian_deviation(&op.matrix) < 1e-15);
        let up = op.matrix[(op.index(1, 0), op.index(1, 1))];
        assert!((up - Complex64::from_polar(0.3, -0.4)).norm() < 1e-15);
        let down = op.matrix[(op.index(1, 0), op.index(1, -1))];
        assert!((down - Complex64::from_polar(0.3, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn dimer_quasienergies_fold() {
        let g = lattice::build_modulated_link_lattice(
            1,
            2,
            &OmegaProfile::Columns(vec![0.0, 0.0]),
            0.2,
            Rungs { amplitude: 0.0, include_interface: false },
        )
        .unwrap();
        let model = ModulatedLinkModel::new(g, 1.0, 0.0, 0.01).unwrap();
        let q = quasienergies(&build_floquet_hamiltonian(&model, 1).unwrap()).unwrap();
        assert!((q[0] + 0.2).abs() < 1e-12 && (q[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zone_edge_is_flagged() {
        assert!(matches!(fold(0.5, 1.0), Err(Error::ZoneEdge { .. })));
        assert!((fold(0.7, 1.0).unwrap() + 0.3).abs() < 1e-12);
    }

    #[test]
    fn isolated_modulated_site_keeps_quasienergy() {
        let g = lattice::build_modulated_link_lattice(
            1,
            2,
            &OmegaProfile::Columns(vec![0.0, 0.2]),
            0.0,
            Rungs { amplitude: 0.0, include_interface: false },
        )
        .unwrap();
        let model = ModulatedLinkModel::new(g, 1.0, 0.1, 0.01).unwrap();
        let q = quasienergies(&build_floquet_hamiltonian(&model, 8).unwrap()).unwrap();
        assert!((q[1] - 0.2).abs() < 1e-10, "{q:?}");
    }

    #[test]
    fn undriven_greens_is_static_resolvent() {
        let model = chain(3, 0.3, 0.0, 0.02);
        let g = floquet_greens(&model, 0.45, 0, 3).unwrap();
        let h = model.graph.hamiltonian();
        let mut a = linalg::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = -h[(i, j)];
            }
            a[(i, i)] += Complex64::new(0.45, 0.01);
        }
        let want = linalg::solve_unit(&a, 0).unwrap();
        for j in 0..3 {
            assert!((g.block(j, 0) - want[j]).norm() < 1e-12);
            for b in [-3, -1, 1, 2] {
                assert!(g.block(j, b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_site_reflection_is_minus_one() {
        let model = chain(1, 0.0, 0.0, 0.01);
        let t = floquet_transmission(&model, 0.0, 0, 2).unwrap();
        assert!((t.get(0, 0) + 1.0).norm() < 1e-12);
    }

    #[test]
    fn disconnected_sites_do_not_transmit() {
        let model = chain(3, 0.0, 0.3, 0.01);
        let t = floquet_transmission(&model, 0.0, 0, 3).unwrap();
        for k in -3..=3 {
            assert!(t.get(2, k).norm() < 1e-15);
        }
    }

    #[test]
    fn resonant_block_up_converts() {
        let model = chain(3, 0.3, 0.3, 0.05);
        let probe = 0.0 + 0.3 * 0.3 / -0.5;
        let t = floquet_transmission(&model, probe, 0, 8).unwrap();
        let best = (-3..=3).max_by(|&a, &b| t.get(2, a).norm().total_cmp(&t.get(2, b).norm())).unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn resolvent_and_eigen_routes_agree() {
        let model = ModulatedLinkModel::staircase(2, 5, &StaircaseParams::reference(0.05), 0.7).unwrap();
        let grid = hofstadter::uniform_grid(-1.5, 1.5, 0.005);
        let site = model.central_site();
        let a = floquet_ldos(&model, site, &grid, 4).unwrap();
        let b = floquet_ldos_eigen(&model, site, &grid, 4).unwrap();
        for (x, y) in a.rho.iter().zip(&b.rho) {
            assert!((x - y).abs() < 1e-8, "{x} {y}");
            assert!(*x >= -1e-12);
        }
    }

    #[test]
    fn effective_phases_give_uniform_flux() {
        let model = ModulatedLinkModel::staircase(3, 7, &StaircaseParams::reference(0.01), PI / 4.0).unwrap();
        let f = lattice::plaquette_fluxes(&model.graph, &model.effective_phase_field());
        assert_eq!(f.flux.len(), 6);
        assert!(f.flux.iter().all(|x| (x - PI / 4.0).abs() < 1e-14));
    }

    #[test]
    fn uniform_phase_shift_leaves_ldos() {
        let model = ModulatedLinkModel::staircase(2, 5, &StaircaseParams::reference(0.05), 0.9).unwrap();
        let grid = hofstadter::uniform_grid(-1.0, 1.0, 0.01);
        let a = floquet_ldos_eigen(&model, 2, &grid, 3).unwrap();
        let b = floquet_ldos_eigen(&model.clone().shift_phases(1.234), 2, &grid, 3).unwrap();
        for (x, y) in a.rho.iter().zip(&b.rho) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn modulation_must_sit_on_interfaces() {
        let mut model = chain(3, 0.3, 0.3, 0.01);
        model.modulation.insert(0, Modulation { amp: 0.1, phase: 0.0 });
        assert!(model.validate().is_err());
    }
}
