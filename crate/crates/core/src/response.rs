//! Coherent linear response of the wavelength-conversion lattice.
//!
//! In the frame rotating with the drives the beam-splitter Hamiltonian and
//! the damping combine into the dynamical matrix
//! `D = H − i·diag(κ/2 on optical, Γ/2 on mechanical)`, and the amplitude
//! equations `d⟨a⟩/dt = −iD⟨a⟩ + √κ α_in e^{−iΔ_p t} e_l` close on the
//! annihilation amplitudes alone. The anomalous (counter-rotating) response
//! vanishes identically for this Hamiltonian, so only `(Δ_p − D)^{-1}` is
//! ever needed.

use num_complex::Complex64;

use crate::lattice::{self, LatticeGraph, PhaseField, Scheme};
use crate::linalg::{self, CMat};
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConversionModel {
    pub graph: LatticeGraph,
    /// Optical frequency in the rotating frame, `Ω₀ + δ`.
    pub omega_opt: f64,
    /// Mechanical frequency Ω₀.
    pub omega_mech: f64,
    pub kappa: f64,
    pub gamma: f64,
}

/// Parameters of a uniform-flux conversion lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionParams {
    pub g: f64,
    pub j: f64,
    pub delta: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl ConversionModel {
    /// Mechanical frequency 1 and optical frequency `1 + delta`.
    pub fn new(graph: LatticeGraph, delta: f64, kappa: f64, gamma: f64) -> Result<Self> {
        let m = ConversionModel { graph, omega_opt: 1.0 + delta, omega_mech: 1.0, kappa, gamma };
        m.validate()?;
        Ok(m)
    }

    /// `rows × cols` optical sites, `|g|` on every conversion link and the
    /// Landau-gauge flux of the effective model split evenly over the two
    /// conversion links of each optical bond.
    pub fn uniform_flux(rows: usize, cols: usize, p: &ConversionParams, flux: f64) -> Result<Self> {
        let graph = lattice::build_conversion_lattice(rows, cols, |_, _| Complex64::new(p.g, 0.0), p.j)?;
        let phases = lattice::lift_optical_phases(&graph, &lattice::landau_gauge_phases(rows, cols, flux))?;
        Self::new(graph.with_phases(&phases)?, p.delta, p.kappa, p.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.graph.scheme, Scheme::Conversion | Scheme::ABRing | Scheme::SyntheticLadder) {
            return Err(Error::Configuration("response needs a conversion, ring or ladder lattice".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Configuration(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Configuration(format!("Gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn site_count(&self) -> usize {
        self.graph.site_count()
    }

    /// Decay rate of a site: κ for optical, Γ for mechanical.
    pub fn decay(&self, site: usize) -> f64 {
        if self.graph.sites[site].kind.is_optical() {
            self.kappa
        } else {
            self.gamma
        }
    }

    /// Same model with a different phase field on the links.
    pub fn with_phases(&self, phases: &PhaseField) -> Result<Self> {
        Ok(ConversionModel { graph: self.graph.clone().with_phases(phases)?, ..self.clone() })
    }

    /// Optical site nearest the centre of the grid.
    pub fn central_site(&self) -> usize {
        let grid = self.graph.optical_grid();
        grid.node(&self.graph, grid.rows / 2, grid.cols / 2)
    }
}

pub fn build_dynamical_matrix(model: &ConversionModel) -> Result<CMat> {
    model.validate()?;
    let mut d = model.graph.hamiltonian();
    for s in &model.graph.sites {
        let (base, rate) = if s.kind.is_optical() {
            (model.omega_opt, model.kappa)
        } else {
            (model.omega_mech, model.gamma)
        };
        d[(s.id, s.id)] += Complex64::new(base, -rate / 2.0);
    }
    Ok(d)
}

fn resolvent(model: &ConversionModel, delta_p: f64) -> Result<CMat> {
    let d = build_dynamical_matrix(model)?;
    let n = d.nrows();
    let mut a = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = -d[(i, j)];
        }
        a[(j, j)] += Complex64::new(delta_p, 0.0);
    }
    Ok(a)
}

/// Column `probe` of `(Δ_p − D)^{-1}`.
pub fn greens_column(model: &ConversionModel, delta_p: f64, probe: usize) -> Result<Vec<Complex64>> {
    if probe >= model.site_count() {
        return Err(Error::Argument(format!("probe site {probe} out of range")));
    }
    linalg::solve_unit(&resolvent(model, delta_p)?, probe)
}

#[derive(Debug, Clone)]
pub struct ResponseMap {
    pub amplitudes: Vec<Complex64>,
    pub probe: usize,
    pub detuning: f64,
    pub input_amplitude: Complex64,
}

impl ResponseMap {
    pub fn intensities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Steady-state amplitudes `i√κ·α_in·(Δ_p − D)^{-1} e_l`.
///
/// The probe frequency is measured from the drive of the probed
/// sublattice; light reaching other sublattices leaves shifted by the
/// difference of the drive frequencies.
pub fn response_map(model: &ConversionModel, delta_p: f64, probe: usize, alpha_in: Complex64) -> Result<ResponseMap> {
    let g = greens_column(model, delta_p, probe)?;
    let pre = Complex64::i() * model.decay(probe).sqrt() * alpha_in;
    Ok(ResponseMap { amplitudes: g.into_iter().map(|x| pre * x).collect(), probe, detuning: delta_p, input_amplitude: alpha_in })
}

/// Output amplitude per channel, `t(j, l) = δ_jl − i√(κ_j κ_l) G(j, l)`.
pub fn transmission(model: &ConversionModel, delta_p: f64, probe: usize) -> Result<Vec<Complex64>> {
    let g = greens_column(model, delta_p, probe)?;
    let kl = model.decay(probe);
    Ok(g.into_iter()
        .enumerate()
        .map(|(j, x)| {
            let direct = if j == probe { 1.0 } else { 0.0 };
            Complex64::new(direct, 0.0) - Complex64::i() * (model.decay(j) * kl).sqrt() * x
        })
        .collect())
}

/// Full channel scattering matrix, `t[(j, l)]`.
pub fn transmission_matrix(model: &ConversionModel, delta_p: f64) -> Result<CMat> {
    let a = resolvent(model, delta_p)?;
    let n = a.nrows();
    let g = linalg::solve(&a, &CMat::identity(n, n))?;
    let rate: Vec<f64> = (0..n).map(|j| model.decay(j).sqrt()).collect();
    Ok(CMat::from_fn(n, n, |j, l| {
        let direct = if j == l { 1.0 } else { 0.0 };
        Complex64::new(direct, 0.0) - Complex64::i() * rate[j] * rate[l] * g[(j, l)]
    }))
}

#[derive(Debug, Clone)]
pub struct ABScan {
    pub fluxes: Vec<f64>,
    /// `|t(output ← input)|²`.
    pub intensity: Vec<f64>,
    /// Intensity divided by its maximum over the scan.
    pub normalized: Vec<f64>,
    pub detuning: f64,
}

/// Transmission intensity between two sites for each member of a
/// flux-parametrized model family.
pub fn ab_flux_scan<F>(
    family: F,
    delta_p: f64,
    input: usize,
    output: usize,
    fluxes: &[f64],
    exec: Execution,
) -> Result<ABScan>
where
    F: Fn(f64) -> Result<ConversionModel> + Sync + Send,
{
    let intensity = par::map_with(exec, fluxes, |&phi| {
        let model = family(phi)?;
        Ok(transmission(&model, delta_p, input)?[output].norm_sqr())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let max = intensity.iter().copied().fold(0.0, f64::max);
    let normalized = intensity.iter().map(|x| if max > 0.0 { x / max } else { 0.0 }).collect();
    Ok(ABScan { fluxes: fluxes.to_vec(), intensity, normalized, detuning: delta_p })
}

/// Response of a synthetic ladder with the fraction of the input power
/// leaving through the mechanical rail.
#[derive(Debug, Clone)]
pub struct LadderResponse {
    pub map: ResponseMap,
    /// `Σ_{j mechanical} |t(j, l)|²`.
    pub conversion: f64,
}

pub fn ladder_response(model: &ConversionModel, delta_p: f64, probe: usize) -> Result<LadderResponse> {
    if model.graph.scheme != Scheme::SyntheticLadder {
        return Err(Error::Configuration("ladder response needs a synthetic ladder".into()));
    }
    let map = response_map(model, delta_p, probe, Complex64::new(1.0, 0.0))?;
    let t = transmission(model, delta_p, probe)?;
    let conversion = model
        .graph
        .sites
        .iter()
        .filter(|s| !s.kind.is_optical())
        .map(|s| t[s.id].norm_sqr())
        .sum();
    Ok(LadderResponse { map, conversion })
}
