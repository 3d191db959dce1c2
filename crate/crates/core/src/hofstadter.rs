//! Ideal Peierls hopping model on a square grid: exact diagonalization and
//! Lorentzian-broadened local density of states.
//!
//! This is the reference against which the optomechanical schemes are
//! checked.

use crate::lattice::{self, PhaseField};
use crate::linalg::{self, CMat};
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct HofstadterModel {
    pub rows: usize,
    pub cols: usize,
    pub j_eff: f64,
    /// Phases on the links of the grid (site id `r·cols + c`).
    pub phases: PhaseField,
    /// On-site frequency offsets, one per site.
    pub onsite: Vec<f64>,
    pub kappa: f64,
    /// Wrap-around boundaries. Only meaningful when the flux is
    /// commensurate with the grid.
    pub periodic: bool,
}

impl HofstadterModel {
    /// `n × n` open grid in the Landau gauge with uniform flux.
    pub fn landau(n: usize, j_eff: f64, flux: f64, kappa: f64) -> Self {
        Self::landau_rect(n, n, j_eff, flux, kappa)
    }

    pub fn landau_rect(rows: usize, cols: usize, j_eff: f64, flux: f64, kappa: f64) -> Self {
        HofstadterModel {
            rows,
            cols,
            j_eff,
            phases: lattice::landau_gauge_phases(rows, cols, flux),
            onsite: vec![0.0; rows * cols],
            kappa,
            periodic: false,
        }
    }

    /// Torus version of [`HofstadterModel::landau`].
    pub fn landau_torus(n: usize, j_eff: f64, flux: f64, kappa: f64) -> Self {
        HofstadterModel { periodic: true, ..Self::landau(n, j_eff, flux, kappa) }
    }

    pub fn site_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Site nearest the grid centre.
    pub fn central_site(&self) -> usize {
        (self.rows / 2) * self.cols + self.cols / 2
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Dimension { rows: self.rows, cols: self.cols });
        }
        if !(self.j_eff >= 0.0) {
            return Err(Error::Configuration(format!("j_eff must be nonnegative, got {}", self.j_eff)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Configuration(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.onsite.len() != self.site_count() {
            return Err(Error::Configuration(format!(
                "{} onsite terms for {} sites",
                self.onsite.len(),
                self.site_count()
            )));
        }
        Ok(())
    }
}

/// Dense Hamiltonian `H[j,i] = -j_eff·e^{iφ_ij}` plus on-site terms.
pub fn build_hofstadter_hamiltonian(model: &HofstadterModel) -> Result<CMat> {
    model.validate()?;
    let graph = lattice::build_ideal_lattice(model.rows, model.cols, model.j_eff, model.periodic)?
        .with_phases(&model.phases)?
        .with_disorder(&model.onsite)?;
    Ok(graph.hamiltonian())
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    n: usize,
    /// `|⟨site|k⟩|²`, site-major.
    weights: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn site_count(&self) -> usize {
        self.n
    }

    /// Weights of every eigenvector on `site`, in eigenvalue order.
    pub fn site_weights(&self, site: usize) -> &[f64] {
        let k = self.eigenvalues.len();
        &self.weights[site * k..(site + 1) * k]
    }

    /// Builds a spectrum from eigenvalues and selected rows of the
    /// eigenvector matrix.
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, vectors: &CMat, rows: &[usize]) -> Self {
        let k = eigenvalues.len();
        let mut weights = Vec::with_capacity(rows.len() * k);
        for &r in rows {
            weights.extend((0..k).map(|c| vectors[(r, c)].norm_sqr()));
        }
        Spectrum { eigenvalues, n: rows.len(), weights }
    }
}

/// Eigenvalues (ascending) and site weights of a Hermitian operator.
pub fn spectrum(h: &CMat) -> Result<Spectrum> {
    let (values, vectors) = linalg::eigh(h)?;
    let rows: Vec<usize> = (0..h.nrows()).collect();
    Ok(Spectrum::from_parts(values, &vectors, &rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LDOSCurve {
    pub omega: Vec<f64>,
    pub rho: Vec<f64>,
    pub site: usize,
    pub kappa: f64,
}

/// `Σ_k κ·w_k / ((ω − ε_k)² + κ²/4)` on a grid.
pub fn lorentzian_sum(eigenvalues: &[f64], weights: &[f64], omega: &[f64], kappa: f64, exec: Execution) -> Vec<f64> {
    let q = kappa * kappa / 4.0;
    par::map_with(exec, omega, |&w| {
        eigenvalues
            .iter()
            .zip(weights)
            .map(|(e, p)| kappa * p / ((w - e) * (w - e) + q))
            .sum()
    })
}

pub fn ldos(spec: &Spectrum, site: usize, omega: &[f64], kappa: f64) -> Result<LDOSCurve> {
    ldos_with(spec, site, omega, kappa, Execution::Parallel)
}

pub fn ldos_with(spec: &Spectrum, site: usize, omega: &[f64], kappa: f64, exec: Execution) -> Result<LDOSCurve> {
    if omega.is_empty() {
        return Err(Error::Argument("empty frequency grid".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::Argument(format!("kappa must be positive, got {kappa}")));
    }
    if site >= spec.site_count() {
        return Err(Error::Argument(format!("site {site} out of range")));
    }
    let rho = lorentzian_sum(&spec.eigenvalues, spec.site_weights(site), omega, kappa, exec);
    Ok(LDOSCurve { omega: omega.to_vec(), rho, site, kappa })
}

/// Half-width, in units of κ, added on both sides of the spectral support
/// by [`default_grid`]. A Lorentzian cut at ±Lκ misses about `2/(πL)` of
/// its weight, so this keeps the truncation loss well under 1%.
pub const GRID_MARGIN_KAPPA: f64 = 50.0;

/// Uniform grid from `lo − 50κ` to `hi + 50κ` with step κ/10.
pub fn default_grid(lo: f64, hi: f64, kappa: f64) -> Vec<f64> {
    uniform_grid(lo - GRID_MARGIN_KAPPA * kappa, hi + GRID_MARGIN_KAPPA * kappa, kappa / 10.0)
}

/// Points `start, start + step, …` up to and including `stop` (within
/// rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + i as f64 * step).collect()
}

/// LDOS at `site` for each flux of `fluxes` on a common grid.
pub fn butterfly(
    n: usize,
    j_eff: f64,
    kappa: f64,
    fluxes: &[f64],
    site: usize,
    omega: &[f64],
    exec: Execution,
) -> Result<Vec<LDOSCurve>> {
    let curves = par::map_with(exec, fluxes, |&phi| {
        let model = HofstadterModel::landau(n, j_eff, phi, kappa);
        let spec = spectrum(&build_hofstadter_hamiltonian(&model)?)?;
        ldos_with(&spec, site, omega, kappa, Execution::Sequential)
    });
    curves.into_iter().collect()
}
