//! Perturbative effective couplings: the resonant 4×4 Floquet block of an
//! A–I–B link, its Schrieffer-Wolff reduction, and the closed-form hopping
//! rates of both schemes.

use num_complex::Complex64;

use crate::linalg::{self, CMat};
use crate::{Error, Result};

/// Unperturbed levels `A(0)`, `B(+1)`, `I(0)`, `I(+1)` and their couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLevelBlock {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_i: f64,
    pub omega: f64,
    pub j_a: f64,
    pub j_b: f64,
    pub g0beta: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveBlock {
    pub omega_tilde_a: f64,
    pub omega_tilde_b: f64,
    pub j_eff: f64,
    pub phi: f64,
}

impl EffectiveBlock {
    /// `[[ω̃_A, J e^{-iφ}], [J e^{iφ}, ω̃_B]]` in the basis (A, B).
    pub fn matrix(&self) -> CMat {
        let mut m = linalg::zeros(2);
        let z = Complex64::from_polar(self.j_eff, self.phi);
        m[(0, 0)] = self.omega_tilde_a.into();
        m[(1, 1)] = self.omega_tilde_b.into();
        m[(1, 0)] = z;
        m[(0, 1)] = z.conj();
        m
    }
}

/// Exact block in the basis `(A, B, I, I+Ω)` with `B` shifted by Ω.
pub fn four_level_block(p: &FourLevelBlock) -> CMat {
    let mut m = linalg::zeros(4);
    let r = |x: f64| Complex64::new(x, 0.0);
    m[(0, 0)] = r(p.omega_a);
    m[(1, 1)] = r(p.omega_b + p.omega);
    m[(2, 2)] = r(p.omega_i);
    m[(3, 3)] = r(p.omega_i + p.omega);
    m[(0, 2)] = r(-p.j_a);
    m[(2, 0)] = r(-p.j_a);
    m[(1, 3)] = r(-p.j_b);
    m[(3, 1)] = r(-p.j_b);
    m[(2, 3)] = p.g0beta;
    m[(3, 2)] = p.g0beta.conj();
    m
}

/// Second-order dispersive shifts and the third-order A↔B coupling.
///
/// A negative real prefactor is folded into the phase.
pub fn schrieffer_wolff_effective(p: &FourLevelBlock) -> Result<EffectiveBlock> {
    let da = p.omega_a - p.omega_i;
    let db = p.omega_b - p.omega_i;
    if da == 0.0 || db == 0.0 {
        return Err(Error::DegenerateDenominator("omega_A or omega_B equals omega_I"));
    }
    let j = jeff_modulated(p.j_a, p.j_b, p.g0beta.norm(), da, db)?;
    let mut phi = p.g0beta.arg();
    if j.negative {
        phi += std::f64::consts::PI;
    }
    Ok(EffectiveBlock {
        omega_tilde_a: p.omega_a + p.j_a * p.j_a / da,
        omega_tilde_b: p.omega_b + p.j_b * p.j_b / db,
        j_eff: j.magnitude,
        phi,
    })
}

/// Effective hopping magnitude and the sign of the real prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedMagnitude {
    pub magnitude: f64,
    pub negative: bool,
}

/// `g₀|β|·J_A·J_B / (dA·dB)`.
pub fn jeff_modulated(j_a: f64, j_b: f64, g0beta: f64, da: f64, db: f64) -> Result<SignedMagnitude> {
    if da == 0.0 || db == 0.0 {
        return Err(Error::DegenerateDenominator("zero detuning from the interface mode"));
    }
    let v = g0beta * j_a * j_b / (da * db);
    Ok(SignedMagnitude { magnitude: v.abs(), negative: v < 0.0 })
}

/// `|g_A||g_B|/δ` with phase `arg g_B − arg g_A`.
pub fn jeff_conversion(g_a: Complex64, g_b: Complex64, delta: f64) -> Result<Complex64> {
    if delta == 0.0 {
        return Err(Error::ResonantDivergence);
    }
    Ok(Complex64::from_polar(g_a.norm() * g_b.norm() / delta, g_b.arg() - g_a.arg()))
}

/// Gap between the two eigenvalues of the exact block that are dressed
/// versions of A and B (largest combined weight on the first two basis
/// states).
pub fn dressed_pair_gap(p: &FourLevelBlock) -> Result<f64> {
    let (values, vectors) = linalg::eigh(&four_level_block(p))?;
    let w = |k: usize| vectors[(0, k)].norm_sqr() + vectors[(1, k)].norm_sqr();
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| w(b).total_cmp(&w(a)).then(a.cmp(&b)));
    Ok((values[idx[0]] - values[idx[1]]).abs())
}

/// Dressed-pair gap minimized over Ω by golden-section search around the
/// resonance `Ω = ω̃_A − ω̃_B`.
pub fn resonant_pair_gap(p: &FourLevelBlock) -> Result<(f64, f64)> {
    let eff = schrieffer_wolff_effective(p)?;
    let guess = eff.omega_tilde_a - eff.omega_tilde_b;
    let width = 4.0 * eff.j_eff + 1e-3 * guess.abs().max(1.0);
    let gap = |omega: f64| dressed_pair_gap(&FourLevelBlock { omega, ..*p });
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (guess - width, guess + width);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (gap(c)?, gap(d)?);
    while b - a > 1e-13 * (1.0 + guess.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = gap(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = gap(d)?;
        }
    }
    let omega = (a + b) / 2.0;
    Ok((gap(omega)?, omega))
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub splitting_exact: f64,
    pub two_jeff: f64,
    pub rel_err: f64,
}

/// Scales `J = ε/2` and `g₀|β| = ε` for an interface half-way between A
/// and B (detunings ∓1/2, Ω ≈ 1), and compares the exact resonant gap with
/// `2·j_eff`.
pub fn convergence_table(epsilons: &[f64]) -> Result<Vec<ConvergenceRow>> {
    epsilons
        .iter()
        .map(|&eps| {
            let p = FourLevelBlock {
                omega_a: 1.0,
                omega_b: 0.0,
                omega_i: 0.5,
                omega: 1.0,
                j_a: 0.5 * eps,
                j_b: 0.5 * eps,
                g0beta: Complex64::new(eps, 0.0),
            };
            let (exact, _) = resonant_pair_gap(&p)?;
            let two_jeff = 2.0 * schrieffer_wolff_effective(&p)?.j_eff;
            Ok(ConvergenceRow { epsilon: eps, splitting_exact: exact, two_jeff, rel_err: (exact - two_jeff).abs() / two_jeff })
        })
        .collect()
}
