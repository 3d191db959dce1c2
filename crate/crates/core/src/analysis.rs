//! Semiclassical predictions, transport metrics, spectral bookkeeping and
//! device design estimates.

use std::f64::consts::PI;

use faer::Mat;
use faer::linalg::solvers::Solve;

use crate::hofstadter::LDOSCurve;
use crate::lattice::LatticeGraph;
use crate::response::ResponseMap;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauParameters {
    /// `ħ/(2Ja²)`.
    pub effective_mass: f64,
    /// `2φJ`.
    pub cyclotron_frequency: f64,
    /// `a·√((2n+1)/φ)`.
    pub orbit_radius: f64,
    pub level: u32,
}

/// Continuum Landau-level quantities for hopping `j` and flux `phi` per
/// plaquette (radians).
pub fn landau_parameters(j: f64, phi: f64, n: u32) -> Result<LandauParameters> {
    if !(phi > 0.0) {
        return Err(Error::Domain(format!("flux per plaquette must be positive, got {phi}")));
    }
    if !(j > 0.0) {
        return Err(Error::Domain(format!("hopping must be positive, got {j}")));
    }
    Ok(LandauParameters {
        effective_mass: 1.0 / (2.0 * j),
        cyclotron_frequency: 2.0 * phi * j,
        orbit_radius: ((2 * n + 1) as f64 / phi).sqrt(),
        level: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiralityMetric {
    pub forward_intensity: f64,
    pub backward_intensity: f64,
    /// `forward / backward`; `+∞` when nothing goes backward.
    pub ratio: f64,
}

pub fn edge_chirality_metric(map: &ResponseMap, forward: &[usize], backward: &[usize]) -> Result<ChiralityMetric> {
    if forward.iter().any(|s| backward.contains(s)) {
        return Err(Error::Argument("edge arcs must be disjoint".into()));
    }
    let sum = |sites: &[usize]| -> Result<f64> {
        sites
            .iter()
            .map(|&s| {
                map.amplitudes
                    .get(s)
                    .map(|a| a.norm_sqr())
                    .ok_or_else(|| Error::Argument(format!("arc site {s} out of range")))
            })
            .sum()
    };
    let f = sum(forward)?;
    let b = sum(backward)?;
    let ratio = if b == 0.0 { f64::INFINITY } else { f / b };
    Ok(ChiralityMetric { forward_intensity: f, backward_intensity: b, ratio })
}

/// Optical sites on the square ring of Chebyshev radius `radius` around
/// `probe`, split into the 90° sector centred on direction `axis` (radians,
/// x to the right, y downward as drawn) and the opposite sector.
pub fn chebyshev_arcs(graph: &LatticeGraph, probe: usize, radius: f64, axis: f64) -> (Vec<usize>, Vec<usize>) {
    let (px, py) = graph.position(probe);
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for s in graph.sites.iter().filter(|s| s.kind.is_optical()) {
        let (x, y) = graph.position(s.id);
        let (dx, dy) = (x - px, y - py);
        if (dx.abs().max(dy.abs()) - radius).abs() > 1e-9 {
            continue;
        }
        let angle = crate::lattice::wrap_angle(dy.atan2(dx) - axis);
        if angle.abs() <= PI / 4.0 + 1e-12 {
            forward.push(s.id);
        } else if angle.abs() >= 3.0 * PI / 4.0 - 1e-12 {
            backward.push(s.id);
        }
    }
    (forward, backward)
}

/// Summed optical intensity per distance bin around the probe (probe
/// excluded). Bin `k` covers `[k·w, (k+1)·w)`.
pub fn radial_profile(graph: &LatticeGraph, map: &ResponseMap, bin_width: f64) -> Vec<f64> {
    let (px, py) = graph.position(map.probe);
    let mut bins: Vec<f64> = Vec::new();
    for s in graph.sites.iter().filter(|s| s.kind.is_optical() && s.id != map.probe) {
        let (x, y) = graph.position(s.id);
        let r = ((x - px).powi(2) + (y - py).powi(2)).sqrt();
        let k = (r / bin_width).floor() as usize;
        if bins.len() <= k {
            bins.resize(k + 1, 0.0);
        }
        bins[k] += map.amplitudes[s.id].norm_sqr();
    }
    bins
}

/// Centre of the radial bin holding the most intensity.
pub fn ring_radius(graph: &LatticeGraph, map: &ResponseMap, bin_width: f64) -> f64 {
    let bins = radial_profile(graph, map, bin_width);
    let k = bins
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    (k as f64 + 0.5) * bin_width
}

/// Thermal photons fed by conversion of thermal phonons, `n_th·Γ/κ`.
pub fn thermal_photon_occupancy(n_th: f64, gamma: f64, kappa: f64) -> Result<f64> {
    if !(gamma > 0.0 && kappa > 0.0) {
        return Err(Error::Domain("rates must be positive".into()));
    }
    Ok(n_th * gamma / kappa)
}

/// Coherent mechanical amplitude `β = 2g₀n_c/Γ`.
pub fn drive_amplitude(g0: f64, n_c: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("Gamma must be positive, got {gamma}")));
    }
    Ok(2.0 * g0 * n_c / gamma)
}

/// Circulating photon number giving modulation depth `g₀|β| = target`.
pub fn required_photons(g0: f64, target: f64, gamma: f64) -> Result<f64> {
    if !(g0 > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("g0 and Gamma must be positive".into()));
    }
    Ok(target / g0 * gamma / (2.0 * g0))
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRule {
    /// `|∫ρ − 2π| / 2π`.
    pub deviation: f64,
    /// Estimated weight outside the grid, as a fraction of 2π.
    pub tail_estimate: f64,
    /// Whether the grid spans the support by at least 20κ on both sides.
    pub coverage_ok: bool,
}

/// Trapezoidal normalization check. `support` is the interval holding the
/// poles; the weight beyond each grid end is estimated from the Lorentzian
/// tail, `∫_d^∞ C/x² = ρ_end·d`.
pub fn ldos_sum_rule_check(curve: &LDOSCurve, support: (f64, f64)) -> Result<SumRule> {
    let (first, last) = match (curve.omega.first(), curve.omega.last()) {
        (Some(a), Some(b)) if curve.omega.len() >= 2 => (*a, *b),
        _ => return Err(Error::Argument("sum rule needs at least two grid points".into())),
    };
    let total = trapezoid(&curve.omega, &curve.rho);
    let lo_gap = (support.0 - first).max(0.0);
    let hi_gap = (last - support.1).max(0.0);
    let tail = curve.rho[0] * lo_gap + curve.rho[curve.rho.len() - 1] * hi_gap;
    let margin = 20.0 * curve.kappa;
    Ok(SumRule {
        deviation: (total - 2.0 * PI).abs() / (2.0 * PI),
        tail_estimate: tail / (2.0 * PI),
        coverage_ok: lo_gap >= margin && hi_gap >= margin,
    })
}

/// Local maxima whose topographic prominence is at least `min_prominence`
/// times the global maximum. Plateaus count once, at their left end.
pub fn find_peaks(omega: &[f64], rho: &[f64], min_prominence: f64) -> Vec<f64> {
    let n = rho.len();
    let max = rho.iter().copied().fold(0.0, f64::max);
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(rho[i] > rho[i - 1] && rho[i] >= rho[i + 1]) {
            continue;
        }
        let mut left = rho[i];
        let mut k = i;
        while k > 0 && rho[k - 1] <= rho[i] {
            k -= 1;
            left = left.min(rho[k]);
        }
        let mut right = rho[i];
        let mut k = i;
        while k + 1 < n && rho[k + 1] <= rho[i] {
            k += 1;
            right = right.min(rho[k]);
        }
        if rho[i] - left.max(right) >= min_prominence * max {
            peaks.push(omega[i]);
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakMatch {
    pub matched: usize,
    pub total: usize,
}

impl PeakMatch {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

/// Counts detected peaks that have a reference peak within `tol`.
pub fn match_peaks(detected: &[f64], reference: &[f64], tol: f64) -> PeakMatch {
    let matched = detected.iter().filter(|x| reference.iter().any(|y| (*x - y).abs() <= tol)).count();
    PeakMatch { matched, total: detected.len() }
}

/// Number of clusters in a sorted spectrum separated by gaps wider than
/// `min_gap`.
pub fn count_bands(sorted: &[f64], min_gap: f64) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    1 + sorted.windows(2).filter(|w| w[1] - w[0] > min_gap).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

/// Least-squares fit of `A + B·cos(x + x₀)`.
pub fn fit_cosine(x: &[f64], y: &[f64]) -> Result<CosineFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Argument("cosine fit needs at least three paired samples".into()));
    }
    let a = Mat::<f64>::from_fn(x.len(), 3, |i, k| match k {
        0 => 1.0,
        1 => x[i].cos(),
        _ => x[i].sin(),
    });
    let b = Mat::<f64>::from_fn(y.len(), 1, |i, _| y[i]);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let c = ata.partial_piv_lu().solve(&atb);
    if !(0..3).all(|k| c[(k, 0)].is_finite()) {
        return Err(Error::Solver("degenerate cosine fit".into()));
    }
    let (c0, c1, c2) = (c[(0, 0)], c[(1, 0)], c[(2, 0)]);
    let max_residual = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (c0 + c1 * xi.cos() + c2 * xi.sin() - yi).abs())
        .fold(0.0, f64::max);
    // c1 cos x + c2 sin x = B cos(x + x₀) with B cos x₀ = c1, B sin x₀ = −c2.
    Ok(CosineFit { offset: c0, amplitude: c1.hypot(c2), phase: (-c2).atan2(c1), max_residual })
}
