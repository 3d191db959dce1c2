//! Independent oracles shared by the integration tests.
//!
//! Matrices are assembled here directly from the link list, and steady
//! states come from integrating the amplitude equations in time, so none of
//! the Sambe, resolvent or eigen machinery of the library is reused.

#![allow(dead_code, clippy::too_many_arguments)]

use num_complex::Complex64;
use optomag::lattice::LatticeGraph;

pub type Vector = Vec<Complex64>;
pub type Dense = Vec<Vec<Complex64>>;

/// Static Hamiltonian from sites and links, `H[j][i] −= A e^{iθ}`.
pub fn dense_hamiltonian(graph: &LatticeGraph) -> Dense {
    let n = graph.sites.len();
    let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for s in &graph.sites {
        h[s.id][s.id] += s.omega;
    }
    for l in &graph.links {
        let t = Complex64::from_polar(l.amplitude, l.phase);
        h[l.j][l.i] -= t;
        h[l.i][l.j] -= t.conj();
    }
    h
}

fn matvec(m: &Dense, x: &[Complex64]) -> Vector {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn axpy(y: &[Complex64], a: f64, x: &[Complex64]) -> Vector {
    y.iter().zip(x).map(|(u, v)| u + v * a).collect()
}

/// Classical fourth-order Runge-Kutta for `ẏ = f(t, y)`.
pub fn rk4<F>(f: F, mut y: Vector, t0: f64, dt: f64, steps: usize) -> Vector
where
    F: Fn(f64, &[Complex64]) -> Vector,
{
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + dt / 2.0, &axpy(&y, dt / 2.0, &k1));
        let k3 = f(t + dt / 2.0, &axpy(&y, dt / 2.0, &k2));
        let k4 = f(t + dt, &axpy(&y, dt, &k3));
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
        t += dt;
    }
    y
}

/// Driven, damped modulated-link lattice in the frame of the probe,
/// `b = a·e^{iωt}`:
///
/// `ḃ = −i(H₀ + Σ_I 2A_I cos(Ωt + φ_I)|I⟩⟨I| − ω − iκ/2) b − i e_probe`.
///
/// Returns the Fourier components `b_m` of the periodic steady state,
/// `b(t) = Σ_m b_m e^{imΩt}`, for `m ∈ −m_max..=m_max`.
pub struct ModulatedOracle<'a> {
    pub graph: &'a LatticeGraph,
    pub omega_mod: f64,
    /// `(site, A, φ)` for every modulated site.
    pub modulation: Vec<(usize, f64, f64)>,
    pub kappa: f64,
}

impl ModulatedOracle<'_> {
    pub fn steady_state(&self, omega: f64, probe: usize, periods_settle: usize, steps_per_period: usize, m_max: i64) -> Vec<Vector> {
        let h0 = dense_hamiltonian(self.graph);
        let n = h0.len();
        let rhs = |t: f64, b: &[Complex64]| -> Vector {
            let mut hb = matvec(&h0, b);
            for &(i, amp, phase) in &self.modulation {
                hb[i] += b[i] * (2.0 * amp * (self.omega_mod * t + phase).cos());
            }
            for i in 0..n {
                hb[i] -= b[i] * Complex64::new(omega, self.kappa / 2.0);
            }
            let mut out: Vector = hb.into_iter().map(|x| -Complex64::i() * x).collect();
            out[probe] -= Complex64::i();
            out
        };
        let period = 2.0 * std::f64::consts::PI / self.omega_mod;
        let dt = period / steps_per_period as f64;
        let mut b = rk4(rhs, vec![Complex64::new(0.0, 0.0); n], 0.0, dt, periods_settle * steps_per_period);
        let t0 = periods_settle as f64 * period;
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); n]; (2 * m_max + 1) as usize];
        for k in 0..steps_per_period {
            let t = t0 + k as f64 * dt;
            for (idx, m) in (-m_max..=m_max).enumerate() {
                let w = Complex64::from_polar(1.0 / steps_per_period as f64, -(m as f64) * self.omega_mod * t);
                for i in 0..n {
                    acc[idx][i] += b[i] * w;
                }
            }
            b = rk4(rhs, b, t, dt, 1);
        }
        acc
    }
}

/// Conversion lattice in the frame of the probe: `ḃ = −i(D − Δ_p) b +
/// √κ α e_probe` with `D = H − i·diag(κ/2, Γ/2)` and optical frequency
/// `1 + δ`, mechanical frequency 1. Integrates until the state settles.
pub fn conversion_steady_state(
    graph: &LatticeGraph,
    delta: f64,
    kappa: f64,
    gamma: f64,
    delta_p: f64,
    probe: usize,
    alpha: Complex64,
    t_end: f64,
    dt: f64,
) -> Vector {
    let mut d = dense_hamiltonian(graph);
    for s in &graph.sites {
        let (w, rate) = if s.kind.is_optical() { (1.0 + delta, kappa) } else { (1.0, gamma) };
        d[s.id][s.id] += Complex64::new(w - delta_p, -rate / 2.0);
    }
    let drive = alpha * kappa.sqrt();
    let rhs = |_t: f64, b: &[Complex64]| -> Vector {
        let mut out: Vector = matvec(&d, b).into_iter().map(|x| -Complex64::i() * x).collect();
        out[probe] += drive;
        out
    };
    let steps = (t_end / dt).round() as usize;
    rk4(rhs, vec![Complex64::new(0.0, 0.0); graph.sites.len()], 0.0, dt, steps)
}

/// Dispersion matching `1 + δ − 2J cos k = Δ_p` and
/// `1 − 2K cos q = Δ_p`: momentum shift `q − k` of the two rail branches
/// with `k, q ∈ [0, π]`, by bisection on each band.
pub fn ladder_matching_dphi(delta: f64, j: f64, k_hop: f64, delta_p: f64) -> Option<f64> {
    let root = |f: &dyn Fn(f64) -> f64| -> Option<f64> {
        let (mut a, mut b) = (0.0, std::f64::consts::PI);
        if f(a) * f(b) > 0.0 {
            return None;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        Some(0.5 * (a + b))
    };
    let k = root(&|k: f64| 1.0 + delta - 2.0 * j * k.cos() - delta_p)?;
    let q = root(&|q: f64| 1.0 - 2.0 * k_hop * q.cos() - delta_p)?;
    Some(q - k)
}
