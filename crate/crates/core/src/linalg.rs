//! Thin wrappers over the dense complex linear algebra backend.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = Mat<Complex64>;

/// Tolerance on `|H - H†|` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come back ascending; eigenvectors are the columns of the
/// returned matrix.
pub fn eigh(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMat) -> Result<Vec<f64>> {
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Solves `a x = b` for every column of `b` by LU with partial pivoting.
///
/// Singular or numerically useless systems are reported as solver errors
/// rather than returning non-finite data.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    use faer::linalg::solvers::Solve;
    let lu = a.partial_piv_lu();
    let x = lu.solve(b);
    if x.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Solver("singular system".into()));
    }
    let residual = (a * &x - b).norm_l2();
    let scale = a.norm_l2() * x.norm_l2() + b.norm_l2();
    if !(residual <= 1e-10 * scale) {
        return Err(Error::Solver(format!("backward error {:e} too large", residual / scale)));
    }
    Ok(x)
}

/// Solves `a x = e_k` and returns `x` as a vector.
pub fn solve_unit(a: &CMat, k: usize) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let mut b = Mat::<Complex64>::zeros(n, 1);
    b[(k, 0)] = Complex64::new(1.0, 0.0);
    let x = solve(a, &b)?;
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}
