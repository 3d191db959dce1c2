use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice dimensions {rows}x{cols}")]
    Dimension { rows: usize, cols: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(&'static str),

    #[error("resonant divergence: zero detuning invalidates adiabatic elimination")]
    ResonantDivergence,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quasienergy {value} lies within {tol:e} of the Brillouin zone edge")]
    ZoneEdge { value: f64, tol: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
