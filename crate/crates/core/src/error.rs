use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spin: {0}")]
    InvalidSpin(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("site index {index} out of range 1..={n_sites}")]
    SiteIndex { index: usize, n_sites: usize },

    #[error("operator is not nilpotent within degree {max_degree}")]
    NotNilpotent { max_degree: usize },

    #[error("singular twist: regulator e^(-2i phi) equals one")]
    SingularTwist,

    #[error("truncated Fock trace requires |x| < 1, got |x| = {0}")]
    DivergentTrace(f64),

    #[error("oscillator degree {degree} exceeds bound {bound}")]
    DegreeBound { degree: usize, bound: usize },

    #[error("non-generic spectral parameters: {0}")]
    NonGeneric(String),

    #[error("unknown relation id {0:?}")]
    UnknownRelation(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Bethe vector vanishes for the given roots")]
    ZeroVector,

    #[error("roots are off-shell: Bethe residual {0:e}")]
    OffShell(f64),

    #[error("q-series diverges: need Im(phi) < 0, got {0}")]
    DivergentSeries(f64),

    #[error("eigenvalue is not a polynomial of the expected degree (residual {0:e})")]
    NotPolynomial(f64),

    #[error("degenerate spectrum in sector {sector}: joint eigenvectors are ambiguous")]
    DegenerateSpectrum { sector: usize },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
