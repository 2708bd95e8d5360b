use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by lattice, operator and walk construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coin bias rho = {0} lies outside [0, 1]")]
    RhoOutOfRange(f64),

    #[error("coin state has squared norm {0}, expected 1")]
    NotNormalized(f64),

    #[error("a lattice needs at least 2 sites, got {0}")]
    LatticeTooSmall(usize),

    #[error("the local convention on a cycle needs an even site count, got {0}")]
    OddLocalCycle(usize),

    #[error("site {site} is outside 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not unitary (max residual {0:.3e})")]
    NotUnitary(f64),

    #[error("the iterative amplitude map only encodes the spatial convention")]
    MapNeedsSpatial,

    #[error("an odd cycle ({0} sites) has no antipodal target site")]
    NoAntipode(usize),

    #[error("recovery case `{case}` does not apply: {reason}")]
    RecoveryCaseMismatch { case: &'static str, reason: String },

    #[error("horizon {0} exhausted before the walker relocalized at the start site")]
    HorizonExhausted(usize),

    #[error("horizon must be at least 1")]
    EmptyHorizon,

    #[error("fidelity grid needs at least 2 points per axis, got {0}x{1}")]
    GridTooCoarse(usize, usize),

    #[error("peak threshold {0} must lie strictly between 0 and 1")]
    BadThreshold(f64),
}
