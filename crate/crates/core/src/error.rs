use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("derivative order {0} is not supported (maximum is 4)")]
    UnsupportedOrder(usize),

    #[error("decay envelope only applies for t >= {onset}, got t = {t}")]
    EnvelopeNotApplicable { t: f64, onset: f64 },

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("sequence has no limit: {0}")]
    NoLimit(String),

    #[error("ambiguous evaluation: {0}")]
    Ambiguous(String),

    #[error("interfaces leave the domain: m * eps = {0} >= 1")]
    InterfacesExitDomain(f64),

    #[error("mismatched lattice sites: {0}")]
    MismatchedSites(String),

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("no convergence after {iterations} iterations: {detail}")]
    Convergence { iterations: usize, detail: String },

    #[error("tolerance {tol:e} unreachable: {detail}")]
    Tolerance { tol: f64, detail: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
