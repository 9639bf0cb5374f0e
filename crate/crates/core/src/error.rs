use thiserror::Error;

/// Everything that can go wrong while building or solving a chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("linear potential needs at least two sites")]
    LinearNeedsTwoSites,

    #[error("chain needs at least one site")]
    NoSites,

    #[error("sector out of range: {n_up} up / {n_down} down particles on {sites} sites")]
    SectorOutOfRange {
        sites: usize,
        n_up: usize,
        n_down: usize,
    },

    #[error(
        "sector dimension {dim} exceeds the exact-diagonalization limit {limit} \
         (half-filled chains are limited to L <= 8); use the Kohn-Sham path instead"
    )]
    SectorTooLarge { dim: usize, limit: usize },

    #[error("matrix dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("the two chains live in different sectors or geometries")]
    SectorMismatch,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inverse temperature must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),

    #[error("density {0} is not finite")]
    NonFiniteDensity(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("{particles} fermions do not fit in {levels} single-particle levels")]
    PauliExclusion { particles: usize, levels: usize },

    #[error("canonical tables were built at different temperatures ({0} vs {1})")]
    BetaMismatch(f64, f64),

    #[error("spin-polarized sectors ({n_up} up, {n_down} down) are not supported by the Kohn-Sham solver")]
    SpinPolarized { n_up: usize, n_down: usize },

    #[error("self-consistent field did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("grid `{name}` is invalid: {reason}")]
    InvalidGrid { name: &'static str, reason: String },

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Validation problems (bad input) as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Eigensolver(_) | Error::NotConverged { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
