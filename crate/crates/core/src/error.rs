use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension for {what}: {dim}")]
    InvalidDimension { what: &'static str, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("truncation too small: tail population {tail:.3e} beyond cavity_dim {cavity_dim}; need at least {required}")]
    TruncationTooSmall {
        tail: f64,
        cavity_dim: usize,
        required: usize,
    },

    #[error("population {population:.3e} in the top two Fock levels of cavity_dim {cavity_dim} exceeds the alarm threshold")]
    TruncationAlarm { population: f64, cavity_dim: usize },

    #[error("undefined state: {0}")]
    UndefinedState(String),

    #[error("shift power {k} must be below cavity_dim {cavity_dim}")]
    ShiftOutOfRange { k: usize, cavity_dim: usize },

    #[error("manifold n={n} does not fit cavity_dim {cavity_dim}")]
    ManifoldOutOfRange { n: usize, cavity_dim: usize },

    #[error("time {t} outside [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("fidelity maximum not bracketed inside the gain range ({} curve points)", curve.len())]
    BracketFailure { curve: Vec<(f64, f64)> },

    #[error("step size underflow at t={t:.6e} (dt={dt:.3e}); problem is too stiff for the explicit integrator")]
    Stiffness { t: f64, dt: f64 },

    #[error("integration diverged at t={t:.6e}: {reason}")]
    Diverged { t: f64, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("displacement operator not unitary within tolerance (defect {defect:.3e}); increase cavity_dim to at least {hint}")]
    UnitarityDefect { defect: f64, hint: usize },

    #[error("phase list of length {len} exceeds cavity_dim {cavity_dim}")]
    PhaseListTooLong { len: usize, cavity_dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
