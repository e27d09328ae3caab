use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("exchange slope vanishes at eps = {eps} mV; coherence time is unbounded")]
    ZeroSlope { eps: f64 },

    #[error("frequency {f} MHz lies outside the grid [{min}, {max}] MHz")]
    OutOfGrid { f: f64, min: f64, max: f64 },

    #[error("insufficient data: {points} points for {params} parameters")]
    InsufficientData { points: usize, params: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("samples are not uniformly spaced (deviation {0:.3e})")]
    NonUniformSpacing(f64),

    #[error("sampling rate {rate_gsps} GSa/s is below the Nyquist rate for {freq_mhz} MHz")]
    SubNyquist { rate_gsps: f64, freq_mhz: f64 },

    #[error("fitted frequency {f} MHz is below |dBz| = {dbz} MHz and cannot be inverted")]
    NonInvertible { f: f64, dbz: f64 },

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("Hund-Mulliken parameters are singular: {0}")]
    SingularParameters(&'static str),

    #[error("coupling is zero; the entangling gate time is unbounded")]
    ZeroCoupling,

    #[error("abscissae are degenerate")]
    DegenerateAbscissae,

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("unit mismatch: expected `{expected}`, found `{found}`")]
    UnitMismatch { expected: String, found: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {v}")))
    }
}
