use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixError {
    #[error("quadrature did not converge: value {value:e}, error estimate {estimate:e}")]
    Quadrature { value: f64, estimate: f64 },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Bose pole at zero frequency")]
    BosePole,

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("degenerate-D singularity: |D| = {d:e} below threshold {threshold:e}")]
    DegenerateD { d: f64, threshold: f64 },

    #[error("limit does not exist: pole {re:e}{im:+e}i has non-negative real part")]
    LimitDoesNotExist { re: f64, im: f64 },

    #[error("singular system: condition number {cond:e}")]
    Singular { cond: f64 },

    #[error("integration unstable at t = {t}: state norm {norm:e}")]
    Unstable { t: f64, norm: f64 },

    #[error("{0}")]
    Numeric(String),
}

impl MixError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            MixError::Quadrature { .. } => "quadrature",
            MixError::Model(_) => "model",
            MixError::Params(_) => "params",
            MixError::Precondition(_) => "precondition",
            MixError::BosePole => "bose-pole",
            MixError::RegimeMismatch(_) => "regime-mismatch",
            MixError::DegenerateD { .. } => "degenerate-d",
            MixError::LimitDoesNotExist { .. } => "no-limit",
            MixError::Singular { .. } => "singular",
            MixError::Unstable { .. } => "unstable",
            MixError::Numeric(_) => "numeric",
        }
    }

    /// True for errors caused by bad input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, MixError::Model(_) | MixError::Params(_) | MixError::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, MixError>;
