use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: String, got: String },

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("saturation: expected intensity {value} exceeds 1 (scale the object or lower rho)")]
    Saturation { value: f64 },

    #[error("annealing order violated: sigma_t = {sigma_t} must be below sigma0 = {sigma0}")]
    AnnealingOrder { sigma0: f64, sigma_t: f64 },

    #[error("degenerate prior variance: atom {atom} has a non-positive pixel at index {pixel}")]
    DegenerateVariance { atom: usize, pixel: usize },

    #[error("sampler diverged at iteration {iteration}: non-finite state")]
    Divergence { iteration: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("score transport: {0}")]
    Transport(String),

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            got: format!("{}x{}", got.0, got.1),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 3,
            Error::Transport(_) => 4,
            _ => 2,
        }
    }
}
