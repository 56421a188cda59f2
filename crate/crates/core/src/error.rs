use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (non-finite time,
    /// non-positive scale, parameters outside their feasible set).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a grid or a dimension do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The model cannot be identified from the data, e.g. a constant curve
    /// where a non-constant one is required.
    #[error("identifiability error: {0}")]
    Identifiability(String),

    /// A local search failed to converge; the best iterate found is attached.
    #[error("optimizer did not converge: {message} (best value {best_value} at {best_point:?})")]
    NotConverged {
        message: String,
        best_point: Vec<f64>,
        best_value: f64,
    },

    /// The objective produced a non-finite value at a feasible point.
    #[error("non-finite objective {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Inputs produced by different runs cannot be combined (grid mismatch
    /// between a databank and a test set, for instance).
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("monitoring step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Incompatible(_) | Error::Shape(_) => 3,
            Error::Step { source, .. } => source.exit_code(),
            Error::Domain(_)
            | Error::Identifiability(_)
            | Error::NotConverged { .. }
            | Error::NonFinite { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
