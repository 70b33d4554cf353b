use std::path::PathBuf;

/// Errors raised anywhere in the attribution pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off_diagonal:e})")]
    Convergence { sweeps: usize, off_diagonal: f64 },

    #[error("degenerate spectrum: largest eigenvalue {0:e} is not positive")]
    DegenerateSpectrum(f64),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    TrainingDiverged { epoch: usize },

    #[error("checkpoint parse error in section `{section}`: {detail}")]
    Parse { section: String, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stratification failed: class {class} has {count} sample(s), need at least 2")]
    Stratification { class: usize, count: usize },

    #[error("feature {feature} has zero variance on the training split")]
    ConstantFeature { feature: usize },

    #[error("local surrogate fit failed: {0}")]
    SurrogateFit(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no evaluable samples: {0}")]
    EmptyEvaluation(String),

    #[error("incomplete ROAR curve: {0}")]
    IncompleteCurve(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: {detail}")]
    RowParse { row: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}
