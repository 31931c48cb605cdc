use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A NaN or infinite value reached a place that requires finite input.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An API was called outside its contract (empty input, wrong length, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    /// Malformed checkpoint blob.
    #[error("checkpoint format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    /// Price-file ingestion failure.
    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<u64>, message: String },

    #[error("planning error: {0}")]
    Planning(String),

    /// Training produced non-finite parameters or losses.
    #[error("numeric divergence in fold {fold} at epoch {epoch}")]
    Divergence { fold: usize, epoch: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn data(line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Data {
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable name used in structured error logs.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Numeric(_) => "numeric",
            Error::Usage(_) => "usage",
            Error::Config(_) => "config",
            Error::Format { .. } => "format",
            Error::Data { .. } => "data",
            Error::Planning(_) => "planning",
            Error::Divergence { .. } => "divergence",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
