use thiserror::Error;

/// Errors raised across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("oracle size error: n = {qubits} exceeds the dense cap of {cap} qubits")]
    OracleSize { qubits: u32, cap: u32 },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("conjugate symmetry broken: imaginary residue {residue:e} exceeds {tolerance:e}")]
    Symmetry { residue: f64, tolerance: f64 },
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("integration error: non-finite value at substep {step} (t = {time})")]
    Integration { step: u64, time: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }
}
