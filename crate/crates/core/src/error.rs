use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {site} out of range for {n_qubits} qubits")]
    SiteOutOfRange { site: usize, n_qubits: usize },
    #[error("gate acts twice on qubit {0}")]
    RepeatedSite(usize),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("eigenvalue {0:.3e} is negative beyond tolerance")]
    NegativeEigenvalue(f64),
    #[error("spectrum sums to {0} instead of 1")]
    NotNormalized(f64),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{n} qubits exceeds the {engine} limit of {limit}")]
    TooManyQubits { n: usize, limit: usize, engine: &'static str },
    #[error("impossible record: forced outcome {outcome} on qubit {site} has zero probability")]
    ImpossibleRecord { site: usize, outcome: u8 },
    #[error("record does not match the realization: {0}")]
    RecordMismatch(String),
    #[error("channel not invertible: purity {purity} is not above 1/D = {threshold}")]
    NonInvertible { purity: f64, threshold: f64 },
    #[error("unlearnable: {0}")]
    Unlearnable(String),
    #[error("Weingarten functions are singular for D = {0}")]
    DegenerateWeingarten(usize),
    #[error("effective sample size {0:.2} is too low")]
    LowEss(f64),
    #[error("curve never crosses the threshold inside the simulated window")]
    NoCrossing,
    #[error("operation not supported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("spec hash mismatch: file has {found}, config gives {expected}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error classes, used for CLI exit codes and FFI status codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Resource,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::TooManyQubits { .. } => ErrorClass::Resource,
            Error::NonUnitary(_)
            | Error::NonHermitian(_)
            | Error::NegativeEigenvalue(_)
            | Error::NotNormalized(_)
            | Error::ImpossibleRecord { .. }
            | Error::NonInvertible { .. }
            | Error::Unlearnable(_)
            | Error::DegenerateWeingarten(_)
            | Error::LowEss(_)
            | Error::NoCrossing => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Config,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
