use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("unsupported gate `{name}` at line {line}")]
    UnsupportedGate { name: String, line: usize },
    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("window is not contiguous in the dependency order")]
    WindowNotContiguous,
    #[error("replacement acts on qubit {0} outside the window")]
    ForeignQubit(usize),
    #[error("gate {0} is not a CNOT or SWAP")]
    NonLinearGate(usize),
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("edge list line {line}: {msg}")]
    EdgeList { line: usize, msg: String },
    #[error("graph has {0} nodes, at most 5 supported here")]
    TooManyQubits(usize),
    #[error("architecture graph is disconnected")]
    Disconnected,
    #[error("gate {gate} acts on ({a},{b}) which is not an architecture edge")]
    NonCompliant { gate: usize, a: usize, b: usize },
    #[error("commutation rejected: {0}")]
    Rejected(String),
    #[error("SAT backend failure: {0}")]
    Backend(String),
    #[error("no circuit found up to depth {0}")]
    DepthCapExceeded(usize),
    #[error("model schema error: {0}")]
    Schema(String),
    #[error("training diverged (non-finite loss)")]
    Divergence,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
