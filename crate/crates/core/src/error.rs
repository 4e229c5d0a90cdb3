use std::fmt;
use std::path::PathBuf;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("gate `{gate}` takes {expected} parameter(s), got {got}")]
    WrongArity {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("matrix is not unitary: max |U†U - I| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NonUnitary { deviation: f64, tolerance: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid circuit: {}", join_violations(.0))]
    InvalidCircuit(Vec<Violation>),
    #[error("{n} qubits exceeds the dense oracle limit of {limit}")]
    OracleLimitExceeded { n: usize, limit: usize },
    #[error("control qubit {0} equals target")]
    ControlEqualsTarget(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("qubit count {0} out of supported range 1..=58")]
    QubitCountOutOfRange(usize),
    #[error(
        "invalid block size {block_amps} for {n_qubits} qubits (must be a power of two <= 2^n)"
    )]
    InvalidBlockSize { n_qubits: usize, block_amps: u64 },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{} already exists (pass overwrite to replace it)", .0.display())]
    AlreadyExists(PathBuf),
    #[error("bad magic {0:02x?}, not a state file")]
    BadMagic([u8; 4]),
    #[error("unsupported state file version {0}")]
    VersionMismatch(u32),
    #[error("state file is {found} bytes, header implies {expected}")]
    LengthMismatch { expected: u64, found: u64 },
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("block {block} out of range (store has {n_blocks} blocks)")]
    BlockOutOfRange { block: usize, n_blocks: usize },
    #[error("amplitude index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: u64, n_qubits: usize },
    #[error("buffer holds {got} amplitudes, block size is {expected}")]
    BufferLength { expected: usize, got: usize },
    #[error("cache of {capacity_bytes} bytes cannot hold the {required_bytes} byte working set")]
    CapacityTooSmall {
        capacity_bytes: u64,
        required_bytes: u64,
    },
    #[error("block {0} is not resident in the cache window")]
    NotResident(usize),
    #[error("cannot pin block {0}: a pair unit already holds two pins")]
    TooManyPins(usize),
    #[error("stride {stride} does not fit inside a block of {block_amps} amplitudes")]
    StrideTooLarge { stride: u64, block_amps: usize },
    #[error(
        "stride {stride} is smaller than the block size {block_amps}; use the in-block kernel"
    )]
    StrideTooSmall { stride: u64, block_amps: usize },
    #[error("blocks {a} and {b} are not partners for this stride (expected {expected})")]
    MismatchedPairBlocks { a: usize, b: usize, expected: usize },
    #[error("worker count {workers} is invalid for a domain of {total}")]
    InvalidWorkerCount { workers: usize, total: u64 },
    #[error("worker {worker} failed on gate {gate}: {source}")]
    WorkerFailed {
        worker: usize,
        gate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },
    #[error("circuit cannot be written in text form: {0}")]
    Unserializable(String),
    #[error("{0}")]
    Config(String),
    #[error("metrics serialization: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("report: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownInstruction(String),
    Arity {
        instruction: String,
        expected: usize,
        got: usize,
    },
    QubitCountConflict {
        directive: usize,
        requested: usize,
    },
    MissingQubitCount,
    Invalid(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownInstruction(name) => write!(f, "unknown instruction `{name}`"),
            ParseErrorKind::Arity {
                instruction,
                expected,
                got,
            } => write!(
                f,
                "arity error: `{instruction}` takes {expected} argument(s), got {got}"
            ),
            ParseErrorKind::QubitCountConflict {
                directive,
                requested,
            } => write!(
                f,
                "qubit count conflict: file declares {directive}, caller requested {requested}"
            ),
            ParseErrorKind::MissingQubitCount => {
                write!(f, "no `qubits` directive and no qubit count supplied")
            }
            ParseErrorKind::Invalid(msg) => f.write_str(msg),
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
