//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("clbit index {index} out of range for {n_clbits} clbits")]
    ClbitOutOfRange { index: usize, n_clbits: usize },

    #[error("duplicate qubit {0} in target list")]
    DuplicateTarget(usize),

    #[error("qubit {0} was already measured; measurement is terminal per qubit")]
    MeasuredQubitReused(usize),

    #[error("clbit {0} is already written by another measurement")]
    ClbitConflict(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state is not normalized: |norm^2 - 1| = {0:e}")]
    NotNormalized(f64),

    #[error("matrix is not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("matrix is not unitary: max |U\u{2020}U - I| = {0:e}")]
    NotUnitary(f64),

    #[error("snapshot validation failed at {path}: {message}")]
    SnapshotValidation { path: String, message: String },

    #[error("failed to parse document: {0}")]
    Parse(String),

    #[error("no duration for gate '{gate}' on qubits {qubits:?} in snapshot '{snapshot}'")]
    MissingDuration {
        gate: String,
        qubits: Vec<usize>,
        snapshot: String,
    },

    #[error("qubits {0} and {1} are not connected on the coupling map")]
    Disconnected(usize, usize),

    #[error("no directed coupling edge {0} -> {1}")]
    NoDirectedEdge(usize, usize),

    #[error("gate '{0}' cannot be routed or lowered: {1}")]
    NotLowerable(String, String),

    #[error("gate '{gate}' is not in the device basis set {basis:?}")]
    NonBasisGate { gate: String, basis: Vec<String> },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("ancilla budget exceeded: requested {requested}, budget {budget}")]
    AncillaBudget { requested: usize, budget: usize },

    #[error("segment {segment} is infeasible: gates take {gates_dt} dt but only {budget_dt} dt are available")]
    InfeasibleSegment {
        segment: usize,
        gates_dt: u64,
        budget_dt: u64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("degenerate weights: no point has a positive standard error")]
    DegenerateWeights,

    #[error("matrix is singular or numerically singular (pivot {0:e})")]
    SingularMatrix(f64),

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("{0}")]
    Unsupported(String),
}
