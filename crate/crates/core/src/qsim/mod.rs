//! Exact statevector simulation of small parameterized circuits.
//!
//! Basis ordering: bit `b` of a basis index is the value of qubit `b`, so
//! qubit 0 is the least-significant bit. Rotation gates follow the usual
//! half-angle convention, `RX(t) = exp(-i t X / 2)` and likewise for `RY`,
//! `RZ`, while `ZZ(t) = exp(-i t Z⊗Z / 2)`.

mod builders;
mod circuit;
mod gradient;
mod state;
mod unitary;

pub use builders::{
    build_real_amplitudes, build_zz_feature_map, EntanglementGraph, EntanglementScheme,
    FeatureMapOptions, RealAmplitudesOptions,
};
pub use circuit::{Circuit, Gate, GateKind, Param};
pub use gradient::parameter_shift_gradient;
pub use state::{expectation, probability_aggregate, simulate, ClassMap, Observable, StateVector};
pub use unitary::{circuit_unitary, DenseMatrix};

use thiserror::Error;

/// Simulator qubit cap.
pub const MAX_QUBITS: usize = 20;
/// Qubit cap for dense unitaries.
pub const MAX_UNITARY_QUBITS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("qubit index {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("two-qubit gate acts on the same qubit {0} twice")]
    RepeatedQubit(usize),
    #[error("qubit count {0} exceeds the simulator limit")]
    TooManyQubits(usize),
    #[error("missing value for parameter `{0}`")]
    MissingParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{0}` is unbound")]
    UnboundParameter(String),
    #[error("observable does not produce a scalar expectation")]
    NotScalar,
    #[error("invalid entanglement graph: {0}")]
    InvalidGraph(String),
    #[error("repetition count must be at least 1")]
    ZeroReps,
}

pub type Result<T> = std::result::Result<T, QsimError>;
