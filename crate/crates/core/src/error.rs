//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context (indices, offending values) to point at the bad input
//! without a debugger.

use thiserror::Error;

/// Errors produced by model construction, simulation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Two sequences that must share a support had different lengths.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    /// A probability vector did not sum to 1 within tolerance.
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    NotNormalized(f64),

    /// A probability weight was negative.
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    /// KL divergence is undefined: q is zero where p has mass.
    #[error("divergence undefined: q[{index}] = 0 while p[{index}] = {p_value}")]
    DivergenceUndefined { index: usize, p_value: f64 },

    /// An observation window was empty.
    #[error("empty window")]
    EmptyWindow,

    /// Histogram bin count below the minimum of 2.
    #[error("bin count {0} is too small, need at least 2")]
    BinCount(usize),

    /// A slot index ran past the end of a finite stream.
    #[error("slot {slot} out of range, stream has {len} slots")]
    SlotOutOfRange { slot: usize, len: usize },

    /// A Markov transition matrix row did not sum to 1.
    #[error("transition row {row} sums to {sum}, expected 1 within 1e-9")]
    MalformedTransitions { row: usize, sum: f64 },

    /// A parameter that must be positive (or within a range) was not.
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// Phase list was empty, overlapping, or out of the horizon.
    #[error("invalid phase list: {0}")]
    InvalidPhases(String),

    /// A reward gap of zero or below makes pull-count bounds meaningless.
    #[error("reward gap must be positive, got {0}")]
    NonPositiveGap(f64),

    /// Control law denominator b is zero.
    #[error("degenerate controller: coefficient b is zero")]
    DegenerateController,

    /// Offline plan quantization step exceeds a cost, the grid cannot resolve it.
    #[error("quantization step {step} exceeds cost {cost}")]
    QuantizationTooCoarse { step: f64, cost: f64 },

    /// A node cannot reach the sink over the given radio radius.
    #[error("node {0} cannot reach the sink")]
    UnreachableNode(usize),

    /// Trace file violated the expected layout.
    #[error("trace format: {0}")]
    TraceFormat(String),

    /// Experiment configuration problem.
    #[error("config: {0}")]
    Config(String),

    /// A decide/finish pair was driven out of order.
    #[error("protocol misuse: {0}")]
    Protocol(&'static str),

    /// A simulation ledger broke one of its accounting identities.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
