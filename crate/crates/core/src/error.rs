use thiserror::Error;

use crate::hilbert::Slot;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system shape: {0}")]
    InvalidShape(String),

    #[error("slot {0:?} does not exist in this system")]
    UnknownSlot(Slot),

    #[error("slot {0:?} is claimed by both tensor factors")]
    OverlappingSlots(Slot),

    #[error("states are defined over different subsystems")]
    ShapeMismatch,

    #[error("basis state does not match the slot layout: {0}")]
    MalformedBasisState(String),

    #[error("walker {walker} would move to {position}, outside the range [-{bound}, {bound}]")]
    PositionOverflow { walker: usize, position: i32, bound: i32 },

    #[error("partial trace needs a nonempty strict subset of the state's slots")]
    InvalidTraceSubset,

    #[error("cannot normalize a zero vector")]
    ZeroNorm,

    #[error("position-dependent coin has no entry for position {0}")]
    MissingCoinEntry(i32),

    #[error("coin rule requires slot {0:?}, which is not present in the state")]
    MissingRegister(Slot),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("wrong number of coin rules: expected {expected}, got {got}")]
    RuleCount { expected: usize, got: usize },

    #[error("measurement basis on {slot:?} does not cover value {value} present in the state")]
    BasisIncomplete { slot: Slot, value: i32 },

    #[error("measurement bases must cover exactly the sender slots: {0}")]
    BasisCoverage(String),

    #[error("permutation sum needs 0 <= k <= m, got k={k}, m={m}")]
    PermutationRange { k: usize, m: usize },

    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),

    #[error("secret amplitudes are not normalized: |alpha|^2 + |beta|^2 = {0}")]
    UnnormalizedSecret(f64),

    #[error("invalid security scenario: {0}")]
    InvalidScenario(String),

    #[error("helper outcome has zero probability on this state")]
    ImpossibleOutcome,

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
