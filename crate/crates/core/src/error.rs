use thiserror::Error;

/// Errors raised by the sandpile model, the deciders and the instance tooling.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SandpileError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter p must be at least 1, got {0}")]
    InvalidParameter(i64),

    #[error("column {column} is stable (slope {slope} <= p = {p}) and cannot fire")]
    FiringStableColumn { column: usize, slope: i32, p: u32 },

    #[error("column {column} is outside 1..={len}")]
    IndexOutOfRange { column: usize, len: usize },

    #[error("stabilization exceeded the firing bound of {bound}")]
    InternalBoundExceeded { bound: usize },

    #[error("explicit strategy ended with unstable columns {remaining:?}")]
    IncompleteStrategy { remaining: Vec<usize> },

    #[error("configuration is not stable and monotone")]
    NotInGsm,

    #[error("k out of range (|s|, |s|+p]: k = {k}, |s| = {len}, p = {p}")]
    KOutOfRange { k: usize, len: usize, p: u32 },

    #[error("configuration of length {len} is too short for p = {p} (need at least p+1 slopes)")]
    ConfigTooShort { len: usize, p: u32 },

    #[error("position {position} is outside {lo}..={hi}")]
    PositionOutOfRange { position: usize, lo: usize, hi: usize },

    #[error("p = {p} exceeds the transfer table cap of {cap}")]
    PTooLarge { p: u32, cap: u32 },

    #[error("cannot compose: inner span ends at {inner_end}, outer span starts at {outer_start}")]
    SpanMismatch { inner_end: usize, outer_start: usize },

    #[error("window [{i}, {j}) must be wider than p = {p}")]
    WindowTooNarrow { i: usize, j: usize, p: u32 },

    #[error("enumeration of (p+1)^m = {count} configurations exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("firing {index} (column {column}) is neither a peak nor a col")]
    StructureViolation { index: usize, column: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

pub type Result<T> = std::result::Result<T, SandpileError>;
