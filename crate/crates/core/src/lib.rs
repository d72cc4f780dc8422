//! Avalanches in the one-dimensional Kadanoff sandpile.
//!
//! A configuration is a sequence of slopes `s_1..s_m` with parameter `p`.
//! Adding a grain on column 1 of a stable monotone configuration starts an
//! avalanche; the avalanche problem asks whether it raises the slope of a
//! column `k` just past the end, `m < k <= m + p`.
//!
//! Three deciders answer it:
//!
//! * [`decide_naive`] stabilizes `s^+` firing the leftmost unstable column;
//! * [`decide_linear`] threads a `p`-bit status (which of the last `p`
//!   columns fired) left to right in `O(m)`;
//! * [`decide_parallel`] builds per-position status transfer tables and
//!   composes them as a balanced fork-join tree.
//!
//! The runnable programs under `examples/` walk through each piece.

pub mod avalanche;
pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod instances;
pub mod ncdecider;
pub mod verify;

pub use avalanche::{compute_avalanche, decide_naive, status_at, Avalanche, FiredSet, FiringKind, Status};
pub use config::{heights_to_slopes, slopes_to_heights, FiringStrategy, HeightConfig, SlopeConfig};
pub use error::{Result, SandpileError};
pub use instances::{enumerate_gsm, generate, parse_config, serialize_config, GeneratorSpec};
pub use ncdecider::{
    build_transfer, compose, decide_linear, decide_parallel, reduce_range, seed_status, ApInstance, Method,
    TransferFunction,
};
