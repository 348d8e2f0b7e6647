//! Sequential estimation of a percentile of `g(X)` for an expensive `g`,
//! with Gaussian-process surrogates and stepwise-uncertainty-reduction
//! infill criteria.
//!
//! The numerical core lives in [`surq_core`]; this crate adds the design
//! loop, benchmark presets, result files and the command-line tool.

pub mod bench;
pub mod config;
pub mod engine;

pub use surq_core as core;
