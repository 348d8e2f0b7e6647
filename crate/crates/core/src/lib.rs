//! Percentile estimation of expensive functions with Gaussian-process
//! surrogates and stepwise-uncertainty-reduction infill criteria.
//!
//! The crate is `no_std` (with `alloc`): it holds the numerical core only.
//! Running experiments, reading configs and writing results live in the
//! `surq` crate.
#![no_std]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod criteria;
pub mod error;
pub mod gp;
pub mod infill;
pub mod kernel;
pub mod klevel;
pub mod mle;
pub mod percentile;
pub mod points;
pub mod special;
pub mod testbed;

pub use criteria::{j_prob, j_var, CriterionEval, Integration, IntervalStats};
pub use error::{Error, Result};
pub use gp::{fit_posterior, Design, GpPosterior, PreparedPoints, TrendBasis, TrendModel};
pub use kernel::{kernel_eval, KernelFamily, KernelParams};
pub use klevel::{compute_klevel, compute_klevel_sweep, compute_klevel_window, KLevelProfile, LineFamily};
pub use mle::{fit_hyperparameters, MleFit, MleOptions};
pub use percentile::{build_cloud, empirical_percentile, updated_percentile, McCloud};
pub use points::Points;
pub use testbed::{ExperimentSpec, FunctionKind, InputDistribution, TestFunction};
