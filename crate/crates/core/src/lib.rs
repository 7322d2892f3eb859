//! Sieve-bootstrap inference for long-memory time series.
//!
//! The crate covers exact ARFIMA(1,d,0) autocovariances, Gaussian simulation
//! through the Levinson–Durbin recursion, fractional filters, autoregressive
//! sieve fitting, the raw, pre-filtered and fixed-filter sieve bootstraps, an
//! Edgeworth expansion for zero-mean sample autocorrelations and a Monte
//! Carlo harness.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acvf;
pub mod bootstrap;
pub mod edgeworth;
pub mod error;
pub mod fracdiff;
pub mod harness;
pub mod levinson;
pub mod rng;
pub mod sieve;
pub mod special;
pub mod stats;

pub use acvf::{arfima_acvf, exact_mean_variance, fn_acvf, AcvfSequence, ArfimaSpec};
pub use bootstrap::{
    pfsbs_draw, percentile_set, sbs_draw, sieve_implied_acvf, BootstrapDraws, BootstrapMethod, MethodKind, OrderRule,
    PreparedBootstrap,
};
pub use edgeworth::{EdgeworthCurve, EdgeworthOptions, EdgeworthPlan};
pub use error::{Error, Result};
pub use fracdiff::{apply_frac_filter, FracFilter};
pub use harness::{ExperimentConfig, ExperimentResult, Statistic};
pub use levinson::{levinson_solve, simulate_gaussian, GaussianSimulator, LevinsonSolution};
pub use sieve::{FitMethod, SieveFit};
pub use stats::{MemoryEstimate, MemoryMethod};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
