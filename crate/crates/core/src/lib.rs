//! Bayesian optimization of multi-base-station deployments with block
//! coordinate descent, and the deterministic radio simulator it optimizes.
//!
//! Modules, bottom-up:
//!
//! * [`domain`]: station blocks, bounds, unit-box encoding, budgets.
//! * [`radio`]: path loss, antenna pattern, SINR, throughput, objective.
//! * [`gp`]: RBF Gaussian-process regression and hyperparameter search.
//! * [`acquisition`]: expected improvement and candidate proposal.
//! * [`optimizer`]: joint BO, per-station subproblem BO, the BCD loop and
//!   the square-lattice baselines.
//! * [`config`] and [`experiment`]: the CLI's config file and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod acquisition;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod optimizer;
pub mod radio;
pub mod rng;

pub use error::{Error, Result};
