//! Config-driven experiment runner for feedback stabilization of bilinear
//! systems: parses experiment configs, runs simulations, observability
//! estimates, sweeps and presets, and writes CSV, JSON and SVG artifacts.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod plot;
pub mod presets;
pub mod runner;

pub use config::{parse_config, ExperimentConfig, Mode};
pub use error::{CliError, Result};
pub use runner::{run, RunContext, RunOutcome};
