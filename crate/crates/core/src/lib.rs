//! Numerical laboratory for feedback stabilization of bilinear systems
//! `y' = A y + p(t) B y` on finite spectral truncations.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: the truncated system (diagonal generator, Hermitian
//!   damping operator, the `H`/`K`/`L` norms) and the modulus functions `H`.
//! - [`propagator`]: exact linear flow, the feedback family `p_r` and a
//!   dissipation-preserving Strang splitting for the closed loop.
//! - [`observability`]: the observation functional, sampled estimation of
//!   observability constants and the trajectory bound check.
//! - [`models`]: damped wave, coupled wave and Schrödinger systems on
//!   `(0, pi)` in modal energy coordinates.
//! - [`decay`]: extremal decay sequences, proof sequences, power-law fits and
//!   split-sample validation of decay bounds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Dense kernels index
// several parallel arrays with one loop variable.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decay;
pub mod error;
mod factor;
pub mod models;
pub mod observability;
pub mod propagator;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{HFunction, SpectralSystem, State, C64};
