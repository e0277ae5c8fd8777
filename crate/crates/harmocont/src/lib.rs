//! Harmonic analysis of periodic oscillators by numerical continuation.
//!
//! The crate continues periodic orbits as solutions of an extended boundary
//! value problem: orbits are rescaled to period 1, discretized by orthogonal
//! collocation, and augmented with integral conditions that measure or pin
//! selected Fourier coefficients of the states. On top of the plain
//! one-parameter continuation this enables iso-harmonic, iso-ratio and
//! iso-energy curve tracing in two parameters.
//!
//! Module map:
//!
//! - [`dynsys`] — vector fields, Jacobians, and autonomization of forced
//!   systems via an auxiliary oscillator.
//! - [`linbord`] — dense LU, bordered-system solves, small-matrix eigenvalues.
//! - [`integrate`] — adaptive Runge-Kutta time integration (used by the
//!   verification oracle).
//! - [`equilibria`] — equilibrium continuation and Hopf localization.
//! - [`collocation`] — the discretized periodic BVP, Newton corrector, and
//!   the pseudo-arclength continuation engine.
//! - [`harmonic`] — Fourier coefficients, K_REF test functions, the Hopf
//!   starter, and the high-level continuation drivers.
//! - [`models`] — the shipped case-study systems.
//! - [`cli`] — run configurations, branch/solution files, chart export, and
//!   orbit verification.

pub mod cli;
pub mod collocation;
pub mod dynsys;
pub mod equilibria;
pub mod error;
pub mod harmonic;
pub mod integrate;
pub mod linbord;
pub mod models;

pub use error::{Error, Result};
