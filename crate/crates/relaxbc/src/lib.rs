//! Boundary conditions for linear relaxation systems on the half-line.
//!
//! The pipeline: build a [`model::SpectralModel`], construct a boundary matrix
//! ([`bc`]), certify the Kreiss condition ([`gkc`]), make the data compatible
//! ([`compat`]), assemble the matched asymptotic solution ([`asymptotics`]) and
//! compare it with a stiff solver ([`solver`]) in convergence studies ([`harness`]).

pub mod asymptotics;
pub mod bc;
pub mod compat;
pub mod error;
pub mod gkc;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod profile;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};

/// Version string embedded in artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
