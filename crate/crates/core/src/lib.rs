//! Deterministic kinetic solver and entropy-budget auditor for the Enskog
//! equation with a modified Enskog factor, and its Enskog–Vlasov extension.
//!
//! The spatial domain is a one-dimensional slab; velocity space is fully
//! three-dimensional. Units are chosen so that the molecular mass and the gas
//! constant are one.

pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod factor;
pub mod integrator;
pub mod quadrature;
pub mod refine;
pub mod runner;
pub mod sphere;
pub mod state;
pub mod verify;
pub mod vlasov;

pub use error::{Error, Result};

/// Specific gas constant in the reduced unit system.
pub const GAS_CONSTANT: f64 = 1.0;
