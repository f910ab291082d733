#![cfg_attr(not(test), no_std)]
//! Traveling wavefronts for reaction-convection equations whose diffusivity
//! changes sign: threshold speeds, profiles, regularity and weak-form checks.

extern crate alloc;

pub mod bounds;
pub mod coeffs;
pub mod error;
pub mod ode;
pub mod orchestrator;
pub mod poly;
pub mod presets;
pub mod profile;
pub mod shooting;
pub mod verify;

pub use coeffs::{CaseClassification, CoefficientSet, Pattern, PiecewisePolynomial, Side};
pub use error::{Error, Result};
