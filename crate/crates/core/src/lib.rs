//! Clauser–Horne Bell tests with entangled neutral-kaon pairs.
//!
//! The pipeline runs from the antisymmetric K0 K0bar pair of a φ decay,
//! through a thin regenerator and non-unitary free flight, to the
//! renormalized state of surviving pairs. On that state the crate evaluates
//! the two homogeneous CH combinations that mix strangeness and lifetime
//! measurements, models a realistic detector, and runs reproducible Monte
//! Carlo pseudo-experiments.
//!
//! Working units: proper times in τ_S, widths and masses in 1/τ_S, so
//! Γ_S = 1.

pub mod cli;
pub mod complex_serde;
pub mod config;
pub mod detector;
pub mod dynamics;
pub mod error;
pub mod measurement;
pub mod montecarlo;
pub mod optimize;
pub mod quasispin;

pub use error::{Error, Result};
pub use num_complex::Complex64;
