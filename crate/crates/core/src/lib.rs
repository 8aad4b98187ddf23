//! Single-mode CSL collapse dynamics for cosmological perturbations.
//!
//! A Fourier mode of the Mukhanov–Sasaki variable is evolved through
//! slow-roll inflation and an instantaneous transition to radiation
//! domination under the CSL master equation. Two independent routes are
//! provided — Lindblad second moments and the Gaussian-wavefunction
//! (Riccati + Itô) unravelling — together with power-spectrum corrections,
//! the collapse criterion and the `(r_c, λ)` exclusion map.

// Negated comparisons (`!(x > 0.0)`) are used on purpose: they also reject
// NaN. Quadrature nodes and reference values carry all printed digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod background;
pub mod commands;
pub mod config;
pub mod coupling;
pub mod ensemble;
pub mod error;
pub mod exclusion;
pub mod jet;
pub mod modes;
pub mod moments;
pub mod ode;
pub mod quad;
pub mod riccati;
pub mod source;
pub mod spectrum;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
