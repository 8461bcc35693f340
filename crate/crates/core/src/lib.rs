//! Spectral simulation, Hilbert-uniqueness null-control synthesis and
//! fixed-point nonlinear control for the defocusing quintic Schrödinger
//! equation `i u_t + Δu - |u|^4 u = φ h` on a periodic box.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod hum;
pub mod io;
pub mod nonlinear;
pub mod propagate;
pub mod random;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Field, SobolevIndex};
pub use grid::Grid;
