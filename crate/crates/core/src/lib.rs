//! Normalized ground states of the planar coupled Schrödinger system
//!
//! ```text
//! -Δu + λ₁u = H_u(u, v),   -Δv + λ₂v = H_v(u, v)   in ℝ²,
//! ∫u² = a²,  ∫v² = b²
//! ```
//!
//! with couplings of exponential critical growth. States are radial and
//! discretized on a truncated radial grid; the ground state is found by a
//! mass-constrained descent on the Pohozaev manifold and then checked against
//! the quantitative inequalities that govern the problem (Trudinger–Moser,
//! Gagliardo–Nirenberg, level and multiplier bounds).
//!
//! The crate is `no_std` (it needs `alloc`). All transcendental functions go
//! through `libm`, so results are bitwise reproducible across platforms.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audit;
mod banded;
pub mod error;
pub mod functional;
pub mod grid;
mod interp;
pub mod manifold;
pub mod nonlinearity;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use functional::{FunctionalValues, StatePair};
pub use grid::{RadialFunction, RadialGrid, Spacing};
pub use manifold::MassConstraint;
pub use nonlinearity::{ModelKind, NonlinearityModel};
pub use solver::{SolveReport, SolveStatus, SolverConfig};
pub use verify::BoundsReport;

/// Exponent arguments above this value are refused by every exponential
/// evaluation (e^700 ≈ 1e304).
pub const EXP_ARG_LIMIT: f64 = 700.0;
