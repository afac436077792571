//! Removing position-dependent mass from 1D Schrödinger Hamiltonians with a
//! squeeze-like similarity transformation, plus the numerics that check it.
//!
//! The transformation `T = exp(-i(pg + gp)/2)` is generated by an auxiliary
//! function `g(x)`. Conjugating a BenDaniel–Duke Hamiltonian with mass
//! `m = 1/G²` by `T` gives a constant-mass Hamiltonian `p²/2 + W(x)`.
//!
//! Modules, bottom up:
//! - [`fields`]: functions of position with derivatives, grids, sampling.
//! - [`transform`]: the series for `G`, `f`, `F` and the transformed potential.
//! - [`flow`]: an ODE oracle for `f` and `F` that bypasses the series.
//! - [`operators`]: finite-difference Hamiltonians and the discrete `T`.
//! - [`eigensolve`]: Sturm bisection and inverse iteration for tridiagonals.
//! - [`catalog`]: the exponential-mass / Morse example and the squeeze baseline.
//! - [`verify`]: the pass/fail checks and their JSON report.

pub mod catalog;
pub mod eigensolve;
pub mod error;
pub mod fields;
pub mod flow;
pub mod jet;
pub mod operators;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{sample, Domain, GridSpec, ScalarField};
pub use jet::Jet;
