//! Numerical q-fractional calculus on the time scale `T_q = {q^n} ∪ {0}`.
//!
//! * [`qcore`]: grids, q-numbers, q-factorial powers `(t - s)_q^nu`, `Gamma_q`.
//! * [`operators`]: nabla q-derivative and q-integral, the left q-fractional
//!   integral as a lower-triangular kernel, the Caputo derivative and `Omega`.
//! * [`special`]: q-Mittag-Leffler functions and the two q-exponentials.
//! * [`solver`]: Caputo initial value problems of order `0 < alpha <= 1`.
//! * [`gronwall`]: comparison and Gronwall-type bounds as executable checks.
//!
//! Everything operates on functions sampled on a finite [`QGrid`] window,
//! where every operator reduces to an exact finite sum.

pub mod error;
pub mod gronwall;
pub mod operators;
pub mod qcore;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use qcore::{FracOrder, GridFn, QGrid, Tolerance};
