//! Explicit Runge-Kutta integration along complex time grids.
//!
//! Time is allowed to travel through the complex plane: a grid is any
//! finite chain of complex nodes, and a one-step method advances along
//! its steps τ_j = t_{j+1} − t_j exactly as it would on the real line.
//! Three constructions make that detour worthwhile:
//!
//! - **Superconvergent paths.** Equidistant discretizations of the circle
//!   segment γ^p between two times have steps proportional to consecutive
//!   n(p+1)-th roots of unity, so Σ_j τ_j^{p+1} = 0 and a method of order
//!   p gains one extra order at the terminal point of a linear problem
//!   ([`grids`]).
//! - **Symmetric grids.** When the step multiset is closed under complex
//!   conjugation and the data are real, the terminal value is real again
//!   even though every intermediate value wanders off the axis
//!   ([`grids::symmetric_witness`], [`analysis::reality_report`]).
//! - **Composition methods.** The steps of a normalized superconvergent
//!   grid serve as complex coefficients σ_l that compose k micro steps
//!   into one macro step of higher order; iterating the idea yields
//!   arbitrary orders and fractal-shaped micro grids ([`composition`]).
//!
//! [`problems`] supplies linear systems with their exact flow plus the
//! Arenstorf restricted three-body orbit as a nonlinear benchmark, and
//! [`analysis`] measures empirical convergence orders, leading error
//! terms, and reality defects.

pub mod analysis;
pub mod composition;
pub mod error;
pub mod grids;
pub mod linalg;
pub mod problems;
pub mod rk;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits in lowercase scientific
/// notation; the shared number format of every CSV writer in this crate
/// (round-trips f64 exactly).
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
