//! Numerical tools for the periodically forced relativistic pendulum
//!
//! The pendulum equation
//!
//! ```text
//! d/dt ( x' / sqrt(1 - x'^2) ) + a sin x = f(t)
//! ```
//!
//! with `f` a `T`-periodic zero-mean forcing is rewritten, after removing the
//! mean rotation `K = 2Nπ/T` and passing to the conjugate momentum, as a
//! planar Hamiltonian system on the cylinder that has no singularities.
//! Solutions making `N` full turns per period then become plain fixed points
//! of the time-`T` return map.
//!
//! The crate provides, layer by layer:
//!
//! * [`model`] — parameters, forcing series, coordinate changes, vector
//!   field and energies;
//! * [`integrate`] — an adaptive embedded Runge–Kutta 5(4) integrator with
//!   dense output, the variational (tangent) flow and the action integral;
//! * [`poincare`] — the return map and its diagnostics: generating
//!   function, strip bounds, boundary twist, twist margin, curve
//!   intersections;
//! * [`solver`] — fixed-point location, fixed-point indices, linear
//!   stability and degenerate-continuum detection;
//! * [`autonomous`] — closed-form and quadrature oracles for the unforced
//!   pendulum (energy classification, libration periods, running orbits);
//! * [`verify`] — the runtime invariant suites behind the `verify` CLI
//!   subcommand.

pub mod autonomous;
pub mod fmt;
pub mod integrate;
pub mod model;
pub mod poincare;
pub mod solver;
pub mod verify;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
