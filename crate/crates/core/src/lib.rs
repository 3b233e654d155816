//! Porous medium model laboratory.
//!
//! Finite-window tools for the one-dimensional kinetically constrained
//! exclusion process in which the bond `{x, x+1}` exchanges its occupations at
//! rate `c_x(η)`, positive exactly when `η(x-1) + η(x+2) > 0`. The default
//! family is the porous medium model `c_x(η) = η(x-1) + η(x+2)`.
//!
//! * [`lattice`]: configurations, swaps, constraint families and their validator.
//! * [`classify`]: frozen/active structure and the invariant sets of infinite
//!   eventually-periodic configurations.
//! * [`connect`]: reachability under allowed jumps, the transport planner and
//!   exhaustive certification suites.
//! * [`exact`]: generators on enumerated state spaces, communicating classes
//!   and stationary measures.
//! * [`kmc`]: event-driven continuous-time simulation on rings.
//! * [`hydro`]: explicit solver for `∂_t ρ = ∂_xx(ρ²)` and the diffusive-scaling
//!   comparison against simulated density profiles.
//! * [`entropy`]: relative entropy, dissipation and flux functionals.

pub mod classify;
pub mod connect;
pub mod entropy;
pub mod error;
pub mod exact;
pub mod hydro;
pub mod kmc;
pub mod lattice;

pub use error::{Error, Result};
pub use lattice::{Boundary, Configuration, ConstraintFamily, Site};
