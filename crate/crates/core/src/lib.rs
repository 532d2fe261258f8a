//! Simulation and verification tools for Stratonovich SDEs that admit
//! superposition rules (stochastic Lie-Scheffers systems).
//!
//! The crate is organised bottom-up:
//!
//! * [`noise`]: time grids, reproducible Brownian paths, pathwise
//!   Stratonovich integrals and iterated integrals `B^J`.
//! * [`fields`]: exact polynomial vector fields, Lie brackets, diagonal
//!   extensions, involutivity and Lie-closure certificates.
//! * [`sde`]: the Stratonovich-Heun integrator for systems written as
//!   `S_j(X, z) = sum_i b_j^i(X) Y_i(z)`.
//! * [`group`]: matrix Lie groups, the exponential-Euler group integrator,
//!   translation covariance, one-point motions and the sphere reduction.
//! * [`weinorman`]: product-of-exponentials coordinates for group solutions.
//! * [`superpose`]: superposition rules and their numerical verification.
//! * [`flowtaylor`]: the log-flow expansion in iterated integrals.

pub mod error;
pub mod expm;
pub mod fields;
pub mod flowtaylor;
pub mod group;
pub mod io;
pub mod noise;
pub mod sde;
pub mod superpose;
pub mod weinorman;

pub use error::{Error, Result};
