//! Chordal Loewner evolutions, stochastic Komatu-Loewner evolutions on
//! standard slit domains, annulus SLE, and the Monte Carlo and statistical
//! tooling around them.

pub mod abm_mc;
pub mod annulus;
pub mod bmd_grid;
pub mod bmd_kernel;
pub mod chordal;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod skle;

pub use error::{Error, Result};
pub use geometry::{ComplexPoint, SlitVector};
