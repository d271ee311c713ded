//! Simulation library for cold atoms in a rotating ring lattice.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analysis;
pub mod bands;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod ode;
pub mod propagator;
pub mod protocols;
pub mod quadrature;
pub mod reduction;
pub mod reproduce;
pub mod special;
pub mod tridiag;
pub mod wavefunction;

pub use error::{Error, Result};
pub use model::{DriveSchedule, Program, RingLatticeParams, Segment, UnitSystem};
