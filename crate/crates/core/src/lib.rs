//! Monte Carlo laboratory for nodal domains of random spherical harmonics.
//!
//! The crate builds degree-n random spherical harmonics with arbitrary
//! mean-zero unit-variance i.i.d. coefficients, counts their nodal domains
//! on grids, estimates the nodal-domain density constant from sphere and
//! plane ensembles, and runs the statistical diagnostics that back the
//! universality experiment.

pub mod basis;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod nodal;
pub mod quadrature;
pub mod rwm;
pub mod specfn;
pub mod stats;

pub use error::{Error, Result};
