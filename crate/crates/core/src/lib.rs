//! Pseudospectral exponential integrators for the rotational Gross-Pitaevskii
//! equation in rotating Lagrangian coordinates.

pub mod checks;
pub mod config;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod model;
pub mod oracle;
pub mod spectral;
pub mod splitting;

pub use error::{Error, Result};
