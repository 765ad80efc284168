//! Stationary scattering theory for finite-rank perturbations in rigged
//! Hilbert spaces: limiting absorption, fiber spaces, the sheaf of windowed
//! fibers, wave and scattering matrices, and a time-domain cross-check.

pub mod error;
pub mod fiber;
pub mod lap;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod scattering;
pub mod sheaf;
pub mod timedomain;

pub use error::{Error, Result};
