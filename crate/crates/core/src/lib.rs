//! Linearized Landau equation with specular reflection: velocity-space
//! operators, semi-Lagrangian transport, Strang time stepping and the
//! measurements used to check energy, coercivity and decay estimates.

pub mod config;
pub mod convolution;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod integrator;
pub mod io;
pub mod kernel;
pub mod krylov;
pub mod norms;
pub mod operators;
pub mod projection;
pub mod quadrature;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{maxwellian, sqrt_maxwellian, VelocityGrid};
