//! Distributed-order nonlocal elasticity for a 1D rod: the continuum model,
//! its mass-spring lattice counterpart, energy bookkeeping and a layered 2D
//! lattice homogenization demo.

pub mod cli;
pub mod donet;
pub mod energy;
pub mod error;
pub mod fractional_ops;
pub mod lattice2d;
pub mod mslm;
pub mod order_distributions;

pub use error::{Error, Result};
