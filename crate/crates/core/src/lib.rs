//! Lagrangian mechanics on Lie algebroids with linear and nonlinear nonholonomic constraints.

pub mod algebroid;
pub mod bracket;
pub mod constrained_linear;
pub mod constrained_nonlinear;
pub mod error;
pub mod integrator;
pub mod lagrangian;
pub mod model;
pub mod numerics;
pub mod reduction;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use model::System;
