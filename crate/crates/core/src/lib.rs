//! Meshless hyperbolic-cross Fourier collocation for sine-Gordon equations
//! on boxes in any number of space dimensions.

pub mod basis;
pub mod colloc;
pub mod config;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod hypercross;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod stepper;

pub use error::{Error, Result};
