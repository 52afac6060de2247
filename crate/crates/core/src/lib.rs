//! Collective spontaneous emission of two-level atoms near a photonic band edge.
//!
//! Memory kernels, exact low-excitation dynamics, mean-field Volterra evolution,
//! quantum-fluctuation ensembles, colored-noise simulation and a discrete-mode
//! bath used as an independent oracle.

pub mod bath_oracle;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod lowexc;
pub mod meanfield;
pub mod noise;
pub mod quad;
pub mod quantum;
pub mod series;
pub mod special;
pub mod volterra;

pub use error::{Error, Result};
pub use kernel::BandEdgeModel;
pub use num_complex::Complex64;
