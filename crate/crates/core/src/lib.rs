//! Luenberger observers for analytic nonlinear systems built on a dual
//! Koopman realization in the Taylor-coefficient space.

pub mod basis;
pub mod cli;
pub mod design;
pub mod error;
pub mod generator;
pub mod linalg;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
