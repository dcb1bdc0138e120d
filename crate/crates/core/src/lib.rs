pub mod cell;
pub mod checks;
pub mod convex;
pub mod dirichlet;
pub mod error;
pub mod fields;
pub mod harness;
pub mod integrand;
pub mod runner;
pub mod spectral;
pub mod splitting;

pub use error::{Error, Result};
