pub mod characteristics;
pub mod error;
pub mod hypothesis;
pub mod quadrature;
pub mod singular_integral;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
