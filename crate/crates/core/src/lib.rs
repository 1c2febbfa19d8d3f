pub mod error;
pub mod manifold;
pub mod sets;
pub mod bifunction;
pub mod solvers;
pub mod applications;

pub use error::{Error, Result};
