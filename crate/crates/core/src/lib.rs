pub mod assign;
pub mod boxspectrum;
pub mod config;
mod csvio;
pub mod datagen;
pub mod degeneracy;
pub mod digest;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod pipeline;
pub mod quadrature;
pub mod rng;
pub mod vae;

pub use error::{Error, Result};
