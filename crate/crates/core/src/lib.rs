//! Multi-task QoR prediction for and-inverter graphs under synthesis recipes.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common choices.

pub mod aig;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod synth;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};

pub type Model32 = model::Model<f32>;
pub type Model64 = model::Model<f64>;
