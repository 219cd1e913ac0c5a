//! Moment-tensor learning of one-hidden-layer ReLU networks under Gaussian
//! inputs, with the Hermite, symmetric-tensor and Schur-polynomial machinery
//! it relies on.

pub mod error;
pub mod symtensor;

pub use error::{Error, Result};
pub use symtensor::SymTensor;
pub mod hermite;
pub mod quadrature;
pub mod rng;
pub mod schur;
pub mod datagen;
pub mod moments;
pub mod learner;
pub mod evalharness;
pub mod verify;
pub mod cli;
