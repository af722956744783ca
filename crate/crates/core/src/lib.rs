//! Finite-dimensional quantum feature maps and the kernels they induce.
//!
//! * [`states`]: amplitude profiles and feature-map embeddings.
//! * [`kernels`]: closed-form kernels and the overlap kernel that checks them.
//! * [`resolution`]: kernel resolution and its optimization at fixed dimension.
//! * [`optics`]: the two-photon linear-optical circuit and coincidence shot noise.
//! * [`svm`]: representer-theorem classifier trained on a precomputed Gram matrix.
//! * [`bench`]: datasets, Gram pipelines, decision grids and report emission.

pub mod bench;
pub mod error;
pub mod kernels;
pub mod optics;
pub mod resolution;
pub mod states;
pub mod svm;

pub use error::{Error, Result};
