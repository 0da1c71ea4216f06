//! Deterministic simulator of federated learning with spiking neural networks
//! over noisy, bandwidth-limited communication channels.
//!
//! Clients train dense SNNs (or reference ANNs) locally, exchange Top-κ
//! sparsified parameter payloads with a central server under fixed (FLTS) or
//! dynamically reduced (FLDR) compression rates, and every link may perturb
//! the transmitted values with Gaussian noise. Everything is reproducible
//! from a single master seed.
//!
//! The numeric core is generic over the scalar type (`f32`/`f64` via
//! [`Scalar`]); the simulation engine runs on [`S`] (`f64`).

pub mod channel;
pub mod compression;
pub mod config;
pub mod data;
pub mod error;
pub mod fl;
pub mod seed;
pub mod snn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};

/// Scalar type used by the simulation engine. The wire format stays 32-bit
/// regardless (see [`compression`]).
pub type S = f64;

/// Engine-precision tensor.
pub type TensorS = Tensor<S>;
