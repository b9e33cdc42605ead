//! NeXt-TDNN speaker-verification inference engine and evaluation toolkit.
//!
//! Implements the full embedding pipeline from raw 16 kHz audio to
//! 192-dimensional speaker embeddings (log-mel front end, TS-ConvNeXt
//! backbone, multi-layer feature aggregation, attentive statistics
//! pooling), plus trial scoring (cosine, adaptive s-norm) and the
//! EER / minDCF metrics, parameter/MAC cost accounting, and a binary
//! checkpoint format.
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the default and the on-disk format are `f32`.

pub mod blocks;
pub mod ckpt;
pub mod config;
pub mod cost;
pub mod error;
pub mod eval;
pub mod features;
pub mod init;
pub mod model;
pub mod scalar;
pub mod tensor;
pub mod wav;

pub use config::{BlockVariant, ModelConfig};
pub use error::{Error, Result};
pub use model::{Embedding, Model};
pub use scalar::Real;

/// Single-precision tensor, the default carrier throughout the engine.
pub type Tensor2D32 = tensor::Tensor2D<f32>;
/// Double-precision tensor, mostly useful for cross-checking kernels.
pub type Tensor2D64 = tensor::Tensor2D<f64>;
