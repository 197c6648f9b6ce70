//! Numeric kernels over [`Tensor`](crate::tensor::Tensor).
//!
//! All kernels are pure functions with a fixed accumulation order, so equal
//! inputs always give bitwise-equal outputs.

mod conv;
mod deform;
mod norm;
mod pool;
mod shuffle;

pub use conv::{conv2d, depthwise_conv2d, ConvParams};
pub use deform::{bilinear_sample, deformable_conv2d, OffsetField};
pub use norm::{batch_norm, relu, BnParams};
pub use pool::{avg_pool, max_pool};
pub use shuffle::{channel_shuffle, shuffle_permutation};
