//! A small reverse-mode automatic differentiation engine over dense NCHW
//! tensors, sized for training compact convolutional networks on one CPU core.
//!
//! Values are recorded on a [`Tape`]; parameters live in a [`ParamStore`] and
//! are bound into a tape through a [`Session`]. Matrix products go through
//! `matrixmultiply`, convolutions are lowered to im2col + GEMM.

pub mod kernels;
pub mod optim;
pub mod params;
mod real;
pub mod tape;
mod tensor;

pub use optim::Sgd;
pub use params::{ParamEntry, ParamId, ParamStore, Session};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{numel, Shape, Tensor};
