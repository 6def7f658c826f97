//! Dense tensors and reverse-mode differentiation.
//!
//! Everything the model computes goes through [`Tape`]; the free functions in
//! [`ops`] are the same kernels without gradient bookkeeping.

mod gradcheck;
pub mod ops;
mod real;
pub mod rng;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use real::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
