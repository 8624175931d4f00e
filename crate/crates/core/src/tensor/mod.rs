//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A forward pass records every operation on a [`Tape`]; calling
//! [`Tape::backward`] on a scalar output sweeps the tape in reverse and
//! returns exact analytic gradients for every node.

mod conv;
mod gemm;
mod loss;
mod ops;
mod tape;
#[allow(clippy::module_inception)]
mod tensor;

pub use conv::Padding;
pub use loss::BCE_EPS;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

