//! Dense rank-4 arrays and the reverse-mode tape built on top of them.
//!
//! [`Array4`] is a plain value in row-major `(n, c, h, w)` order. [`Tensor4`]
//! wraps a shared `Array4` together with an optional link into a [`Tape`];
//! only tensors created with `requires_grad` (or derived from one) carry a
//! link, so graph-free evaluation records nothing.

mod array;
pub mod gradcheck;
mod ops;
mod real;
mod tape;

pub use array::{Array4, Shape};
pub use ops::Elementwise;
pub use real::Real;
pub use tape::{Fault, Gradients, NodeId, Tape, Tensor4};
