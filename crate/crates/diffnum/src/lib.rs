//! Small dense-tensor engine with tape-based reverse-mode differentiation.
//!
//! Every value is a row-major `f64` matrix ([`Tensor`]). Computations are
//! recorded on a [`Tape`] as they execute; [`Tape::backward`] then walks the
//! record in reverse and returns a [`Gradients`] map for every leaf.
//!
//! ```
//! use diffnum::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).item(), 6.0);
//! ```
//!
//! Graph sparsity is expressed with [`Tape::gather_rows`] and
//! [`Tape::scatter_add_rows`] over explicit index lists; there are no sparse
//! matrices.

mod adam;
mod error;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::{DiffError, Result};
pub use gradcheck::{grad_check, relative_error};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
