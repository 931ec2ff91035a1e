//! Dense f64 tensors with reverse-mode differentiation.
//!
//! Everything is 64-bit and define-by-run: a [`GradientTape`] records each
//! op as it executes and replays the record backwards to accumulate
//! gradients. Tensors are immutable values; no op mutates its inputs. Any
//! op whose result contains a NaN or infinity fails with
//! [`NumericsError::NonFinite`].

mod check;
mod tape;
mod tensor;

pub use check::{check_gradient, check_gradient_multi};
pub use tape::{GradientTape, ParamId, ParamStore, Value};
pub use tensor::Tensor;

use alloc::vec::Vec;
use core::fmt;

/// Errors raised by tensor and tape operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NumericsError {
    /// Operand shapes are incompatible for the op.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An op produced a NaN or infinite element.
    NonFinite { op: &'static str },
    /// A row/column/element index is outside the tensor.
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    /// Backward was started from a non-scalar value.
    NotScalar { op: &'static str, shape: Vec<usize> },
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch {lhs:?} vs {rhs:?}")
            }
            NumericsError::NonFinite { op } => {
                write!(f, "{op}: produced a non-finite value")
            }
            NumericsError::IndexOutOfRange { op, index, bound } => {
                write!(f, "{op}: index {index} out of range (bound {bound})")
            }
            NumericsError::NotScalar { op, shape } => {
                write!(f, "{op}: expected a scalar, got shape {shape:?}")
            }
        }
    }
}

impl core::error::Error for NumericsError {}
