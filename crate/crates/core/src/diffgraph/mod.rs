//! Minimal define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied during a forward pass; calling
//! [`Tape::backward`] replays the records in reverse and returns a
//! [`Gradients`] table. Only the primitives the fusion model needs are
//! provided. [`grad_check`] compares reverse-mode gradients against central
//! finite differences and is the oracle used throughout the test suite.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
