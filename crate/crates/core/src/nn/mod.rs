//! Minimal reverse-mode autodiff with the layers the surrogate needs:
//! strided 1D convolutions and their transposes, dense layers, pointwise
//! activations, mean-squared error and Adam.

mod adam;
mod gradcheck;
mod kernels;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_check, gradcheck, GradcheckOptions, GradcheckReport};
pub use params::{init_uniform, ParameterSet};
pub use tape::{conv_out_len, Activation, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),
}
