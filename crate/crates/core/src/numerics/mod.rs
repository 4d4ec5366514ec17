//! Minimal reverse-mode differentiation engine.
//!
//! Values live in [`Tensor`]s. Trainable and frozen weights are registered in
//! a [`ParamStore`]. A forward pass records primitive applications on a
//! [`Graph`] (the tape) which borrows the store; [`Graph::backward`] walks the
//! tape in reverse and returns [`Gradients`], which the store accumulates
//! until [`ParamStore::zero_grad`] is called.

mod adam;
mod gradcheck;
mod graph;
pub mod init;
mod params;
mod real;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    finite_difference_check, param_gradient_check, reference_gradient_check, reference_param_gradient_check,
    ParamFunction, ScalarFunction,
};
pub use graph::{Gradients, Graph, Primitive, Var};
pub use params::{Param, ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;
