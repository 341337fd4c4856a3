//! Dense matrices, a reverse-mode tape and a finite-difference checker.

pub mod grad_check;
mod matrix;
mod tape;

pub use grad_check::{grad_check, GradCheckOptions, GradCheckReport};
pub use matrix::Matrix;
pub use tape::{
    gelu_grad_scalar, gelu_scalar, softmax_rows, Fault, FlopCounter, Gradients, Section, Tape, Var,
};

/// FLOPs charged per element by elementwise ops. Matrix products cost
/// `2 * m * k * n`; additions, scalings and means cost 1 per element.
pub mod cost {
    pub const GELU: usize = 8;
    pub const LAYER_NORM: usize = 8;
    /// Softmax and log-softmax alike.
    pub const SOFTMAX: usize = 5;
}
