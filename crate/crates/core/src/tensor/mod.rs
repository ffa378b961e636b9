//! Dense double-precision tensors, initialization, optimizer and gradient checking.

mod adam;
pub mod gradcheck;
mod init;
mod matrix;
pub mod ops;

pub use adam::{adam_step, AdamState};
pub use gradcheck::grad_check;
pub use init::glorot_init;
pub use matrix::DenseMatrix;
pub(crate) use matrix::{axpy, dot};

/// A learnable tensor together with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

impl Param {
    pub fn new(value: DenseMatrix) -> Self {
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }
}
