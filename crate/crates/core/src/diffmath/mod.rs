//! Numerical building blocks: dense matrices, the softplus activation, and a
//! central-difference gradient used as the reference for every analytic derivative.

mod fd;
mod matrix;
mod softplus;

pub use fd::fd_gradient;
pub use matrix::{lu_invert, Matrix};
pub use softplus::{softplus, softplus_d1, softplus_d2, softplus_with_d1};

/// A value together with its gradient with respect to some set of seeds
/// (state coordinates for `DW`, parameters for `∂L/∂θ`).
#[derive(Debug, Clone, PartialEq)]
pub struct DualBundle {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl DualBundle {
    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Self { value, grad }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

/// Relative error `|a - b| / (1 + |b|)` used in all derivative comparisons.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
