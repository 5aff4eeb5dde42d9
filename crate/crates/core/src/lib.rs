//! Deep-network Lyapunov functions for nonlinear ODE systems.
//!
//! The crate trains a compositional two-hidden-layer network `W(x; θ)` so that
//!
//! - `α₁(‖x‖) ≤ W(x) ≤ α₂(‖x‖)` on the box `[-1, 1]ⁿ`, and
//! - the orbital derivative satisfies `DW(x)·f(x) ≤ -‖x‖²` (or `= -‖x‖²` for the
//!   equation-type loss),
//!
//! and then checks the result by sampling, bound checks and trajectory integration.
//!
//! Modules, bottom-up:
//!
//! - [`diffmath`]: small dense matrices, softplus and its derivatives, finite differences
//! - [`dynamics`]: vector fields (expression DSL, built-in systems, linear transforms)
//! - [`network`]: the compositional architecture with closed-form derivatives
//! - [`loss`]: pointwise and batch losses with exact parameter gradients
//! - [`trainer`]: sampling, Adam, and the epoch loop
//! - [`verifier`]: a-posteriori checks, RK4 trajectories, slice export

pub mod diffmath;
pub mod dynamics;
mod error;
pub mod points;
pub mod loss;
pub mod network;
pub mod trainer;
pub mod verifier;

pub use error::{Error, Result};
pub use points::PointSet;
