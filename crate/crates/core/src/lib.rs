//! Optimal control of a damped nonlinear elastic bar with a volume constraint
//! and a time-warped switching interval.

pub mod adjoint;
pub mod config;
pub mod error;
pub mod fem;
pub mod forward;
pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod selftest;
pub mod tensor;
pub mod warp;

pub use error::{Error, Result};
