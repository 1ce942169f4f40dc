//! Piecewise-linear interval maps, odd-period dynamics, oscillation growth
//! rates and depth separation bounds for small ReLU networks.

pub mod covering;
pub mod dynamics;
pub mod exec;
pub mod mlp;
pub mod pl;
pub mod rates;
pub mod separation;

pub use exec::Exec;
pub use pl::{PLFunction, PlError};
