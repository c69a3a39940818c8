//! Minimal dense feed-forward networks with hand-written reverse mode.
//!
//! Everything is `f64`. Shape problems surface as
//! [`Error::Dimension`](crate::Error::Dimension) rather than panics.

pub mod activation;
pub mod adam;
pub mod container;
pub mod dense;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;

pub use activation::{sigmoid, softplus, Activation};
pub use adam::{AdamState, Direction};
pub use dense::DenseLayer;
pub use matrix::Matrix;
pub use mlp::{Backprop, Layer, Mlp, Trace};
