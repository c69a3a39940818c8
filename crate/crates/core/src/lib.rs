//! Permutation-equivariant weight-sharing networks applied to predictive
//! resource allocation (PRA).
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense layers, Softplus, manual backprop, Adam, gradient checks
//!   and a portable model container.
//! - [`equivariant`]: the two-sub-matrix block layer whose dense expansion has
//!   `U` on the diagonal and `V` elsewhere, plus permutation helpers and a
//!   reference family of equivariant functions for testing.
//! - [`sim`]: a line-of-cells wireless simulator producing prediction-window
//!   scenarios (average rates, associations, file sizes).
//! - [`lp`]: the exact plan LP, a two-phase dense simplex solver and plan
//!   verification.
//! - [`trainer`]: plan and multiplier networks, the QoS normalization, the
//!   empirical Lagrangian, primal-dual training and gap evaluation.
//! - [`edf`]: the earliest-deadline-first slot scheduler and plan execution.
//! - [`io`]: config files, line-delimited datasets and CSV output.

pub mod edf;
pub mod equivariant;
pub mod error;
pub mod io;
pub mod lp;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
