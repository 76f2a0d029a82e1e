//! Numerical lab for the internal functional `sigma |grad u|^p` on the unit
//! square: forward solves, linearization, factorization diagnostics, linear
//! and nonlinear reconstruction, and stability bookkeeping.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod elliptic;
pub mod error;
pub mod factorization;
pub mod forward;
pub mod inversion;
pub mod io;
pub mod mesh;
pub mod par;
pub mod presets;
pub mod solver;
pub mod sparse;
pub mod spectral;
pub mod stability;

pub use error::{HipError, Result};
