//! Fock-space, Gaussian-frame and phase-space kernels for mesoscopic degenerate
//! parametric amplification.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditioning;
pub mod error;
pub mod fock;
pub mod frame;
pub mod linalg;
pub mod merit;
pub mod opa;
pub mod phase_space;
pub mod poly;
pub mod trust;

pub use error::{Error, Result};
pub use fock::FockVector;
pub use frame::{GaussianFrame, HamiltonianSpec};
pub use num_complex::Complex64 as C64;
pub use poly::{Ladder, Monomial, OperatorPoly};
pub use trust::Trust;
