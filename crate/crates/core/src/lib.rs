//! Separability of two-mode Gaussian measurements preceded by single-mode
//! Gaussian error channels, in the covariance-matrix formalism.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the decision
//! procedure, the swapping simulation and the CLI use.

// `!(x >= lo)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod criteria;
pub mod decision;
pub mod error;
pub mod gaussian;
pub mod measurements;
pub mod scalar;
pub mod swapping_sim;
pub mod verify;

pub use channels::{
    CanonicalForm, ChannelSpec, GaussianChannel, HolevoType, Primitive, Quadrature,
};
pub use decision::{DecisionReport, Verdict};
pub use error::{Error, Result};
pub use gaussian::{GaussianState, SymplecticMatrix};
pub use scalar::Real;
pub use swapping_sim::{SwapParams, SwapResult};

pub type GaussianState64 = GaussianState<f64>;
pub type SymplecticMatrix64 = SymplecticMatrix<f64>;
pub type GaussianChannel64 = GaussianChannel<f64>;
pub type CanonicalForm64 = CanonicalForm<f64>;
pub type DecisionReport64 = DecisionReport<f64>;
pub type SwapParams64 = SwapParams<f64>;
pub type SwapResult64 = SwapResult<f64>;
