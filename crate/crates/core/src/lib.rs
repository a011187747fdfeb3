// Parameter guards are written as `!(x > 0.0)` so NaN inputs fail them too;
// the positive-form comparison clippy suggests would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Fractional bounded-variation calculi and image denoising.
//!
//! Two discrete fractional calculi live side by side:
//!
//! - the Riesz form ([`riesz`]): potential, fractional Laplacian, gradient,
//!   and divergence, realized spectrally and by singular-kernel quadrature,
//!   with the divergence available as the exact negative transpose of the
//!   gradient;
//! - the two-point form ([`gagliardo`]): pair-indexed vector fields, the
//!   difference-quotient gradient, its adjoint divergence, the W^{alpha,1}
//!   seminorm, and the fractional perimeter.
//!
//! On top of these sit the variation functionals ([`variation`]), mollifiers
//! and density pipelines ([`approx`]), and the predual denoising solvers with
//! duality-gap certification ([`denoise`]). [`verify`] bundles the
//! self-checking suites run by the command-line `verify` command.

pub mod approx;
pub mod denoise;
pub mod domain;
pub mod error;
pub mod fft;
pub mod gagliardo;
pub mod grid;
pub mod riesz;
pub mod special;
pub mod variation;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField};
