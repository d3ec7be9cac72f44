//! Blind deconvolution and blind super-resolution through nuclear-norm lifting.
//!
//! The unknown filter `h` (length `L`) and the coefficient vector `m`
//! (length `K*N`, one block per input channel) are lifted into the rank-one
//! matrix `X0 = h m*`. Fourier-domain measurements of the `N` circular
//! convolutions are linear in `X0`, so recovery becomes a nuclear-norm
//! minimization over `L x KN` matrices.
//!
//! Module map:
//!
//! * [`spectral`]: unitary DFT, circular convolution, Gaussian ideal low-pass filters.
//! * [`lifting`]: random subspace ensembles, measurement synthesis, the lifted
//!   operator `A`, its adjoint and the normal operator `A*A`.
//! * [`tangent`]: the tangent space at `h m*`, projectors and coherences.
//! * [`solver`]: factored augmented-Lagrangian solver driven by L-BFGS.
//! * [`certificate`]: dual-certificate ansatz construction and checks.
//! * [`superres`]: 1D blind super-resolution of wavelet trains.
//! * [`harness`]: seeded experiment runner and CSV output.
//! * [`io`]: the `LDCX` binary matrix format and instance files.
//! * [`selftest`]: kernel checks against slow reference implementations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod certificate;
pub mod error;
pub mod harness;
pub mod io;
pub mod lifting;
pub mod linalg;
pub mod rng;
pub mod selftest;
pub mod solver;
pub mod spectral;
pub mod superres;
pub mod tangent;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
