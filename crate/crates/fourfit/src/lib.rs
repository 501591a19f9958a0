//! Reconstruction of smooth and piecewise-smooth functions on the unit
//! interval/square/cube from truncated Fourier-series coefficients.
//!
//! The approximant is a (piecewise) tensor-product B-spline whose Fourier
//! coefficients are matched to the given ones in least squares. Jump
//! locations in 1-D and singularity curves in 2-D (represented as spline
//! level sets) are detected from the Gibbs phenomenon of the partial sums
//! and then refined by quasi-Newton iterations on the matching objective.
//!
//! Module map:
//! - [`spline`] — uniform B-spline bases, spline models, level-set splines
//! - [`fourier`] — Fourier coefficient tables, synthesis, partial sums, I/O
//! - [`transforms`] — Fourier coefficients of (restricted) basis functions
//! - [`solver`] — normal equations, pseudoinverse solve, iterative refinement
//! - [`detect`] — Gibbs-based jump and curve initialization
//! - [`reconstruct`] — end-to-end smooth and piecewise fitting procedures
//! - [`cli`] — command front end and experiment presets

pub mod cli;
pub mod cutcell;
pub mod detect;
pub mod error;
pub mod fourier;
pub mod metrics;
pub mod osc;
pub mod reconstruct;
pub mod solver;
pub mod spline;
pub mod transforms;

pub use error::{Error, Result};
