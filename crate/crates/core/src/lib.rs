//! Spectral-Galerkin toolkit for small-noise stochastic evolution equations
//!
//! ```text
//! dX = (A X + B(X)) dt + eps dW,   X(0) = x,
//! ```
//!
//! with a diagonal self-adjoint operator `A` (eigenvalues `-lambda_n`,
//! `lambda_n > 0` nondecreasing), a continuous drift `B` that need not be
//! Lipschitz, and a small cylindrical noise. The crate provides the pieces
//! needed to study the small-noise (large-deviation) behaviour of such
//! equations numerically:
//!
//! - [`spectral`]: mode fields, the operator spectrum, semigroup, fractional
//!   norms, and the trace-class admissibility gate;
//! - [`noise`]: Brownian increment blocks and the exact-in-law stochastic
//!   convolution, plus tail diagnostics for its fractional norms;
//! - [`drift`]: a catalog of drift maps with declared growth envelopes and the
//!   cutoff/mollify/recutoff pipeline producing bounded Lipschitz
//!   approximations, with an empirical error scan over fractional balls;
//! - [`dynamics`]: exponential Euler integration, the pathwise noise-to-state
//!   map and its inverse, exponential tilting, and discrete Girsanov weights;
//! - [`action`]: the rate functional on discrete paths, event observables, and
//!   the exact gradient of the quadrature;
//! - [`minimize`]: the minimum action method (projected Barzilai-Borwein
//!   descent with event constraints, multi-start, margin probes);
//! - [`rare_event`]: plain and importance-sampled probability estimates,
//!   noise-size sweeps, and verdicts comparing `-eps^2 log p` with the
//!   minimal action.
//!
//! Everything that draws randomness takes an explicit seed and derives
//! per-task streams from it, so results are reproducible and independent of
//! worker scheduling.

pub mod action;
pub mod drift;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod minimize;
pub mod noise;
pub mod rare_event;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use grid::{PathOnGrid, TimeGrid};
pub use spectral::{ModeField, SpectralOperator};
