//! bumpforge constructs, refines, and verifies spatially localized ("bump")
//! solutions of the Hammerstein fixed-point equation
//!
//! ```text
//! u(x) = (H_beta u)(x) = integral over R of omega(x - y) f_beta(u(y)) dy
//! ```
//!
//! where `omega` is a symmetric connectivity kernel and `f_beta` a sigmoid
//! firing rate with threshold `h` and steepness `beta`.
//!
//! The pipeline:
//!
//! 1. [`limit_bump`] solves the steep limit `beta = infinity`, where the bump
//!    `u_inf` has a closed form determined by its threshold crossings
//!    `-a_N < ... < -a_1 < a_1 < ... < a_N`, found by Newton's method with an
//!    analytic Jacobian.
//! 2. [`refinement`] corrects `u_inf` into a finite-`beta` solution `u_beta`
//!    by successive approximation: each step applies the integral operator on
//!    a grid over `[-d, d]` and subtracts an N-dimensional boundary
//!    correction built from the crossing data.
//! 3. [`verification`] classifies candidate profiles as (regular) bumps and
//!    certifies fixed-point residuals, with the exact step-function operator
//!    as an oracle in the steep limit.
//! 4. [`fhn_ode`] reproduces the phase-plane shooting comparison for the
//!    FitzHugh-Nagumo steady state, demonstrating why shooting degrades while
//!    the integral method does not.
//!
//! The `bumpforge` binary drives these stages from TOML scenario configs and
//! writes deterministic CSV/JSON artifacts.

pub mod cli;
pub mod config;
pub mod error;
pub mod fhn_ode;
pub mod firing_rates;
pub mod hammerstein;
pub mod kernels;
pub mod limit_bump;
pub mod linalg;
pub mod quad;
pub mod refinement;
pub mod special;
pub mod verification;

pub use error::{Error, Result};
