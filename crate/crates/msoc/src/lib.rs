//! Reduce-then-optimize toolkit for controlled slow-fast diffusions.
//!
//! The pipeline: eliminate the fast variables of a scale-separated controlled
//! SDE first (homogenization, or block reduction in the linear-quadratic
//! case), solve the optimal control problem of the reduced model, then drive
//! the original dynamics with the reduced feedback. The crate provides
//!
//! * [`sde`] — slow-fast model specs, feedback policies, Euler-Maruyama
//!   first-exit sampling with deterministic per-trajectory seeding;
//! * [`pde`] — 1D solvers for the exit-cost problem, both through the
//!   log-transformed linear equation and by policy iteration;
//! * [`homog`] — effective diffusivity, cell problem, the corrected
//!   multiscale feedback, and the overdamped limit;
//! * [`lqr`] — slow-fast LQR assembly, Newton-Kleinman Riccati solves,
//!   reduced Riccati systems and the block-convergence study;
//! * [`mc`] — Monte-Carlo estimators for the exponential exit weight, control
//!   costs and path-measure relative entropy;
//! * [`exp`] — configuration-driven experiment runners behind the `msoc`
//!   command-line tool.

pub mod error;
pub mod exp;
pub mod homog;
pub mod lqr;
pub mod mc;
pub mod pde;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
