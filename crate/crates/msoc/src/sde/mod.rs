//! Controlled slow-fast diffusion models and first-exit trajectory sampling.
//!
//! A [`ModelSpec`] describes the pair of SDE blocks
//!
//! ```text
//! dx = [slow_drift(x, y, eps) + control_gain_slow(x, y, eps) u] ds
//!        + beta^-1/2 slow_noise(x, y) dW1
//! dy = [fast_drift(x, y, eps) + control_gain_fast(x, y, eps) u] ds
//!        + beta^-1/2 / eps * fast_noise(x, y) dW2
//! ```
//!
//! where the drift fields carry their own eps^-1 / eps^-2 scalings and the
//! engine applies the `beta^-1/2` (and `1/eps` on the fast block) noise
//! factors. `shared_noise` makes both blocks read the same Wiener increments
//! (`W2 = W1`). Paths are advanced with explicit Euler-Maruyama until the stop
//! region fires or a time cap is hit; all integrals along the path use
//! left-endpoint quadrature.

mod model;
mod simulate;

pub use model::{
    FeedbackPolicy, Field, MatrixField, ModelKind, ModelSpec, PolicyLabel, Predicate, StateCost,
};
pub use simulate::{
    sample_ensemble, seed_for_trajectory, simulate, simulate_with_divergence, TrajectoryResult,
};
pub(crate) use simulate::sample_ensemble_with_divergence;
