use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pde::{BoundaryKind, ScalarFn, ScalarModel1D};

/// Drift-like field `(x, y, eps) -> out`; also used for control-gain
/// matrices, written row-major into `out`.
pub type Field = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// Noise matrix field `(x, y) -> out` (row-major, rows = block dim).
pub type MatrixField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Scalar running cost `(x, y) -> G`.
pub type StateCost = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Stop predicate: true outside the open continuation set O.
pub type Predicate = Arc<dyn Fn(&[f64], &[f64]) -> bool + Send + Sync>;

/// Structural tag recording which of the worked model families a spec was
/// built from; reduction routines use it to recover the scalar coefficients.
#[derive(Clone)]
pub enum ModelKind {
    Generic,
    /// Two-variable underdamped model `dx = y/eps ds`,
    /// `dy = (sqrt(2) u / eps - phi'(x)/eps - y/eps^2) ds + sqrt(2)/(eps sqrt(beta)) dw`.
    Langevin { phi_prime: ScalarFn, cost: ScalarFn },
    /// One- or two-variable diffusion in `phi0(x) + p(x/eps)`.
    PeriodicTwoScale {
        phi0_prime: ScalarFn,
        p: ScalarFn,
        p_prime: ScalarFn,
        cost: ScalarFn,
    },
}

impl std::fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Generic => write!(f, "Generic"),
            ModelKind::Langevin { .. } => write!(f, "Langevin"),
            ModelKind::PeriodicTwoScale { .. } => write!(f, "PeriodicTwoScale"),
        }
    }
}

/// A controlled slow-fast diffusion with running cost and stop region.
#[derive(Clone)]
pub struct ModelSpec {
    pub dim_slow: usize,
    pub dim_fast: usize,
    pub control_dim: usize,
    pub noise_dim_slow: usize,
    pub noise_dim_fast: usize,
    /// Both blocks driven by the same Wiener increments (requires equal
    /// noise dimensions).
    pub shared_noise: bool,
    pub epsilon: f64,
    pub beta: f64,
    /// Declared upper bound M1 for the running cost; enforced along paths.
    pub cost_bound: f64,
    pub slow_drift: Field,
    pub fast_drift: Field,
    pub slow_noise: MatrixField,
    pub fast_noise: MatrixField,
    pub control_gain_slow: Field,
    pub control_gain_fast: Field,
    pub running_cost: StateCost,
    pub stop_region: Predicate,
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Precondition(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Precondition(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.cost_bound >= 0.0) {
            return Err(Error::Precondition(format!(
                "cost bound must be nonnegative, got {}",
                self.cost_bound
            )));
        }
        if self.dim_slow == 0 && self.dim_fast == 0 {
            return Err(Error::Shape("model has no state variables".into()));
        }
        if self.shared_noise && self.noise_dim_slow != self.noise_dim_fast {
            return Err(Error::Shape(format!(
                "shared noise requires equal noise dimensions, got {} and {}",
                self.noise_dim_slow, self.noise_dim_fast
            )));
        }
        let unique = self.unique_noise_dim();
        if self.control_dim != unique {
            return Err(Error::Shape(format!(
                "control dimension {} must match the driving noise dimension {} (needed for the path-measure weight)",
                self.control_dim, unique
            )));
        }
        Ok(())
    }

    /// Number of independent Wiener components driving the system.
    pub fn unique_noise_dim(&self) -> usize {
        if self.shared_noise {
            self.noise_dim_slow
        } else {
            self.noise_dim_slow + self.noise_dim_fast
        }
    }

    pub fn dim(&self) -> usize {
        self.dim_slow + self.dim_fast
    }

    /// Copy of the model with a different scale separation; the field
    /// closures receive the new value at evaluation time.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut m = self.clone();
        m.epsilon = epsilon;
        m
    }

    /// Recommended Euler-Maruyama step for the fast block, `eps^2 / 10`.
    /// A rule of thumb only: the fast drift is O(eps^-2), so anything much
    /// coarser is unstable. Callers may override.
    pub fn default_dt(&self) -> f64 {
        if self.dim_fast > 0 || matches!(self.kind, ModelKind::PeriodicTwoScale { .. }) {
            self.epsilon * self.epsilon / 10.0
        } else {
            1e-3
        }
    }

    /// Underdamped double-well model in the two-variable form, position x
    /// and rescaled velocity y. The control and the noise act on the velocity
    /// block only, both with gain sqrt(2)/eps.
    pub fn langevin(
        phi_prime: ScalarFn,
        cost: ScalarFn,
        cost_bound: f64,
        beta: f64,
        epsilon: f64,
        stop: Arc<dyn Fn(f64) -> bool + Send + Sync>,
    ) -> Self {
        let pp = phi_prime.clone();
        let cost_x = cost.clone();
        ModelSpec {
            dim_slow: 1,
            dim_fast: 1,
            control_dim: 1,
            noise_dim_slow: 0,
            noise_dim_fast: 1,
            shared_noise: false,
            epsilon,
            beta,
            cost_bound,
            slow_drift: Arc::new(|_x, y, eps, out| out[0] = y[0] / eps),
            fast_drift: Arc::new(move |x, y, eps, out| {
                out[0] = -pp(x[0]) / eps - y[0] / (eps * eps)
            }),
            slow_noise: Arc::new(|_, _, _out| {}),
            fast_noise: Arc::new(|_, _, out| out[0] = std::f64::consts::SQRT_2),
            control_gain_slow: Arc::new(|_, _, _, out| out[0] = 0.0),
            control_gain_fast: Arc::new(|_, _, eps, out| out[0] = std::f64::consts::SQRT_2 / eps),
            running_cost: Arc::new(move |x, _y| cost_x(x[0])),
            stop_region: Arc::new(move |x, _y| stop(x[0])),
            kind: ModelKind::Langevin { phi_prime, cost },
        }
    }

    /// Diffusion in the two-scale potential `phi0(x) + p(x/eps)`, lifted to
    /// the (x, y) pair with y = x/eps; slow and fast block share the same
    /// noise and control.
    pub fn periodic_two_scale(
        phi0_prime: ScalarFn,
        p: ScalarFn,
        p_prime: ScalarFn,
        cost: ScalarFn,
        cost_bound: f64,
        beta: f64,
        epsilon: f64,
        stop: Arc<dyn Fn(f64) -> bool + Send + Sync>,
    ) -> Self {
        let pp = p_prime.clone();
        let p0 = phi0_prime.clone();
        let pp2 = p_prime.clone();
        let p02 = phi0_prime.clone();
        let cost_x = cost.clone();
        ModelSpec {
            dim_slow: 1,
            dim_fast: 1,
            control_dim: 1,
            noise_dim_slow: 1,
            noise_dim_fast: 1,
            shared_noise: true,
            epsilon,
            beta,
            cost_bound,
            slow_drift: Arc::new(move |x, y, eps, out| out[0] = -pp(y[0]) / eps - p0(x[0])),
            fast_drift: Arc::new(move |x, y, eps, out| {
                out[0] = -pp2(y[0]) / (eps * eps) - p02(x[0]) / eps
            }),
            slow_noise: Arc::new(|_, _, out| out[0] = std::f64::consts::SQRT_2),
            fast_noise: Arc::new(|_, _, out| out[0] = std::f64::consts::SQRT_2),
            control_gain_slow: Arc::new(|_, _, _, out| out[0] = std::f64::consts::SQRT_2),
            control_gain_fast: Arc::new(|_, _, eps, out| out[0] = std::f64::consts::SQRT_2 / eps),
            running_cost: Arc::new(move |x, _y| cost_x(x[0])),
            stop_region: Arc::new(move |x, _y| stop(x[0])),
            kind: ModelKind::PeriodicTwoScale {
                phi0_prime,
                p,
                p_prime,
                cost,
            },
        }
    }

    /// The same two-scale diffusion in its exact one-variable form,
    /// `dx = -(phi0'(x) + p'(x/eps)/eps) ds + sqrt(2) u ds + sqrt(2/beta) dw`.
    pub fn periodic_one_var(
        phi0_prime: ScalarFn,
        p: ScalarFn,
        p_prime: ScalarFn,
        cost: ScalarFn,
        cost_bound: f64,
        beta: f64,
        epsilon: f64,
        stop: Arc<dyn Fn(f64) -> bool + Send + Sync>,
    ) -> Self {
        let pp = p_prime.clone();
        let p0 = phi0_prime.clone();
        let cost_x = cost.clone();
        ModelSpec {
            dim_slow: 1,
            dim_fast: 0,
            control_dim: 1,
            noise_dim_slow: 1,
            noise_dim_fast: 0,
            shared_noise: false,
            epsilon,
            beta,
            cost_bound,
            slow_drift: Arc::new(move |x, _y, eps, out| {
                out[0] = -p0(x[0]) - pp(x[0] / eps) / eps
            }),
            fast_drift: Arc::new(|_, _, _, _| {}),
            slow_noise: Arc::new(|_, _, out| out[0] = std::f64::consts::SQRT_2),
            fast_noise: Arc::new(|_, _, _| {}),
            control_gain_slow: Arc::new(|_, _, _, out| out[0] = std::f64::consts::SQRT_2),
            control_gain_fast: Arc::new(|_, _, _, _| {}),
            running_cost: Arc::new(move |x, _y| cost_x(x[0])),
            stop_region: Arc::new(move |x, _y| stop(x[0])),
            kind: ModelKind::PeriodicTwoScale {
                phi0_prime,
                p,
                p_prime,
                cost,
            },
        }
    }

    /// Lift a scalar exit-cost model to a sampleable one-variable diffusion.
    /// The stop region is the complement of the open interval, restricted to
    /// the absorbing sides; a reflecting endpoint is treated as transparent
    /// (models used here keep the invariant mass far away from it).
    pub fn from_scalar(model: &ScalarModel1D, x_min: f64, x_max: f64, cost_bound: f64) -> Self {
        let drift = model.drift.clone();
        let diffusion = model.diffusion.clone();
        let diffusion2 = model.diffusion.clone();
        let cost = model.cost.clone();
        let absorb_left = model.boundary[0] == BoundaryKind::Absorbing;
        let absorb_right = model.boundary[1] == BoundaryKind::Absorbing;
        ModelSpec {
            dim_slow: 1,
            dim_fast: 0,
            control_dim: 1,
            noise_dim_slow: 1,
            noise_dim_fast: 0,
            shared_noise: false,
            epsilon: 1.0,
            beta: model.beta,
            cost_bound,
            slow_drift: Arc::new(move |x, _y, _eps, out| out[0] = drift(x[0])),
            fast_drift: Arc::new(|_, _, _, _| {}),
            slow_noise: Arc::new(move |x, _y, out| out[0] = (2.0 * diffusion(x[0])).sqrt()),
            fast_noise: Arc::new(|_, _, _| {}),
            control_gain_slow: Arc::new(move |x, _y, _eps, out| {
                out[0] = (2.0 * diffusion2(x[0])).sqrt()
            }),
            control_gain_fast: Arc::new(|_, _, _, _| {}),
            running_cost: Arc::new(move |x, _y| cost(x[0])),
            stop_region: Arc::new(move |x, _y| {
                (absorb_left && x[0] <= x_min) || (absorb_right && x[0] >= x_max)
            }),
            kind: ModelKind::Generic,
        }
    }
}

/// Label for the provenance of a feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyLabel {
    Zero,
    Homogenized,
    Corrected,
    LqrFull,
    LqrReduced,
    Custom,
}

/// Deterministic state-feedback law `u = c(x, y; eps)`; no explicit time
/// dependence.
#[derive(Clone)]
pub struct FeedbackPolicy {
    pub label: PolicyLabel,
    control: Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>,
}

impl FeedbackPolicy {
    pub fn zero() -> Self {
        FeedbackPolicy {
            label: PolicyLabel::Zero,
            control: Arc::new(|_, _, _, out| out.fill(0.0)),
        }
    }

    pub fn from_fn(
        label: PolicyLabel,
        f: impl Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FeedbackPolicy {
            label,
            control: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64], eps: f64, out: &mut [f64]) {
        (self.control)(x, y, eps, out)
    }

    /// Shift every control component by a constant vector.
    pub fn offset(&self, delta: Vec<f64>) -> Self {
        let base = self.control.clone();
        FeedbackPolicy {
            label: PolicyLabel::Custom,
            control: Arc::new(move |x, y, eps, out| {
                base(x, y, eps, out);
                for (o, d) in out.iter_mut().zip(&delta) {
                    *o += d;
                }
            }),
        }
    }
}

impl std::fmt::Debug for FeedbackPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FeedbackPolicy({:?})", self.label)
    }
}
