//! 1D elliptic solvers for the log-transformed value function.
//!
//! The exit-cost problem on an interval O = (x_min, x_max) is solved in two
//! equivalent ways:
//!
//! * [`solve_linear_bvp`] discretizes the linear equation
//!   `beta^-1 D(x) psi'' + b(x) psi' - beta G(x) psi = 0` with `psi = 1` on
//!   absorbing endpoints and recovers `V = -beta^-1 log psi` together with the
//!   optimal feedback `u = -sqrt(2 D) V'`;
//! * [`solve_hjb_policy_iteration`] attacks the nonlinear dynamic-programming
//!   equation directly, alternating policy-fixed linear solves with the
//!   feedback update `c = -sqrt(2 D) V'`.
//!
//! Both use second-order central differences on a uniform grid and a
//! tridiagonal direct solve. The duality between the two routes is one of the
//! cross-checks in the acceptance suite.

mod bvp;
mod tridiag;

pub use bvp::{solve_hjb_policy_iteration, solve_linear_bvp};
pub use tridiag::solve_tridiagonal;

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sde::{FeedbackPolicy, PolicyLabel};

/// Scalar field of one variable, shared across threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Uniform 1D mesh; the first and last nodes are the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_nodes: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_nodes: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::Precondition(format!(
                "grid endpoints must be finite and increasing, got [{x_min}, {x_max}]"
            )));
        }
        if n_nodes < 3 {
            return Err(Error::Precondition(format!(
                "grid needs at least 3 nodes, got {n_nodes}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_nodes,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes);
        self.x_min + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| self.node(i)).collect()
    }

    /// Cell index and barycentric weight for linear interpolation at `x`.
    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !x.is_finite() || x < self.x_min || x > self.x_max {
            return Err(Error::OutOfRange {
                x,
                min: self.x_min,
                max: self.x_max,
            });
        }
        let h = self.spacing();
        let raw = ((x - self.x_min) / h).floor() as usize;
        let i = raw.min(self.n_nodes - 2);
        let t = ((x - self.node(i)) / h).clamp(0.0, 1.0);
        Ok((i, t))
    }
}

/// Per-endpoint boundary treatment of the 1D problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Exit boundary: `psi = 1`, equivalently `V = 0`.
    Absorbing,
    /// No-flux wall: one-sided second-order `psi' = 0` (resp. `V' = 0`).
    Reflecting,
}

/// Scalar exit-cost model. The generator of the uncontrolled dynamics is
/// `L = beta^-1 D(x) d2/dx2 + b(x) d/dx`, i.e. `diffusion` stores the
/// coefficient D(x) multiplying `beta^-1 d2/dx2`. The noise/control gain is
/// `sigma(x) = sqrt(2 D(x))` so the optimal feedback is `-sqrt(2 D) V'`.
#[derive(Clone)]
pub struct ScalarModel1D {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub cost: ScalarFn,
    pub beta: f64,
    pub boundary: [BoundaryKind; 2],
}

/// Minimum allowed diffusion coefficient on the grid (uniform ellipticity).
pub const ELLIPTICITY_FLOOR: f64 = 1e-10;

impl ScalarModel1D {
    pub fn new(
        drift: ScalarFn,
        diffusion: ScalarFn,
        cost: ScalarFn,
        beta: f64,
        boundary: [BoundaryKind; 2],
    ) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
        }
        Ok(Self {
            drift,
            diffusion,
            cost,
            beta,
            boundary,
        })
    }

    pub fn sigma(&self, x: f64) -> f64 {
        (2.0 * (self.diffusion)(x)).sqrt()
    }

    pub(crate) fn check_ellipticity(&self, grid: &Grid1D) -> Result<()> {
        for i in 0..grid.n_nodes() {
            let x = grid.node(i);
            let d = (self.diffusion)(x);
            if !d.is_finite() || d < ELLIPTICITY_FLOOR {
                return Err(Error::Ellipticity {
                    x,
                    value: d,
                    floor: ELLIPTICITY_FLOOR,
                });
            }
        }
        Ok(())
    }
}

/// Nodal solution of the exit-cost problem.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub grid: Grid1D,
    /// Log-transformed value, `psi = exp(-beta V)`.
    pub psi: Vec<f64>,
    /// Value function `V = -beta^-1 log psi`.
    pub value: Vec<f64>,
    /// Centered-difference gradient of `value` (one-sided at the endpoints).
    pub value_grad: Vec<f64>,
    /// Optimal feedback `-sqrt(2 D(x)) V'(x)` at the nodes.
    pub control: Vec<f64>,
    /// Largest mesh-Peclet number `|b| h / (beta^-1 * 2 D)` seen on the grid.
    pub max_mesh_peclet: f64,
    /// Sweeps used by policy iteration; zero for the direct linear solve.
    pub iterations: usize,
}

impl BvpSolution {
    pub fn value_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.grid.locate(x)?;
        Ok((1.0 - t) * self.value[i] + t * self.value[i + 1])
    }

    pub fn psi_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.grid.locate(x)?;
        Ok((1.0 - t) * self.psi[i] + t * self.psi[i + 1])
    }

    /// Linear interpolation of the nodal feedback; errors outside the grid.
    pub fn control_at(&self, x: f64) -> Result<f64> {
        let (i, t) = self.grid.locate(x)?;
        Ok((1.0 - t) * self.control[i] + t * self.control[i + 1])
    }

    /// Feedback policy for trajectory sampling. The state coordinate is the
    /// first slow component; evaluation clamps to the grid range so sample
    /// paths that step slightly past the boundary before exit detection still
    /// see a finite control.
    pub fn feedback_policy(&self, label: PolicyLabel) -> FeedbackPolicy {
        let grid = self.grid.clone();
        let control = self.control.clone();
        FeedbackPolicy::from_fn(label, move |x, _y, _eps, out| {
            let xc = x[0].clamp(grid.x_min(), grid.x_max());
            let (i, t) = grid.locate(xc).expect("clamped point is in range");
            out[0] = (1.0 - t) * control[i] + t * control[i + 1];
        })
    }

    /// Grid L2 norm `sqrt(h * sum_i f_i^2)` of a nodal field.
    pub fn l2_norm(grid: &Grid1D, nodal: &[f64]) -> f64 {
        let h = grid.spacing();
        (h * nodal.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Write `x, psi, value, value_grad, control` rows as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# grid solve; x in state units, psi dimensionless, value in cost units, value_grad = dV/dx, control = -sqrt(2D) dV/dx"
        )?;
        writeln!(w, "x,psi,value,value_grad,control")?;
        for i in 0..self.grid.n_nodes() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.grid.node(i),
                self.psi[i],
                self.value[i],
                self.value_grad[i],
                self.control[i]
            )?;
        }
        Ok(())
    }
}

/// Centered-difference gradient with one-sided second-order endpoints.
pub(crate) fn gradient(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut g = vec![0.0; n];
    g[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for i in 1..n - 1 {
        g[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    g[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_inputs() {
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
        assert!(Grid1D::new(1.0, 1.0, 10).is_err());
        assert!(Grid1D::new(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn locate_is_exact_at_nodes_and_midpoints() {
        let g = Grid1D::new(-1.0, 1.0, 5).unwrap();
        let (i, t) = g.locate(0.0).unwrap();
        assert_eq!(i, 2);
        assert!(t.abs() < 1e-14);
        let (i, t) = g.locate(0.25).unwrap();
        assert_eq!(i, 2);
        assert!((t - 0.5).abs() < 1e-14);
        assert!(g.locate(1.5).is_err());
    }

    #[test]
    fn gradient_is_exact_for_quadratics() {
        let h = 0.1;
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * h).collect();
        let vals: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 1.0).collect();
        let g = gradient(&vals, h);
        for (x, gi) in xs.iter().zip(&g) {
            assert!((gi - (4.0 * x - 1.0)).abs() < 1e-12, "x={x} g={gi}");
        }
    }
}
