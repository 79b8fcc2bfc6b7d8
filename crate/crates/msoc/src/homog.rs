//! Homogenized coefficients for the two nonlinear model families.
//!
//! For diffusion in a two-scale potential `phi0(x) + p(x/eps)` with a
//! 1-periodic perturbation `p`, the slow limit is a diffusion with effective
//! diffusivity `K`, `K^-1 = int_0^1 e^{-beta p} dy * int_0^1 e^{beta p} dy`,
//! and the cell problem has the closed-form solution
//! `1 + Theta'(y) = e^{beta p(y)} / int_0^1 e^{beta p}`. The state-dependent
//! factor `e^{beta p(y)} / (sqrt(K) int_0^1 e^{beta p})` restores the optimal
//! cost when the homogenized feedback is applied to the multiscale dynamics.
//!
//! For the underdamped model the cell solution is linear in the velocity and
//! the limit is the overdamped equation; see [`overdamped_limit`].

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pde::{BoundaryKind, ScalarFn, ScalarModel1D};
use crate::sde::{FeedbackPolicy, ModelKind, ModelSpec, PolicyLabel};

/// Smooth 1-periodic potential perturbation with its derivative.
#[derive(Clone)]
pub struct PeriodicPotential {
    pub p: ScalarFn,
    pub p_prime: ScalarFn,
    pub beta: f64,
}

impl PeriodicPotential {
    pub fn new(p: ScalarFn, p_prime: ScalarFn, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
        }
        // Periodicity to round-off on a few sampled nodes.
        for i in 0..7 {
            let y = i as f64 / 7.0;
            let d = (p(y + 1.0) - p(y)).abs();
            if !d.is_finite() || d > 1e-9 * (1.0 + p(y).abs()) {
                return Err(Error::Precondition(format!(
                    "p is not 1-periodic: |p({} + 1) - p({})| = {d}",
                    y, y
                )));
            }
        }
        Ok(Self { p, p_prime, beta })
    }

    /// Normalized invariant density of the fast variable,
    /// `rho(y) = e^{-beta p(y)} / Z`.
    pub fn invariant_density(&self, n_quad: usize) -> Result<ScalarFn> {
        let z = trapezoid_periodic(|y| (-self.beta * (self.p)(y)).exp(), n_quad)?;
        let p = self.p.clone();
        let beta = self.beta;
        Ok(Arc::new(move |y: f64| (-beta * p(y)).exp() / z))
    }
}

/// Tabulated cell-problem output.
#[derive(Debug, Clone)]
pub struct HomogenizedCoeffs {
    /// Effective diffusivity, in (0, 1].
    pub k: f64,
    /// `int_0^1 e^{beta p}`.
    pub z_plus: f64,
    /// `int_0^1 e^{-beta p}`.
    pub z_minus: f64,
    /// Derivative of the cell solution on a uniform periodic grid over [0, 1).
    theta_prime: Vec<f64>,
    /// Multiplier restoring the multiscale-optimal feedback.
    correction: Vec<f64>,
}

/// Nodes of the tabulated periodic fields; linear interpolation error is far
/// below Monte-Carlo noise at this resolution.
const TABLE_NODES: usize = 1024;

fn trapezoid_periodic(f: impl Fn(f64) -> f64, n_quad: usize) -> Result<f64> {
    // On a periodic cell the composite trapezoid rule collapses to the
    // left-endpoint Riemann sum and is spectrally accurate for smooth f.
    let mut acc = 0.0;
    for j in 0..n_quad {
        let v = f(j as f64 / n_quad as f64);
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite integrand at y = {}",
                j as f64 / n_quad as f64
            )));
        }
        acc += v;
    }
    Ok(acc / n_quad as f64)
}

fn periodic_interp(table: &[f64], y: f64) -> f64 {
    let n = table.len();
    let s = (y.rem_euclid(1.0)) * n as f64;
    let i = (s.floor() as usize).min(n - 1);
    let t = s - i as f64;
    let next = table[(i + 1) % n];
    (1.0 - t) * table[i] + t * next
}

impl HomogenizedCoeffs {
    pub fn theta_prime_at(&self, y: f64) -> f64 {
        periodic_interp(&self.theta_prime, y)
    }

    pub fn correction_factor_at(&self, y: f64) -> f64 {
        periodic_interp(&self.correction, y)
    }

    /// Write `y, theta_prime, correction_factor` rows as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# cell problem, closed form; y on the unit cell, theta_prime = dTheta/dy, correction_factor multiplies the homogenized control"
        )?;
        writeln!(w, "y,theta_prime,correction_factor")?;
        for i in 0..self.theta_prime.len() {
            writeln!(
                w,
                "{},{},{}",
                i as f64 / self.theta_prime.len() as f64,
                self.theta_prime[i],
                self.correction[i]
            )?;
        }
        Ok(())
    }
}

/// Effective diffusivity `K = 1 / (int e^{-beta p} * int e^{beta p})` by the
/// composite trapezoidal rule on the periodic cell.
pub fn effective_diffusivity(pot: &PeriodicPotential, n_quad: usize) -> Result<f64> {
    if n_quad < 16 {
        return Err(Error::Precondition(format!(
            "n_quad must be at least 16, got {n_quad}"
        )));
    }
    let z_plus = trapezoid_periodic(|y| (pot.beta * (pot.p)(y)).exp(), n_quad)?;
    let z_minus = trapezoid_periodic(|y| (-pot.beta * (pot.p)(y)).exp(), n_quad)?;
    Ok(1.0 / (z_plus * z_minus))
}

/// Solve the cell problem in closed form:
/// `1 + Theta'(y) = e^{beta p(y)} / int_0^1 e^{beta p}`, and tabulate the
/// control-correction factor `e^{beta p(y)} / (sqrt(K) int_0^1 e^{beta p})`.
pub fn cell_solution(pot: &PeriodicPotential, n_quad: usize) -> Result<HomogenizedCoeffs> {
    if n_quad < 16 {
        return Err(Error::Precondition(format!(
            "n_quad must be at least 16, got {n_quad}"
        )));
    }
    let z_plus = trapezoid_periodic(|y| (pot.beta * (pot.p)(y)).exp(), n_quad)?;
    let z_minus = trapezoid_periodic(|y| (-pot.beta * (pot.p)(y)).exp(), n_quad)?;
    let k = 1.0 / (z_plus * z_minus);
    let sqrt_k = k.sqrt();

    let mut theta_prime = Vec::with_capacity(TABLE_NODES);
    let mut correction = Vec::with_capacity(TABLE_NODES);
    for j in 0..TABLE_NODES {
        let y = j as f64 / TABLE_NODES as f64;
        let e = (pot.beta * (pot.p)(y)).exp();
        theta_prime.push(e / z_plus - 1.0);
        correction.push(e / (sqrt_k * z_plus));
    }

    Ok(HomogenizedCoeffs {
        k,
        z_plus,
        z_minus,
        theta_prime,
        correction,
    })
}

/// Wrap the homogenized 1D feedback `c(x) = -sqrt(2K) V0'(x)` into the
/// leading-order multiscale law `x -> correction_factor(x/eps mod 1) * c(x)`.
pub fn corrected_control(
    coeffs: &HomogenizedCoeffs,
    homog_policy: &FeedbackPolicy,
    epsilon: f64,
) -> Result<FeedbackPolicy> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let base = homog_policy.clone();
    let table = coeffs.clone();
    Ok(FeedbackPolicy::from_fn(
        PolicyLabel::Corrected,
        move |x, y, eps, out| {
            base.eval(x, y, eps, out);
            let factor = table.correction_factor_at(x[0] / epsilon);
            for o in out.iter_mut() {
                *o *= factor;
            }
        },
    ))
}

/// Reduce the two-variable underdamped model to its overdamped limit: drift
/// `-phi'`, unit coefficient in front of `beta^-1 d2/dx2` (noise and control
/// gain sqrt(2)), same running cost. The boundary defaults to a reflecting
/// left wall and an absorbing right exit, matching the double-well setup.
pub fn overdamped_limit(full: &ModelSpec) -> Result<ScalarModel1D> {
    match &full.kind {
        ModelKind::Langevin { phi_prime, cost } => ScalarModel1D::new(
            {
                let pp = phi_prime.clone();
                Arc::new(move |x: f64| -pp(x))
            },
            Arc::new(|_| 1.0),
            cost.clone(),
            full.beta,
            [BoundaryKind::Reflecting, BoundaryKind::Absorbing],
        ),
        _ => Err(Error::Shape(
            "model is not in the two-variable underdamped form".into(),
        )),
    }
}

/// Homogenized limit of the two-scale periodic model: drift `-K phi0'`,
/// diffusion coefficient `K`, so the optimal feedback is `-sqrt(2K) V0'`.
pub fn periodic_limit(
    full: &ModelSpec,
    n_quad: usize,
) -> Result<(ScalarModel1D, HomogenizedCoeffs)> {
    match &full.kind {
        ModelKind::PeriodicTwoScale {
            phi0_prime,
            p,
            p_prime,
            cost,
        } => {
            let pot = PeriodicPotential::new(p.clone(), p_prime.clone(), full.beta)?;
            let coeffs = cell_solution(&pot, n_quad)?;
            let k = coeffs.k;
            let p0 = phi0_prime.clone();
            let model = ScalarModel1D::new(
                Arc::new(move |x: f64| -k * p0(x)),
                Arc::new(move |_| k),
                cost.clone(),
                full.beta,
                [BoundaryKind::Reflecting, BoundaryKind::Absorbing],
            )?;
            Ok((model, coeffs))
        }
        _ => Err(Error::Shape(
            "model is not in the two-scale periodic form".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// K for p = 0.5 sin(2 pi y) at beta = 2 equals 1/I0(1)^2; the Bessel
    /// value cross-checks the quadrature oracle below.
    const K_BESSEL: f64 = 0.623860360432069188;
    const I0_1: f64 = 1.266065877752008336;

    fn sine_pot(beta: f64) -> PeriodicPotential {
        PeriodicPotential::new(
            Arc::new(|y: f64| 0.5 * (2.0 * PI * y).sin()),
            Arc::new(|y: f64| PI * (2.0 * PI * y).cos()),
            beta,
        )
        .unwrap()
    }

    #[test]
    fn flat_perturbation_gives_unit_diffusivity_exactly() {
        let pot = PeriodicPotential::new(Arc::new(|_| 0.0), Arc::new(|_| 0.0), 2.0).unwrap();
        assert_eq!(effective_diffusivity(&pot, 64).unwrap(), 1.0);
        let coeffs = cell_solution(&pot, 64).unwrap();
        for y in [0.0, 0.3, 0.77] {
            assert!((coeffs.theta_prime_at(y)).abs() < 1e-14);
            assert!((coeffs.correction_factor_at(y) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sine_perturbation_matches_bessel_value() {
        let k = effective_diffusivity(&sine_pot(2.0), 512).unwrap();
        assert!((k - K_BESSEL).abs() < 1e-12, "K = {k}");
    }

    #[test]
    fn diffusivity_decreases_with_beta() {
        let k1 = effective_diffusivity(&sine_pot(1.0), 512).unwrap();
        let k2 = effective_diffusivity(&sine_pot(2.0), 512).unwrap();
        let k4 = effective_diffusivity(&sine_pot(4.0), 512).unwrap();
        assert!(k1 > k2 && k2 > k4, "{k1} {k2} {k4}");
        // quadrature oracle values, frozen from 30-digit arithmetic
        assert!((k1 - 0.884175737194364443).abs() < 1e-12);
        assert!((k4 - 0.192436878491672694).abs() < 1e-12);
    }

    #[test]
    fn quadrature_is_spectrally_converged_by_256_nodes() {
        let a = effective_diffusivity(&sine_pot(2.0), 256).unwrap();
        let b = effective_diffusivity(&sine_pot(2.0), 4096).unwrap();
        assert!(
            (a - b).abs() < 1e-12 * b.abs(),
            "K(256) = {a}, K(4096) = {b}"
        );
    }

    #[test]
    fn theta_prime_is_mean_zero_and_solves_the_cell_problem() {
        let pot = sine_pot(2.0);
        let coeffs = cell_solution(&pot, 1024).unwrap();
        let n = 1024;
        let mean: f64 =
            (0..n).map(|j| coeffs.theta_prime_at(j as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-10, "mean Theta' = {mean}");

        // Residual of L0 Theta = p' with L0 = -p' d/dy + beta^-1 d2/dy2,
        // using the closed forms Theta' = e^{beta p}/Z+ - 1 and
        // Theta'' = beta p' e^{beta p}/Z+.
        for j in 0..17 {
            let y = j as f64 / 17.0;
            let e = (pot.beta * (pot.p)(y)).exp();
            let tp = e / coeffs.z_plus - 1.0;
            let tpp = pot.beta * (pot.p_prime)(y) * e / coeffs.z_plus;
            let residual = -(pot.p_prime)(y) * tp + tpp / pot.beta - (pot.p_prime)(y);
            assert!(residual.abs() < 1e-10, "cell residual {residual} at y = {y}");
        }
    }

    #[test]
    fn correction_factor_averages_to_sqrt_k_under_rho() {
        let pot = sine_pot(2.0);
        let coeffs = cell_solution(&pot, 2048).unwrap();
        let rho = pot.invariant_density(2048).unwrap();
        let n = 4096;
        let avg: f64 = (0..n)
            .map(|j| {
                let y = j as f64 / n as f64;
                coeffs.correction_factor_at(y) * rho(y)
            })
            .sum::<f64>()
            / n as f64;
        let want = coeffs.k.sqrt();
        assert!(
            (avg - want).abs() < 1e-5,
            "avg correction under rho = {avg}, sqrt(K) = {want}"
        );
    }

    #[test]
    fn corrected_control_reduces_to_base_when_p_is_flat() {
        let pot = PeriodicPotential::new(Arc::new(|_| 0.0), Arc::new(|_| 0.0), 2.0).unwrap();
        let coeffs = cell_solution(&pot, 64).unwrap();
        let base = FeedbackPolicy::from_fn(PolicyLabel::Homogenized, |x, _, _, out| {
            out[0] = -1.7 * x[0]
        });
        let corrected = corrected_control(&coeffs, &base, 0.1).unwrap();
        let mut a = [0.0];
        let mut b = [0.0];
        for x in [-1.0, 0.2, 0.9] {
            base.eval(&[x], &[], 0.1, &mut a);
            corrected.eval(&[x], &[], 0.1, &mut b);
            assert_eq!(a[0], b[0]);
        }
    }

    #[test]
    fn corrected_control_at_cell_origin_matches_bessel_scaling() {
        // At x/eps integer and p(0) = 0 the factor is 1/(sqrt(K) I0(1)),
        // which is exactly 1 for an odd perturbation.
        let coeffs = cell_solution(&sine_pot(2.0), 2048).unwrap();
        let factor = coeffs.correction_factor_at(0.0);
        let want = 1.0 / (K_BESSEL.sqrt() * I0_1);
        assert!((factor - want).abs() < 1e-9, "{factor} vs {want}");
        assert!((factor - 1.0).abs() < 1e-9);
    }

    #[test]
    fn corrected_control_oscillation_is_order_one() {
        let coeffs = cell_solution(&sine_pot(2.0), 2048).unwrap();
        let base = FeedbackPolicy::from_fn(PolicyLabel::Homogenized, |_, _, _, out| out[0] = 1.0);
        for eps in [0.1, 0.01] {
            let corrected = corrected_control(&coeffs, &base, eps).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut out = [0.0];
            for j in 0..257 {
                // scan one cell of width eps
                let x = j as f64 / 256.0 * eps;
                corrected.eval(&[x], &[], eps, &mut out);
                lo = lo.min(out[0]);
                hi = hi.max(out[0]);
            }
            let swing = hi - lo;
            assert!(
                swing > 1.0,
                "oscillation should stay O(1) as eps shrinks, got {swing} at eps = {eps}"
            );
        }
    }

    #[test]
    fn k_bounds_hold_on_a_family_of_potentials() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let a1 = rng.random_range(-1.0..1.0);
            let a2 = rng.random_range(-0.5..0.5);
            let phase = rng.random_range(0.0..(2.0 * PI));
            let pot = PeriodicPotential::new(
                Arc::new(move |y: f64| {
                    a1 * (2.0 * PI * y + phase).sin() + a2 * (4.0 * PI * y).cos()
                }),
                Arc::new(move |y: f64| {
                    2.0 * PI * a1 * (2.0 * PI * y + phase).cos()
                        - 4.0 * PI * a2 * (4.0 * PI * y).sin()
                }),
                1.5,
            )
            .unwrap();
            let k = effective_diffusivity(&pot, 1024).unwrap();
            assert!(k > 0.0 && k <= 1.0, "K = {k}");
            if a1.abs() + a2.abs() > 0.05 {
                assert!(k < 1.0 - 1e-6, "K should be strictly below 1, got {k}");
            }
        }
    }

    #[test]
    fn overdamped_limit_requires_langevin_form() {
        let model = crate::sde::ModelSpec::periodic_one_var(
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
            1.0,
            2.0,
            0.1,
            Arc::new(|x| x >= 1.5),
        );
        assert!(matches!(overdamped_limit(&model), Err(Error::Shape(_))));
    }

    #[test]
    fn overdamped_limit_of_double_well_has_expected_drift() {
        let model = crate::sde::ModelSpec::langevin(
            Arc::new(|x: f64| x * (x * x - 1.0)),
            Arc::new(|_| 1.0),
            1.0,
            1.0,
            0.1,
            Arc::new(|x| x >= 2.0),
        );
        let reduced = overdamped_limit(&model).unwrap();
        for x in [-1.0, 0.0, 0.5, 1.5] {
            assert!(((reduced.drift)(x) + x * (x * x - 1.0)).abs() < 1e-14);
            assert!(((reduced.diffusion)(x) - 1.0).abs() < 1e-14);
        }
        let flat = crate::sde::ModelSpec::langevin(
            Arc::new(|_| 0.0),
            Arc::new(|_| 1.0),
            1.0,
            1.0,
            0.1,
            Arc::new(|x| x >= 2.0),
        );
        let reduced = overdamped_limit(&flat).unwrap();
        assert_eq!((reduced.drift)(0.3), 0.0);
    }
}
