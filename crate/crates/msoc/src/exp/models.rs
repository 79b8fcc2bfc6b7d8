//! Model builders shared by the experiment runners.

use std::sync::Arc;

use crate::pde::ScalarFn;

/// Derivative of the quartic double well `phi(x) = (x^2 - 1)^2 / 4`.
pub fn quartic_double_well_prime() -> ScalarFn {
    Arc::new(|x: f64| x * (x * x - 1.0))
}

/// Derivative of the tilted double well
/// `phi0(x) = -5 (e^{-0.2 (x+2.5)^2} + e^{-0.2 (x-2.5)^2}) + 0.01 x^4 + 0.8 x`.
pub fn tilted_double_well_prime() -> ScalarFn {
    Arc::new(|x: f64| {
        let a = x + 2.5;
        let b = x - 2.5;
        2.0 * a * (-0.2 * a * a).exp() + 2.0 * b * (-0.2 * b * b).exp()
            + 0.04 * x * x * x
            + 0.8
    })
}

/// Sine perturbation `p(y) = a sin(2 pi y)` with its derivative.
pub fn sine_perturbation(amplitude: f64) -> (ScalarFn, ScalarFn) {
    let two_pi = 2.0 * std::f64::consts::PI;
    (
        Arc::new(move |y: f64| amplitude * (two_pi * y).sin()),
        Arc::new(move |y: f64| amplitude * two_pi * (two_pi * y).cos()),
    )
}

/// Constant running cost.
pub fn constant_cost(g: f64) -> ScalarFn {
    Arc::new(move |_| g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tilted_double_well_prime_matches_finite_differences() {
        let phi = |x: f64| {
            let a = x + 2.5;
            let b = x - 2.5;
            -5.0 * ((-0.2 * a * a).exp() + (-0.2 * b * b).exp()) + 0.01 * x.powi(4) + 0.8 * x
        };
        let dphi = tilted_double_well_prime();
        let h = 1e-6;
        for x in [-5.0, -2.5, -0.3, 0.0, 1.2, 1.5] {
            let fd = (phi(x + h) - phi(x - h)) / (2.0 * h);
            assert!((dphi(x) - fd).abs() < 1e-7, "x = {x}: {} vs {fd}", dphi(x));
        }
    }
}
