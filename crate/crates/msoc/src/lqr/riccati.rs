//! Newton-Kleinman iteration for the algebraic Riccati equation
//! `A^T S + S A - 2 S B B^T S + I = 0`.

use nalgebra::DMatrix;

use super::lyapunov::solve_lyapunov;
use crate::error::{Error, Result};

const MAX_NEWTON_STEPS: usize = 60;

/// Converged Riccati solve: the symmetric positive-definite `S`, the ergodic
/// constant `eta = trace(B B^T S)`, and the achieved residual.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub s: DMatrix<f64>,
    pub eta: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Largest real part of the spectrum, with the offending eigenvalue.
pub fn hurwitz_margin(m: &DMatrix<f64>) -> (f64, String) {
    let eigs = m.complex_eigenvalues();
    let mut worst = f64::NEG_INFINITY;
    let mut which = String::from("none");
    for e in eigs.iter() {
        if e.re > worst {
            worst = e.re;
            which = format!("{:.6} {:+.6}i", e.re, e.im);
        }
    }
    (worst, which)
}

pub fn require_hurwitz(m: &DMatrix<f64>, context: &str) -> Result<()> {
    let (margin, eig) = hurwitz_margin(m);
    if margin >= 0.0 {
        return Err(Error::NotHurwitz {
            context: context.to_string(),
            eigenvalue: eig,
        });
    }
    Ok(())
}

/// Residual of the Riccati equation at `s`.
pub fn riccati_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let bbt = b * b.transpose();
    a.transpose() * s + s * a - 2.0 * s * bbt * s + DMatrix::identity(n, n)
}

/// Solve the Riccati equation by Newton-Kleinman iteration: start from the
/// Lyapunov solution of `A^T S0 + S0 A = -I` (A is required Hurwitz), then
/// repeatedly solve the Lyapunov equation of the closed-loop matrix
/// `A - 2 B B^T S_j` until the residual Frobenius norm drops below `tol`.
pub fn solve_are(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("A must be square, got {}x{}", n, a.ncols())));
    }
    if b.nrows() != n {
        return Err(Error::Shape(format!(
            "B must have {} rows, got {}",
            n,
            b.nrows()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol must be positive, got {tol}")));
    }
    if b.norm() == 0.0 {
        return Err(Error::Precondition(
            "B vanishes, the pair (A, B) is uncontrollable".into(),
        ));
    }
    require_hurwitz(a, "Riccati open-loop matrix A")?;

    let identity = DMatrix::<f64>::identity(n, n);
    let g = 2.0 * b * b.transpose();
    let mut s = solve_lyapunov(a, &identity)?;
    let mut prev_residual = f64::INFINITY;
    let mut stalled = 0usize;

    for it in 0..=MAX_NEWTON_STEPS {
        let residual = riccati_residual(a, b, &s).norm();
        if residual <= tol {
            let min_eig = s
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min_eig <= 0.0 {
                return Err(Error::Numeric(format!(
                    "Riccati solution not positive definite (min eigenvalue {min_eig})"
                )));
            }
            let eta = ((b * b.transpose()) * &s).trace();
            return Ok(RiccatiSolution {
                s,
                eta,
                residual_norm: residual,
                iterations: it,
            });
        }
        // Convergence is quadratic down to the round-off floor; two
        // consecutive steps without real progress mean tol is unreachable.
        if residual > 0.9 * prev_residual {
            stalled += 1;
            if stalled >= 2 {
                return Err(Error::IterationLimit {
                    max_iter: it,
                    residual,
                });
            }
        } else {
            stalled = 0;
        }
        prev_residual = residual;

        let a_closed = a - &g * &s;
        require_hurwitz(&a_closed, "Newton-Kleinman closed-loop matrix")?;
        let q_step = &identity + &s * &g * &s;
        let s_next = solve_lyapunov(&a_closed, &q_step)?;
        s = 0.5 * (&s_next + s_next.transpose());
    }

    Err(Error::IterationLimit {
        max_iter: MAX_NEWTON_STEPS,
        residual: prev_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Scalar closed form for A = [-1], B = [1]:
    /// -2s - 2s^2 + 1 = 0 -> s = (sqrt(3) - 1)/2, worked out by hand.
    const S_SCALAR: f64 = 0.366025403784438647;

    #[test]
    fn scalar_riccati_matches_hand_solution() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let sol = solve_are(&a, &b, 1e-12).unwrap();
        assert!((sol.s[(0, 0)] - S_SCALAR).abs() < 1e-12);
        assert!((sol.eta - S_SCALAR).abs() < 1e-12);
        assert!(sol.residual_norm <= 1e-12);
    }

    #[test]
    fn vanishing_b_is_rejected_but_tiny_b_tends_to_lyapunov_limit() {
        let a = -DMatrix::<f64>::identity(3, 3);
        let b0 = DMatrix::<f64>::zeros(3, 1);
        assert!(matches!(
            solve_are(&a, &b0, 1e-10),
            Err(Error::Precondition(_))
        ));
        let b = DMatrix::from_element(3, 1, 1e-9);
        let sol = solve_are(&a, &b, 1e-12).unwrap();
        for i in 0..3 {
            assert!((sol.s[(i, i)] - 0.5).abs() < 1e-8, "S ~ I/2, got {}", sol.s[(i, i)]);
        }
    }

    #[test]
    fn non_hurwitz_open_loop_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_element(2, 1, 1.0);
        assert!(matches!(
            solve_are(&a, &b, 1e-10),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn random_system_passes_residual_and_stability_checks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 6;
        let mut a = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            v
        });
        for i in 0..n {
            a[(i, i)] -= 4.0;
        }
        let b = DMatrix::from_fn(n, 2, |_, _| {
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            v
        });
        let sol = solve_are(&a, &b, 1e-11).unwrap();
        assert!(riccati_residual(&a, &b, &sol.s).norm() <= 1e-11);
        assert!((&sol.s - sol.s.transpose()).norm() <= 1e-12 * sol.s.norm());
        let a_closed = &a - 2.0 * &b * b.transpose() * &sol.s;
        assert!(require_hurwitz(&a_closed, "closed loop").is_ok());
    }

    #[test]
    fn agrees_with_riccati_ode_integration() {
        // Independent oracle: integrate dS/dt = A^T S + S A - 2 S BB^T S + I
        // to stationarity with RK4.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, -0.2, -1.5]);
        let b = DMatrix::from_row_slice(2, 1, &[0.7, -0.3]);
        let sol = solve_are(&a, &b, 1e-12).unwrap();

        let f = |s: &DMatrix<f64>| riccati_residual(&a, &b, s);
        let mut s = DMatrix::<f64>::zeros(2, 2);
        let dt = 5e-4;
        for _ in 0..200_000 {
            let k1 = f(&s);
            let k2 = f(&(&s + 0.5 * dt * &k1));
            let k3 = f(&(&s + 0.5 * dt * &k2));
            let k4 = f(&(&s + dt * &k3));
            s += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!(
            (&s - &sol.s).norm() < 1e-8,
            "ODE limit {:?} vs Newton {:?}",
            s,
            sol.s
        );
    }
}
