//! Thomas solve for general tridiagonal systems.

use crate::error::{Error, Result};

/// Solve `A x = rhs` for tridiagonal `A` given by its three diagonals:
/// `sub[i] = A[i+1][i]` (length n-1), `diag[i] = A[i][i]` (length n),
/// `sup[i] = A[i][i+1]` (length n-1).
///
/// Plain LU sweep without pivoting; the discretizations in this crate are
/// diagonally dominant whenever the mesh-Peclet condition holds. A vanishing
/// pivot is reported as a solver error.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Solver("empty tridiagonal system".into()));
    }
    if rhs.len() != n || (n > 1 && (sub.len() != n - 1 || sup.len() != n - 1)) {
        return Err(Error::Shape(format!(
            "tridiagonal bands/rhs inconsistent with n = {n}"
        )));
    }

    let mut c_prime = vec![0.0; n.saturating_sub(1)];
    let mut d_prime = vec![0.0; n];

    let mut pivot = diag[0];
    if !pivot.is_finite() || pivot.abs() < 1e-300 {
        return Err(Error::Solver("zero pivot at row 0".into()));
    }
    if n > 1 {
        c_prime[0] = sup[0] / pivot;
    }
    d_prime[0] = rhs[0] / pivot;

    for i in 1..n {
        pivot = diag[i] - sub[i - 1] * c_prime[i - 1];
        if !pivot.is_finite() || pivot.abs() < 1e-300 {
            return Err(Error::Solver(format!("zero pivot at row {i}")));
        }
        if i < n - 1 {
            c_prime[i] = sup[i] / pivot;
        }
        d_prime[i] = (rhs[i] - sub[i - 1] * d_prime[i - 1]) / pivot;
    }

    let mut x = d_prime;
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_exactly() {
        // A = [[2,1,0],[1,3,1],[0,1,2]], x = [1,2,3]
        let sub = [1.0, 1.0];
        let diag = [2.0, 3.0, 2.0];
        let sup = [1.0, 1.0];
        let rhs = [4.0, 10.0, 8.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (xi, want) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((xi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular_system() {
        let sub = [1.0];
        let diag = [1.0, 1.0];
        let sup = [1.0];
        let rhs = [1.0, 1.0];
        // second pivot = 1 - 1*1 = 0
        assert!(matches!(
            solve_tridiagonal(&sub, &diag, &sup, &rhs),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn random_systems_match_dense_solve() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(2..40);
            let mut sub = vec![0.0; n - 1];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n - 1];
            let mut x_true = vec![0.0; n];
            for v in diag.iter_mut() {
                *v = 3.0 + rng.random::<f64>();
            }
            for v in sub.iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
            for v in sup.iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
            for v in x_true.iter_mut() {
                *v = rng.random::<f64>() * 2.0 - 1.0;
            }
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                rhs[i] = diag[i] * x_true[i];
                if i > 0 {
                    rhs[i] += sub[i - 1] * x_true[i - 1];
                }
                if i + 1 < n {
                    rhs[i] += sup[i] * x_true[i + 1];
                }
            }
            let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
            for (a, b) in x.iter().zip(&x_true) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
