//! Dense direct Lyapunov solver (Bartels-Stewart on the real Schur form).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solve `A^T X + X A + Q = 0` for symmetric `Q`.
///
/// Unique solvability needs `lambda_i(A) + lambda_j(A) != 0` for all pairs,
/// which holds in particular for Hurwitz `A`. The solve reduces `A` to real
/// Schur form once and back-substitutes over the 1x1/2x2 diagonal blocks, so
/// the cost is O(n^3).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Shape(format!(
            "Lyapunov operands must be square and matching: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let schur = a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Solver("Schur decomposition did not converge".into()))?;
    let (u, t) = schur.unpack();

    let c = -(u.transpose() * q * &u);
    let y = solve_quasi_triangular_sylvester(&t, &c)?;
    let x = &u * y * u.transpose();
    // The exact solution is symmetric for symmetric Q; fold round-off.
    Ok(0.5 * (&x + x.transpose()))
}

/// Diagonal-block partition of a real quasi-upper-triangular matrix.
fn block_starts(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = t.norm().max(1.0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale;
        let size = if two { 2 } else { 1 };
        blocks.push((i, size));
        i += size;
    }
    blocks
}

/// Solve `T^T Y + Y T = C` for quasi-upper-triangular `T` by forward
/// block substitution; each diagonal step is a Sylvester system of size at
/// most 4, solved by vectorization.
fn solve_quasi_triangular_sylvester(
    t: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let blocks = block_starts(t);
    let nb = blocks.len();
    let mut y = DMatrix::<f64>::zeros(n, n);

    for bi in 0..nb {
        let (i0, pi) = blocks[bi];
        for bj in 0..nb {
            let (j0, pj) = blocks[bj];

            let mut rhs = c.view((i0, j0), (pi, pj)).clone_owned();
            // (T^T Y)_{ij} couples earlier block rows of the same column,
            // (Y T)_{ij} earlier block columns of the same row.
            for (k0, pk) in blocks.iter().take(bi).copied() {
                let t_ki = t.view((k0, i0), (pk, pi));
                let y_kj = y.view((k0, j0), (pk, pj));
                rhs -= t_ki.transpose() * y_kj;
            }
            for (k0, pk) in blocks.iter().take(bj).copied() {
                let y_ik = y.view((i0, k0), (pi, pk));
                let t_kj = t.view((k0, j0), (pk, pj));
                rhs -= y_ik * t_kj;
            }

            let t_ii = t.view((i0, i0), (pi, pi)).clone_owned();
            let t_jj = t.view((j0, j0), (pj, pj)).clone_owned();
            let z = solve_small_sylvester(&t_ii, &t_jj, &rhs)?;
            y.view_mut((i0, j0), (pi, pj)).copy_from(&z);
        }
    }
    Ok(y)
}

/// Solve `A^T Z + Z B = R` for blocks of size at most 2x2 via the
/// vectorized (Kronecker) form.
fn solve_small_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    let q = b.nrows();
    let m = p * q;
    let mut sys = DMatrix::<f64>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    // column-major vec: Z[r, s] at index s*p + r
    for s in 0..q {
        for row in 0..p {
            let eq = s * p + row;
            rhs[eq] = r[(row, s)];
            for k in 0..p {
                sys[(eq, s * p + k)] += a[(k, row)]; // (A^T Z)_{row,s}
            }
            for k in 0..q {
                sys[(eq, k * p + row)] += b[(k, s)]; // (Z B)_{row,s}
            }
        }
    }
    let lu = sys.lu();
    let z = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular Sylvester block (eigenvalue pair sums to zero)".into()))?;
    Ok(DMatrix::from_fn(p, q, |row, s| z[s * p + row]))
}
