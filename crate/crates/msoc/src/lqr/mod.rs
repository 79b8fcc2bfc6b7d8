//! Ergodic linear-quadratic regulator for slow-fast systems: assembly of the
//! scale-separated matrices, Riccati solves, the reduced (homogenized)
//! Riccati system, and the block-convergence study.
//!
//! The assembled system is
//!
//! ```text
//! A(eps) = [ A11        A12/eps   ]      B(eps) = sqrt(2) [ B1      ]
//!          [ A21/eps    A22/eps^2 ]                       [ B2/eps  ]
//! ```
//!
//! and the quadratic-cost value function `V(z) = z^T S z` solves
//! `A^T S + S A - 2 S B B^T S + I = 0` with ergodic constant
//! `eta = trace(B B^T S)`. Eliminating the fast block gives the reduced pair
//! `A_bar = A11 - A12 A22^-1 A21`, `B_bar = sqrt(2)(B1 - A12 A22^-1 B2)` and
//! the additive fast-noise constant `Q = 2 beta^-1 tr X`,
//! `A22 X + X A22^T = -B2 B2^T`; the upper-left k x k block of `S(eps)`
//! approaches the reduced solution at rate eps^2.

mod io;
mod lyapunov;
mod riccati;

pub use io::{load_system, parse_system_str, save_system, write_system};
pub use lyapunov::solve_lyapunov;
pub use riccati::{hurwitz_margin, require_hurwitz, riccati_residual, solve_are, RiccatiSolution};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats::fit_loglog_slope;

/// Block data of the scale-separated linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastLinearSystem {
    pub a11: DMatrix<f64>,
    pub a12: DMatrix<f64>,
    pub a21: DMatrix<f64>,
    pub a22: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub epsilon: f64,
    pub beta: f64,
}

impl SlowFastLinearSystem {
    pub fn new(
        a11: DMatrix<f64>,
        a12: DMatrix<f64>,
        a21: DMatrix<f64>,
        a22: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        epsilon: f64,
        beta: f64,
    ) -> Result<Self> {
        let k = a11.nrows();
        let m = a22.nrows();
        let l = b1.ncols();
        if a11.ncols() != k || a22.ncols() != m {
            return Err(Error::Shape("A11 and A22 must be square".into()));
        }
        if a12.shape() != (k, m) || a21.shape() != (m, k) {
            return Err(Error::Shape(format!(
                "coupling blocks must be {k}x{m} and {m}x{k}, got {:?} and {:?}",
                a12.shape(),
                a21.shape()
            )));
        }
        if b1.shape() != (k, l) || b2.shape() != (m, l) {
            return Err(Error::Shape(format!(
                "input blocks must be {k}x{l} and {m}x{l}, got {:?} and {:?}",
                b1.shape(),
                b2.shape()
            )));
        }
        if !(epsilon > 0.0) || !(beta > 0.0) {
            return Err(Error::Precondition(format!(
                "epsilon and beta must be positive, got {epsilon} and {beta}"
            )));
        }
        require_hurwitz(&a22, "fast block A22")?;
        Ok(Self {
            a11,
            a12,
            a21,
            a22,
            b1,
            b2,
            epsilon,
            beta,
        })
    }

    pub fn slow_dim(&self) -> usize {
        self.a11.nrows()
    }

    pub fn fast_dim(&self) -> usize {
        self.a22.nrows()
    }

    pub fn dim(&self) -> usize {
        self.slow_dim() + self.fast_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.b1.ncols()
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s
    }

    /// Assemble the full `A(eps)` and `B(eps)` with the 1/eps and 1/eps^2
    /// scalings in place.
    pub fn assemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.slow_dim();
        let m = self.fast_dim();
        let l = self.input_dim();
        let n = k + m;
        let eps = self.epsilon;
        let mut a = DMatrix::<f64>::zeros(n, n);
        a.view_mut((0, 0), (k, k)).copy_from(&self.a11);
        a.view_mut((0, k), (k, m)).copy_from(&(&self.a12 / eps));
        a.view_mut((k, 0), (m, k)).copy_from(&(&self.a21 / eps));
        a.view_mut((k, k), (m, m))
            .copy_from(&(&self.a22 / (eps * eps)));
        let mut b = DMatrix::<f64>::zeros(n, l);
        let s2 = std::f64::consts::SQRT_2;
        b.view_mut((0, 0), (k, l)).copy_from(&(s2 * &self.b1));
        b.view_mut((k, 0), (m, l))
            .copy_from(&(s2 / eps * &self.b2));
        (a, b)
    }

    /// Rank of the Kalman controllability matrix `[B AB ... A^{n-1}B]`.
    /// Purely diagnostic: at strong scale separation the rank test is
    /// ill-conditioned, and stabilizability is what the Riccati solve needs.
    pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
        let n = a.nrows();
        let l = b.ncols();
        let mut kalman = DMatrix::<f64>::zeros(n, n * l);
        let mut power = b.clone();
        for j in 0..n {
            kalman.view_mut((0, j * l), (n, l)).copy_from(&power);
            power = a * power;
            let norm = power.norm();
            if norm > 0.0 {
                // normalize to keep the rank test scale-free
                power /= norm;
            }
        }
        kalman.rank(1e-10 * kalman.norm().max(1.0))
    }

    /// Validate the assembled system at this epsilon: `A(eps)` must be
    /// Hurwitz; a controllability-rank deficiency is reported back (and
    /// logged) but not fatal, since decoupled fixtures are legitimately
    /// uncontrollable in the fast block.
    pub fn validate_assembled(&self) -> Result<SystemDiagnostics> {
        let (a, b) = self.assemble();
        require_hurwitz(&a, &format!("assembled A at eps = {}", self.epsilon))?;
        let rank = Self::controllability_rank(&a, &b);
        let n = self.dim();
        if rank < n {
            log::warn!(
                "controllability matrix rank {rank} < {n} at eps = {}; proceeding (stabilizable systems are fine)",
                self.epsilon
            );
        }
        Ok(SystemDiagnostics {
            kalman_rank: rank,
            controllable: rank == n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDiagnostics {
    pub kalman_rank: usize,
    pub controllable: bool,
}

/// Reduced (slow) system with the additive fast-noise cost constant.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DMatrix<f64>,
    /// `Q = 2 beta^-1 tr X` with `A22 X + X A22^T = -B2 B2^T`.
    pub q_const: f64,
    /// `tr X`, kept for diagnostics.
    pub gramian_trace: f64,
}

/// Eliminate the fast block: `A_bar = A11 - A12 A22^-1 A21`,
/// `B_bar = sqrt(2) (B1 - A12 A22^-1 B2)`, both computed by linear solves
/// against `A22`, plus the additive constant from the stationary fast noise.
pub fn reduce(sys: &SlowFastLinearSystem) -> Result<ReducedSystem> {
    let lu = sys.a22.clone().lu();
    let x_a21 = lu
        .solve(&sys.a21)
        .ok_or_else(|| Error::Solver("A22 is singular".into()))?;
    let x_b2 = lu
        .solve(&sys.b2)
        .ok_or_else(|| Error::Solver("A22 is singular".into()))?;
    let a_bar = &sys.a11 - &sys.a12 * x_a21;
    let b_bar = std::f64::consts::SQRT_2 * (&sys.b1 - &sys.a12 * x_b2);

    // Stationary covariance contribution of the fast block:
    // A22 X + X A22^T = -B2 B2^T, i.e. the controllability Gramian of
    // (A22, B2).
    let bbt = &sys.b2 * sys.b2.transpose();
    let x = solve_lyapunov(&sys.a22.transpose(), &bbt)?;
    let gramian_trace = x.trace();
    Ok(ReducedSystem {
        a_bar,
        b_bar,
        q_const: 2.0 / sys.beta * gramian_trace,
        gramian_trace,
    })
}

/// One epsilon entry of the convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// `|| S_reduced - S(eps)_11 ||_F`; None when the solve failed.
    pub err_11: Option<f64>,
    /// Frobenius norm of `S(eps)` with the 1-1 block zeroed.
    pub s_r_norm: Option<f64>,
    /// `|lambda_i(S(eps)) - lambda_i(S_reduced)|` for the k dominant pairs.
    pub eig_gaps: Vec<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub reduced: RiccatiSolution,
    pub reduced_sys: ReducedSystem,
    pub rows: Vec<ConvergenceRow>,
    /// Fitted log-log slope of `err_11` against epsilon over the successful
    /// rows; the reduction theory predicts 2.
    pub err11_slope: Option<f64>,
}

fn eigs_descending(s: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = s.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| b.partial_cmp(a).unwrap());
    e
}

/// Solve the reduced Riccati equation once and the full equation per epsilon,
/// tabulating the block error, the residual block norm and the dominant
/// eigenvalue gaps. Per-epsilon failures are recorded in the row, not fatal.
pub fn convergence_study(
    sys: &SlowFastLinearSystem,
    eps_list: &[f64],
    tol: f64,
) -> Result<ConvergenceStudy> {
    if eps_list.is_empty() {
        return Err(Error::Precondition("eps_list must not be empty".into()));
    }
    let reduced_sys = reduce(sys)?;
    let reduced = solve_are(&reduced_sys.a_bar, &reduced_sys.b_bar, tol)?;
    let k = sys.slow_dim();
    let red_eigs = eigs_descending(&reduced.s);

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let sys_eps = sys.with_epsilon(eps);
        let row = (|| -> Result<ConvergenceRow> {
            sys_eps.validate_assembled()?;
            let (a, b) = sys_eps.assemble();
            let full = solve_are(&a, &b, tol)?;
            let s11 = full.s.view((0, 0), (k, k)).clone_owned();
            let err_11 = (&s11 - &reduced.s).norm();
            let mut s_r = full.s.clone();
            s_r.view_mut((0, 0), (k, k)).fill(0.0);
            let full_eigs = eigs_descending(&full.s);
            let eig_gaps = red_eigs
                .iter()
                .zip(full_eigs.iter())
                .map(|(r, f)| (r - f).abs())
                .collect();
            Ok(ConvergenceRow {
                epsilon: eps,
                err_11: Some(err_11),
                s_r_norm: Some(s_r.norm()),
                eig_gaps,
                residual: Some(full.residual_norm),
                error: None,
            })
        })();
        rows.push(row.unwrap_or_else(|e| ConvergenceRow {
            epsilon: eps,
            err_11: None,
            s_r_norm: None,
            eig_gaps: Vec::new(),
            residual: None,
            error: Some(e.to_string()),
        }));
    }

    let good: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.err_11.map(|e| (r.epsilon, e)))
        .collect();
    let xs: Vec<f64> = good.iter().map(|(e, _)| *e).collect();
    let ys: Vec<f64> = good.iter().map(|(_, v)| *v).collect();
    let err11_slope = fit_loglog_slope(&xs, &ys);

    Ok(ConvergenceStudy {
        reduced,
        reduced_sys,
        rows,
        err11_slope,
    })
}
