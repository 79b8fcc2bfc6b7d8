//! Direct linear solve and policy iteration for the 1D exit-cost problem.

use super::tridiag::solve_tridiagonal;
use super::{gradient, BoundaryKind, BvpSolution, Grid1D, ScalarModel1D};
use crate::error::{Error, Result};

/// Threshold above which central differencing of the advection term starts to
/// produce oscillatory solutions.
const MESH_PECLET_WARN: f64 = 2.0;

struct NodalFields {
    nu: Vec<f64>,    // beta^-1 D(x_i)
    drift: Vec<f64>, // b(x_i)
    sigma: Vec<f64>, // sqrt(2 D(x_i))
    cost: Vec<f64>,  // G(x_i)
}

fn sample_fields(model: &ScalarModel1D, grid: &Grid1D) -> Result<NodalFields> {
    model.check_ellipticity(grid)?;
    let n = grid.n_nodes();
    let mut f = NodalFields {
        nu: vec![0.0; n],
        drift: vec![0.0; n],
        sigma: vec![0.0; n],
        cost: vec![0.0; n],
    };
    for i in 0..n {
        let x = grid.node(i);
        let d = (model.diffusion)(x);
        f.nu[i] = d / model.beta;
        f.sigma[i] = (2.0 * d).sqrt();
        f.drift[i] = (model.drift)(x);
        let g = (model.cost)(x);
        if !g.is_finite() || g < 0.0 {
            return Err(Error::Precondition(format!(
                "running cost must be finite and nonnegative, got {g} at x = {x}"
            )));
        }
        f.cost[i] = g;
        if !f.drift[i].is_finite() {
            return Err(Error::Numeric(format!("drift non-finite at x = {x}")));
        }
    }
    Ok(f)
}

fn require_absorbing(model: &ScalarModel1D) -> Result<()> {
    if model.boundary.iter().all(|b| *b == BoundaryKind::Reflecting) {
        return Err(Error::Precondition(
            "at least one endpoint must be absorbing".into(),
        ));
    }
    Ok(())
}

fn max_mesh_peclet(nu: &[f64], advection: &[f64], h: f64) -> f64 {
    nu.iter()
        .zip(advection)
        .map(|(nu_i, w_i)| w_i.abs() * h / (2.0 * nu_i))
        .fold(0.0, f64::max)
}

/// Solve `nu u'' + w u' - rho u = f` on the grid with the given boundary
/// treatment; absorbing endpoints impose `u = bc_value`, reflecting endpoints
/// impose a one-sided second-order `u' = 0` (folded into the tridiagonal
/// system by exact elimination against the neighbouring interior row).
fn solve_operator(
    nu: &[f64],
    w: &[f64],
    rho: &[f64],
    f: &[f64],
    boundary: [BoundaryKind; 2],
    bc_value: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let n = nu.len();
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];

    let h2 = h * h;
    for i in 1..n - 1 {
        sub[i - 1] = nu[i] / h2 - w[i] / (2.0 * h);
        diag[i] = -2.0 * nu[i] / h2 - rho[i];
        sup[i] = nu[i] / h2 + w[i] / (2.0 * h);
        rhs[i] = f[i];
    }

    match boundary[0] {
        BoundaryKind::Absorbing => {
            diag[0] = 1.0;
            sup[0] = 0.0;
            rhs[0] = bc_value;
        }
        BoundaryKind::Reflecting => {
            // -3 u0 + 4 u1 - u2 = 0; eliminate u2 with interior row 1.
            let c1 = sup[1];
            if c1.abs() < 1e-300 {
                return Err(Error::Solver(
                    "cannot fold reflecting boundary: zero coupling in row 1".into(),
                ));
            }
            diag[0] = -3.0 + sub[0] / c1;
            sup[0] = 4.0 + diag[1] / c1;
            rhs[0] = rhs[1] / c1;
        }
    }
    match boundary[1] {
        BoundaryKind::Absorbing => {
            diag[n - 1] = 1.0;
            sub[n - 2] = 0.0;
            rhs[n - 1] = bc_value;
        }
        BoundaryKind::Reflecting => {
            // 3 u_{n-1} - 4 u_{n-2} + u_{n-3} = 0; eliminate u_{n-3} with row n-2.
            let a = sub[n - 3];
            if a.abs() < 1e-300 {
                return Err(Error::Solver(
                    "cannot fold reflecting boundary: zero coupling in row n-2".into(),
                ));
            }
            sub[n - 2] = -4.0 - diag[n - 2] / a;
            diag[n - 1] = 3.0 - sup[n - 2] / a;
            rhs[n - 1] = -rhs[n - 2] / a;
        }
    }

    solve_tridiagonal(&sub, &diag, &sup, &rhs)
}

/// Solve the linear boundary-value problem
/// `beta^-1 D psi'' + b psi' - beta G psi = 0`, `psi = 1` on absorbing
/// endpoints, and recover the value function and optimal feedback.
pub fn solve_linear_bvp(model: &ScalarModel1D, grid: &Grid1D) -> Result<BvpSolution> {
    require_absorbing(model)?;
    let fields = sample_fields(model, grid)?;
    let n = grid.n_nodes();
    let h = grid.spacing();

    let peclet = max_mesh_peclet(&fields.nu, &fields.drift, h);
    if peclet > MESH_PECLET_WARN {
        log::warn!(
            "mesh-Peclet number {peclet:.2} exceeds {MESH_PECLET_WARN}; central differences may oscillate, refine the grid"
        );
    }

    let rho: Vec<f64> = fields.cost.iter().map(|g| model.beta * g).collect();
    let zeros = vec![0.0; n];
    let psi = solve_operator(
        &fields.nu,
        &fields.drift,
        &rho,
        &zeros,
        model.boundary,
        1.0,
        h,
    )?;

    // Discrete maximum principle: with G >= 0 and an absorbing endpoint the
    // solution must stay inside (0, 1].
    for (i, p) in psi.iter().enumerate() {
        if !p.is_finite() || *p <= 0.0 || *p > 1.0 + 1e-9 {
            return Err(Error::Numeric(format!(
                "maximum principle violated: psi = {p} at node {i}; grid too coarse for this model"
            )));
        }
    }

    let value: Vec<f64> = psi.iter().map(|p| -p.ln() / model.beta).collect();
    let value_grad = gradient(&value, h);
    let control: Vec<f64> = value_grad
        .iter()
        .zip(&fields.sigma)
        .map(|(g, s)| -s * g)
        .collect();

    Ok(BvpSolution {
        grid: grid.clone(),
        psi,
        value,
        value_grad,
        control,
        max_mesh_peclet: peclet,
        iterations: 0,
    })
}

/// Policy iteration on the dynamic-programming equation: alternate the linear
/// solve of `L(c) V + G + |c|^2/2 = 0` (V = 0 on absorbing endpoints) with the
/// feedback update `c = -sqrt(2 D) V'` until successive value iterates differ
/// by less than `tol` in max norm.
pub fn solve_hjb_policy_iteration(
    model: &ScalarModel1D,
    grid: &Grid1D,
    tol: f64,
    max_iter: usize,
) -> Result<BvpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be at least 1".into()));
    }
    require_absorbing(model)?;
    let fields = sample_fields(model, grid)?;
    let n = grid.n_nodes();
    let h = grid.spacing();

    let mut control = vec![0.0; n];
    let mut value_prev = vec![0.0; n];
    let mut diff = f64::INFINITY;

    for it in 1..=max_iter {
        let advection: Vec<f64> = fields
            .drift
            .iter()
            .zip(&fields.sigma)
            .zip(&control)
            .map(|((b, s), c)| b + s * c)
            .collect();
        let rhs: Vec<f64> = fields
            .cost
            .iter()
            .zip(&control)
            .map(|(g, c)| -(g + 0.5 * c * c))
            .collect();
        let rho = vec![0.0; n];
        let value = solve_operator(&fields.nu, &advection, &rho, &rhs, model.boundary, 0.0, h)?;
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("policy iteration produced non-finite value".into()));
        }

        let value_grad = gradient(&value, h);
        control = value_grad
            .iter()
            .zip(&fields.sigma)
            .map(|(g, s)| -s * g)
            .collect();

        diff = value
            .iter()
            .zip(&value_prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        value_prev = value;

        if diff < tol {
            let peclet = max_mesh_peclet(&fields.nu, &advection, h);
            let psi: Vec<f64> = value_prev.iter().map(|v| (-model.beta * v).exp()).collect();
            let value_grad = gradient(&value_prev, h);
            return Ok(BvpSolution {
                grid: grid.clone(),
                psi,
                value: value_prev,
                value_grad,
                control,
                max_mesh_peclet: peclet,
                iterations: it,
            });
        }
    }

    Err(Error::IterationLimit {
        max_iter,
        residual: diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    /// psi(0) for the exit-weight problem of standard Brownian motion on
    /// (-1, 1) with unit running cost: psi = cosh(sqrt(2) x) / cosh(sqrt(2)).
    /// Closed form worked out from (1/2) psi'' = psi, psi(+-1) = 1.
    const PSI_BM_CENTER: f64 = 0.459098131085425499;

    fn bm_exit_model() -> ScalarModel1D {
        // Unit-noise Brownian motion: D = a/2 = 1/2.
        ScalarModel1D::new(
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.5),
            Arc::new(|_| 1.0),
            1.0,
            [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
        )
        .unwrap()
    }

    #[test]
    fn zero_cost_gives_unit_psi_and_zero_value() {
        let model = ScalarModel1D::new(
            Arc::new(|x: f64| -x),
            Arc::new(|_| 1.0),
            Arc::new(|_| 0.0),
            2.0,
            [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
        )
        .unwrap();
        let grid = Grid1D::new(-1.0, 1.0, 101).unwrap();
        let sol = solve_linear_bvp(&model, &grid).unwrap();
        for i in 0..grid.n_nodes() {
            assert!((sol.psi[i] - 1.0).abs() < 1e-12);
            assert!(sol.value[i].abs() < 1e-12);
            assert!(sol.control[i].abs() < 1e-10);
        }
    }

    #[test]
    fn bm_exit_matches_closed_form() {
        let grid = Grid1D::new(-1.0, 1.0, 2001).unwrap();
        let sol = solve_linear_bvp(&bm_exit_model(), &grid).unwrap();
        let psi0 = sol.psi_at(0.0).unwrap();
        assert!(
            (psi0 - PSI_BM_CENTER).abs() < 1e-6,
            "psi(0) = {psi0}, want {PSI_BM_CENTER}"
        );
    }

    #[test]
    fn bm_exit_grid_convergence_is_second_order() {
        let coarse = Grid1D::new(-1.0, 1.0, 201).unwrap();
        let fine = Grid1D::new(-1.0, 1.0, 401).unwrap();
        let e_coarse =
            (solve_linear_bvp(&bm_exit_model(), &coarse).unwrap().psi_at(0.0).unwrap()
                - PSI_BM_CENTER)
                .abs();
        let e_fine = (solve_linear_bvp(&bm_exit_model(), &fine).unwrap().psi_at(0.0).unwrap()
            - PSI_BM_CENTER)
            .abs();
        let ratio = e_coarse / e_fine;
        assert!(
            (3.0..5.0).contains(&ratio),
            "halving h should cut the error ~4x, got {ratio} ({e_coarse} -> {e_fine})"
        );
    }

    #[test]
    fn reflecting_boundary_reproduces_symmetric_half_problem() {
        // By symmetry the BM exit problem on (-1, 1) has psi'(0) = 0, so the
        // half problem on (0, 1) with a reflecting left wall has the same
        // solution.
        let model = ScalarModel1D::new(
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.5),
            Arc::new(|_| 1.0),
            1.0,
            [BoundaryKind::Reflecting, BoundaryKind::Absorbing],
        )
        .unwrap();
        let grid = Grid1D::new(0.0, 1.0, 1001).unwrap();
        let sol = solve_linear_bvp(&model, &grid).unwrap();
        assert!(
            (sol.psi[0] - PSI_BM_CENTER).abs() < 1e-6,
            "psi(0) = {}",
            sol.psi[0]
        );
    }

    #[test]
    fn policy_iteration_zero_cost_converges_immediately_to_zero() {
        let model = ScalarModel1D::new(
            Arc::new(|x: f64| -x),
            Arc::new(|_| 1.0),
            Arc::new(|_| 0.0),
            1.0,
            [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
        )
        .unwrap();
        let grid = Grid1D::new(-1.0, 1.0, 101).unwrap();
        let sol = solve_hjb_policy_iteration(&model, &grid, 1e-10, 50).unwrap();
        assert!(sol.iterations <= 2);
        for v in &sol.value {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn policy_iteration_matches_log_transform_on_bm_exit() {
        let grid = Grid1D::new(-1.0, 1.0, 2001).unwrap();
        let model = bm_exit_model();
        let direct = solve_linear_bvp(&model, &grid).unwrap();
        let iter = solve_hjb_policy_iteration(&model, &grid, 1e-10, 100).unwrap();
        let v_center = iter.value_at(0.0).unwrap();
        let want = -PSI_BM_CENTER.ln();
        assert!(
            (v_center - want).abs() < 1e-5,
            "V(0) = {v_center}, want {want}"
        );
        let gap = direct
            .value
            .iter()
            .zip(&iter.value)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap < 1e-4, "duality gap {gap}");
    }

    #[test]
    fn policy_iteration_reports_iteration_limit() {
        let model = bm_exit_model();
        let grid = Grid1D::new(-1.0, 1.0, 101).unwrap();
        let err = solve_hjb_policy_iteration(&model, &grid, 1e-14, 1).unwrap_err();
        assert!(matches!(err, Error::IterationLimit { .. }), "{err}");
    }

    #[test]
    fn ellipticity_violation_is_reported() {
        let model = ScalarModel1D::new(
            Arc::new(|_| 0.0),
            Arc::new(|x: f64| if x > 0.5 { 0.0 } else { 1.0 }),
            Arc::new(|_| 1.0),
            1.0,
            [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
        )
        .unwrap();
        let grid = Grid1D::new(0.0, 1.0, 11).unwrap();
        assert!(matches!(
            solve_linear_bvp(&model, &grid),
            Err(Error::Ellipticity { .. })
        ));
    }

    #[test]
    fn raising_cost_never_raises_psi() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = Grid1D::new(-1.0, 1.0, 201).unwrap();
        for _ in 0..10 {
            let base = rng.random_range(0.1..2.0);
            let bump_center = rng.random_range(-0.8..0.8);
            let bump = rng.random_range(0.0..3.0);
            let g1: super::super::ScalarFn = Arc::new(move |_| base);
            let g2: super::super::ScalarFn = Arc::new(move |x: f64| {
                base + bump * (-(x - bump_center) * (x - bump_center) * 20.0).exp()
            });
            let make = |g: super::super::ScalarFn| {
                ScalarModel1D::new(
                    Arc::new(|x: f64| -0.5 * x),
                    Arc::new(|_| 0.5),
                    g,
                    1.5,
                    [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
                )
                .unwrap()
            };
            let lo = solve_linear_bvp(&make(g1), &grid).unwrap();
            let hi = solve_linear_bvp(&make(g2), &grid).unwrap();
            for (a, b) in hi.psi.iter().zip(&lo.psi) {
                assert!(*a <= *b + 1e-12, "comparison principle violated: {a} > {b}");
            }
        }
    }
}
