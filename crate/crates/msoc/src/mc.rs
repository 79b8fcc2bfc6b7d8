//! Monte-Carlo estimators over trajectory ensembles: the exponential
//! exit-weight expectation, the control cost, and the path-measure
//! Kullback-Leibler divergence with its exact cost identity
//! `J(u) = J(u_opt) + beta^-1 I(mu_u | mu_opt)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sde::sample_ensemble_with_divergence;
use crate::sde::{sample_ensemble, FeedbackPolicy, ModelSpec, TrajectoryResult};
use crate::stats::{fit_loglog_slope, mean_and_se};

/// Ensemble statistic with its sampling provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation / sqrt(n_traj).
    pub std_error: f64,
    pub n_traj: usize,
    /// Fraction of trajectories that hit the time cap before exiting.
    pub truncated_fraction: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_max: f64,
}

fn summarize(
    results: &[TrajectoryResult],
    value: impl Fn(&TrajectoryResult) -> f64,
    seed: u64,
    dt: f64,
    t_max: f64,
) -> McEstimate {
    let values: Vec<f64> = results.iter().map(value).collect();
    let (mean, std_error) = mean_and_se(&values);
    let truncated = results.iter().filter(|r| r.truncated).count();
    McEstimate {
        mean,
        std_error,
        n_traj: results.len(),
        truncated_fraction: truncated as f64 / results.len() as f64,
        seed,
        dt,
        t_max,
    }
}

/// Estimate the exponential exit weight `psi(z0) = E exp(-beta int G ds)`
/// over an uncontrolled ensemble. Truncated paths contribute their
/// accumulated weight (exponentially small in the cap) and are reported in
/// `truncated_fraction`.
pub fn estimate_psi(
    model: &ModelSpec,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<McEstimate> {
    let rs = sample_ensemble(model, &FeedbackPolicy::zero(), z0, dt, t_max, n_traj, seed)?;
    Ok(summarize(&rs, |r| r.exp_weight, seed, dt, t_max))
}

/// Estimate the control cost `J(u; z0) = E int (G + |u|^2/2) ds` under the
/// given feedback.
pub fn estimate_cost(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<McEstimate> {
    let rs = sample_ensemble(model, policy, z0, dt, t_max, n_traj, seed)?;
    Ok(summarize(&rs, |r| r.path_cost, seed, dt, t_max))
}

/// Estimate the Kullback-Leibler divergence of the path measure of
/// `policy_u` relative to that of `policy_hat`, sampling under `policy_u`
/// and accumulating the closed form `(beta/2) int |u - u_hat|^2 ds`.
///
/// The stochastic-integral part of the raw Girsanov weight has zero mean
/// under the sampling measure, so this form has the same expectation with
/// less variance; the raw log weight stays available on each
/// [`TrajectoryResult`] for diagnostics.
pub fn estimate_kl(
    model: &ModelSpec,
    policy_u: &FeedbackPolicy,
    policy_hat: &FeedbackPolicy,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<McEstimate> {
    let rs = sample_ensemble_with_divergence(
        model,
        policy_u,
        Some(policy_hat),
        z0,
        dt,
        t_max,
        n_traj,
        seed,
    )?;
    let half_beta = 0.5 * model.beta;
    let values: Vec<f64> = rs.iter().map(|(_, gap)| half_beta * gap).collect();
    let (mean, std_error) = mean_and_se(&values);
    let truncated = rs.iter().filter(|(r, _)| r.truncated).count();
    Ok(McEstimate {
        mean,
        std_error,
        n_traj: rs.len(),
        truncated_fraction: truncated as f64 / rs.len() as f64,
        seed,
        dt,
        t_max,
    })
}

/// One row of the quadratic-gap study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapRow {
    pub delta: f64,
    /// `J(u_hat + delta) - J(u_hat)`, estimated pathwise with shared seeds.
    pub cost_gap: f64,
    pub cost_gap_se: f64,
    /// `beta^-1 I(mu_u | mu_hat)` from the closed-form accumulator.
    pub kl_over_beta: f64,
    pub kl_over_beta_se: f64,
    pub truncated_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapStudy {
    pub rows: Vec<GapRow>,
    /// Log-log slope of the cost gap against delta (2 for the exact
    /// identity with a delta-independent mean exit time).
    pub gap_slope: Option<f64>,
    pub base_cost: f64,
    pub base_cost_se: f64,
}

/// Perturb the reference feedback by constant offsets and tabulate the cost
/// gap against the relative-entropy term, row by row.
///
/// Both ensembles of a row share the trajectory seeds, so the gap is
/// estimated from pathwise differences; that leaves the expectation unchanged
/// while removing most of the common exit-time variance.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_gap_study(
    model: &ModelSpec,
    policy_hat: &FeedbackPolicy,
    delta_list: &[f64],
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    seed: u64,
) -> Result<GapStudy> {
    let base = sample_ensemble(model, policy_hat, z0, dt, t_max, n_traj, seed)?;
    let base_costs: Vec<f64> = base.iter().map(|r| r.path_cost).collect();
    let (base_cost, base_cost_se) = mean_and_se(&base_costs);

    let mut rows = Vec::with_capacity(delta_list.len());
    for &delta in delta_list {
        let policy_u = policy_hat.offset(vec![delta; model.control_dim]);
        let rs = sample_ensemble_with_divergence(
            model,
            &policy_u,
            Some(policy_hat),
            z0,
            dt,
            t_max,
            n_traj,
            seed,
        )?;
        let diffs: Vec<f64> = rs
            .iter()
            .zip(&base_costs)
            .map(|((r, _), b)| r.path_cost - b)
            .collect();
        let (cost_gap, cost_gap_se) = mean_and_se(&diffs);
        let kls: Vec<f64> = rs.iter().map(|(_, gap)| 0.5 * gap).collect();
        let (kl_mean, kl_se) = mean_and_se(&kls);
        let truncated = rs.iter().filter(|(r, _)| r.truncated).count();
        rows.push(GapRow {
            delta,
            cost_gap,
            cost_gap_se,
            // beta^-1 * (beta/2) int |u - u_hat|^2 = (1/2) int |...|^2
            kl_over_beta: kl_mean,
            kl_over_beta_se: kl_se,
            truncated_fraction: truncated as f64 / rs.len() as f64,
        });
    }

    let pos: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.delta > 0.0)
        .map(|r| (r.delta, r.cost_gap))
        .collect();
    let xs: Vec<f64> = pos.iter().map(|(d, _)| *d).collect();
    let ys: Vec<f64> = pos.iter().map(|(_, g)| *g).collect();
    let gap_slope = fit_loglog_slope(&xs, &ys);

    Ok(GapStudy {
        rows,
        gap_slope,
        base_cost,
        base_cost_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{BoundaryKind, ScalarModel1D};
    use crate::sde::PolicyLabel;
    use std::sync::Arc;

    const PSI_BM_CENTER: f64 = 0.459098131085425499;

    fn bm_model(cost: f64) -> ModelSpec {
        let scalar = ScalarModel1D::new(
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.5),
            Arc::new(move |_| cost),
            1.0,
            [BoundaryKind::Absorbing, BoundaryKind::Absorbing],
        )
        .unwrap();
        ModelSpec::from_scalar(&scalar, -1.0, 1.0, cost)
    }

    #[test]
    fn zero_cost_psi_is_exactly_one_with_zero_error() {
        let est = estimate_psi(&bm_model(0.0), &[0.0], 1e-2, 30.0, 200, 5).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn zero_cost_zero_policy_cost_is_exactly_zero() {
        let est = estimate_cost(
            &bm_model(0.0),
            &FeedbackPolicy::zero(),
            &[0.0],
            1e-2,
            30.0,
            200,
            5,
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn bm_exit_psi_within_three_se_of_closed_form() {
        let est = estimate_psi(&bm_model(1.0), &[0.0], 2.5e-4, 50.0, 20_000, 99).unwrap();
        let slack = 3.0 * est.std_error + 0.35 * est.dt.sqrt();
        assert!(
            (est.mean - PSI_BM_CENTER).abs() < slack,
            "psi = {} +- {}",
            est.mean,
            est.std_error
        );
        assert!(est.mean > 0.0 && est.mean <= 1.0);
    }

    #[test]
    fn identical_policies_give_exactly_zero_kl() {
        let policy = FeedbackPolicy::from_fn(PolicyLabel::Custom, |x, _, _, out| {
            out[0] = -0.4 * x[0]
        });
        let est = estimate_kl(
            &bm_model(1.0),
            &policy,
            &policy.clone(),
            &[0.0],
            1e-3,
            30.0,
            500,
            7,
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn constant_offset_kl_matches_exit_time_product() {
        // |u - u_hat| = delta everywhere, so KL = (beta/2) delta^2 E[tau];
        // the oracle is the product of two separately estimated quantities.
        let model = bm_model(1.0);
        let delta = 0.3;
        let policy_hat = FeedbackPolicy::zero();
        let policy_u = policy_hat.offset(vec![delta]);
        let kl = estimate_kl(&model, &policy_u, &policy_hat, &[0.0], 5e-4, 50.0, 20_000, 11)
            .unwrap();
        // mean exit time under policy_u, same seeds
        let rs = sample_ensemble(&model, &policy_u, &[0.0], 5e-4, 50.0, 20_000, 11).unwrap();
        let taus: Vec<f64> = rs.iter().map(|r| r.stop_time).collect();
        let (tau_mean, tau_se) = mean_and_se(&taus);
        let oracle = 0.5 * model.beta * delta * delta * tau_mean;
        let slack = 3.0 * (kl.std_error + 0.5 * delta * delta * tau_se);
        assert!(
            (kl.mean - oracle).abs() <= slack,
            "kl = {} vs delta^2/2 E[tau] = {oracle}",
            kl.mean
        );
    }

    #[test]
    fn seed_stability_is_bitwise() {
        let a = estimate_psi(&bm_model(1.0), &[0.0], 1e-3, 20.0, 500, 123).unwrap();
        let b = estimate_psi(&bm_model(1.0), &[0.0], 1e-3, 20.0, 500, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn std_error_shrinks_roughly_as_inverse_sqrt_n() {
        let small = estimate_psi(&bm_model(1.0), &[0.0], 1e-3, 30.0, 400, 21).unwrap();
        let large = estimate_psi(&bm_model(1.0), &[0.0], 1e-3, 30.0, 40_000, 21).unwrap();
        let ratio = small.std_error / large.std_error;
        assert!(
            (10.0 / 1.5..10.0 * 1.5).contains(&ratio),
            "se ratio over a 100x ensemble growth should be ~10, got {ratio}"
        );
    }

    #[test]
    fn gap_study_zero_delta_row_is_exactly_zero() {
        let model = bm_model(1.0);
        let study = quadratic_gap_study(
            &model,
            &FeedbackPolicy::zero(),
            &[0.0, 0.2],
            &[0.0],
            1e-3,
            30.0,
            300,
            13,
        )
        .unwrap();
        assert_eq!(study.rows[0].cost_gap, 0.0);
        assert_eq!(study.rows[0].kl_over_beta, 0.0);
        assert!(study.rows[1].kl_over_beta > 0.0);
    }
}
