use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::model::{FeedbackPolicy, ModelSpec};
use crate::error::{Error, Result};

/// Accumulators of a single sampled path, all by left-endpoint (Ito)
/// quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    /// Realized stopping time; equals the time cap when truncated.
    pub stop_time: f64,
    /// `int_0^tau [G(z_s) + |u_s|^2 / 2] ds`.
    pub path_cost: f64,
    /// `exp(-beta int_0^tau G(z_s) ds)`.
    pub exp_weight: f64,
    /// Log path-measure weight `log dmu_u/dmu` of the applied control
    /// against the uncontrolled dynamics:
    /// `-sqrt(beta) int u . dW - beta/2 int |u|^2 ds`.
    pub girsanov_log_weight: f64,
    /// True when the time cap fired before the stop region.
    pub truncated: bool,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent per-trajectory stream derived purely from (base seed, index),
/// so ensembles are reproducible under any parallel schedule.
fn trajectory_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = base_seed ^ 0x517cc1b727220a95u64.wrapping_mul(index.wrapping_add(1));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

struct StepBuffers {
    drift_slow: Vec<f64>,
    drift_fast: Vec<f64>,
    gain_slow: Vec<f64>,
    gain_fast: Vec<f64>,
    noise_slow: Vec<f64>,
    noise_fast: Vec<f64>,
    u: Vec<f64>,
    u_ref: Vec<f64>,
    dw_slow: Vec<f64>,
    dw_fast: Vec<f64>,
}

impl StepBuffers {
    fn new(m: &ModelSpec) -> Self {
        StepBuffers {
            drift_slow: vec![0.0; m.dim_slow],
            drift_fast: vec![0.0; m.dim_fast],
            gain_slow: vec![0.0; m.dim_slow * m.control_dim],
            gain_fast: vec![0.0; m.dim_fast * m.control_dim],
            noise_slow: vec![0.0; m.dim_slow * m.noise_dim_slow],
            noise_fast: vec![0.0; m.dim_fast * m.noise_dim_fast],
            u: vec![0.0; m.control_dim],
            u_ref: vec![0.0; m.control_dim],
            dw_slow: vec![0.0; m.noise_dim_slow],
            dw_fast: vec![0.0; m.noise_dim_fast],
        }
    }
}

fn run_path(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    reference: Option<&FeedbackPolicy>,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    rng_seed: u64,
) -> Result<(TrajectoryResult, f64)> {
    model.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if t_max < dt {
        return Err(Error::Precondition(format!(
            "t_max = {t_max} must be at least dt = {dt}"
        )));
    }
    if z0.len() != model.dim() {
        return Err(Error::Shape(format!(
            "initial state has {} components, model needs {}",
            z0.len(),
            model.dim()
        )));
    }

    let eps = model.epsilon;
    let beta = model.beta;
    let sqrt_dt = dt.sqrt();
    let sqrt_beta = beta.sqrt();
    let inv_sqrt_beta = 1.0 / sqrt_beta;
    let fast_noise_scale = inv_sqrt_beta / eps;

    let mut x = z0[..model.dim_slow].to_vec();
    let mut y = z0[model.dim_slow..].to_vec();
    if (model.stop_region)(&x, &y) {
        return Err(Error::Precondition(
            "initial state is already inside the stop region".into(),
        ));
    }

    let mut rng = trajectory_rng(rng_seed, 0);
    let mut buf = StepBuffers::new(model);
    let n_steps = ((t_max / dt) + 1e-9).floor() as usize;
    let n_steps = n_steps.max(1);

    let mut cost = 0.0;
    let mut cost_integral_g = 0.0;
    let mut girsanov = 0.0;
    let mut ref_gap = 0.0;

    for step in 0..n_steps {
        policy.eval(&x, &y, eps, &mut buf.u);
        let g = (model.running_cost)(&x, &y);
        if !g.is_finite() || g < 0.0 || g > model.cost_bound + 1e-12 {
            return Err(Error::Precondition(format!(
                "running cost {g} fell outside [0, {}] at step {step}",
                model.cost_bound
            )));
        }
        let u_sq: f64 = buf.u.iter().map(|v| v * v).sum();
        cost += (g + 0.5 * u_sq) * dt;
        cost_integral_g += g * dt;
        if let Some(rp) = reference {
            rp.eval(&x, &y, eps, &mut buf.u_ref);
            let d: f64 = buf
                .u
                .iter()
                .zip(&buf.u_ref)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            ref_gap += d * dt;
        }

        for w in buf.dw_slow.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *w = sqrt_dt * z;
        }
        if model.shared_noise {
            buf.dw_fast.copy_from_slice(&buf.dw_slow);
        } else {
            for w in buf.dw_fast.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *w = sqrt_dt * z;
            }
        }

        // u . dW against the unique driving increments; the control dimension
        // matches it by construction (see ModelSpec::validate).
        let mut u_dot_dw = 0.0;
        if model.shared_noise || model.noise_dim_fast == 0 {
            for (u, w) in buf.u.iter().zip(&buf.dw_slow) {
                u_dot_dw += u * w;
            }
        } else {
            let (u_s, u_f) = buf.u.split_at(model.noise_dim_slow);
            for (u, w) in u_s.iter().zip(&buf.dw_slow) {
                u_dot_dw += u * w;
            }
            for (u, w) in u_f.iter().zip(&buf.dw_fast) {
                u_dot_dw += u * w;
            }
        }
        girsanov -= sqrt_beta * u_dot_dw + 0.5 * beta * u_sq * dt;

        if model.dim_slow > 0 {
            (model.slow_drift)(&x, &y, eps, &mut buf.drift_slow);
            (model.control_gain_slow)(&x, &y, eps, &mut buf.gain_slow);
            (model.slow_noise)(&x, &y, &mut buf.noise_slow);
        }
        if model.dim_fast > 0 {
            (model.fast_drift)(&x, &y, eps, &mut buf.drift_fast);
            (model.control_gain_fast)(&x, &y, eps, &mut buf.gain_fast);
            (model.fast_noise)(&x, &y, &mut buf.noise_fast);
        }

        for i in 0..model.dim_slow {
            let mut incr = buf.drift_slow[i];
            for (j, uj) in buf.u.iter().enumerate() {
                incr += buf.gain_slow[i * model.control_dim + j] * uj;
            }
            let mut noise = 0.0;
            for (j, wj) in buf.dw_slow.iter().enumerate() {
                noise += buf.noise_slow[i * model.noise_dim_slow + j] * wj;
            }
            x[i] += incr * dt + inv_sqrt_beta * noise;
        }
        for i in 0..model.dim_fast {
            let mut incr = buf.drift_fast[i];
            for (j, uj) in buf.u.iter().enumerate() {
                incr += buf.gain_fast[i * model.control_dim + j] * uj;
            }
            let mut noise = 0.0;
            for (j, wj) in buf.dw_fast.iter().enumerate() {
                noise += buf.noise_fast[i * model.noise_dim_fast + j] * wj;
            }
            y[i] += incr * dt + fast_noise_scale * noise;
        }

        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step,
                time: (step + 1) as f64 * dt,
            });
        }

        if (model.stop_region)(&x, &y) {
            return Ok((
                TrajectoryResult {
                    stop_time: (step + 1) as f64 * dt,
                    path_cost: cost,
                    exp_weight: (-beta * cost_integral_g).exp(),
                    girsanov_log_weight: girsanov,
                    truncated: false,
                },
                ref_gap,
            ));
        }
    }

    Ok((
        TrajectoryResult {
            stop_time: t_max,
            path_cost: cost,
            exp_weight: (-beta * cost_integral_g).exp(),
            girsanov_log_weight: girsanov,
            truncated: true,
        },
        ref_gap,
    ))
}

/// Advance one Euler-Maruyama path until first exit or the time cap.
/// The same seed always reproduces the identical result, bit for bit.
pub fn simulate(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    rng_seed: u64,
) -> Result<TrajectoryResult> {
    run_path(model, policy, None, z0, dt, t_max, rng_seed).map(|(r, _)| r)
}

/// Like [`simulate`], additionally accumulating the squared control gap
/// `int_0^tau |u_s - u_ref_s|^2 ds` against a reference feedback evaluated
/// along the same path.
pub fn simulate_with_divergence(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    reference: &FeedbackPolicy,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    rng_seed: u64,
) -> Result<(TrajectoryResult, f64)> {
    run_path(model, policy, Some(reference), z0, dt, t_max, rng_seed)
}

fn ensemble_seed(base_seed: u64, index: usize) -> u64 {
    let mut state = base_seed;
    let mixed = splitmix64(&mut state) ^ (index as u64).wrapping_mul(0xd1342543de82ef95);
    let mut state2 = mixed;
    splitmix64(&mut state2)
}

/// Sample `n_traj` independent trajectories. Trajectory `i` uses a seed
/// derived deterministically from `(base_seed, i)`; results do not depend on
/// the execution order or the degree of parallelism.
pub fn sample_ensemble(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<TrajectoryResult>> {
    sample_ensemble_with_divergence(model, policy, None, z0, dt, t_max, n_traj, base_seed)
        .map(|v| v.into_iter().map(|(r, _)| r).collect())
}

/// Ensemble variant of [`simulate_with_divergence`]; used by the entropy
/// estimators.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_ensemble_with_divergence(
    model: &ModelSpec,
    policy: &FeedbackPolicy,
    reference: Option<&FeedbackPolicy>,
    z0: &[f64],
    dt: f64,
    t_max: f64,
    n_traj: usize,
    base_seed: u64,
) -> Result<Vec<(TrajectoryResult, f64)>> {
    if n_traj == 0 {
        return Err(Error::Precondition("n_traj must be at least 1".into()));
    }
    model.validate()?;
    let results: Vec<Result<(TrajectoryResult, f64)>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            run_path(
                model,
                policy,
                reference,
                z0,
                dt,
                t_max,
                ensemble_seed(base_seed, i),
            )
        })
        .collect();
    let mut out = Vec::with_capacity(n_traj);
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Trajectory {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Seed used for trajectory `i` of an ensemble; exposed so that single-path
/// reruns can reproduce ensemble members.
pub fn seed_for_trajectory(base_seed: u64, index: usize) -> u64 {
    ensemble_seed(base_seed, index)
}
