//! Long-time behavior of the rescaled solution.
//!
//! Dividing out the leading growth rate turns the evolution into a bounded
//! semigroup; its time averages stabilize toward the limit profile, and the
//! same limit is approached by `lambda R(lambda + growth)` applied to the
//! data as `lambda` drops to zero, with the resolvent realized as a Laplace
//! transform of the trajectory over a truncated horizon. The limit profile is
//! not available in closed form here, so estimators report stabilization and
//! consistency diagnostics instead of asserting convergence to a known
//! answer.

use crate::dyson_phillips::{dp_march, SeriesConfig};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, ModelParams, SpaceTag};
use crate::trajectory::Trajectory;

/// Smallest decay exponent `lambda * horizon` accepted for the truncated
/// Laplace transform.
pub const MIN_TAIL_EXPONENT: f64 = 5.0;

/// Multiplies every snapshot by `exp(-b*alpha*t)`, the frame in which the
/// evolution is bounded.
pub fn rescaled_trajectory(traj: &Trajectory, params: &ModelParams) -> Trajectory {
    let growth = params.b * params.alpha;
    let snapshots = traj
        .times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, s)| s.scaled((-growth * t).exp()))
        .collect();
    Trajectory {
        times: traj.times.clone(),
        snapshots,
        params: traj.params,
        solver: traj.solver,
    }
}

/// Running time-averages of the rescaled trajectory and how fast they settle.
#[derive(Debug, Clone)]
pub struct CesaroEstimate {
    /// Times of the running means (the trajectory's own time grid).
    pub t_grid: Vec<f64>,
    /// Mean of the rescaled trajectory over `[0, t]` for each `t`; entry 0
    /// holds the `t -> 0` limit, the rescaled initial state.
    pub running_means: Vec<GridFunction>,
    /// Relative L1 change between consecutive running means; entry 0 is 0.
    pub stabilization_metric: Vec<f64>,
}

impl CesaroEstimate {
    pub fn final_mean(&self) -> &GridFunction {
        self.running_means.last().expect("estimate is non-empty")
    }

    /// Largest stabilization entry over the final quarter of the time grid.
    pub fn final_quarter_stabilization(&self) -> f64 {
        let n = self.stabilization_metric.len();
        let start = n - (n / 4).max(1);
        self.stabilization_metric[start..].iter().fold(0.0_f64, |m, &v| m.max(v))
    }
}

/// Running trapezoid averages of the rescaled trajectory.
///
/// Needs a uniform time grid starting at 0 with at least 5 snapshots. The
/// averages are accumulated incrementally, one panel at a time, in the same
/// summation order a direct prefix trapezoid would use, so the two agree bit
/// for bit.
pub fn cesaro_mean(traj: &Trajectory, params: &ModelParams) -> Result<CesaroEstimate> {
    if traj.len() < 5 {
        return Err(Error::invalid("cesaro_mean needs at least 5 snapshots"));
    }
    if traj.times[0].abs() > 1e-12 {
        return Err(Error::invalid("cesaro_mean needs a trajectory starting at t = 0"));
    }
    let dt = traj
        .uniform_spacing()
        .ok_or_else(|| Error::invalid("cesaro_mean needs uniformly spaced snapshots"))?;

    let rescaled = rescaled_trajectory(traj, params);
    let n_nodes = rescaled.snapshots[0].grid().n_points();

    let mut integral = vec![0.0_f64; n_nodes];
    let mut running_means = Vec::with_capacity(traj.len());
    let mut stabilization = Vec::with_capacity(traj.len());
    running_means.push(rescaled.snapshots[0].clone());
    stabilization.push(0.0);

    for k in 1..rescaled.len() {
        let prev = rescaled.snapshots[k - 1].values();
        let cur = rescaled.snapshots[k].values();
        for (m, acc) in integral.iter_mut().enumerate() {
            *acc += 0.5 * dt * (prev[m] + cur[m]);
        }
        let t_k = rescaled.times[k];
        let mean = GridFunction::from_raw(
            *rescaled.snapshots[0].grid(),
            integral.iter().map(|v| v / t_k).collect(),
        );
        let prev_mean = running_means.last().expect("non-empty");
        let mut diff = mean.clone();
        diff.add_scaled(prev_mean, -1.0);
        let denom = mean.norm(SpaceTag::L1);
        let change = diff.norm(SpaceTag::L1);
        stabilization.push(if denom > 0.0 {
            change / denom
        } else if change > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
        running_means.push(mean);
    }

    Ok(CesaroEstimate {
        t_grid: rescaled.times.clone(),
        running_means,
        stabilization_metric: stabilization,
    })
}

/// One truncated-Laplace resolvent evaluation.
#[derive(Debug, Clone)]
pub struct ResolventCandidate {
    /// `lambda * int_0^H exp(-(lambda + b*alpha) s) u(., s) ds`.
    pub profile: GridFunction,
    /// Certified bound on the dropped tail: `exp(-lambda * H) * |u0|_L1`,
    /// using that the rescaled evolution does not grow the L1 norm.
    pub tail_bound: f64,
    pub lambda: f64,
    pub horizon: f64,
}

/// Per-panel weights of the product-trapezoid rule: with the state linear on
/// the panel and the exponential weight integrated exactly,
///
/// ```text
/// int_0^1 e^{-z tau} (1 - tau) dtau = (z - 1 + e^{-z}) / z^2
/// int_0^1 e^{-z tau} tau dtau       = (1 - (1 + z) e^{-z}) / z^2
/// ```
///
/// Series fallback for small `z` where the closed forms cancel. Integrating
/// the weight exactly matters: a plain trapezoid overestimates a convex
/// exponential, and the tail-bound certificates downstream have no room for
/// a systematic positive bias.
fn exp_panel_weights(z: f64) -> (f64, f64) {
    debug_assert!(z >= 0.0);
    if z < 0.1 {
        // left = sum_k (-z)^k / (k+2)!, right = sum_k (k+1) (-z)^k / (k+2)!
        let mut left = 0.5;
        let mut right = 0.5;
        let mut tl = 0.5;
        let mut tr = 0.5;
        for k in 0..30 {
            let kf = k as f64;
            tl *= -z / (kf + 3.0);
            tr *= -z * (kf + 2.0) / ((kf + 1.0) * (kf + 3.0));
            left += tl;
            right += tr;
            if tl.abs() < 1e-18 && tr.abs() < 1e-18 {
                break;
            }
        }
        (left, right)
    } else {
        let ez = (-z).exp();
        let left = (z - 1.0 + ez) / (z * z);
        let right = (1.0 - (1.0 + z) * ez) / (z * z);
        (left, right)
    }
}

/// Laplace quadrature of an existing trajectory (plain frame, starting at
/// t = 0) against `lambda * exp(-(lambda + b*alpha) s)`.
///
/// The state is taken piecewise linear between the trajectory's own time
/// nodes and the exponential weight is integrated exactly on each panel, so
/// callers control the resolution through the trajectory they pass in.
pub fn resolvent_from_trajectory(
    lambda: f64,
    traj: &Trajectory,
    params: &ModelParams,
) -> Result<ResolventCandidate> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if traj.len() < 2 {
        return Err(Error::invalid("resolvent needs at least 2 snapshots"));
    }
    if traj.times[0].abs() > 1e-12 {
        return Err(Error::invalid("resolvent needs a trajectory starting at t = 0"));
    }
    let horizon = *traj.times.last().expect("non-empty");
    if lambda * horizon < MIN_TAIL_EXPONENT * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "horizon too short: lambda * horizon = {} < {MIN_TAIL_EXPONENT}",
            lambda * horizon
        )));
    }
    let rate = lambda + params.b * params.alpha;
    let grid = *traj.snapshots[0].grid();
    let mut acc = vec![0.0_f64; grid.n_points()];
    for k in 0..traj.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        let (wl, wr) = exp_panel_weights(rate * dt);
        let scale = lambda * dt * (-rate * traj.times[k]).exp();
        let (fl, fr) = (scale * wl, scale * wr);
        let left = traj.snapshots[k].values();
        let right = traj.snapshots[k + 1].values();
        for (m, a) in acc.iter_mut().enumerate() {
            *a += fl * left[m] + fr * right[m];
        }
    }
    let tail_bound = (-lambda * horizon).exp() * traj.snapshots[0].norm(SpaceTag::L1);
    Ok(ResolventCandidate {
        profile: GridFunction::from_raw(grid, acc),
        tail_bound,
        lambda,
        horizon,
    })
}

/// March step used for Laplace trajectories: fine enough to resolve both the
/// evolution and the exponential weight of the largest `lambda`.
pub fn laplace_march_step(lambda_max: f64) -> f64 {
    (0.25_f64).min(0.25 / lambda_max)
}

fn march_to(
    u0: &GridFunction,
    params: &ModelParams,
    horizon: f64,
    lambda_max: f64,
    cfg: &SeriesConfig,
    space: SpaceTag,
) -> Result<Trajectory> {
    let dt_target = laplace_march_step(lambda_max);
    let n_steps = (horizon / dt_target).ceil() as usize;
    let dt = horizon / n_steps as f64;
    dp_march(u0, params, dt, n_steps, cfg, space)
}

/// Evaluates `lambda R(lambda + b*alpha, G) u0` over a truncated horizon by
/// Laplace quadrature of a marched series trajectory.
///
/// Requires `lambda * horizon >= 5` so the reported tail bound is small
/// relative to the data norm.
pub fn resolvent_apply(
    lambda: f64,
    u0: &GridFunction,
    params: &ModelParams,
    horizon: f64,
    cfg: &SeriesConfig,
) -> Result<ResolventCandidate> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if !(horizon > 0.0) || lambda * horizon < MIN_TAIL_EXPONENT * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "horizon too short: lambda * horizon = {} < {MIN_TAIL_EXPONENT}",
            lambda * horizon
        )));
    }
    let traj = march_to(u0, params, horizon, lambda, cfg, SpaceTag::L1)?;
    resolvent_from_trajectory(lambda, &traj, params)
}

/// Family of resolvent candidates over a decreasing `lambda` schedule, with
/// consistency diagnostics.
#[derive(Debug, Clone)]
pub struct ResolventEstimate {
    pub lambdas: Vec<f64>,
    pub candidates: Vec<GridFunction>,
    pub tail_bounds: Vec<f64>,
    /// L1 distance between candidates at consecutive schedule entries.
    pub consecutive_gaps: Vec<f64>,
    /// Relative L1 distance of each candidate from the final running mean of
    /// the same trajectory.
    pub cesaro_gaps: Vec<f64>,
}

/// Estimates the limit profile from a strictly decreasing `lambda` schedule:
/// candidates for each `lambda` from one shared marched trajectory, their
/// consecutive gaps, and the cross-comparison against the final running mean.
pub fn limit_profile_estimate(
    u0: &GridFunction,
    params: &ModelParams,
    lambdas: &[f64],
    horizon: f64,
    cfg: &SeriesConfig,
) -> Result<ResolventEstimate> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda schedule must not be empty"));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("lambda schedule entries must be > 0"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("lambda schedule must be strictly decreasing"));
    }
    let lambda_min = *lambdas.last().expect("non-empty");
    if lambda_min * horizon < MIN_TAIL_EXPONENT * (1.0 - 1e-9) {
        return Err(Error::invalid(format!(
            "horizon too short for the smallest lambda: {} * {horizon} < {MIN_TAIL_EXPONENT}",
            lambda_min
        )));
    }
    let traj = march_to(u0, params, horizon, lambdas[0], cfg, SpaceTag::L1)?;

    let mut candidates = Vec::with_capacity(lambdas.len());
    let mut tail_bounds = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let c = resolvent_from_trajectory(lambda, &traj, params)?;
        candidates.push(c.profile);
        tail_bounds.push(c.tail_bound);
    }
    let consecutive_gaps = candidates
        .windows(2)
        .map(|pair| {
            let mut diff = pair[0].clone();
            diff.add_scaled(&pair[1], -1.0);
            diff.norm(SpaceTag::L1)
        })
        .collect();

    let cesaro = cesaro_mean(&traj, params)?;
    let final_mean = cesaro.final_mean();
    let mean_norm = final_mean.norm(SpaceTag::L1);
    let cesaro_gaps = candidates
        .iter()
        .map(|c| {
            let mut diff = c.clone();
            diff.add_scaled(final_mean, -1.0);
            if mean_norm > 0.0 {
                diff.norm(SpaceTag::L1) / mean_norm
            } else {
                diff.norm(SpaceTag::L1)
            }
        })
        .collect();

    Ok(ResolventEstimate {
        lambdas: lambdas.to_vec(),
        candidates,
        tail_bounds,
        consecutive_gaps,
        cesaro_gaps,
    })
}
