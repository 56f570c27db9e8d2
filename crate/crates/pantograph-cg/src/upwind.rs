//! Independent method-of-lines reference solver.
//!
//! First-order upwind transport plus the dilated source term, advanced with
//! Heun's method under a CFL constraint. This path shares nothing with the
//! series solver except the grid types and the zero-extended interpolation
//! used for the nonlocal term, so agreement between the two is a meaningful
//! cross-check.

use crate::error::{Error, Result};
use crate::grid::{eval_extended_raw, Grid, GridFunction, ModelParams};
use crate::operators::generator_apply;
use crate::trajectory::{SolverTag, Trajectory};

/// Smallest negative value tolerated from Heun stages before the run falls
/// back to the provably positive Euler stepping.
const POSITIVITY_SLACK: f64 = -1e-12;

/// Time stepping scheme of the reference solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    /// Two-stage second-order Runge-Kutta.
    Heun,
}

/// Time-step configuration, tied to the grid through the CFL number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub dt: f64,
    pub cfl: f64,
    pub scheme: TimeScheme,
}

impl FdConfig {
    /// Derives the step `dt = cfl * h / g` from the Courant number.
    pub fn new(cfl: f64, grid: &Grid, params: &ModelParams) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::invalid(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        Ok(FdConfig { dt: cfl * grid.spacing() / params.g, cfl, scheme: TimeScheme::Heun })
    }
}

/// Semi-discrete right-hand side: upwind transport against the flow plus the
/// dilated source, with the boundary node pinned.
fn rhs(grid: &Grid, params: &ModelParams, u: &[f64], out: &mut [f64]) {
    let h = grid.spacing();
    let src = params.b * params.alpha * params.alpha;
    out[0] = 0.0;
    for i in 1..u.len() {
        let transport = -params.g * (u[i] - u[i - 1]) / h;
        let source = src * eval_extended_raw(grid, u, params.alpha * grid.node(i));
        out[i] = transport + source;
    }
}

struct StepPlan {
    dt: f64,
    n_steps: usize,
    save_steps: Vec<usize>,
}

fn plan_steps(t_final: f64, dt: f64, save_times: &[f64]) -> Result<StepPlan> {
    if save_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("save_times must be strictly increasing"));
    }
    if save_times.iter().any(|&t| t < 0.0 || t > t_final * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("save_times must lie within [0, {t_final}]")));
    }
    let n_steps = (t_final / dt).round() as usize;
    // save times snap to the nearest step; the actual step time is recorded
    let mut save_steps: Vec<usize> = save_times
        .iter()
        .map(|&t| ((t / dt).round() as usize).min(n_steps))
        .collect();
    save_steps.dedup();
    Ok(StepPlan { dt, n_steps, save_steps })
}

fn horizon_check(u0: &GridFunction, params: &ModelParams, t_final: f64) -> Result<()> {
    let support_max = u0.support_max();
    let required = support_max + params.g * t_final;
    if required > u0.grid().length() * (1.0 + 1e-12) {
        return Err(Error::Horizon {
            support_max,
            required,
            grid_length: u0.grid().length(),
        });
    }
    Ok(())
}

/// Marches the semi-discrete system and returns snapshots at the save times
/// (snapped to steps).
///
/// With non-negative data, Heun stages are monitored for positivity; a
/// violation beyond round-off restarts the whole run with explicit Euler at
/// half the step, which keeps every update coefficient non-negative under the
/// CFL bound.
pub fn fd_solve(
    u0: &GridFunction,
    params: &ModelParams,
    t_final: f64,
    cfg: &FdConfig,
    save_times: &[f64],
) -> Result<Trajectory> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::invalid(format!("t_final must be >= 0, got {t_final}")));
    }
    let grid = *u0.grid();
    let expected_dt = cfg.cfl * grid.spacing() / params.g;
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::invalid(format!("cfl must lie in (0, 1], got {}", cfg.cfl)));
    }
    if (cfg.dt - expected_dt).abs() > 1e-12 * expected_dt {
        return Err(Error::invalid(format!(
            "dt {} is inconsistent with cfl*h/g = {expected_dt}",
            cfg.dt
        )));
    }
    horizon_check(u0, params, t_final)?;

    if t_final == 0.0 {
        let mut first = u0.clone();
        first.values_mut()[0] = 0.0;
        return Trajectory::new(vec![0.0], vec![first], *params, SolverTag::Fd);
    }

    let monitor_positivity = u0.values().iter().all(|&v| v >= 0.0);
    let plan = plan_steps(t_final, cfg.dt, save_times)?;
    match march(u0, params, &grid, &plan, true, monitor_positivity) {
        Some(traj) => traj,
        None => {
            // Heun produced a real negative value: rerun with Euler, halved step.
            let plan = plan_steps(t_final, cfg.dt / 2.0, save_times)?;
            march(u0, params, &grid, &plan, false, false).expect("euler path never aborts")
        }
    }
}

/// One full march; returns `None` when positivity monitoring aborts the Heun
/// path.
fn march(
    u0: &GridFunction,
    params: &ModelParams,
    grid: &Grid,
    plan: &StepPlan,
    heun: bool,
    monitor_positivity: bool,
) -> Option<Result<Trajectory>> {
    let n = grid.n_points();
    let mut state = u0.values().to_vec();
    state[0] = 0.0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut save_iter = plan.save_steps.iter().peekable();
    let record = |step: usize, state: &[f64], times: &mut Vec<f64>, snaps: &mut Vec<GridFunction>| {
        times.push(step as f64 * plan.dt);
        snaps.push(GridFunction::from_raw(*grid, state.to_vec()));
    };
    if save_iter.peek() == Some(&&0) {
        save_iter.next();
        record(0, &state, &mut times, &mut snapshots);
    }

    for step in 1..=plan.n_steps {
        rhs(grid, params, &state, &mut k1);
        if heun {
            for i in 0..n {
                stage[i] = state[i] + plan.dt * k1[i];
            }
            stage[0] = 0.0;
            rhs(grid, params, &stage, &mut k2);
            for i in 0..n {
                state[i] += 0.5 * plan.dt * (k1[i] + k2[i]);
            }
        } else {
            for i in 0..n {
                state[i] += plan.dt * k1[i];
            }
        }
        state[0] = 0.0;
        if monitor_positivity {
            let min = state.iter().copied().fold(f64::INFINITY, f64::min);
            if min < POSITIVITY_SLACK {
                return None;
            }
            // round-off negatives are clamped to exact zero
            for v in state.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        if save_iter.peek() == Some(&&step) {
            save_iter.next();
            record(step, &state, &mut times, &mut snapshots);
        }
    }
    if times.is_empty() {
        // no save time requested: record the final state
        record(plan.n_steps, &state, &mut times, &mut snapshots);
    }
    Some(Trajectory::new(times, snapshots, *params, SolverTag::Fd))
}

/// Recovers the physical density from the transformed state:
/// `n(x, t) = exp(-(b + mu) t) u(x, t)`.
pub fn recover_density(u: &GridFunction, t: f64, params: &ModelParams) -> Result<GridFunction> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be >= 0, got {t}")));
    }
    Ok(u.scaled((-(params.b + params.mu) * t).exp()))
}

/// Maximum interior residual of the evolution equation over a uniformly
/// spaced trajectory, normalized by the sup of the state.
///
/// Time derivatives are central differences across snapshots, the spatial
/// part comes from [`generator_apply`]. Diagnostic only.
pub fn pde_residual(traj: &Trajectory, params: &ModelParams) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::invalid("residual needs at least 3 snapshots"));
    }
    let dt = traj
        .uniform_spacing()
        .ok_or_else(|| Error::invalid("residual needs uniformly spaced snapshots"))?;
    let sup = traj
        .snapshots
        .iter()
        .map(|s| s.norm(crate::grid::SpaceTag::Sup))
        .fold(0.0_f64, f64::max);
    if sup == 0.0 {
        return Ok(0.0);
    }
    let n = traj.snapshots[0].grid().n_points();
    let mut worst = 0.0_f64;
    for k in 1..traj.len() - 1 {
        let gen = generator_apply(&traj.snapshots[k], params);
        let prev = traj.snapshots[k - 1].values();
        let next = traj.snapshots[k + 1].values();
        for i in 1..n - 1 {
            let dudt = (next[i] - prev[i]) / (2.0 * dt);
            worst = worst.max((dudt - gen.values()[i]).abs());
        }
    }
    Ok(worst / sup)
}
