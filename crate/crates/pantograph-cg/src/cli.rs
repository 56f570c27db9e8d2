//! Command-line orchestration.
//!
//! Exit codes: 0 success, 2 malformed configuration, 3 horizon violation,
//! 4 series not converged (partial outputs are still written), 5 comparison
//! threshold exceeded, 1 anything else.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::{cesaro_mean, laplace_march_step, resolvent_from_trajectory};
use crate::config::{parse_space, Method, RunConfig};
use crate::dyson_phillips::{dp_march, dp_trajectory, truncation_bound, SeriesConfig, SeriesResult};
use crate::error::{Error, Result};
use crate::grid::{make_initial, GridFunction, ModelParams, SpaceTag};
use crate::operators::pantograph_norm;
use crate::output::{format_float, snapshot_filename, write_json, write_snapshot};
use crate::trajectory::Trajectory;
use crate::upwind::{fd_solve, recover_density, FdConfig};

/// Solver for the cell growth equation: series solution with certified
/// truncation bounds, an upwind reference solver, and long-time asymptotics
/// estimators.
#[derive(Debug, Parser)]
#[command(name = "pantograph-cg", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the configured initial density and write snapshots plus a
    /// summary record.
    Run { config: PathBuf },
    /// Run both solvers and report the cross-solver gap per save time.
    Compare { config: PathBuf },
    /// Long-time estimators: running means, stabilization metrics and
    /// resolvent candidates.
    Asymptotics { config: PathBuf },
    /// Print the truncation-bound matrix and the minimal term counts for the
    /// requested tolerances.
    BoundTable {
        /// Largest term index in the table.
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        /// Times (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        times: Vec<f64>,
        /// Norm: l1, sup or lp:<p>.
        #[arg(long, default_value = "l1")]
        space: String,
        /// Division rate.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Division multiplicity.
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Tolerances to report minimal term counts for (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "1e-6")]
        tols: Vec<f64>,
    },
}

impl Cli {
    /// Executes the selected subcommand and returns the process exit code.
    pub fn execute(&self) -> i32 {
        let result = match &self.command {
            Command::Run { config } => cmd_run(config),
            Command::Compare { config } => cmd_compare(config),
            Command::Asymptotics { config } => cmd_asymptotics(config),
            Command::BoundTable { n_max, times, space, b, alpha, tols } => {
                cmd_bound_table(*n_max, times, space, *b, *alpha, tols)
            }
        };
        match result {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code_for(&e)
            }
        }
    }
}

/// Maps an error onto the documented exit codes.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => 2,
        Error::Horizon { .. } => 3,
        Error::NotConverged { .. } => 4,
        Error::ThresholdExceeded { .. } => 5,
        _ => 1,
    }
}

fn series_config(cfg: &RunConfig) -> Result<SeriesConfig> {
    // t_final = 0 runs never reach the series solver with t > 0, but the
    // config type wants a positive horizon
    SeriesConfig::new(cfg.t_final.max(f64::MIN_POSITIVE), cfg.n_time_nodes, cfg.tol, cfg.n_max)
}

fn snapshot_record(
    t: f64,
    file: &str,
    u: &GridFunction,
    series: Option<&SeriesResult>,
    gap: Option<f64>,
) -> serde_json::Value {
    let mut rec = json!({
        "t": t,
        "file": file,
        "mass": u.total_mass(),
        "l1": u.norm(SpaceTag::L1),
        "sup": u.norm(SpaceTag::Sup),
    });
    if let Some(r) = series {
        rec["n_used"] = json!(r.n_used);
        rec["remainder_bound"] = json!(r.remainder_bound);
        rec["converged"] = json!(r.converged);
    }
    if let Some(gap) = gap {
        rec["l1_gap_rel"] = json!(gap);
    }
    rec
}

fn relative_l1_gap(a: &GridFunction, b: &GridFunction) -> f64 {
    let mut diff = a.clone();
    diff.add_scaled(b, -1.0);
    let denom = a.norm(SpaceTag::L1);
    if denom > 0.0 {
        diff.norm(SpaceTag::L1) / denom
    } else {
        diff.norm(SpaceTag::L1)
    }
}

/// Evolve and write snapshots. Exit 0, or 4 when the series hit the term cap
/// (partial outputs are written either way).
pub fn cmd_run(config_path: &Path) -> Result<i32> {
    let started = Instant::now();
    let cfg = RunConfig::from_file(config_path)?;
    cfg.check_horizon(cfg.t_final)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let u0 = make_initial(cfg.initial, &cfg.grid)?;

    // the finite-difference run fixes the actual save times when present
    let fd_traj = match cfg.method {
        Method::Fd | Method::Both => {
            let fd_cfg = FdConfig::new(cfg.cfl, &cfg.grid, &cfg.params)?;
            Some(fd_solve(&u0, &cfg.params, cfg.t_final, &fd_cfg, &cfg.save_times)?)
        }
        Method::Dp => None,
    };
    let times: Vec<f64> = match &fd_traj {
        Some(traj) => traj.times.clone(),
        None => cfg.save_times.clone(),
    };
    let dp = match cfg.method {
        Method::Dp | Method::Both => {
            Some(dp_trajectory(&u0, &cfg.params, &times, &series_config(&cfg)?, cfg.space)?)
        }
        Method::Fd => None,
    };

    // snapshots come from the series solver when it ran, from the
    // finite-difference solver otherwise
    let primary: &Trajectory = match (&dp, &fd_traj) {
        (Some(dp), _) => &dp.trajectory,
        (None, Some(fd)) => fd,
        (None, None) => unreachable!("some method always runs"),
    };

    let mut records = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for (k, (&t, u)) in primary.times.iter().zip(&primary.snapshots).enumerate() {
        let n = if cfg.emit_n {
            Some(recover_density(u, t, &cfg.params)?)
        } else {
            None
        };
        write_snapshot(&cfg.output_dir, t, u, n.as_ref(), cfg.format)?;
        let series = dp.as_ref().map(|d| &d.results[k]);
        let gap = match (&dp, &fd_traj) {
            (Some(dp), Some(fd)) => {
                Some(relative_l1_gap(&dp.trajectory.snapshots[k], &fd.snapshots[k]))
            }
            _ => None,
        };
        if let Some(r) = series {
            if !r.converged {
                warnings.push(format!(
                    "series at t = {t} hit the term cap: remainder bound {:e} > tol {:e}",
                    r.remainder_bound, cfg.tol
                ));
            }
        }
        records.push(snapshot_record(t, &snapshot_filename(t, cfg.format), u, series, gap));
    }

    let summary = json!({
        "command": "run",
        "method": match cfg.method { Method::Dp => "dp", Method::Fd => "fd", Method::Both => "both" },
        "params": {"g": cfg.params.g, "b": cfg.params.b, "mu": cfg.params.mu, "alpha": cfg.params.alpha},
        "grid": {"L": cfg.grid.length(), "h": cfg.grid.spacing(), "n_points": cfg.grid.n_points()},
        "space": cfg.space.to_string(),
        "tol": cfg.tol,
        "snapshots": records,
        "warnings": warnings,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;

    if warnings.is_empty() {
        Ok(0)
    } else {
        eprintln!("warning: series did not converge at every save time (see summary.json)");
        Ok(4)
    }
}

/// Run both solvers, report per-time gaps, and fail (exit 5) when any gap
/// exceeds the configured threshold.
pub fn cmd_compare(config_path: &Path) -> Result<i32> {
    let cfg = RunConfig::from_file(config_path)?;
    if cfg.method != Method::Both {
        return Err(Error::invalid("compare needs solver.method = both"));
    }
    cfg.check_horizon(cfg.t_final)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let u0 = make_initial(cfg.initial, &cfg.grid)?;
    let mass0 = u0.total_mass();

    let fd_cfg = FdConfig::new(cfg.cfl, &cfg.grid, &cfg.params)?;
    let fd = fd_solve(&u0, &cfg.params, cfg.t_final, &fd_cfg, &cfg.save_times)?;
    let dp = dp_trajectory(&u0, &cfg.params, &fd.times, &series_config(&cfg)?, cfg.space)?;
    if let Some(bad) = dp.results.iter().find(|r| !r.converged) {
        return Err(Error::NotConverged {
            remainder_bound: bad.remainder_bound,
            tol: cfg.tol,
            n_terms: bad.n_used + 1,
        });
    }

    let growth = cfg.params.b * cfg.params.alpha;
    let mut rows = Vec::new();
    let mut max_gap = 0.0_f64;
    for (k, &t) in fd.times.iter().enumerate() {
        let u_dp = &dp.trajectory.snapshots[k];
        let u_fd = &fd.snapshots[k];
        let gap = relative_l1_gap(u_dp, u_fd);
        max_gap = max_gap.max(gap);
        let mass_dp = u_dp.total_mass();
        let mass_law_err = (mass_dp * (-growth * t).exp() / mass0 - 1.0).abs();
        println!(
            "t={t:.6} l1_gap_rel={gap:.6e} mass_dp={mass_dp:.6e} mass_fd={:.6e} mass_law_err={mass_law_err:.6e}",
            u_fd.total_mass()
        );
        rows.push(json!({
            "t": t,
            "l1_gap_rel": gap,
            "mass_dp": mass_dp,
            "mass_fd": u_fd.total_mass(),
            "mass_law_err": mass_law_err,
        }));
    }
    let report = json!({
        "command": "compare",
        "threshold": cfg.compare_threshold,
        "max_gap": max_gap,
        "rows": rows,
    });
    write_json(&cfg.output_dir.join("compare.json"), &report)?;

    if max_gap <= cfg.compare_threshold {
        Ok(0)
    } else {
        Err(Error::ThresholdExceeded { max_gap, threshold: cfg.compare_threshold })
    }
}

/// Long-time estimators from one marched trajectory: running means over
/// `[0, t_final]`, resolvent candidates over the configured horizon, and
/// their cross-consistency.
pub fn cmd_asymptotics(config_path: &Path) -> Result<i32> {
    let cfg = RunConfig::from_file(config_path)?;
    if !cfg.asymptotics_enabled {
        return Err(Error::invalid("asymptotics.enabled must be true for this command"));
    }
    let horizon_total = cfg.horizon.max(cfg.t_final);
    cfg.check_horizon(horizon_total)?;
    for &lambda in &cfg.lambdas {
        if lambda * cfg.horizon < crate::asymptotics::MIN_TAIL_EXPONENT * (1.0 - 1e-9) {
            return Err(Error::invalid(format!(
                "asymptotics.horizon {} too short for lambda {lambda}",
                cfg.horizon
            )));
        }
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let u0 = make_initial(cfg.initial, &cfg.grid)?;

    let dt_target = laplace_march_step(cfg.lambdas[0]);
    let n_steps = (horizon_total / dt_target).ceil() as usize;
    let dt = horizon_total / n_steps as f64;
    let series_cfg = series_config(&cfg)?;
    let traj = dp_march(&u0, &cfg.params, dt, n_steps, &series_cfg, SpaceTag::L1)?;

    // running means over the configured window
    let window = traj.prefix(cfg.t_final)?;
    let cesaro = cesaro_mean(&window, &cfg.params)?;
    let growth = cfg.params.b * cfg.params.alpha;
    let rescaled_mass: Vec<f64> = window
        .times
        .iter()
        .zip(&window.snapshots)
        .map(|(&t, s)| s.total_mass() * (-growth * t).exp())
        .collect();

    // a handful of running means for plotting, plus the final one
    let mut mean_files = Vec::new();
    let n_means = cesaro.running_means.len();
    let stride = (n_means / 8).max(1);
    for k in (stride..n_means).step_by(stride) {
        let t = cesaro.t_grid[k];
        let name = format!("cesaro_mean_t{:.6}.{}", t, cfg.format.extension());
        let rendered =
            crate::output::render_snapshot(&cesaro.running_means[k], None, cfg.format);
        crate::output::write_atomic(&cfg.output_dir.join(&name), &rendered)?;
        mean_files.push(name);
    }
    let final_name = format!("cesaro_mean.{}", cfg.format.extension());
    crate::output::write_atomic(
        &cfg.output_dir.join(&final_name),
        &crate::output::render_snapshot(cesaro.final_mean(), None, cfg.format),
    )?;
    mean_files.push(final_name);

    // resolvent candidates over the configured horizon
    let laplace_window = traj.prefix(cfg.horizon)?;
    let final_mean = cesaro.final_mean();
    let mean_norm = final_mean.norm(SpaceTag::L1);
    let mut lambda_rows = Vec::new();
    let mut candidate_files = Vec::new();
    for &lambda in &cfg.lambdas {
        let cand = resolvent_from_trajectory(lambda, &laplace_window, &cfg.params)?;
        let name = format!("resolvent_lambda{:.6}.{}", lambda, cfg.format.extension());
        crate::output::write_atomic(
            &cfg.output_dir.join(&name),
            &crate::output::render_snapshot(&cand.profile, None, cfg.format),
        )?;
        let mut diff = cand.profile.clone();
        diff.add_scaled(final_mean, -1.0);
        let cesaro_gap = if mean_norm > 0.0 {
            diff.norm(SpaceTag::L1) / mean_norm
        } else {
            diff.norm(SpaceTag::L1)
        };
        println!(
            "lambda={lambda:.6} tail_bound={:.6e} cesaro_gap_rel={cesaro_gap:.6e}",
            cand.tail_bound
        );
        lambda_rows.push(json!({
            "lambda": lambda,
            "file": name.clone(),
            "tail_bound": cand.tail_bound,
            "cesaro_gap_rel": cesaro_gap,
            "mass": cand.profile.total_mass(),
        }));
        candidate_files.push(name);
    }

    let report = json!({
        "command": "asymptotics",
        "t_grid": cesaro.t_grid,
        "stabilization_metric": cesaro.stabilization_metric,
        "final_quarter_stabilization": cesaro.final_quarter_stabilization(),
        "rescaled_mass": rescaled_mass,
        "horizon": cfg.horizon,
        "march_dt": dt,
        "lambdas": lambda_rows,
        "cesaro_mean_files": mean_files,
    });
    write_json(&cfg.output_dir.join("asymptotics.json"), &report)?;
    Ok(0)
}

/// Print the truncation-bound matrix (rows: term index, columns: time) and
/// minimal term counts for the requested tolerances.
pub fn cmd_bound_table(
    n_max: usize,
    times: &[f64],
    space: &str,
    b: f64,
    alpha: f64,
    tols: &[f64],
) -> Result<i32> {
    if times.is_empty() {
        return Err(Error::invalid("bound-table needs at least one time"));
    }
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::invalid("bound-table times must be >= 0"));
    }
    let space = parse_space(space)?;
    // only the division parameters enter the operator norm
    let params = ModelParams::new(1.0, b, 0.0, alpha)?;
    let h_norm = pantograph_norm(space, &params);
    println!("operator norm in {space}: {}", format_float(h_norm));

    let mut header = String::from("n");
    for &t in times {
        header.push_str(&format!("\tt={t}"));
    }
    println!("{header}");
    for n in 0..=n_max {
        let mut row = format!("{n}");
        for &t in times {
            row.push_str(&format!("\t{:.6e}", truncation_bound(n, t, h_norm)));
        }
        println!("{row}");
    }

    for &tol in tols {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be > 0, got {tol}")));
        }
        for &t in times {
            let cap = 10 * n_max + 1000;
            let minimal = (0..=cap).find(|&n| truncation_bound(n, t, h_norm) <= tol);
            match minimal {
                Some(n) => println!("minimal n for tol={tol:e} at t={t}: {n}"),
                None => println!("minimal n for tol={tol:e} at t={t}: > {cap}"),
            }
        }
    }
    Ok(0)
}
