//! Time-indexed sequences of solution snapshots.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, ModelParams};

/// Which solver produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    Dp,
    Fd,
}

impl std::fmt::Display for SolverTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverTag::Dp => write!(f, "dp"),
            SolverTag::Fd => write!(f, "fd"),
        }
    }
}

/// Snapshots of the evolving state at increasing times, all on one grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    pub params: ModelParams,
    pub solver: SolverTag,
}

impl Trajectory {
    pub fn new(
        times: Vec<f64>,
        snapshots: Vec<GridFunction>,
        params: ModelParams,
        solver: SolverTag,
    ) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::invalid(format!(
                "trajectory has {} times but {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::invalid("trajectory must hold at least one snapshot"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trajectory times must be strictly increasing"));
        }
        let grid = snapshots[0].grid();
        if snapshots.iter().any(|s| s.grid() != grid) {
            return Err(Error::invalid("trajectory snapshots must share one grid"));
        }
        Ok(Trajectory { times, snapshots, params, solver })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Common spacing of the time grid, if it is uniform within `1e-9`
    /// relative tolerance.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1e-300));
        uniform.then_some(dt)
    }

    /// The restriction to times `<= t_max` (with a hair of tolerance for
    /// round-off in time grids).
    pub fn prefix(&self, t_max: f64) -> Result<Trajectory> {
        let cut = self.times.partition_point(|&t| t <= t_max * (1.0 + 1e-12));
        if cut == 0 {
            return Err(Error::invalid(format!("no snapshot at or before t = {t_max}")));
        }
        Trajectory::new(
            self.times[..cut].to_vec(),
            self.snapshots[..cut].to_vec(),
            self.params,
            self.solver,
        )
    }
}
