//! The operators driving the transformed equation: the shift group, the
//! dilation (pantograph) term, and the full generator used for residual
//! diagnostics.
//!
//! All three act on [`GridFunction`] values through the shared zero-extended
//! interpolation, so the series solver and the finite-difference solver agree
//! on what the nonlocal term means.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, ModelParams, SpaceTag};

/// Operator norm of the pantograph term `f(x) -> b alpha^2 f(alpha x)` in the
/// given space: `b*alpha` in L1, `b*alpha^{2-1/p}` in Lp, `b*alpha^2` in sup.
///
/// The Lp value follows from the change of variables `w = alpha x` in
/// `int |b alpha^2 f(alpha x)|^p dx`, which is attained on indicator data.
pub fn pantograph_norm(space: SpaceTag, params: &ModelParams) -> f64 {
    let ModelParams { b, alpha, .. } = *params;
    match space {
        SpaceTag::L1 => b * alpha,
        SpaceTag::Lp(p) => b * alpha.powf(2.0 - 1.0 / p),
        SpaceTag::Sup => b * alpha * alpha,
    }
}

/// Operator norm of the pantograph term, tabulated per space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNormTable {
    pub space: SpaceTag,
    pub value: f64,
}

impl OperatorNormTable {
    pub fn new(space: SpaceTag, params: &ModelParams) -> Self {
        OperatorNormTable { space, value: pantograph_norm(space, params) }
    }
}

/// Transport by the shift group: `output(x) = f(x - g*tau)`, with the
/// boundary value at `x = 0` pinned to zero afterwards.
///
/// Only forward time is supported; the solvers never march backwards.
pub fn shift_apply(f: &GridFunction, tau: f64, params: &ModelParams) -> Result<GridFunction> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("shift time must be >= 0, got {tau}")));
    }
    let grid = *f.grid();
    let offset = params.g * tau;
    let values: Vec<f64> = grid.nodes().map(|x| f.eval_extended(x - offset)).collect();
    let mut out = GridFunction::from_raw(grid, values);
    out.values_mut()[0] = 0.0;
    Ok(out)
}

/// Dilation term of the generator: `output(x) = b alpha^2 f(alpha x)`.
///
/// Support shrinks by the factor `alpha`, so the term never reads past the
/// mesh for states whose support already fits.
pub fn pantograph_apply(f: &GridFunction, params: &ModelParams) -> GridFunction {
    let grid = *f.grid();
    let scale = params.b * params.alpha * params.alpha;
    let values: Vec<f64> =
        grid.nodes().map(|x| scale * f.eval_extended(params.alpha * x)).collect();
    GridFunction::from_raw(grid, values)
}

/// Full generator `-g f' + b alpha^2 f(alpha x)` with central differences at
/// interior nodes and one-sided differences at the ends.
///
/// Used only as a residual diagnostic; time evolution never differentiates
/// numerically.
pub fn generator_apply(f: &GridFunction, params: &ModelParams) -> GridFunction {
    let grid = *f.grid();
    let h = grid.spacing();
    let v = f.values();
    let n = grid.n_points();
    let pantograph = pantograph_apply(f, params);
    let mut out = pantograph.values().to_vec();
    out[0] -= params.g * (v[1] - v[0]) / h;
    for i in 1..n - 1 {
        out[i] -= params.g * (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    out[n - 1] -= params.g * (v[n - 1] - v[n - 2]) / h;
    GridFunction::from_raw(grid, out)
}
