//! Spatial discretization: uniform grid, sampled grid functions, norms and
//! quadrature.
//!
//! Everything lives on a uniform mesh over `[0, L]` with the convention that
//! functions are extended by zero outside the mesh. Off-node queries use
//! linear interpolation, all integrals use the composite trapezoid rule, and
//! summation orders are fixed so results are reproducible bit for bit.

use crate::error::{Error, Result};

/// Relative tolerance used to snap a fractional node index to an integer, so
/// queries at (floating-point images of) node positions hit node values
/// exactly.
pub(crate) const INDEX_SNAP: f64 = 1e-9;

/// Linear interpolation of `values` at the fractional node index `s`, with
/// the same snapping and zero extension as [`eval_extended_raw`]. Hot-loop
/// form for callers that already work in index coordinates.
#[inline]
pub(crate) fn lerp_at_index(values: &[f64], s: f64) -> f64 {
    let base = s.floor();
    let mut theta = s - base;
    let mut idx = base as i64;
    if theta <= INDEX_SNAP {
        theta = 0.0;
    } else if theta >= 1.0 - INDEX_SNAP {
        idx += 1;
        theta = 0.0;
    }
    let last = values.len() as i64 - 1;
    if idx < 0 || idx > last {
        return 0.0;
    }
    if theta == 0.0 {
        return values[idx as usize];
    }
    if idx == last {
        return 0.0;
    }
    let i = idx as usize;
    (1.0 - theta) * values[i] + theta * values[i + 1]
}

/// Physical constants of the growth model.
///
/// `g` is the growth (transport) speed, `b` the division rate, `mu` the death
/// rate and `alpha` the division multiplicity (cells split into `alpha`
/// daughters, so the unknown is sampled at the dilated argument `alpha * x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    pub b: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl ModelParams {
    /// Validates `g > 0`, `b >= 0`, `mu >= 0`, `alpha > 1`.
    ///
    /// `b = 0` and `mu = 0` switch off division and death; both degenerate
    /// cases are useful for testing against pure transport.
    pub fn new(g: f64, b: f64, mu: f64, alpha: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("growth rate g must be > 0, got {g}")));
        }
        if !(b >= 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("division rate b must be >= 0, got {b}")));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::invalid(format!("death rate mu must be >= 0, got {mu}")));
        }
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!(
                "division multiplicity alpha must be > 1, got {alpha}"
            )));
        }
        Ok(ModelParams { g, b, mu, alpha })
    }
}

/// Which norm a computation runs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceTag {
    /// Integral norm (trapezoid quadrature of `|f|`).
    L1,
    /// `p`-integral norm with `1 < p < inf`.
    Lp(f64),
    /// Max-abs over nodes.
    Sup,
}

impl SpaceTag {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("Lp exponent must satisfy 1 < p < inf, got {p}")));
        }
        Ok(SpaceTag::Lp(p))
    }
}

impl std::fmt::Display for SpaceTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpaceTag::L1 => write!(f, "l1"),
            SpaceTag::Lp(p) => write!(f, "lp:{p}"),
            SpaceTag::Sup => write!(f, "sup"),
        }
    }
}

/// Uniform mesh on `[0, L]` with nodes `x_i = i * h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    length: f64,
    spacing: f64,
    n_points: usize,
}

impl Grid {
    /// Builds the mesh, requiring `L / h` integral within `1e-9`.
    pub fn new(length: f64, spacing: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("grid length must be > 0, got {length}")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::invalid(format!("grid spacing must be > 0, got {spacing}")));
        }
        let ratio = length / spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "grid length {length} is not an integral multiple of spacing {spacing} (L/h = {ratio})"
            )));
        }
        let n_points = cells as usize + 1;
        if n_points < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 nodes, got {n_points} (L = {length}, h = {spacing})"
            )));
        }
        Ok(Grid { length, spacing, n_points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Position of node `i`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }
}

/// Zero-extended linear interpolation of `values` sampled on `grid`.
///
/// Shared by [`GridFunction::eval_extended`] and the finite-difference solver
/// (which works on raw state slices), so both solvers use one definition of
/// off-node evaluation.
pub(crate) fn eval_extended_raw(grid: &Grid, values: &[f64], x: f64) -> f64 {
    lerp_at_index(values, x / grid.spacing)
}

/// Composite trapezoid of `map(values[i])` over the mesh, accumulated left to
/// right so the summation order is deterministic.
fn trapezoid_map<F: Fn(f64) -> f64>(values: &[f64], spacing: f64, map: F) -> f64 {
    let n = values.len();
    let mut acc = 0.5 * map(values[0]);
    for &v in &values[1..n - 1] {
        acc += map(v);
    }
    acc += 0.5 * map(values[n - 1]);
    acc * spacing
}

/// A function of `x` sampled on a [`Grid`]; the state evolved by the solvers.
///
/// Immutable by convention: all operations return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    /// Wraps sampled values, checking length and finiteness.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::invalid(format!(
                "value count {} does not match grid node count {}",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("grid function values must be finite, got {v}")));
        }
        Ok(GridFunction { grid, values })
    }

    /// Internal constructor for values produced by finite arithmetic on
    /// already-validated data. The finiteness check is sampled so debug
    /// builds stay fast on solver-sized meshes.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points);
        debug_assert!(values.iter().step_by(101).all(|v| v.is_finite()));
        debug_assert!(values.last().is_none_or(|v| v.is_finite()));
        GridFunction { grid, values }
    }

    pub fn zero(grid: Grid) -> Self {
        GridFunction { values: vec![0.0; grid.n_points], grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates the zero-extended linear interpolant at `x`.
    ///
    /// Exact at nodes; zero outside the mesh.
    pub fn eval_extended(&self, x: f64) -> f64 {
        debug_assert!(x.is_finite());
        eval_extended_raw(&self.grid, &self.values, x)
    }

    /// Norm in the requested space. `L1` and `Lp` use the composite trapezoid
    /// rule, `Sup` the max over nodes.
    pub fn norm(&self, space: SpaceTag) -> f64 {
        match space {
            SpaceTag::L1 => trapezoid_map(&self.values, self.grid.spacing, f64::abs),
            SpaceTag::Lp(p) => {
                trapezoid_map(&self.values, self.grid.spacing, |v| v.abs().powf(p)).powf(1.0 / p)
            }
            SpaceTag::Sup => self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        }
    }

    /// Signed trapezoid integral over `[0, L]`.
    ///
    /// For non-negative data this equals `norm(L1)` bit-exactly: both run the
    /// identical accumulation, and `abs` is the identity on non-negative
    /// floats.
    pub fn total_mass(&self) -> f64 {
        trapezoid_map(&self.values, self.grid.spacing, |v| v)
    }

    /// Largest node position with a nonzero value (0.0 for the zero function).
    pub fn support_max(&self) -> f64 {
        self.values
            .iter()
            .rposition(|&v| v != 0.0)
            .map(|i| self.grid.node(i))
            .unwrap_or(0.0)
    }

    /// First and last node index with a nonzero value, `None` for the zero
    /// function. Lets quadrature loops skip the parts of the mesh a term
    /// cannot reach.
    pub(crate) fn support_bounds(&self) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v != 0.0)?;
        let last = self.values.iter().rposition(|&v| v != 0.0)?;
        Some((first, last))
    }

    /// Pointwise `self += scale * other` (same grid).
    pub fn add_scaled(&mut self, other: &GridFunction, scale: f64) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    /// Pointwise scaling by a constant.
    pub fn scaled(&self, factor: f64) -> GridFunction {
        GridFunction::from_raw(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Initial-condition presets realizing a unit-mass density supported strictly
/// inside `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialPreset {
    /// Triangle with apex at `center`, base `width`.
    Hat { center: f64, width: f64 },
    /// Constant on `(a, b)`, with value 1/2 sampled exactly at the jumps so
    /// the trapezoid mass of the sampled profile is exact when the jumps land
    /// on nodes.
    Indicator { a: f64, b: f64 },
    /// Gaussian truncated to `mean ± 6 sigma`, where the cut-off value is
    /// down at `e^{-18}` and no discretization in play can see the jump.
    GaussianTruncated { mean: f64, sigma: f64 },
}

impl InitialPreset {
    /// Parses a preset from name plus positional parameters, as used by the
    /// run configuration.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| {
            if params.len() != n {
                Err(Error::invalid(format!(
                    "preset {name} takes {n} parameters, got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "hat" => {
                need(2)?;
                Ok(InitialPreset::Hat { center: params[0], width: params[1] })
            }
            "indicator" => {
                need(2)?;
                Ok(InitialPreset::Indicator { a: params[0], b: params[1] })
            }
            "gaussian_truncated" => {
                need(2)?;
                Ok(InitialPreset::GaussianTruncated { mean: params[0], sigma: params[1] })
            }
            other => Err(Error::invalid(format!(
                "unknown preset '{other}' (expected hat, indicator or gaussian_truncated)"
            ))),
        }
    }

    /// Support interval of the unnormalized profile.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            InitialPreset::Hat { center, width } => (center - width / 2.0, center + width / 2.0),
            InitialPreset::Indicator { a, b } => (a, b),
            InitialPreset::GaussianTruncated { mean, sigma } => {
                (mean - 6.0 * sigma, mean + 6.0 * sigma)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialPreset::Hat { center, width } => width > 0.0 && center.is_finite(),
            InitialPreset::Indicator { a, b } => b > a && a.is_finite(),
            InitialPreset::GaussianTruncated { mean, sigma } => sigma > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate preset parameters: {self:?}")))
        }
    }

    /// Unnormalized profile value at `x`.
    fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialPreset::Hat { center, width } => {
                (1.0 - (x - center).abs() / (width / 2.0)).max(0.0)
            }
            InitialPreset::Indicator { a, b } => {
                let snap = 1e-9 * (1.0 + a.abs().max(b.abs()));
                if (x - a).abs() <= snap || (x - b).abs() <= snap {
                    0.5
                } else if x > a && x < b {
                    1.0
                } else {
                    0.0
                }
            }
            InitialPreset::GaussianTruncated { mean, sigma } => {
                let z = (x - mean) / sigma;
                if z.abs() > 6.0 {
                    0.0
                } else {
                    (-0.5 * z * z).exp()
                }
            }
        }
    }
}

/// Samples a preset on the grid and renormalizes it to unit trapezoid mass.
///
/// The support must lie strictly inside `(0, L)`; touching either end is
/// rejected because the boundary condition pins `u(0, t) = 0` and the zero
/// extension past `L` would clip mass.
pub fn make_initial(preset: InitialPreset, grid: &Grid) -> Result<GridFunction> {
    preset.validate()?;
    let (lo, hi) = preset.support();
    if lo <= 0.0 || hi >= grid.length() {
        return Err(Error::invalid(format!(
            "preset support [{lo}, {hi}] must lie strictly inside (0, {})",
            grid.length()
        )));
    }
    let mut values: Vec<f64> = grid.nodes().map(|x| preset.eval(x)).collect();
    values[0] = 0.0;
    let mut f = GridFunction::from_raw(*grid, values);
    let mass = f.total_mass();
    if !(mass > f64::EPSILON) {
        return Err(Error::invalid(format!(
            "preset support [{lo}, {hi}] is not resolved by the grid (sampled mass {mass})"
        )));
    }
    for v in f.values.iter_mut() {
        *v /= mass;
    }
    debug_assert!((f.total_mass() - 1.0).abs() <= 1e-9);
    Ok(f)
}
