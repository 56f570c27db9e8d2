//! Run configuration: a flat key-value text format with dotted section names,
//! one assignment per line, `#` comments.
//!
//! ```text
//! params.g = 1.0
//! grid.L = 10.0
//! initial.preset = hat
//! initial.params = 1.0, 1.0
//! time.t_final = 1.0
//! solver.method = both
//! ```
//!
//! Unknown keys, duplicate keys and malformed values are reported with the
//! offending line number.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Grid, InitialPreset, ModelParams, SpaceTag};

/// Which solver(s) a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dp,
    Fd,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub initial: InitialPreset,
    pub t_final: f64,
    pub save_times: Vec<f64>,
    pub method: Method,
    pub tol: f64,
    pub n_max: usize,
    pub n_time_nodes: usize,
    pub cfl: f64,
    pub space: SpaceTag,
    pub asymptotics_enabled: bool,
    pub lambdas: Vec<f64>,
    pub horizon: f64,
    pub compare_threshold: f64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub emit_n: bool,
}

/// Default lambda schedule for the resolvent estimators.
pub const DEFAULT_LAMBDAS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];

struct RawConfig {
    // key -> (line, value)
    entries: HashMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config { line: line_no, message: "empty key".into() });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("empty value for key '{key}'"),
                });
            }
            if let Some((prev_line, _)) = entries.insert(key.clone(), (line_no, value)) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key '{key}' (first set at line {prev_line})"),
                });
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<f64>().map_err(|_| Error::Config {
                line,
                message: format!("key '{key}': expected a number, got '{v}'"),
            }),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<usize>().map_err(|_| Error::Config {
                line,
                message: format!("key '{key}': expected a non-negative integer, got '{v}'"),
            }),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(Error::Config {
                    line,
                    message: format!("key '{key}': expected true/false, got '{other}'"),
                }),
            },
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<(usize, Vec<f64>)>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => {
                let list: std::result::Result<Vec<f64>, _> =
                    v.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match list {
                    Ok(list) => Ok(Some((line, list))),
                    Err(_) => Err(Error::Config {
                        line,
                        message: format!("key '{key}': expected comma-separated numbers, got '{v}'"),
                    }),
                }
            }
        }
    }

    fn string(&mut self, key: &str, default: &str) -> (usize, String) {
        self.take(key).unwrap_or((0, default.to_string()))
    }
}

/// Parses a [`SpaceTag`] from its config spelling: `l1`, `sup` or `lp:<p>`.
pub fn parse_space(text: &str) -> Result<SpaceTag> {
    match text {
        "l1" => Ok(SpaceTag::L1),
        "sup" => Ok(SpaceTag::Sup),
        other => match other.strip_prefix("lp:") {
            Some(p) => {
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad Lp exponent in '{other}'")))?;
                SpaceTag::lp(p)
            }
            None => Err(Error::invalid(format!(
                "unknown space '{other}' (expected l1, sup or lp:<p>)"
            ))),
        },
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }

    /// Parses the key-value text, applies defaults, and validates every field
    /// except the cross-field horizon condition (checked by
    /// [`RunConfig::check_horizon`] so the CLI can map it to its own exit
    /// code).
    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let anchored = |line: usize, e: Error| match e {
            Error::InvalidArgument(m) => Error::Config { line, message: m },
            other => other,
        };

        let g = raw.f64("params.g", 1.0)?;
        let b = raw.f64("params.b", 1.0)?;
        let mu = raw.f64("params.mu", 0.0)?;
        let alpha = raw.f64("params.alpha", 2.0)?;
        let params = ModelParams::new(g, b, mu, alpha).map_err(|e| anchored(0, e))?;

        let length = raw.f64("grid.L", 10.0)?;
        let spacing = raw.f64("grid.h", 1e-3)?;
        let grid = Grid::new(length, spacing).map_err(|e| anchored(0, e))?;

        let (preset_line, preset_name) = raw.string("initial.preset", "hat");
        let initial_params = raw
            .f64_list("initial.params")?
            .map(|(_, list)| list)
            .unwrap_or_else(|| vec![1.0, 1.0]);
        let initial = InitialPreset::from_name(&preset_name, &initial_params)
            .map_err(|e| anchored(preset_line, e))?;

        let t_final = raw.f64("time.t_final", 1.0)?;
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::Config {
                line: 0,
                message: format!("time.t_final must be >= 0, got {t_final}"),
            });
        }
        let explicit_saves = raw.f64_list("time.save_times")?;
        let n_saves = raw.usize("time.n_saves", 5)?;
        let save_times = match explicit_saves {
            Some((line, times)) => {
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config {
                        line,
                        message: "time.save_times must be strictly increasing".into(),
                    });
                }
                if times.iter().any(|&t| t < 0.0 || t > t_final * (1.0 + 1e-12)) {
                    return Err(Error::Config {
                        line,
                        message: format!("time.save_times must lie within [0, {t_final}]"),
                    });
                }
                times
            }
            None => {
                if t_final == 0.0 {
                    vec![0.0]
                } else {
                    let n = n_saves.max(1);
                    (1..=n).map(|k| t_final * k as f64 / n as f64).collect()
                }
            }
        };

        let (method_line, method_name) = raw.string("solver.method", "dp");
        let method = match method_name.as_str() {
            "dp" => Method::Dp,
            "fd" => Method::Fd,
            "both" => Method::Both,
            other => {
                return Err(Error::Config {
                    line: method_line,
                    message: format!("solver.method must be dp, fd or both, got '{other}'"),
                })
            }
        };
        let tol = raw.f64("solver.tol", 1e-6)?;
        let n_max = raw.usize("solver.n_max", 100)?;
        let n_time_nodes = raw.usize("solver.n_time_nodes", 65)?;
        let cfl = raw.f64("solver.cfl", 0.9)?;
        let (space_line, space_name) = raw.string("solver.space", "l1");
        let space = parse_space(&space_name).map_err(|e| anchored(space_line, e))?;

        let asymptotics_enabled = raw.bool("asymptotics.enabled", false)?;
        let lambdas = match raw.f64_list("asymptotics.lambdas")? {
            Some((line, list)) => {
                if list.is_empty() || list.iter().any(|&l| !(l > 0.0)) {
                    return Err(Error::Config {
                        line,
                        message: "asymptotics.lambdas must be positive".into(),
                    });
                }
                if list.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::Config {
                        line,
                        message: "asymptotics.lambdas must be strictly decreasing".into(),
                    });
                }
                list
            }
            None => DEFAULT_LAMBDAS.to_vec(),
        };
        let lambda_min = *lambdas.last().expect("non-empty schedule");
        let horizon = raw.f64("asymptotics.horizon", 5.0 / lambda_min)?;
        if !(horizon > 0.0) {
            return Err(Error::Config {
                line: 0,
                message: format!("asymptotics.horizon must be > 0, got {horizon}"),
            });
        }

        let compare_threshold = raw.f64("compare.threshold", 0.02)?;
        let (_, output_dir) = raw.string("output.dir", "out");
        let (format_line, format_name) = raw.string("output.format", "csv");
        let format = match format_name.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(Error::Config {
                    line: format_line,
                    message: format!("output.format must be csv or json, got '{other}'"),
                })
            }
        };
        let emit_n = raw.bool("output.emit_n", false)?;

        if let Some((key, (line, _))) = raw.entries.iter().min_by_key(|(_, (line, _))| *line) {
            return Err(Error::Config { line: *line, message: format!("unknown key '{key}'") });
        }

        // validate solver knobs through the types that own them
        crate::dyson_phillips::SeriesConfig::new(t_final.max(f64::MIN_POSITIVE), n_time_nodes, tol, n_max.max(1))
            .map_err(|e| anchored(0, e))?;
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config {
                line: 0,
                message: format!("solver.cfl must lie in (0, 1], got {cfl}"),
            });
        }
        if !(compare_threshold > 0.0) {
            return Err(Error::Config {
                line: 0,
                message: format!("compare.threshold must be > 0, got {compare_threshold}"),
            });
        }

        Ok(RunConfig {
            params,
            grid,
            initial,
            t_final,
            save_times,
            method,
            tol,
            n_max,
            n_time_nodes,
            cfl,
            space,
            asymptotics_enabled,
            lambdas,
            horizon,
            compare_threshold,
            output_dir: PathBuf::from(output_dir),
            format,
            emit_n,
        })
    }

    /// Cross-field horizon validity for an evolution up to `t`: the support
    /// of the initial preset plus the transport distance must stay on the
    /// grid.
    pub fn check_horizon(&self, t: f64) -> Result<()> {
        let (_, hi) = self.initial.support();
        let required = hi + self.params.g * t;
        if required > self.grid.length() * (1.0 + 1e-12) {
            return Err(Error::Horizon {
                support_max: hi,
                required,
                grid_length: self.grid.length(),
            });
        }
        Ok(())
    }
}
