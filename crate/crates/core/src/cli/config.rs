//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! beta_w = 0.1
//! m_tol  = 4.0
//! control = exp-decay
//! ```
//!
//! Keys are the field names of [`RunConfig`] and [`ModelParams`]. Missing
//! keys keep their defaults; unknown or repeated keys are rejected.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{OncoError, Result};
use crate::forward::{Normalization, Problem};
use crate::model::ModelParams;

/// Where the infusion schedule comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ControlSpec {
    Zero,
    #[default]
    ExpDecay,
    File(PathBuf),
}

impl ControlSpec {
    /// `zero`, `exp-decay`, or anything else as a path.
    pub fn parse(s: &str) -> Self {
        match s {
            "zero" => ControlSpec::Zero,
            "exp-decay" => ControlSpec::ExpDecay,
            path => ControlSpec::File(PathBuf::from(path)),
        }
    }
}

impl fmt::Display for ControlSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSpec::Zero => f.write_str("zero"),
            ControlSpec::ExpDecay => f.write_str("exp-decay"),
            ControlSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_x: usize,
    pub cfl: f64,
    pub control: ControlSpec,
    /// Explicit output directory; see [`RunConfig::resolve_output_dir`].
    pub output_dir: Option<PathBuf>,
    /// Time-level decimation of `state.csv`; `None` picks about 200 levels.
    pub stride: Option<usize>,
    /// Seed for gradient-check probe directions.
    pub seed: u64,
    pub p0_norm: Normalization,
    /// Number of gradient-check probes.
    pub probes: usize,
    /// Whether to render SVG plots next to the CSV files.
    pub plots: bool,
    /// Optimizer iteration cap.
    pub max_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            n_x: 200,
            cfl: 0.025,
            control: ControlSpec::ExpDecay,
            output_dir: None,
            stride: None,
            seed: 42,
            p0_norm: Normalization::UnitMass,
            probes: 5,
            plots: true,
            max_iterations: 50,
        }
    }
}

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "ONCO_OUT_DIR";

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_x < 3 {
            return Err(OncoError::validation(
                "n_x",
                format!("need at least 3 nodes, got {}", self.n_x),
            ));
        }
        if !(self.cfl.is_finite() && self.cfl > 0.0) {
            return Err(OncoError::validation(
                "cfl",
                format!("must be > 0, got {}", self.cfl),
            ));
        }
        if self.stride == Some(0) {
            return Err(OncoError::validation("stride", "must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(OncoError::validation("max_iterations", "must be >= 1"));
        }
        if self.probes == 0 {
            return Err(OncoError::validation("probes", "must be >= 1"));
        }
        if let ControlSpec::File(path) = &self.control {
            if !path.is_file() {
                return Err(OncoError::validation(
                    "control",
                    format!("control file {} does not exist", path.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.params.clone(), self.n_x, self.cfl, self.p0_norm)
    }

    /// Flag, then config file, then `ONCO_OUT_DIR`, then `./onco-out`.
    pub fn resolve_output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output_dir {
            return p.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("onco-out"),
        }
    }

    /// Applies one `key = value` pair. `base` resolves relative paths.
    fn set(&mut self, key: &str, value: &str, base: &Path) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: fmt::Display,
        {
            v.parse::<T>()
                .map_err(|e| format!("cannot parse `{v}`: {e}"))
        }
        let p = &mut self.params;
        match key {
            "r_growth" => p.r_growth = num(value)?,
            "K_cap" => p.k_cap = num(value)?,
            "delta" => p.delta = num(value)?,
            "kappa" => p.kappa = num(value)?,
            "sigma" => p.sigma = num(value)?,
            "diff" => p.diff = num(value)?,
            "gamma_ex" => p.gamma_ex = num(value)?,
            "lambda_cl" => p.lambda_cl = num(value)?,
            "alpha_w" => p.alpha_w = num(value)?,
            "beta_w" => p.beta_w = num(value)?,
            "gamma_w" => p.gamma_w = num(value)?,
            "m_tol" => p.m_tol = num(value)?,
            "t_final" => p.t_final = num(value)?,
            "x_min" => p.x_min = num(value)?,
            "x_max" => p.x_max = num(value)?,
            "n_x" => self.n_x = num(value)?,
            "cfl" => self.cfl = num(value)?,
            "stride" => self.stride = Some(num(value)?),
            "seed" => self.seed = num(value)?,
            "probes" => self.probes = num(value)?,
            "p0_norm" => self.p0_norm = value.parse()?,
            "plots" => self.plots = num(value)?,
            "max_iterations" => self.max_iterations = num(value)?,
            "output_dir" => self.output_dir = Some(base.join(value)),
            "control" => {
                self.control = match ControlSpec::parse(value) {
                    ControlSpec::File(path) => ControlSpec::File(base.join(path)),
                    other => other,
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses config text; `origin` names the source in error messages and
    /// anchors relative paths.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let base = origin.parent().unwrap_or(Path::new("")).to_path_buf();
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let parse_err = |msg: String| OncoError::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                msg,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(parse_err(format!("expected `key = value`, got `{line}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(parse_err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value, &base).map_err(parse_err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| OncoError::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("cannot read config: {e}"),
    })?;
    RunConfig::parse(&text, path)
}
