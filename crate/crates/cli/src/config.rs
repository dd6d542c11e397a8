//! Run configuration: a TOML file with one table per section.
//!
//! ```toml
//! [model]
//! lambda1 = 1.0
//! lambda2 = 1.0
//! L = 1.0
//! mu1.c = 1.0
//! mu1.c0 = 0.0
//!
//! [grid]
//! n = 400
//! ```
//!
//! Unknown keys are rejected. Every section except `model` may be omitted.

use std::path::{Path, PathBuf};

use repairflow_core::{Grid, ModelParams, RepairRateSpec};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub lambda1: f64,
    #[serde(default = "one")]
    pub lambda2: f64,
    #[serde(rename = "L", default = "one")]
    pub horizon: f64,
    #[serde(default)]
    pub mu1: RateSection,
    #[serde(default)]
    pub mu2: RateSection,
}

/// `mu(x) = c / (L - x) + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub c0: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        Self { c: 1.0, c0: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    /// Time step; `L / n` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 400, dt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub t_end: f64,
    /// `pulse`, `steady`, or the path of a state file.
    pub init: String,
    /// Rescale the initial state to unit X-norm.
    pub normalize: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            init: "pulse".into(),
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub t_f: f64,
    #[serde(rename = "J")]
    pub stages: usize,
    pub stop_tol: f64,
    /// Interior cutoff for the feedback suprema, as a fraction of `L`.
    pub l_frac: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_scale: Option<f64>,
    /// `shapes-linear`, `steady`, or the path of a target file.
    pub target: String,
    pub samples_per_stage: usize,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            t_f: 5.0,
            stages: 30,
            stop_tol: repairflow_core::control::DEFAULT_STOP_TOL,
            l_frac: 0.8,
            alpha1: None,
            alpha2: None,
            alpha_scale: None,
            target: "shapes-linear".into(),
            samples_per_stage: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub samples_re: usize,
    pub samples_im: usize,
    /// Radius of the disc around `r = 0` left out of the scans.
    pub exclusion: f64,
    /// Imaginary-axis segment `i [axis_min, axis_max]`.
    pub axis_min: f64,
    pub axis_max: f64,
    pub axis_samples: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            re_min: 0.05,
            re_max: 5.0,
            im_min: -50.0,
            im_max: 50.0,
            samples_re: 200,
            samples_im: 400,
            exclusion: repairflow_core::spectral::DEFAULT_EXCLUSION,
            axis_min: 0.1,
            axis_max: 50.0,
            axis_samples: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    /// `shapes-linear`, `steady`, or the path of a target file.
    pub target: String,
    /// Length of the open-loop verification run.
    pub t_end: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            target: "shapes-linear".into(),
            t_end: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub out_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            run_id: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Where an initial state or target comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Pulse,
    Steady,
    LinearShapes,
    File(PathBuf),
}

impl Source {
    fn parse(text: &str, base: &Path) -> Self {
        match text {
            "pulse" => Source::Pulse,
            "steady" => Source::Steady,
            "shapes-linear" => Source::LinearShapes,
            path => Source::File(base.join(path)),
        }
    }
}

/// A validated configuration plus the directory relative paths resolve
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn params(&self) -> ModelParams {
        let m = &self.config.model;
        let rate = |r: &RateSection| RepairRateSpec::inverse_linear(r.c, r.c0).expect("validated");
        ModelParams::new(m.lambda1, m.lambda2, m.horizon, rate(&m.mu1), rate(&m.mu2))
            .expect("validated")
    }

    pub fn grid(&self) -> Grid {
        let g = Grid::new(self.config.grid.n, self.config.model.horizon).expect("validated");
        match self.config.grid.dt {
            Some(dt) => g.with_dt(dt).expect("validated"),
            None => g,
        }
    }

    pub fn init_source(&self) -> Source {
        Source::parse(&self.config.simulate.init, &self.base_dir)
    }

    pub fn control_target(&self) -> Source {
        Source::parse(&self.config.control.target, &self.base_dir)
    }

    pub fn design_target(&self) -> Source {
        Source::parse(&self.config.design.target, &self.base_dir)
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, path, base_dir)
}

pub fn parse_config(
    text: &str,
    path: &Path,
    base_dir: PathBuf,
) -> Result<LoadedConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    from_value(config, base_dir)
}

pub(crate) fn from_value(
    config: RunConfig,
    base_dir: PathBuf,
) -> Result<LoadedConfig, ConfigError> {
    validate(&config)?;
    Ok(LoadedConfig { config, base_dir })
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<(), ConfigError> {
    if v >= 1 {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be at least 1"))
    }
}

pub fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    let m = &c.model;
    positive("model.lambda1", m.lambda1)?;
    positive("model.lambda2", m.lambda2)?;
    positive("model.L", m.horizon)?;
    for (name, r) in [("mu1", &m.mu1), ("mu2", &m.mu2)] {
        if !(r.c.is_finite() && r.c >= 1.0) {
            return Err(ConfigError::invalid(
                format!("model.{name}.c"),
                format!("must be >= 1 for the inverse-linear family, got {}", r.c),
            ));
        }
        if !(r.c0.is_finite() && r.c0 >= 0.0) {
            return Err(ConfigError::invalid(
                format!("model.{name}.c0"),
                format!("must be >= 0, got {}", r.c0),
            ));
        }
    }

    if c.grid.n < Grid::MIN_CELLS {
        return Err(ConfigError::invalid(
            "grid.n",
            format!("must be >= {}, got {}", Grid::MIN_CELLS, c.grid.n),
        ));
    }
    if let Some(dt) = c.grid.dt {
        positive("grid.dt", dt)?;
    }

    positive("simulate.t_end", c.simulate.t_end)?;
    if c.simulate.init.is_empty() {
        return Err(ConfigError::invalid("simulate.init", "must not be empty"));
    }

    let k = &c.control;
    positive("control.t_f", k.t_f)?;
    at_least_one("control.J", k.stages)?;
    if !(k.stop_tol.is_finite() && k.stop_tol >= 0.0) {
        return Err(ConfigError::invalid(
            "control.stop_tol",
            format!("must be >= 0, got {}", k.stop_tol),
        ));
    }
    if !(k.l_frac > 0.0 && k.l_frac < 1.0) {
        return Err(ConfigError::invalid(
            "control.l_frac",
            format!("must lie in (0, 1), got {}", k.l_frac),
        ));
    }
    for (key, v) in [("control.alpha1", k.alpha1), ("control.alpha2", k.alpha2)] {
        if let Some(v) = v {
            positive(key, v)?;
        }
    }
    if let Some(s) = k.alpha_scale {
        if !(s.is_finite() && s >= 1.0) {
            return Err(ConfigError::invalid(
                "control.alpha_scale",
                format!("must be >= 1, got {s}"),
            ));
        }
    }
    at_least_one("control.samples_per_stage", k.samples_per_stage)?;
    if k.target.is_empty() {
        return Err(ConfigError::invalid("control.target", "must not be empty"));
    }

    let s = &c.spectrum;
    if !(s.re_min <= s.re_max) || !s.re_min.is_finite() || !s.re_max.is_finite() {
        return Err(ConfigError::invalid(
            "spectrum.re_max",
            "needs finite re_min <= re_max",
        ));
    }
    if !(s.im_min <= s.im_max) || !s.im_min.is_finite() || !s.im_max.is_finite() {
        return Err(ConfigError::invalid(
            "spectrum.im_max",
            "needs finite im_min <= im_max",
        ));
    }
    at_least_one("spectrum.samples_re", s.samples_re)?;
    at_least_one("spectrum.samples_im", s.samples_im)?;
    at_least_one("spectrum.axis_samples", s.axis_samples)?;
    positive("spectrum.exclusion", s.exclusion)?;
    if !(s.axis_min <= s.axis_max) || !s.axis_min.is_finite() || !s.axis_max.is_finite() {
        return Err(ConfigError::invalid(
            "spectrum.axis_max",
            "needs finite axis_min <= axis_max",
        ));
    }

    positive("design.t_end", c.design.t_end)?;
    if c.design.target.is_empty() {
        return Err(ConfigError::invalid("design.target", "must not be empty"));
    }
    if let Some(id) = &c.output.run_id {
        check_run_id(id)?;
    }
    Ok(())
}

pub fn check_run_id(id: &str) -> Result<(), ConfigError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|ch| ch.is_ascii_alphanumeric() || matches!(ch, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ConfigError::invalid(
            "output.run_id",
            format!("`{id}` is not a plain directory name"),
        ))
    }
}
