//! JSON files holding a state or a target:
//! `{"p0": .., "p1": [..], "p2": [..], "eps": ..}` with `n + 1` samples per
//! density. Targets must also give their slope margin `eps`; states leave
//! it out.

use std::path::Path;

use repairflow_core::control::{validate_desired, DesiredState, VALIDATION_TOL};
use repairflow_core::{Grid, ModelParams, SystemState};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub p0: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl StateFile {
    pub fn from_state(s: &SystemState) -> Self {
        Self {
            p0: s.p0,
            p1: s.p1.clone(),
            p2: s.p2.clone(),
            eps: None,
        }
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_state_file(path: &Path, grid: &Grid) -> Result<StateFile> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let f: StateFile = serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    for (name, v) in [("p1", &f.p1), ("p2", &f.p2)] {
        if v.len() != grid.len() {
            return Err(format_err(
                path,
                format!(
                    "{name} has {} samples, the grid needs {}",
                    v.len(),
                    grid.len()
                ),
            ));
        }
    }
    if !std::iter::once(&f.p0)
        .chain(&f.p1)
        .chain(&f.p2)
        .all(|v| v.is_finite())
    {
        return Err(format_err(path, "non-finite sample"));
    }
    Ok(f)
}

pub fn read_state(path: &Path, grid: &Grid) -> Result<SystemState> {
    let f = read_state_file(path, grid)?;
    Ok(SystemState::new(f.p0, f.p1, f.p2))
}

/// A target file; it must declare `eps` and pass every target check.
pub fn read_target(path: &Path, params: &ModelParams, grid: &Grid) -> Result<DesiredState> {
    let f = read_state_file(path, grid)?;
    let eps = f
        .eps
        .ok_or_else(|| format_err(path, "a target must declare its slope margin `eps`"))?;
    let target = DesiredState::new(f.p0, f.p1, f.p2, eps, grid)?;
    let report = validate_desired(&target, params, grid, VALIDATION_TOL)?;
    if let Some(bad) = report.failures().next() {
        return Err(format_err(
            path,
            format!(
                "target fails `{}` (worst value {:e})",
                bad.name, bad.worst_value
            ),
        ));
    }
    Ok(target)
}
