//! Cross-product parameter sweeps over numeric config keys.
//!
//! Rows come out in lexicographic order of the parameter tuple, with keys
//! sorted by name and values ascending, whatever order the runs finish in.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use serde_json::json;

use crate::commands::{execute, Command, Outcome};
use crate::config::{from_value, LoadedConfig, RunConfig};
use crate::error::{ConfigError, Result, EXIT_OK};
use crate::output::{
    fmt_f64, fmt_opt, json_bytes, prepare_run_dir, write_atomic, Table, SCHEMA_VERSION,
    TOOL_VERSION,
};

/// One swept key with its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub key: String,
    pub values: Vec<f64>,
}

/// Parses `key=v1,v2,...`; an empty value list is allowed.
pub fn parse_range(text: &str) -> std::result::Result<Range, ConfigError> {
    let (key, list) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::invalid(text, "expected `key=v1,v2,...`"))?;
    let key = key.trim().to_string();
    let mut values = Vec::new();
    for v in list.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let x: f64 = v
            .parse()
            .map_err(|_| ConfigError::invalid(&key, format!("`{v}` is not a number")))?;
        values.push(x);
    }
    Ok(Range { key, values })
}

fn whole(key: &str, v: f64) -> std::result::Result<usize, ConfigError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(ConfigError::invalid(
            key,
            format!("needs a whole number, got {v}"),
        ))
    }
}

/// Sets a numeric key of `cfg`. Keys use the dotted config paths.
pub fn set_numeric(cfg: &mut RunConfig, key: &str, v: f64) -> std::result::Result<(), ConfigError> {
    let m = &mut cfg.model;
    let c = &mut cfg.control;
    let s = &mut cfg.spectrum;
    match key {
        "model.lambda1" => m.lambda1 = v,
        "model.lambda2" => m.lambda2 = v,
        "model.L" => m.horizon = v,
        "model.mu1.c" => m.mu1.c = v,
        "model.mu1.c0" => m.mu1.c0 = v,
        "model.mu2.c" => m.mu2.c = v,
        "model.mu2.c0" => m.mu2.c0 = v,
        "grid.n" => cfg.grid.n = whole(key, v)?,
        "grid.dt" => cfg.grid.dt = Some(v),
        "simulate.t_end" => cfg.simulate.t_end = v,
        "control.t_f" => c.t_f = v,
        "control.J" => c.stages = whole(key, v)?,
        "control.stop_tol" => c.stop_tol = v,
        "control.l_frac" => c.l_frac = v,
        "control.alpha1" => c.alpha1 = Some(v),
        "control.alpha2" => c.alpha2 = Some(v),
        "control.alpha_scale" => c.alpha_scale = Some(v),
        "control.samples_per_stage" => c.samples_per_stage = whole(key, v)?,
        "spectrum.re_min" => s.re_min = v,
        "spectrum.re_max" => s.re_max = v,
        "spectrum.im_min" => s.im_min = v,
        "spectrum.im_max" => s.im_max = v,
        "spectrum.samples_re" => s.samples_re = whole(key, v)?,
        "spectrum.samples_im" => s.samples_im = whole(key, v)?,
        "spectrum.exclusion" => s.exclusion = v,
        "spectrum.axis_min" => s.axis_min = v,
        "spectrum.axis_max" => s.axis_max = v,
        "spectrum.axis_samples" => s.axis_samples = whole(key, v)?,
        "design.t_end" => cfg.design.t_end = v,
        _ => return Err(ConfigError::invalid(key, "not a numeric config key")),
    }
    Ok(())
}

/// Aggregate of a sweep: one row per parameter tuple.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub command: Command,
    pub ranges: Vec<Range>,
    pub table: Table,
    /// Rows with a nonzero exit code.
    pub failures: usize,
}

fn cross_product(ranges: &[Range]) -> Vec<Vec<f64>> {
    ranges.iter().fold(vec![Vec::new()], |acc, r| {
        acc.iter()
            .flat_map(|prefix| {
                r.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect()
    })
}

/// Runs `command` once per point of the cross product, in parallel. A run
/// that fails becomes a row with its exit code and message.
pub fn sweep(command: Command, base: &LoadedConfig, ranges: Vec<Range>) -> Result<SweepResult> {
    let mut merged: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in ranges {
        if merged.contains_key(&r.key) {
            return Err(ConfigError::invalid(&r.key, "swept more than once").into());
        }
        // reject unknown or non-numeric keys before running anything
        let mut probe = base.config.clone();
        set_numeric(&mut probe, &r.key, 1.0)?;
        let mut values = r.values;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::invalid(&r.key, "sweep values must be finite").into());
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        merged.insert(r.key, values);
    }
    let ranges: Vec<Range> = merged
        .into_iter()
        .map(|(key, values)| Range { key, values })
        .collect();
    let keys: Vec<String> = ranges.iter().map(|r| r.key.clone()).collect();

    let mut header: Vec<String> = keys.clone();
    header.extend(["exit_code", "status"].map(String::from));
    header.extend(command.metric_names().iter().map(|s| s.to_string()));
    header.push("error".into());

    let points = cross_product(&ranges);
    let rows: Vec<(bool, Vec<String>)> = points
        .par_iter()
        .map(|point| {
            let mut row: Vec<String> = point.iter().map(|v| fmt_f64(*v)).collect();
            match run_point(command, base, &keys, point) {
                Ok(out) => {
                    row.push(out.exit_code.to_string());
                    row.push(out.status.to_string());
                    row.extend(out.metrics.iter().map(|m| fmt_opt(*m)));
                    row.push(String::new());
                    (out.exit_code != EXIT_OK, row)
                }
                Err(e) => {
                    row.push(e.exit_code().to_string());
                    row.push("error".into());
                    row.extend(command.metric_names().iter().map(|_| String::new()));
                    row.push(e.to_string());
                    (true, row)
                }
            }
        })
        .collect();

    let mut table = Table::new(&header);
    let mut failures = 0;
    for (failed, row) in rows {
        failures += failed as usize;
        table.push(row);
    }
    Ok(SweepResult {
        command,
        ranges,
        table,
        failures,
    })
}

fn run_point(
    command: Command,
    base: &LoadedConfig,
    keys: &[String],
    point: &[f64],
) -> Result<Outcome> {
    let mut cfg = base.config.clone();
    for (k, v) in keys.iter().zip(point) {
        set_numeric(&mut cfg, k, *v)?;
    }
    let loaded = from_value(cfg, base.base_dir.clone())?;
    execute(command, &loaded)
}

/// Writes `sweep.csv` and then `summary.json` into `<out_dir>/<run_id>/`.
pub fn write_sweep(
    result: &SweepResult,
    base: &LoadedConfig,
    out_dir: &Path,
    run_id: &str,
) -> Result<std::path::PathBuf> {
    let dir = prepare_run_dir(out_dir, run_id)?;
    write_atomic(&dir, "sweep.csv", &result.table.to_bytes())?;
    let ranges: serde_json::Map<String, serde_json::Value> = result
        .ranges
        .iter()
        .map(|r| (r.key.clone(), json!(r.values)))
        .collect();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": TOOL_VERSION },
        "command": "sweep",
        "sweep_command": result.command.name(),
        "status": if result.failures == 0 { "ok" } else { "partial" },
        "exit_code": EXIT_OK,
        "config": base.config,
        "ranges": ranges,
        "runs": result.table.rows.len(),
        "failed_runs": result.failures,
        "files": ["sweep.csv"],
    });
    write_atomic(&dir, "summary.json", &json_bytes(&summary))?;
    Ok(dir)
}

/// Default run id of a sweep: `<config stem>-sweep-<command>`.
pub fn default_sweep_id(config_path: &Path, command: Command) -> String {
    crate::commands::default_run_id(config_path, &format!("sweep-{}", command.name()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        let r = parse_range("model.lambda1=0.5, 1").unwrap();
        assert_eq!(r.key, "model.lambda1");
        assert_eq!(r.values, vec![0.5, 1.0]);
        assert!(parse_range("model.lambda1=").unwrap().values.is_empty());
        assert!(parse_range("model.lambda1").is_err());
        assert!(parse_range("model.lambda1=a").is_err());
    }

    #[test]
    fn product_is_lexicographic() {
        let r = [
            Range {
                key: "a".into(),
                values: vec![1.0, 2.0],
            },
            Range {
                key: "b".into(),
                values: vec![3.0, 4.0],
            },
        ];
        assert_eq!(
            cross_product(&r),
            vec![
                vec![1.0, 3.0],
                vec![1.0, 4.0],
                vec![2.0, 3.0],
                vec![2.0, 4.0]
            ]
        );
    }

    #[test]
    fn non_numeric_keys_rejected() {
        let mut cfg =
            crate::config::parse_config("[model]\n", Path::new("x.toml"), Default::default())
                .unwrap()
                .config;
        assert!(set_numeric(&mut cfg, "control.target", 1.0).is_err());
        assert!(set_numeric(&mut cfg, "grid.n", 2.5).is_err());
        set_numeric(&mut cfg, "model.mu2.c0", 0.25).unwrap();
        assert_eq!(cfg.model.mu2.c0, 0.25);
    }
}
