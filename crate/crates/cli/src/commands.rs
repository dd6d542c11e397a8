//! The subcommands. Each one computes an [`Outcome`] in memory; [`run`]
//! then writes its files and the summary into the run directory.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use repairflow_core::control::{
    check_mu_bounded, design_static_rates, linear_target, run_controllability, schedule,
    static_kernels, validate_desired, DesiredState, RunOptions, ScheduleOverrides, DISTANCE_FLOOR,
    NEGATIVITY_TOL, VALIDATION_TOL,
};
use repairflow_core::open_loop::{
    decay_rate_fit, default_window, equilibrium_floor, solve_open_loop_with, solve_with_kernels,
    steady_constants, steady_state, MarchOptions, Trajectory,
};
use repairflow_core::spectral::{
    phi_slope_at_origin, scan_region, PhiEvaluator, Region, SINGULAR_THRESHOLD,
};
use repairflow_core::{Grid, ModelParams, SystemState};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LoadedConfig, RunConfig, Source};
use crate::error::{ConfigError, Result, EXIT_NUMERICAL, EXIT_OK};
use crate::output::{
    fmt_f64, json_bytes, prepare_run_dir, write_atomic, Table, SCHEMA_VERSION, TOOL_VERSION,
};
use crate::state_io::{read_state, read_target, StateFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, clap::ValueEnum)]
pub enum Command {
    Steady,
    Simulate,
    Spectrum,
    DesignStatic,
    Control,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::DesignStatic => "design-static",
            Command::Control => "control",
        }
    }

    /// Headline scalars, in the order they appear in sweep tables.
    pub fn metric_names(self) -> &'static [&'static str] {
        match self {
            Command::Steady => &[
                "p0",
                "phat1",
                "phat2",
                "availability",
                "availability_with_degraded",
            ],
            Command::Simulate => &[
                "final_p0",
                "final_dist",
                "max_norm_defect",
                "min_value",
                "decay_rate",
            ],
            Command::Spectrum => &["region_min_abs", "axis_min_abs", "phi0_abs", "dphi0"],
            Command::DesignStatic => &[
                "final_dist",
                "min_mu1",
                "min_mu2",
                "max_norm_defect",
                "target_eps",
            ],
            Command::Control => &[
                "stages",
                "final_dist",
                "eps_c_r0",
                "fit_r_squared",
                "min_mu",
                "max_sup_mu1",
                "max_sup_mu2",
                "alpha1",
                "alpha2",
            ],
        }
    }
}

/// Result of a subcommand before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    /// Values for [`Command::metric_names`], same order.
    pub metrics: Vec<Option<f64>>,
    pub results: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub status: &'static str,
    pub exit_code: u8,
}

impl Outcome {
    fn new(command: Command, metrics: Vec<Option<f64>>, results: Value) -> Self {
        debug_assert_eq!(metrics.len(), command.metric_names().len());
        Self {
            command,
            metrics,
            results,
            files: Vec::new(),
            status: "ok",
            exit_code: EXIT_OK,
        }
    }

    fn file(mut self, name: &str, bytes: Vec<u8>) -> Self {
        self.files.push((name.to_string(), bytes));
        self
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        let i = self
            .command
            .metric_names()
            .iter()
            .position(|m| *m == name)?;
        self.metrics[i]
    }
}

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    tool: Tool,
    command: &'static str,
    status: &'static str,
    exit_code: u8,
    config: &'a RunConfig,
    files: Vec<&'a str>,
    results: &'a Value,
}

pub fn summary_bytes(outcome: &Outcome, config: &RunConfig) -> Vec<u8> {
    json_bytes(&Summary {
        schema_version: SCHEMA_VERSION,
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: TOOL_VERSION,
        },
        command: outcome.command.name(),
        status: outcome.status,
        exit_code: outcome.exit_code,
        config,
        files: outcome.files.iter().map(|(n, _)| n.as_str()).collect(),
        results: &outcome.results,
    })
}

/// Default run id: `<config stem>-<command>`.
pub fn default_run_id(config_path: &Path, command: &str) -> String {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    format!("{stem}-{command}")
}

/// Runs `command` and writes `<out_dir>/<run_id>/`. The summary goes last,
/// so its presence marks a complete run directory.
pub fn run(
    command: Command,
    cfg: &LoadedConfig,
    run_dir_parent: &Path,
    run_id: &str,
) -> Result<(Outcome, PathBuf)> {
    let outcome = execute(command, cfg)?;
    let dir = prepare_run_dir(run_dir_parent, run_id)?;
    for (name, bytes) in &outcome.files {
        write_atomic(&dir, name, bytes)?;
    }
    write_atomic(&dir, "summary.json", &summary_bytes(&outcome, &cfg.config))?;
    Ok((outcome, dir))
}

pub fn execute(command: Command, cfg: &LoadedConfig) -> Result<Outcome> {
    let params = cfg.params();
    let grid = cfg.grid();
    match command {
        Command::Steady => steady(&params, &grid),
        Command::Simulate => simulate(cfg, &params, &grid),
        Command::Spectrum => spectrum(cfg, &params, &grid),
        Command::DesignStatic => design(cfg, &params, &grid),
        Command::Control => control(cfg, &params, &grid),
    }
}

fn initial_state(cfg: &LoadedConfig, params: &ModelParams, grid: &Grid) -> Result<SystemState> {
    let state = match cfg.init_source() {
        Source::Pulse => SystemState::pulse(grid),
        Source::Steady => steady_state(params, grid),
        Source::LinearShapes => linear_target(params, grid)?.to_state(),
        Source::File(path) => read_state(&path, grid)?,
    };
    if cfg.config.simulate.normalize {
        let norm = state.norm_x(grid)?;
        if !(norm > 0.0) {
            return Err(
                ConfigError::invalid("simulate.normalize", "initial state has zero norm").into(),
            );
        }
        return Ok(state.scaled(1.0 / norm));
    }
    Ok(state)
}

fn target_from(
    source: Source,
    key: &str,
    params: &ModelParams,
    grid: &Grid,
) -> Result<DesiredState> {
    match source {
        Source::LinearShapes => Ok(linear_target(params, grid)?),
        Source::Steady => Ok(DesiredState::from_steady_state(params, grid)),
        Source::File(path) => read_target(&path, params, grid),
        Source::Pulse => Err(ConfigError::invalid(key, "`pulse` is not a valid target").into()),
    }
}

fn state_json(state: &SystemState) -> Vec<u8> {
    json_bytes(&StateFile::from_state(state))
}

fn trajectory_table(traj: &Trajectory, dist_column: &str) -> Table {
    let mut t = Table::new(&["t", "p0", "phat1", "phat2", "normX", dist_column]);
    let dist = traj.dist.as_deref();
    for i in 0..traj.len() {
        t.push_f64(&[
            traj.times[i],
            traj.p0[i],
            traj.phat1[i],
            traj.phat2[i],
            traj.norms[i],
            dist.map_or(f64::NAN, |d| d[i]),
        ]);
    }
    t
}

fn steady(params: &ModelParams, grid: &Grid) -> Result<Outcome> {
    let k = steady_constants(params);
    let s = steady_state(params, grid);
    let (phat1, phat2) = s.marginals(grid)?;
    let avail = s.availability(grid, false)?;
    let avail_deg = s.availability(grid, true)?;
    let mut table = Table::new(&["x", "p1", "p2"]);
    for (i, x) in grid.nodes().enumerate() {
        table.push_f64(&[x, s.p1[i], s.p2[i]]);
    }
    let results = json!({
        "p0": k.p0,
        "phat1": phat1,
        "phat2": phat2,
        "availability": avail,
        "availability_with_degraded": avail_deg,
        "c0": k.c0,
        "c1": k.c1,
        "normX": s.norm_x(grid)?,
    });
    Ok(Outcome::new(
        Command::Steady,
        vec![
            Some(k.p0),
            Some(phat1),
            Some(phat2),
            Some(avail),
            Some(avail_deg),
        ],
        results,
    )
    .file("steady.csv", table.to_bytes()))
}

fn simulate(cfg: &LoadedConfig, params: &ModelParams, grid: &Grid) -> Result<Outcome> {
    let t_end = cfg.config.simulate.t_end;
    let init = initial_state(cfg, params, grid)?;
    let opts = MarchOptions {
        reference: Some(steady_state(params, grid)),
        snapshot_stride: 0,
    };
    let traj = solve_open_loop_with(params, &init, t_end, grid, &opts)?;
    let floor = equilibrium_floor(params, grid, t_end)?;
    let window = default_window(t_end);
    let (fit_json, rate) = match decay_rate_fit(&traj, window, floor) {
        Ok(f) => (
            json!({
                "rate": f.rate,
                "amplitude": f.amplitude,
                "window": [f.window.0, f.window.1],
                "residual": f.residual,
                "r_squared": f.r_squared,
            }),
            Some(f.rate),
        ),
        Err(e) => (
            json!({ "window": [window.0, window.1], "error": e.to_string() }),
            None,
        ),
    };
    let final_dist = traj.dist.as_ref().and_then(|d| d.last().copied());
    let results = json!({
        "steps": traj.len() - 1,
        "final_p0": traj.final_state.p0,
        "final_dist": final_dist,
        "max_norm_defect": traj.max_norm_defect(),
        "min_value": traj.min_value,
        "equilibrium_floor": floor,
        "decay_fit": fit_json,
    });
    Ok(Outcome::new(
        Command::Simulate,
        vec![
            Some(traj.final_state.p0),
            final_dist,
            Some(traj.max_norm_defect()),
            Some(traj.min_value),
            rate,
        ],
        results,
    )
    .file(
        "trajectory.csv",
        trajectory_table(&traj, "dist_steady").to_bytes(),
    )
    .file("final_state.json", state_json(&traj.final_state)))
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn spectrum(cfg: &LoadedConfig, params: &ModelParams, grid: &Grid) -> Result<Outcome> {
    let s = &cfg.config.spectrum;
    let region = Region {
        re_min: s.re_min,
        re_max: s.re_max,
        im_min: s.im_min,
        im_max: s.im_max,
    };
    let scan = scan_region(
        params,
        grid,
        region,
        s.samples_re,
        s.samples_im,
        s.exclusion,
    )?;

    let ev = PhiEvaluator::new(params, grid);
    let mut table = Table::new(&["a", "re_phi", "im_phi", "abs_phi"]);
    let (mut axis_min, mut axis_arg) = (f64::INFINITY, f64::NAN);
    for k in 0..s.axis_samples {
        let a = if s.axis_samples == 1 {
            s.axis_min
        } else {
            s.axis_min + (s.axis_max - s.axis_min) * k as f64 / (s.axis_samples - 1) as f64
        };
        if a.abs() < s.exclusion {
            continue;
        }
        let v = ev.eval(Complex64::new(0.0, a));
        let m = v.norm();
        table.push_f64(&[a, v.re, v.im, m]);
        if m < axis_min {
            axis_min = m;
            axis_arg = a;
        }
    }
    let slope = phi_slope_at_origin(params, grid);
    let singular = scan.min_abs < SINGULAR_THRESHOLD || axis_min < SINGULAR_THRESHOLD;
    let results = json!({
        "region": {
            "re": [s.re_min, s.re_max],
            "im": [s.im_min, s.im_max],
            "evaluated": scan.evaluated,
            "min_abs": scan.min_abs,
            "argmin": complex_json(scan.argmin),
        },
        "axis": {
            "a": [s.axis_min, s.axis_max],
            "min_abs": axis_min,
            "argmin": axis_arg,
        },
        "exclusion": s.exclusion,
        "singular_threshold": SINGULAR_THRESHOLD,
        "phi0": complex_json(scan.phi0),
        "dphi0": complex_json(scan.dphi0),
        "dphi0_closed_form": slope,
    });
    let mut out = Outcome::new(
        Command::Spectrum,
        vec![
            Some(scan.min_abs),
            Some(axis_min),
            Some(scan.phi0.norm()),
            Some(scan.dphi0.re),
        ],
        results,
    )
    .file("phi_axis.csv", table.to_bytes());
    if singular {
        out.status = "near_singular";
        out.exit_code = EXIT_NUMERICAL;
    }
    Ok(out)
}

fn design(cfg: &LoadedConfig, params: &ModelParams, grid: &Grid) -> Result<Outcome> {
    let target = target_from(cfg.design_target(), "design.target", params, grid)?;
    let report = validate_desired(&target, params, grid, VALIDATION_TOL)?;
    let checks: Vec<Value> = report
        .checks
        .iter()
        .map(|c| json!({ "name": c.name, "passed": c.passed, "worst_x": c.worst_x, "worst_value": c.worst_value }))
        .collect();
    let rates = design_static_rates(&target, params, grid)?;
    let kernels = static_kernels(&target, params);
    let init = initial_state(cfg, params, grid)?;
    let goal = target.to_state();
    let opts = MarchOptions {
        reference: Some(goal.clone()),
        snapshot_stride: 0,
    };
    let traj = solve_with_kernels(
        params,
        &kernels,
        &init,
        cfg.config.design.t_end,
        grid,
        &opts,
    )?;
    let final_dist = traj.final_state.distance(&goal, grid)?;
    let min1 = rates.mu1.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let min2 = rates.mu2.iter().fold(f64::INFINITY, |m, &v| m.min(v));

    let mut table = Table::new(&["x", "mu1", "mu2"]);
    for k in 0..grid.cells() {
        table.push_f64(&[grid.node(k), rates.mu1[k], rates.mu2[k]]);
    }
    let results = json!({
        "target_checks": checks,
        "target_eps": target.eps,
        "target_p0": target.p0_star,
        "min_mu1": min1,
        "min_mu2": min2,
        "verification": {
            "t_end": cfg.config.design.t_end,
            "final_dist": final_dist,
            "max_norm_defect": traj.max_norm_defect(),
            "min_value": traj.min_value,
        },
    });
    Ok(Outcome::new(
        Command::DesignStatic,
        vec![
            Some(final_dist),
            Some(min1),
            Some(min2),
            Some(traj.max_norm_defect()),
            Some(target.eps),
        ],
        results,
    )
    .file("rates.csv", table.to_bytes())
    .file(
        "verification.csv",
        trajectory_table(&traj, "dist_target").to_bytes(),
    ))
}

fn control(cfg: &LoadedConfig, params: &ModelParams, grid: &Grid) -> Result<Outcome> {
    let c = &cfg.config.control;
    let target = target_from(cfg.control_target(), "control.target", params, grid)?;
    let init = initial_state(cfg, params, grid)?;
    let overrides = ScheduleOverrides {
        alpha1: c.alpha1,
        alpha2: c.alpha2,
        alpha_scale: c.alpha_scale,
    };
    let sched = schedule(c.t_f, &target, params, overrides)?
        .with_stages(c.stages)
        .with_stop_tol(c.stop_tol);
    let opts = RunOptions {
        cutoff_fraction: c.l_frac,
        samples_per_stage: c.samples_per_stage,
    };
    let report = run_controllability(params, &init, &target, &sched, grid, opts)?;

    let mut table = Table::new(&[
        "j",
        "t_j",
        "distX",
        "sup_mu1",
        "sup_mu2",
        "gain1_eff",
        "gain2_eff",
    ]);
    for r in &report.records {
        let mut row = vec![r.j.to_string()];
        row.extend(
            [
                r.t_j,
                r.dist,
                r.sup_mu1,
                r.sup_mu2,
                r.gain1_eff,
                r.gain2_eff,
            ]
            .map(fmt_f64),
        );
        table.push(row);
    }
    let mut rates_table = Table::new(&["x", "mu1", "mu2", "mu1_static", "mu2_static"]);
    if let Some(fr) = &report.final_rates {
        for k in 0..grid.cells() {
            rates_table.push_f64(&[
                grid.node(k),
                fr.mu1[k],
                fr.mu2[k],
                report.static_rates.mu1[k],
                report.static_rates.mu2[k],
            ]);
        }
    }

    let min_mu = report.min_mu();
    let max_sup = |f: fn(&repairflow_core::control::StageRecord) -> f64| {
        report
            .records
            .iter()
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // A run that hits the rounding floor before two stages are above it
    // decays faster than the stage fit can resolve.
    let unresolved = report.fit.is_none() && report.final_distance() <= DISTANCE_FLOOR;
    let eps_c_r0 = match report.fit {
        Some(f) => Some(f.eps_c * report.r0),
        None if unresolved => Some(f64::INFINITY),
        None => None,
    };
    let fit = match report.fit {
        Some(f) => json!({
            "m_c": f.m_c,
            "eps_c": f.eps_c,
            "eps_c_r0": f.eps_c * report.r0,
            "r_squared": f.r_squared,
            "points": f.points,
        }),
        None if unresolved => {
            json!({ "unresolved": "distance reached the rounding floor too early for a fit" })
        }
        None => Value::Null,
    };
    let bounded = match check_mu_bounded(&report, &target, &sched, grid) {
        Ok(v) => json!({
            "bounded": v.bounded,
            "slope": v.slope,
            "slope_stderr": v.slope_stderr,
            "hypothesis_margin": v.hypothesis_margin,
            "converging": v.converging,
            "final_static_dev": v.final_static_dev,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let undefined: usize = report.records.iter().map(|r| r.undefined).sum();
    let results = json!({
        "r0": report.r0,
        "t_f": report.t_f,
        "alpha1": report.alpha1,
        "alpha2": report.alpha2,
        "alpha_bounds": [sched.bounds.alpha1, sched.bounds.alpha2],
        "cutoff": report.cutoff,
        "target_eps": target.eps,
        "initial_distance": report.initial_distance,
        "final_distance": report.final_distance(),
        "stages": report.records.len(),
        "termination": report.termination.as_str(),
        "min_mu": min_mu,
        "undefined_points": undefined,
        "max_norm_defect": report.max_norm_defect(),
        "fit": fit,
        "boundedness": bounded,
    });
    let mut out = Outcome::new(
        Command::Control,
        vec![
            Some(report.records.len() as f64),
            Some(report.final_distance()),
            eps_c_r0,
            report.fit.map(|f| f.r_squared),
            Some(min_mu),
            Some(max_sup(|r| r.sup_mu1)),
            Some(max_sup(|r| r.sup_mu2)),
            Some(report.alpha1),
            Some(report.alpha2),
        ],
        results,
    )
    .file("control.csv", table.to_bytes())
    .file("final_rates.csv", rates_table.to_bytes())
    .file("final_state.json", state_json(&report.final_state));
    if min_mu < -NEGATIVITY_TOL {
        out.status = "gain_violation";
        out.exit_code = EXIT_NUMERICAL;
    }
    Ok(out)
}
