use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::desired::DesiredState;
use super::feedback::{feedback_from_stage_state, static_rates, RateProfile};
use super::schedule::{harmonic, ControlSchedule, Transit};
use super::stage::{run_stage, StageState};
use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::model::{Grid, ModelParams, SystemState};

/// One completed stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub j: usize,
    pub t_j: f64,
    /// X-distance to the target at `t_j^-`.
    pub dist: f64,
    /// Largest feedback rates over `[0, l]` across the stage samples.
    pub sup_mu1: f64,
    pub sup_mu2: f64,
    /// Smallest feedback rate over `[0, x_{n-1}]` across the stage samples.
    pub min_mu: f64,
    /// `j alpha_1`, `j alpha_2`.
    pub gain1_eff: f64,
    pub gain2_eff: f64,
    /// `max_{[0, l]} |mu_i(., t_j^-) - static rate|`.
    pub static_dev1: f64,
    pub static_dev2: f64,
    pub norm: f64,
    pub min_density: f64,
    /// Grid points where the feedback quotient was undefined.
    pub undefined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Distance fell to `stop_tol`.
    ToleranceReached,
    /// `J` stages completed.
    StageLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ToleranceReached => "tol_reached",
            Termination::StageLimit => "stage_limit",
        }
    }
}

/// `d_j ~ M_c exp(-eps_c r0 H_j)` fitted over stages, `H_j = sum_{k<=j} 1/k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageDecayFit {
    pub m_c: f64,
    pub eps_c: f64,
    /// Slope of `ln d_j` against `r0 H_j`, i.e. `-eps_c`.
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlReport {
    pub r0: f64,
    pub t_f: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Interior cutoff `l` for the feedback suprema.
    pub cutoff: f64,
    pub initial_distance: f64,
    pub records: Vec<StageRecord>,
    pub fit: Option<StageDecayFit>,
    pub termination: Termination,
    pub final_state: SystemState,
    /// Feedback rates at `t_J^-`.
    pub final_rates: Option<RateProfile>,
    pub static_rates: RateProfile,
}

impl ControlReport {
    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dist).collect()
    }

    pub fn min_mu(&self) -> f64 {
        self.records
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.min_mu))
    }

    pub fn final_distance(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_distance, |r| r.dist)
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0, |m: f64, r| m.max((r.norm - 1.0).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Interior cutoff `l` as a fraction of `L`.
    pub cutoff_fraction: f64,
    /// Times per stage at which the feedback law is evaluated.
    pub samples_per_stage: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cutoff_fraction: 0.8,
            samples_per_stage: 16,
        }
    }
}

/// Distances at or below this are rounding noise and stay out of the fit.
pub const DISTANCE_FLOOR: f64 = 1e-12;

pub fn fit_stage_decay(r0: f64, records: &[StageRecord]) -> Option<StageDecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.dist > DISTANCE_FLOOR && r.dist.is_finite())
        .map(|r| (r0 * harmonic(r.j), r.dist.ln()))
        .unzip();
    let f = fit_line(&xs, &ys).ok()?;
    Some(StageDecayFit {
        m_c: f.intercept.exp(),
        eps_c: -f.slope,
        slope: f.slope,
        r_squared: f.r_squared,
        points: f.points,
    })
}

/// Applies the feedback law stage by stage until `J` stages are done or the
/// distance reaches `stop_tol`.
pub fn run_controllability(
    params: &ModelParams,
    init: &SystemState,
    target: &DesiredState,
    sched: &ControlSchedule,
    grid: &Grid,
    opts: RunOptions,
) -> Result<ControlReport> {
    init.check_shape(grid)?;
    if !init.is_nonnegative(1e-12) {
        return Err(Error::Precondition(
            "initial state has negative entries".into(),
        ));
    }
    let norm0 = init.norm_x(grid)?;
    if (norm0 - 1.0).abs() > 1e-3 {
        return Err(Error::Precondition(format!(
            "initial state has X-norm {norm0}, expected 1"
        )));
    }
    if sched.stages == 0 {
        return Err(Error::InvalidParameter {
            name: "stages",
            reason: "at least one stage is required".into(),
        });
    }
    let cutoff = opts.cutoff_fraction * grid.horizon();
    let target_state = target.to_state();
    let statics = static_rates(target, params, grid);
    let initial_distance = init.distance(&target_state, grid)?;

    let mut state = StageState::from_state(init, target, grid)?;
    let mut records = Vec::new();
    let mut termination = Termination::StageLimit;
    let mut final_rates = None;
    let mut t = 0.0;
    for j in 1..=sched.stages {
        let run = run_stage(j, &state, sched, target, params, grid)?;
        t += run.length;
        let samples = opts.samples_per_stage.max(1);
        let (mut sup1, mut sup2, mut min_mu, mut undefined) =
            (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0);
        let mut last = None;
        for s in 1..=samples {
            let tau = run.length * s as f64 / samples as f64;
            let st = if s == samples {
                run.end()
            } else {
                run.state_at(tau)
            };
            let rates = feedback_from_stage_state(&st, j, sched, target, params, grid);
            sup1 = sup1.max(rates.sup_on(1, cutoff));
            sup2 = sup2.max(rates.sup_on(2, cutoff));
            min_mu = min_mu.min(rates.min_value());
            undefined += rates.undefined();
            if s == samples {
                last = Some((st, rates));
            }
        }
        let (end, rates) = last.expect("at least one sample");
        let out = end.to_state(target);
        let dist = out.distance(&target_state, grid)?;
        records.push(StageRecord {
            j,
            t_j: t,
            dist,
            sup_mu1: sup1,
            sup_mu2: sup2,
            min_mu,
            gain1_eff: sched.effective_gain(1, j),
            gain2_eff: sched.effective_gain(2, j),
            static_dev1: rates.deviation_on(&statics, 1, cutoff),
            static_dev2: rates.deviation_on(&statics, 2, cutoff),
            norm: out.norm_x(grid)?,
            min_density: out.min_value(),
            undefined,
        });
        state = end;
        final_rates = Some(rates);
        if dist <= sched.stop_tol {
            termination = Termination::ToleranceReached;
            break;
        }
    }
    Ok(ControlReport {
        r0: sched.r0,
        t_f: sched.t_f,
        alpha1: sched.alpha1,
        alpha2: sched.alpha2,
        cutoff,
        initial_distance,
        fit: fit_stage_decay(sched.r0, &records),
        termination,
        final_state: state.to_state(target),
        final_rates,
        static_rates: statics,
        records,
    })
}

/// Outcome of the boundedness monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessVerdict {
    pub bounded: bool,
    /// Least-squares slope of `sup mu_i` against `j` and its standard error.
    pub slope: [f64; 2],
    pub slope_stderr: [f64; 2],
    /// `t_f - 2 (ptilde_1(L) + ptilde_2(L))` at `j = 1`.
    pub hypothesis_margin: f64,
    /// When `eps_c r0 > 1`: whether `max |mu_i(., t_j) - static|` decreased
    /// over the last ten stages (or sat below `1e-9`).
    pub converging: Option<bool>,
    pub final_static_dev: f64,
}

/// Slope allowance in standard errors.
const TREND_SIGMAS: f64 = 2.0;
/// Rate deviations below this count as converged.
const STATIC_DEV_FLOOR: f64 = 1e-9;
const MIN_STAGES: usize = 10;

pub fn check_mu_bounded(
    report: &ControlReport,
    target: &DesiredState,
    sched: &ControlSchedule,
    grid: &Grid,
) -> Result<BoundednessVerdict> {
    let recs = &report.records;
    if recs.len() < MIN_STAGES {
        return Err(Error::Inconclusive(format!(
            "{} stages recorded, at least {MIN_STAGES} needed",
            recs.len()
        )));
    }
    if target
        .dp1_star
        .iter()
        .chain(&target.dp2_star)
        .any(|d| !d.is_finite())
    {
        return Err(Error::Precondition(
            "target derivatives are not bounded".into(),
        ));
    }
    let d1 = Transit::new(target, 1, 1, sched, grid).total();
    let d2 = Transit::new(target, 2, 1, sched, grid).total();
    let hypothesis_margin = sched.t_f - 2.0 * (d1 + d2);
    if hypothesis_margin <= 0.0 {
        return Err(Error::Precondition(format!(
            "t_f = {} does not exceed 2 (ptilde_1(L) + ptilde_2(L)) = {}",
            sched.t_f,
            2.0 * (d1 + d2)
        )));
    }

    let js: Vec<f64> = recs.iter().map(|r| r.j as f64).collect();
    let mut slope = [0.0; 2];
    let mut slope_stderr = [0.0; 2];
    let mut bounded = true;
    for (i, sup) in [
        recs.iter().map(|r| r.sup_mu1).collect::<Vec<_>>(),
        recs.iter().map(|r| r.sup_mu2).collect::<Vec<_>>(),
    ]
    .iter()
    .enumerate()
    {
        if sup.iter().any(|v| !v.is_finite()) {
            bounded = false;
            slope[i] = f64::NAN;
            continue;
        }
        let f = fit_line(&js, sup)?;
        slope[i] = f.slope;
        slope_stderr[i] = f.slope_stderr;
        bounded &= f.slope <= TREND_SIGMAS * f.slope_stderr;
    }

    let dev: Vec<f64> = recs
        .iter()
        .map(|r| r.static_dev1.max(r.static_dev2))
        .collect();
    let converging = report.fit.filter(|f| f.eps_c * report.r0 > 1.0).map(|_| {
        let tail = &dev[dev.len().saturating_sub(MIN_STAGES)..];
        tail.windows(2)
            .all(|w| w[1] <= w[0] || w[1] <= STATIC_DEV_FLOOR)
    });
    Ok(BoundednessVerdict {
        bounded,
        slope,
        slope_stderr,
        hypothesis_margin,
        converging,
        final_static_dev: dev[dev.len() - 1],
    })
}
