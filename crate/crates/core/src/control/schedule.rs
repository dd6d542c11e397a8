use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::desired::DesiredState;
use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams};

/// Lower bounds on the feedback gains for a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBounds {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// `alpha1 >= max{lambda2 p1*(0)^2 / eps, p1*(0), 1/r0}`,
/// `alpha2 >= max{p2*(0), 1/r0}`.
pub fn gain_bounds(target: &DesiredState, params: &ModelParams, r0: f64) -> GainBounds {
    let a = target.p1_star[0];
    let b = target.p2_star[0];
    GainBounds {
        alpha1: (params.lambda2 * a * a / target.eps).max(a).max(1.0 / r0),
        alpha2: b.max(1.0 / r0),
    }
}

/// `r0 = 6 t_f / pi^2`, so that `r0 * sum 1/k^2 = t_f`.
pub fn r0_for(t_f: f64) -> f64 {
    6.0 * t_f / (PI * PI)
}

/// User adjustments; gains may only be raised above their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleOverrides {
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    /// Factor `>= 1` applied to both gains after the overrides.
    pub alpha_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub t_f: f64,
    pub r0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Truncation stage count `J`.
    pub stages: usize,
    /// Stop once the X-distance to the target falls to this value.
    pub stop_tol: f64,
    pub bounds: GainBounds,
}

pub const DEFAULT_STAGES: usize = 30;
/// Distances below this are at the rounding floor of the stage march.
pub const DEFAULT_STOP_TOL: f64 = 1e-12;

pub fn schedule(
    t_f: f64,
    target: &DesiredState,
    params: &ModelParams,
    overrides: ScheduleOverrides,
) -> Result<ControlSchedule> {
    if !t_f.is_finite() || t_f <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "t_f",
            reason: format!("must be finite and > 0, got {t_f}"),
        });
    }
    if !(target.eps > 0.0) {
        return Err(Error::Precondition(format!(
            "target slope margin eps = {} must be > 0",
            target.eps
        )));
    }
    let r0 = r0_for(t_f);
    let bounds = gain_bounds(target, params, r0);
    let pick = |name: &'static str, given: Option<f64>, bound: f64| -> Result<f64> {
        match given {
            None => Ok(bound),
            Some(a) if a.is_finite() && a >= bound => Ok(a),
            Some(a) => Err(Error::Precondition(format!(
                "{name} = {a} is below its lower bound {bound}"
            ))),
        }
    };
    let scale = overrides.alpha_scale.unwrap_or(1.0);
    if !scale.is_finite() || scale < 1.0 {
        return Err(Error::Precondition(format!(
            "alpha_scale = {scale} must be >= 1"
        )));
    }
    Ok(ControlSchedule {
        t_f,
        r0,
        alpha1: scale * pick("alpha1", overrides.alpha1, bounds.alpha1)?,
        alpha2: scale * pick("alpha2", overrides.alpha2, bounds.alpha2)?,
        stages: DEFAULT_STAGES,
        stop_tol: DEFAULT_STOP_TOL,
        bounds,
    })
}

impl ControlSchedule {
    pub fn with_stages(mut self, stages: usize) -> Self {
        self.stages = stages;
        self
    }

    pub fn with_stop_tol(mut self, stop_tol: f64) -> Self {
        self.stop_tol = stop_tol;
        self
    }

    pub fn gain(&self, mode: u8) -> f64 {
        if mode == 1 {
            self.alpha1
        } else {
            self.alpha2
        }
    }

    /// `j * alpha_i`.
    pub fn effective_gain(&self, mode: u8, j: usize) -> f64 {
        j as f64 * self.gain(mode)
    }

    /// Duration `r0 / j^2` of stage `j`.
    pub fn stage_length(&self, j: usize) -> f64 {
        let j = j as f64;
        self.r0 / (j * j)
    }

    /// `t_j = r0 sum_{k<=j} 1/k^2`, with `t_0 = 0`.
    pub fn stage_end(&self, j: usize) -> f64 {
        self.boundaries(j)[j]
    }

    /// `t_0, t_1, ..., t_J` accumulated stage by stage with compensated
    /// summation.
    pub fn boundaries(&self, stages: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(stages + 1);
        let (mut acc, mut carry) = (0.0f64, 0.0f64);
        out.push(0.0);
        for j in 1..=stages {
            let term = 1.0 / (j as f64 * j as f64);
            let next = acc + term;
            carry += if acc.abs() >= term {
                (acc - next) + term
            } else {
                (term - next) + acc
            };
            acc = next;
            out.push(self.r0 * (acc + carry));
        }
        out
    }

    /// Time step inside stage `j`: at least 32 steps per stage.
    pub fn stage_dt(&self, j: usize, dt: f64) -> f64 {
        dt.min(self.stage_length(j) / 32.0)
    }

    /// Fails unless both gains meet their bounds for `target`.
    pub fn check_gains(&self, target: &DesiredState, params: &ModelParams) -> Result<()> {
        let b = gain_bounds(target, params, self.r0);
        let slack = 1e-12;
        if self.alpha1 < b.alpha1 * (1.0 - slack) || self.alpha2 < b.alpha2 * (1.0 - slack) {
            return Err(Error::Precondition(format!(
                "gains ({}, {}) below their bounds ({}, {})",
                self.alpha1, self.alpha2, b.alpha1, b.alpha2
            )));
        }
        Ok(())
    }
}

/// `sum_{k<=j} 1/k`.
pub fn harmonic(j: usize) -> f64 {
    (1..=j).map(|k| 1.0 / k as f64).sum()
}

/// Characteristic transit time `ptilde(x) = int_0^x p_i* / (j alpha_i)` on a
/// grid, with its piecewise-linear inverse.
#[derive(Debug, Clone)]
pub struct Transit {
    cum: Vec<f64>,
    speed: f64,
    h: f64,
    horizon: f64,
}

impl Transit {
    pub fn new(
        target: &DesiredState,
        mode: u8,
        j: usize,
        sched: &ControlSchedule,
        grid: &Grid,
    ) -> Self {
        Self::from_cumulative(
            target.cumulative(mode, grid),
            sched.effective_gain(mode, j),
            grid,
        )
    }

    pub(crate) fn from_cumulative(cum: Vec<f64>, speed: f64, grid: &Grid) -> Self {
        Self {
            cum,
            speed,
            h: grid.spacing(),
            horizon: grid.horizon(),
        }
    }

    /// Transit time to the horizon, `ptilde(L)`.
    pub fn total(&self) -> f64 {
        self.cum[self.cum.len() - 1] / self.speed
    }

    /// `ptilde` at node `k`.
    pub fn node(&self, k: usize) -> f64 {
        self.cum[k] / self.speed
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&x) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "[0, L]",
            });
        }
        let n = self.cum.len() - 1;
        let pos = x / self.h;
        let k = (pos.floor() as usize).min(n - 1);
        let w = pos - k as f64;
        Ok(((1.0 - w) * self.cum[k] + w * self.cum[k + 1]) / self.speed)
    }

    /// Position reached after transit time `tau`, clamped to `[0, L]`.
    pub fn inverse(&self, tau: f64) -> f64 {
        let c = tau * self.speed;
        let n = self.cum.len() - 1;
        if c <= 0.0 {
            return 0.0;
        }
        if c >= self.cum[n] {
            return self.horizon;
        }
        // first k with cum[k + 1] > c
        let k = self.cum.partition_point(|&v| v <= c) - 1;
        let span = self.cum[k + 1] - self.cum[k];
        let x = (k as f64 + (c - self.cum[k]) / span) * self.h;
        x.min(self.horizon)
    }
}

pub fn ptilde(
    mode: u8,
    j: usize,
    x: f64,
    sched: &ControlSchedule,
    target: &DesiredState,
    grid: &Grid,
) -> Result<f64> {
    Transit::new(target, mode, j, sched, grid).at(x)
}

pub fn ptilde_inverse(
    mode: u8,
    j: usize,
    tau: f64,
    sched: &ControlSchedule,
    target: &DesiredState,
    grid: &Grid,
) -> Result<f64> {
    let t = Transit::new(target, mode, j, sched, grid);
    if !(0.0..=t.total()).contains(&tau) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            domain: "[0, ptilde(L)]",
        });
    }
    Ok(t.inverse(tau))
}
