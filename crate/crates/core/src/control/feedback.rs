use alloc::format;
use alloc::vec::Vec;

use super::desired::{validate_desired, DesiredState, VALIDATION_TOL};
use super::schedule::ControlSchedule;
use super::stage::StageState;
use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, SystemState};
use crate::open_loop::Kernels;
use crate::quadrature::interp_uniform;

/// Repair rates tabulated on nodes `0..n` (the horizon is excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    h: f64,
}

/// Feedback values below this count as negative.
pub const NEGATIVITY_TOL: f64 = 1e-8;

impl RateProfile {
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn get(&self, mode: u8) -> &[f64] {
        if mode == 1 {
            &self.mu1
        } else {
            &self.mu2
        }
    }

    /// Linear interpolation on `[0, x_{n-1}]`.
    pub fn at(&self, mode: u8, x: f64) -> f64 {
        interp_uniform(self.get(mode), self.h, x)
    }

    /// Smallest rate; undefined (NaN) entries are skipped.
    pub fn min_value(&self) -> f64 {
        self.mu1
            .iter()
            .chain(&self.mu2)
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Largest rate of `mode` over nodes with `x <= cutoff`.
    pub fn sup_on(&self, mode: u8, cutoff: f64) -> f64 {
        self.get(mode)
            .iter()
            .enumerate()
            .take_while(|(k, _)| *k as f64 * self.h <= cutoff * (1.0 + 1e-12))
            .fold(f64::NEG_INFINITY, |m, (_, &v)| m.max(v))
    }

    /// `max |self - other|` of `mode` over nodes with `x <= cutoff`.
    pub fn deviation_on(&self, other: &RateProfile, mode: u8, cutoff: f64) -> f64 {
        self.get(mode)
            .iter()
            .zip(other.get(mode))
            .enumerate()
            .take_while(|(k, _)| *k as f64 * self.h <= cutoff * (1.0 + 1e-12))
            .fold(0.0, |m: f64, (_, (a, b))| m.max((a - b).abs()))
    }

    /// `(mode, x, value)` for every node where a rate is below `-tol`.
    pub fn negativity(&self, tol: f64) -> Vec<(u8, f64, f64)> {
        let mut out = Vec::new();
        for mode in [1u8, 2] {
            for (k, &v) in self.get(mode).iter().enumerate() {
                if v < -tol {
                    out.push((mode, k as f64 * self.h, v));
                }
            }
        }
        out
    }

    /// Undefined entries (vanishing density).
    pub fn undefined(&self) -> usize {
        self.mu1
            .iter()
            .chain(&self.mu2)
            .filter(|v| v.is_nan())
            .count()
    }
}

/// `mu1 = -p1*'/p1* - lambda2`, `mu2 = -p2*'/p2*`: the rates whose open-loop
/// equilibrium is the target.
pub fn design_static_rates(
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<RateProfile> {
    let report = validate_desired(target, params, grid, VALIDATION_TOL)?;
    if let Some(bad) = report.failures().next() {
        return Err(Error::Precondition(format!(
            "target fails `{}` (worst value {:e})",
            bad.name, bad.worst_value
        )));
    }
    Ok(static_rates(target, params, grid))
}

pub(crate) fn static_rates(
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> RateProfile {
    let n = grid.cells();
    let rate = |mode: u8, shift: f64| -> Vec<f64> {
        let p = target.density(mode);
        let d = target.slope(mode);
        (0..n).map(|k| -d[k] / p[k] - shift).collect()
    };
    RateProfile {
        mu1: rate(1, params.lambda2),
        mu2: rate(2, 0.0),
        h: grid.spacing(),
    }
}

/// Weights and kernels that realize the static design, tabulated from the
/// target: `E1 = p1* / p1*(0)`, `K1 = -(p1*' + lambda2 p1*) / p1*(0)`,
/// `S2 = p2* / p2*(0)`, `K2 = -p2*' / p2*(0)`.
pub fn static_kernels(target: &DesiredState, params: &ModelParams) -> Kernels {
    let a = target.p1_star[0];
    let b = target.p2_star[0];
    Kernels {
        e1: target.p1_star.iter().map(|v| v / a).collect(),
        k1: target
            .p1_star
            .iter()
            .zip(&target.dp1_star)
            .map(|(p, d)| -(d + params.lambda2 * p) / a)
            .collect(),
        s2: target.p2_star.iter().map(|v| v / b).collect(),
        k2: target.dp2_star.iter().map(|d| -d / b).collect(),
        moments: None,
    }
}

/// Central differences inside `values`, second-order one-sided at both ends.
fn slope(values: &[f64], h: f64) -> Vec<f64> {
    let m = values.len() - 1;
    (0..=m)
        .map(|k| {
            if k == 0 {
                (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
            } else if k == m {
                (3.0 * values[m] - 4.0 * values[m - 1] + values[m - 2]) / (2.0 * h)
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Feedback rates from ratio profiles `rho_i` on nodes `0..=last`:
/// `mu1 = -p1*'/p1* - lambda2 + (rho1'/rho1)(j alpha1 / p1* - 1)` and
/// `mu2 = -p2*'/p2* + (rho2'/rho2)(j alpha2 / p2* - 1)`.
/// Nodes with `rho <= 0` get NaN.
fn rates_from_ratio(
    rho1: &[f64],
    rho2: &[f64],
    j: usize,
    sched: &ControlSchedule,
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> RateProfile {
    let n = grid.cells();
    let h = grid.spacing();
    let base = static_rates(target, params, grid);
    let mode_rates = |mode: u8, rho: &[f64], base: &[f64]| -> Vec<f64> {
        let d = slope(rho, h);
        let gain = sched.effective_gain(mode, j);
        let p = target.density(mode);
        (0..n)
            .map(|k| {
                if rho[k] > 0.0 {
                    base[k] + d[k] / rho[k] * (gain / p[k] - 1.0)
                } else {
                    f64::NAN
                }
            })
            .collect()
    };
    RateProfile {
        mu1: mode_rates(1, rho1, &base.mu1),
        mu2: mode_rates(2, rho2, &base.mu2),
        h,
    }
}

/// Feedback rates for a stage state, which carries the ratios up to `x = L`.
pub fn feedback_from_stage_state(
    state: &StageState,
    j: usize,
    sched: &ControlSchedule,
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> RateProfile {
    rates_from_ratio(&state.rho1, &state.rho2, j, sched, target, params, grid)
}

/// Feedback law evaluated on the grid for a density state.
///
/// `mu1 = -p1x/p1 + alpha1 j (g1 p1)_x / p1 - lambda2` and
/// `mu2 = -p2x/p2 + alpha2 j (g2 p2)_x / p2` with `g_i = 1 / p_i*`. Fails
/// where a density vanishes, and with a gain-violation diagnostic where a
/// rate falls below `-1e-8`.
pub fn feedback_mu(
    state: &SystemState,
    j: usize,
    sched: &ControlSchedule,
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<RateProfile> {
    state.check_shape(grid)?;
    target.check_shape(grid)?;
    let n = grid.cells();
    let mut ratios = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (mode, out) in [1u8, 2].into_iter().zip(ratios.iter_mut()) {
        let p = if mode == 1 { &state.p1 } else { &state.p2 };
        let pstar = target.density(mode);
        for k in 0..n {
            if !(p[k] > 0.0) || !(pstar[k] > 0.0) {
                return Err(Error::UndefinedQuotient { x: grid.node(k) });
            }
            out.push(p[k] / pstar[k]);
        }
    }
    let rates = rates_from_ratio(&ratios[0], &ratios[1], j, sched, target, params, grid);
    let worst = [1u8, 2]
        .into_iter()
        .flat_map(|mode| {
            rates
                .get(mode)
                .iter()
                .enumerate()
                .map(move |(k, &v)| (mode, k, v))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2));
    if let Some((mode, k, value)) = worst {
        if value < -NEGATIVITY_TOL {
            return Err(Error::GainViolation {
                mode,
                x: grid.node(k),
                value,
            });
        }
    }
    Ok(rates)
}
