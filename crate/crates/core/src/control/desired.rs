use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, SystemState};
use crate::quadrature::{cumulative_trapezoid, derivative, trapezoid};

/// Target distribution `(p0*, p1*, p2*)` with nodal derivatives and the slope
/// margin `eps` (`dp1*/dx <= -eps`).
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredState {
    pub p0_star: f64,
    pub p1_star: Vec<f64>,
    pub p2_star: Vec<f64>,
    pub dp1_star: Vec<f64>,
    pub dp2_star: Vec<f64>,
    pub eps: f64,
}

const SHAPE_STEP: f64 = 1e-5;

/// Second-order derivative of a closure on `[0, L]`, never sampling outside.
fn closure_derivative(f: &impl Fn(f64) -> f64, x: f64, horizon: f64) -> f64 {
    let d = SHAPE_STEP * horizon;
    if x - d < 0.0 {
        (-3.0 * f(x) + 4.0 * f(x + d) - f(x + 2.0 * d)) / (2.0 * d)
    } else if x + d > horizon {
        (3.0 * f(x) - 4.0 * f(x - d) + f(x - 2.0 * d)) / (2.0 * d)
    } else {
        (f(x + d) - f(x - d)) / (2.0 * d)
    }
}

impl DesiredState {
    /// Target from nodal samples; derivatives are grid differences.
    pub fn new(
        p0_star: f64,
        p1_star: Vec<f64>,
        p2_star: Vec<f64>,
        eps: f64,
        grid: &Grid,
    ) -> Result<Self> {
        grid.check(&p1_star)?;
        grid.check(&p2_star)?;
        let h = grid.spacing();
        Ok(Self {
            p0_star,
            dp1_star: derivative(&p1_star, h),
            dp2_star: derivative(&p2_star, h),
            p1_star,
            p2_star,
            eps,
        })
    }

    /// Target from densities given as functions; derivatives come from a fine
    /// difference of the closures. `eps` defaults to the measured margin.
    pub fn from_functions(
        p0_star: f64,
        f1: impl Fn(f64) -> f64,
        f2: impl Fn(f64) -> f64,
        eps: Option<f64>,
        grid: &Grid,
    ) -> Self {
        let l = grid.horizon();
        let dp1_star = grid.sample(|x| closure_derivative(&f1, x, l));
        let eps = eps.unwrap_or_else(|| measured_margin(&dp1_star));
        Self {
            p0_star,
            p1_star: grid.sample(&f1),
            p2_star: grid.sample(&f2),
            dp1_star,
            dp2_star: grid.sample(|x| closure_derivative(&f2, x, l)),
            eps,
        }
    }

    /// The open-loop steady state of `params` as a target, with exact
    /// derivatives of its closed form. The constants use grid trapezoid
    /// integrals so the sampled target is normalized and compatible to
    /// rounding.
    pub fn from_steady_state(params: &ModelParams, grid: &Grid) -> Self {
        let w1 = grid.sample(|x| params.degraded_weight(x));
        let w2 = grid.sample(|x| params.failed_weight(x));
        let h = grid.spacing();
        let c0 = trapezoid(&w1, h);
        let c1 = trapezoid(&w2, h);
        let p0 = 1.0 / ((1.0 + params.lambda1 * c0) * (1.0 + params.lambda2 * c1));
        let b1 = params.lambda1 * p0;
        let b2 = params.lambda2 * p0 * (1.0 + params.lambda1 * c0);
        // (e^{-lambda2 x} S1)' = -lambda2 e^{-lambda2 x} S1 - e^{-lambda2 x} (-S1')
        let dp1_star = grid.sample(|x| {
            -b1 * (params.lambda2 * params.degraded_weight(x) + params.degraded_kernel(x))
        });
        Self {
            p0_star: p0,
            p1_star: w1.iter().map(|w| b1 * w).collect(),
            p2_star: w2.iter().map(|w| b2 * w).collect(),
            eps: measured_margin(&dp1_star),
            dp1_star,
            dp2_star: grid.sample(|x| -b2 * params.failed_kernel(x)),
        }
    }

    pub fn to_state(&self) -> SystemState {
        SystemState::new(self.p0_star, self.p1_star.clone(), self.p2_star.clone())
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        for t in [&self.p1_star, &self.p2_star, &self.dp1_star, &self.dp2_star] {
            grid.check(t)?;
        }
        Ok(())
    }

    pub(crate) fn density(&self, mode: u8) -> &[f64] {
        if mode == 1 {
            &self.p1_star
        } else {
            &self.p2_star
        }
    }

    pub(crate) fn slope(&self, mode: u8) -> &[f64] {
        if mode == 1 {
            &self.dp1_star
        } else {
            &self.dp2_star
        }
    }

    /// `int_0^{x_k} p_mode*` by the cumulative trapezoid rule.
    pub fn cumulative(&self, mode: u8, grid: &Grid) -> Vec<f64> {
        cumulative_trapezoid(self.density(mode), grid.spacing())
    }
}

fn measured_margin(dp1: &[f64]) -> f64 {
    dp1.iter().fold(f64::INFINITY, |m, d| m.min(-d))
}

/// Outcome of one target condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Location of the worst sample, when the condition is pointwise.
    pub worst_x: Option<f64>,
    /// Worst defect (zero or negative means satisfied with margin).
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Default absolute tolerance of [`validate_desired`].
pub const VALIDATION_TOL: f64 = 1e-6;

fn scalar(name: &'static str, defect: f64, tol: f64) -> ConditionCheck {
    ConditionCheck {
        name,
        passed: defect.abs() <= tol,
        worst_x: None,
        worst_value: defect,
    }
}

/// Worst value of `defect(k)` over nodes in `range`; passes when it stays
/// at or below `limit`.
fn pointwise(
    name: &'static str,
    grid: &Grid,
    range: core::ops::Range<usize>,
    limit: f64,
    defect: impl Fn(usize) -> f64,
) -> ConditionCheck {
    let mut worst = f64::NEG_INFINITY;
    let mut at = range.start;
    for k in range {
        let v = defect(k);
        if v > worst || v.is_nan() {
            worst = v;
            at = k;
        }
    }
    ConditionCheck {
        name,
        passed: worst <= limit,
        worst_x: Some(grid.node(at)),
        worst_value: worst,
    }
}

/// Checks every target condition on the grid. Slopes are central
/// differences of the samples.
pub fn validate_desired(
    cand: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
    tol: f64,
) -> Result<ValidationReport> {
    cand.check_shape(grid)?;
    let h = grid.spacing();
    let n = grid.cells();
    let int1 = trapezoid(&cand.p1_star, h);
    let int2 = trapezoid(&cand.p2_star, h);
    let d1 = derivative(&cand.p1_star, h);
    let d2 = derivative(&cand.p2_star, h);

    let checks = alloc::vec![
        scalar(
            "compatibility_p1",
            cand.p1_star[0] - params.lambda1 * cand.p0_star,
            tol
        ),
        scalar(
            "compatibility_p2",
            cand.p2_star[0] - params.lambda2 * (cand.p0_star + int1),
            tol
        ),
        ConditionCheck {
            name: "end_values",
            passed: cand.p1_star[n].abs() <= tol && cand.p2_star[n].abs() <= tol,
            worst_x: Some(grid.horizon()),
            worst_value: cand.p1_star[n].abs().max(cand.p2_star[n].abs()),
        },
        scalar("normalization", cand.p0_star + int1 + int2 - 1.0, tol),
        pointwise("positivity", grid, 0..n, 0.0, |k| {
            // strictly positive before the horizon, nonnegative at it
            -(cand.p1_star[k].min(cand.p2_star[k]))
        }),
        ConditionCheck {
            name: "slope_margin",
            passed: cand.eps > 0.0 && cand.eps.is_finite(),
            worst_x: None,
            worst_value: cand.eps,
        },
        pointwise("decrease_p1", grid, 1..n, tol, |k| d1[k] + cand.eps),
        pointwise("decrease_p2", grid, 1..n, 0.0, |k| d2[k]),
    ];
    let mut report = ValidationReport { checks };
    if cand.p0_star < 0.0 {
        report
            .checks
            .push(scalar("positivity_p0", cand.p0_star, 0.0));
    }
    Ok(report)
}

/// Target `p_i* = s_i shape_i` meeting the compatibility and normalization
/// conditions for `params`. Integrals of the shapes use the grid trapezoid
/// rule, so the sampled target satisfies the conditions to rounding.
pub fn construct_desired(
    shape1: impl Fn(f64) -> f64,
    shape2: impl Fn(f64) -> f64,
    params: &ModelParams,
    grid: &Grid,
) -> Result<DesiredState> {
    let h = grid.spacing();
    let v1 = grid.sample(&shape1);
    let v2 = grid.sample(&shape2);
    for (name, v) in [("shape1", &v1), ("shape2", &v2)] {
        let first = v[0];
        if !(first > 0.0) || !first.is_finite() {
            return Err(Error::Construction(alloc::format!(
                "{name}(0) must be positive"
            )));
        }
        if v[grid.cells()].abs() > 1e-12 * first {
            return Err(Error::Construction(alloc::format!("{name}(L) must vanish")));
        }
        if v.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Construction(alloc::format!(
                "{name} must be strictly decreasing"
            )));
        }
    }
    let a = params.lambda1 * trapezoid(&v1, h) / v1[0];
    let b = params.lambda2 * trapezoid(&v2, h) / v2[0];
    let det = (1.0 + a) * (1.0 + b);
    if !det.is_finite() || det <= 0.0 {
        return Err(Error::Construction(
            "singular normalization system".to_string(),
        ));
    }
    let p0 = 1.0 / det;
    let s1 = params.lambda1 * p0 / v1[0];
    let s2 = params.lambda2 * p0 * (1.0 + a) / v2[0];
    Ok(DesiredState::from_functions(
        p0,
        move |x| s1 * shape1(x),
        move |x| s2 * shape2(x),
        None,
        grid,
    ))
}

/// `1 - x / L`, the linear shape.
pub fn linear_shape(horizon: f64) -> impl Fn(f64) -> f64 + Clone {
    move |x: f64| 1.0 - x / horizon
}

/// Target built from linear shapes in both repair states.
pub fn linear_target(params: &ModelParams, grid: &Grid) -> Result<DesiredState> {
    construct_desired(
        linear_shape(params.horizon),
        linear_shape(params.horizon),
        params,
        grid,
    )
}
