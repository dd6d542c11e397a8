//! Open-loop dynamics with time-independent repair rates.
//!
//! The densities are carried through the characteristic variables
//! `q1 = p1 / (e^{-lambda2 x} S1)` and `q2 = p2 / S2`, which are constant along
//! `x - t = const`. The good-state probability then obeys a renewal equation
//! with delayed boundary lookups, marched implicitly with the trapezoid rule.

use alloc::string::ToString;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::history::{Affine, History};
use crate::model::{Grid, ModelParams, SystemState};
use crate::quadrature::{gauss_legendre, gauss_legendre_cell, interp_uniform, trapezoid};

const STEADY_PANELS: usize = 256;

/// Grid samples of the weights and kernels that multiply `q1`, `q2`.
#[derive(Debug, Clone)]
pub struct Kernels {
    /// `e^{-lambda2 x} S1(x)`.
    pub e1: Vec<f64>,
    /// `e^{-lambda2 x} (-S1'(x))`.
    pub k1: Vec<f64>,
    /// `S2(x)`.
    pub s2: Vec<f64>,
    /// `-S2'(x)`.
    pub k2: Vec<f64>,
    /// Exact cell moments of `k1`, `k2` against piecewise-linear `q`. The
    /// kernels behave like `(L - x)^{c - 1}` near the horizon, where the
    /// trapezoid rule drops to order `h^c`. Tabulated kernels leave this out
    /// and fall back to the trapezoid rule.
    pub moments: Option<KernelMoments>,
}

/// Per cell `[x_k, x_{k+1}]`: `(int K (1 - s), int K s)` with `s = (x - x_k) / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    pub k1: Vec<[f64; 2]>,
    pub k2: Vec<[f64; 2]>,
}

/// Cells this close to the horizon are integrated after the substitution
/// `L - x = d s^4`, which removes the endpoint singularity.
const GRADED_CELLS: usize = 2;
const GRADED_PANELS: usize = 6;

fn cell_moments(f: impl Fn(f64) -> f64, grid: &Grid) -> Vec<[f64; 2]> {
    let h = grid.spacing();
    let l = grid.horizon();
    let n = grid.cells();
    (0..n)
        .map(|k| {
            let xa = grid.node(k);
            let xb = if k + 1 == n { l } else { grid.node(k + 1) };
            let mut m = [0.0; 2];
            let mut add = |x: f64, w: f64| {
                let s = ((x - xa) / h).clamp(0.0, 1.0);
                let v = f(x) * w;
                m[0] += v * (1.0 - s);
                m[1] += v * s;
            };
            if k + GRADED_CELLS >= n {
                let d = l - xa;
                let s_lo = ((l - xb) / d).max(0.0).powf(0.25);
                let width = (1.0 - s_lo) / GRADED_PANELS as f64;
                for pnl in 0..GRADED_PANELS {
                    let a = s_lo + pnl as f64 * width;
                    for (s, w) in gauss_legendre_cell(a, a + width) {
                        add(l - d * s.powi(4), w * 4.0 * d * s.powi(3));
                    }
                }
            } else {
                let mid = 0.5 * (xa + xb);
                for (a, b) in [(xa, mid), (mid, xb)] {
                    for (x, w) in gauss_legendre_cell(a, b) {
                        add(x, w);
                    }
                }
            }
            m
        })
        .collect()
}

impl Kernels {
    pub fn new(params: &ModelParams, grid: &Grid) -> Self {
        Self {
            e1: grid.sample(|x| params.degraded_weight(x)),
            k1: grid.sample(|x| params.degraded_kernel(x)),
            s2: grid.sample(|x| params.failed_weight(x)),
            k2: grid.sample(|x| params.failed_kernel(x)),
            moments: Some(KernelMoments {
                k1: cell_moments(|x| params.degraded_kernel(x), grid),
                k2: cell_moments(|x| params.failed_kernel(x), grid),
            }),
        }
    }

    /// Kernels rescaled so the trapezoid rule keeps the identities
    /// `int K1 = 1 - lambda2 int E1` and `int K2 = 1` exactly. The discrete
    /// march then has the sampled steady state as an exact equilibrium.
    pub fn balanced(mut self, lambda2: f64, grid: &Grid) -> Self {
        let h = grid.spacing();
        let total = |m: &[[f64; 2]]| m.iter().map(|c| c[0] + c[1]).sum::<f64>();
        let (i1, i2) = match &self.moments {
            Some(m) => (total(&m.k1), total(&m.k2)),
            None => (trapezoid(&self.k1, h), trapezoid(&self.k2, h)),
        };
        let s1 = (1.0 - lambda2 * trapezoid(&self.e1, h)) / i1;
        let s2 = 1.0 / i2;
        self.k1.iter_mut().for_each(|v| *v *= s1);
        self.k2.iter_mut().for_each(|v| *v *= s2);
        if let Some(m) = &mut self.moments {
            m.k1.iter_mut().flatten().for_each(|v| *v *= s1);
            m.k2.iter_mut().flatten().for_each(|v| *v *= s2);
        }
        self
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        for t in [&self.e1, &self.k1, &self.s2, &self.k2] {
            grid.check(t)?;
        }
        Ok(())
    }

    /// `p -> (q1, q2)` for these weights.
    pub fn characteristic(&self, state: &SystemState) -> (Vec<f64>, Vec<f64>) {
        (
            divide_by_weight(&state.p1, &self.e1),
            divide_by_weight(&state.p2, &self.s2),
        )
    }
}

/// Closed-form ingredients of the steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyConstants {
    /// `int_0^L e^{-lambda2 x} S1(x) dx`.
    pub c0: f64,
    /// `int_0^L S2(x) dx`.
    pub c1: f64,
    pub p0: f64,
}

pub fn steady_constants(params: &ModelParams) -> SteadyConstants {
    let l = params.horizon;
    let c0 = gauss_legendre(|x| params.degraded_weight(x), 0.0, l, STEADY_PANELS);
    let c1 = gauss_legendre(|x| params.failed_weight(x), 0.0, l, STEADY_PANELS);
    let p0 = 1.0 / ((1.0 + params.lambda1 * c0) * (1.0 + params.lambda2 * c1));
    SteadyConstants { c0, c1, p0 }
}

/// The unique normalized equilibrium sampled on `grid`.
pub fn steady_state(params: &ModelParams, grid: &Grid) -> SystemState {
    let k = steady_constants(params);
    let b1 = params.lambda1 * k.p0;
    let b2 = params.lambda2 * k.p0 * (1.0 + params.lambda1 * k.c0);
    SystemState::new(
        k.p0,
        grid.sample(|x| b1 * params.degraded_weight(x)),
        grid.sample(|x| b2 * params.failed_weight(x)),
    )
}

/// Inflow values `(p1(0), p2(0)) = (lambda1 p0, lambda2 (p0 + int p1))`.
pub fn boundary_values(
    p0: f64,
    p1: &[f64],
    grid: &Grid,
    params: &ModelParams,
) -> Result<(f64, f64)> {
    let phat1 = grid.integrate(p1)?;
    Ok((params.lambda1 * p0, params.lambda2 * (p0 + phat1)))
}

fn divide_by_weight(p: &[f64], w: &[f64]) -> Vec<f64> {
    let n = p.len() - 1;
    let mut q: Vec<f64> = p
        .iter()
        .zip(w)
        .map(|(&p, &w)| if w > 0.0 { p / w } else { 0.0 })
        .collect();
    if w[n] <= 0.0 {
        q[n] = 2.0 * q[n - 1] - q[n - 2];
    }
    q
}

/// `p -> (q1, q2)`. The value at `x = L`, where the weights vanish, is
/// extrapolated linearly.
pub fn to_characteristic(
    state: &SystemState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check_shape(grid)?;
    Ok(Kernels::new(params, grid).characteristic(state))
}

/// `(p0, q1, q2) -> p`.
pub fn from_characteristic(
    p0: f64,
    q1: &[f64],
    q2: &[f64],
    params: &ModelParams,
    grid: &Grid,
) -> Result<SystemState> {
    grid.check(q1)?;
    grid.check(q2)?;
    let k = Kernels::new(params, grid);
    Ok(SystemState::new(
        p0,
        q1.iter().zip(&k.e1).map(|(q, w)| q * w).collect(),
        q2.iter().zip(&k.s2).map(|(q, w)| q * w).collect(),
    ))
}

/// What to keep while marching.
#[derive(Debug, Clone, Default)]
pub struct MarchOptions {
    /// Distances to this state are recorded every step.
    pub reference: Option<SystemState>,
    /// Keep every `snapshot_stride`-th full state; 0 keeps only the last.
    pub snapshot_stride: usize,
}

/// Time series of an orbit. Scalars are kept every step, full states at the
/// requested stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p0: Vec<f64>,
    pub phat1: Vec<f64>,
    pub phat2: Vec<f64>,
    pub norms: Vec<f64>,
    pub dist: Option<Vec<f64>>,
    pub min_value: f64,
    pub snapshots: Vec<(f64, SystemState)>,
    pub final_state: SystemState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.norms.iter().fold(0.0, |m, v| m.max((v - 1.0).abs()))
    }

    pub fn max_dist(&self) -> Option<f64> {
        self.dist
            .as_ref()
            .map(|d| d.iter().fold(0.0, |m: f64, v| m.max(*v)))
    }

    /// State nearest to time `t` among the snapshots.
    pub fn snapshot_near(&self, t: f64) -> Option<&SystemState> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, s)| s)
    }
}

struct Recorder<'a> {
    grid: &'a Grid,
    opts: &'a MarchOptions,
    out: Trajectory,
    step: usize,
}

impl<'a> Recorder<'a> {
    fn new(grid: &'a Grid, opts: &'a MarchOptions, init: &SystemState) -> Self {
        Self {
            grid,
            opts,
            out: Trajectory {
                times: Vec::new(),
                p0: Vec::new(),
                phat1: Vec::new(),
                phat2: Vec::new(),
                norms: Vec::new(),
                dist: opts.reference.as_ref().map(|_| Vec::new()),
                min_value: f64::INFINITY,
                snapshots: Vec::new(),
                final_state: init.clone(),
            },
            step: 0,
        }
    }

    fn record(&mut self, t: f64, state: SystemState, last: bool) -> Result<()> {
        let (a, b) = state.marginals(self.grid)?;
        self.out.times.push(t);
        self.out.p0.push(state.p0);
        self.out.phat1.push(a);
        self.out.phat2.push(b);
        self.out.norms.push(state.norm_x(self.grid)?);
        self.out.min_value = self.out.min_value.min(state.min_value());
        if let (Some(r), Some(d)) = (self.opts.reference.as_ref(), self.out.dist.as_mut()) {
            d.push(state.distance(r, self.grid)?);
        }
        let stride = self.opts.snapshot_stride;
        if stride > 0 && self.step.is_multiple_of(stride) {
            self.out.snapshots.push((t, state.clone()));
        }
        if last {
            self.out.final_state = state;
        }
        self.step += 1;
        Ok(())
    }
}

fn check_inputs(init: &SystemState, t_end: f64, grid: &Grid) -> Result<()> {
    init.check_shape(grid)?;
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::Domain {
            what: "t_end",
            value: t_end,
            domain: "(0, inf)",
        });
    }
    if !init.p0.is_finite() || init.p1.iter().chain(&init.p2).any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "initial state has non-finite entries".to_string(),
        ));
    }
    if init.min_value() < 0.0 {
        return Err(Error::Precondition(
            "initial state has negative entries".to_string(),
        ));
    }
    Ok(())
}

/// Characteristic march state: initial-data branches, boundary histories and
/// sampled kernels.
struct Characteristics<'a> {
    params: &'a ModelParams,
    grid: &'a Grid,
    kern: Kernels,
    q1_init: Vec<f64>,
    q2_init: Vec<f64>,
    /// `p0(s)`; the `q1` inflow is `lambda1 p0`.
    p0: History,
    /// `p2(0, s)`.
    inflow2: History,
}

#[derive(Clone, Copy)]
enum Weight {
    E1,
    K1,
    K2,
}

impl<'a> Characteristics<'a> {
    fn weights(&self, w: Weight) -> &[f64] {
        match w {
            Weight::E1 => &self.kern.e1,
            Weight::K1 => &self.kern.k1,
            Weight::K2 => &self.kern.k2,
        }
    }

    fn moments(&self, w: Weight) -> Option<&[[f64; 2]]> {
        let m = self.kern.moments.as_ref()?;
        match w {
            Weight::E1 => None,
            Weight::K1 => Some(&m.k1),
            Weight::K2 => Some(&m.k2),
        }
    }

    fn inflow(&self, mode: u8, s: f64) -> Affine {
        if mode == 1 {
            self.p0.at(s) * self.params.lambda1
        } else {
            self.inflow2.at(s)
        }
    }

    fn init_branch(&self, mode: u8, y: f64) -> f64 {
        let q = if mode == 1 {
            &self.q1_init
        } else {
            &self.q2_init
        };
        interp_uniform(q, self.grid.spacing(), y)
    }

    /// `int_0^L q_mode(x, t) w(x) dx`, trapezoid on the grid with the
    /// characteristic `x = t` inserted as an extra node.
    fn integral(&self, t: f64, mode: u8, w: Weight) -> Affine {
        let h = self.grid.spacing();
        let ws = self.weights(w);
        let moments = self.moments(w);
        let n = self.grid.cells();
        let q = |k: usize, left: bool| -> Affine {
            let x = self.grid.node(k);
            let boundary = x < t || (x == t && left);
            if boundary {
                self.inflow(mode, t - x)
            } else {
                Affine::constant(self.init_branch(mode, x - t))
            }
        };
        let value = |k: usize, left: bool| -> Affine { q(k, left) * ws[k] };
        let mut acc = Affine::ZERO;
        for k in 0..n {
            let (xa, xb) = (self.grid.node(k), self.grid.node(k + 1));
            if t > xa && t < xb {
                let wt = interp_uniform(ws, h, t);
                let left = self.inflow(mode, 0.0) * wt;
                let right = Affine::constant(self.init_branch(mode, 0.0) * wt);
                acc = acc
                    + (value(k, true) + left) * (0.5 * (t - xa))
                    + (right + value(k + 1, false)) * (0.5 * (xb - t));
            } else if let Some(m) = moments {
                acc = acc + q(k, false) * m[k][0] + q(k + 1, true) * m[k][1];
            } else {
                acc = acc + (value(k, false) + value(k + 1, true)) * (0.5 * h);
            }
        }
        acc
    }

    fn reconstruct(&self, t: f64) -> Result<SystemState> {
        let p0 = self.p0.last();
        let n = self.grid.len();
        let mut p1 = Vec::with_capacity(n);
        let mut p2 = Vec::with_capacity(n);
        for k in 0..n {
            let x = self.grid.node(k);
            let (q1, q2) = if x < t {
                (self.inflow(1, t - x).value, self.inflow(2, t - x).value)
            } else if x > t {
                (self.init_branch(1, x - t), self.init_branch(2, x - t))
            } else {
                (
                    0.5 * (self.inflow(1, 0.0).value + self.q1_init[0]),
                    0.5 * (self.inflow(2, 0.0).value + self.q2_init[0]),
                )
            };
            p1.push(q1 * self.kern.e1[k]);
            p2.push(q2 * self.kern.s2[k]);
        }
        Ok(SystemState::new(p0, p1, p2))
    }
}

/// Open-loop orbit from `init` over `[0, t_end]` with defaults: distances to
/// the steady state are recorded, only the final state is kept.
pub fn solve_open_loop(
    params: &ModelParams,
    init: &SystemState,
    t_end: f64,
    grid: &Grid,
) -> Result<Trajectory> {
    let opts = MarchOptions {
        reference: Some(steady_state(params, grid)),
        snapshot_stride: 0,
    };
    solve_open_loop_with(params, init, t_end, grid, &opts)
}

pub fn solve_open_loop_with(
    params: &ModelParams,
    init: &SystemState,
    t_end: f64,
    grid: &Grid,
    opts: &MarchOptions,
) -> Result<Trajectory> {
    solve_with_kernels(params, &Kernels::new(params, grid), init, t_end, grid, opts)
}

/// The march with explicitly sampled weights and kernels, e.g. tabulated
/// rates from a static design. Only the failure rates of `params` are used.
pub fn solve_with_kernels(
    params: &ModelParams,
    kernels: &Kernels,
    init: &SystemState,
    t_end: f64,
    grid: &Grid,
    opts: &MarchOptions,
) -> Result<Trajectory> {
    check_inputs(init, t_end, grid)?;
    kernels.check(grid)?;
    let steps = ((t_end / grid.dt()) - 1e-9).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let (q1_init, q2_init) = kernels.characteristic(init);
    let (_, b2_0) = boundary_values(init.p0, &init.p1, grid, params)?;

    let mut ch = Characteristics {
        params,
        grid,
        kern: kernels.clone().balanced(params.lambda2, grid),
        q1_init,
        q2_init,
        p0: History::new(dt, init.p0),
        inflow2: History::new(dt, b2_0),
    };

    let mut rec = Recorder::new(grid, opts, init);
    rec.record(0.0, init.clone(), false)?;

    let loss = params.lambda1 + params.lambda2;
    let (decay, w_prev, w_cur) = exponential_weights(loss, dt);
    let mut gain_prev =
        ch.integral(0.0, 1, Weight::K1).value + ch.integral(0.0, 2, Weight::K2).value;

    for m in 1..=steps {
        let t = m as f64 * dt;
        ch.p0.set_pending(Affine::unknown());
        let phat1 = ch.integral(t, 1, Weight::E1);
        let inflow2 = (Affine::unknown() + phat1) * params.lambda2;
        ch.inflow2.set_pending(inflow2);
        let gain = ch.integral(t, 1, Weight::K1) + ch.integral(t, 2, Weight::K2);

        let rhs = Affine::constant(decay * ch.p0.last() + w_prev * gain_prev) + gain * w_cur;
        let p0 = rhs.fixed_point();

        ch.p0.push(p0);
        ch.inflow2.push(inflow2.eval(p0));
        gain_prev = gain.eval(p0);
        rec.record(t, ch.reconstruct(t)?, m == steps)?;
    }
    Ok(rec.out)
}

/// Weights of `int_0^dt e^{-rate (dt - s)} g(s) ds` for `g` linear between
/// its end values: `(e^{-rate dt}, w_start, w_end)`.
pub(crate) fn exponential_weights(rate: f64, dt: f64) -> (f64, f64, f64) {
    let a = rate * dt;
    let decay = (-a).exp();
    let one_minus = -(-a).exp_m1();
    let w_end = (1.0 - one_minus / a) / rate;
    let w_start = (one_minus / a - decay) / rate;
    (decay, w_start, w_end)
}

/// First-order upwind reference solver in the characteristic variables.
///
/// With `dt = dx` the advection step is an exact shift, so the only errors
/// come from explicit Euler on `p0` and the quadrature of the coupling.
pub fn upwind_oracle(
    params: &ModelParams,
    init: &SystemState,
    t_end: f64,
    grid: &Grid,
) -> Result<Trajectory> {
    let opts = MarchOptions {
        reference: Some(steady_state(params, grid)),
        snapshot_stride: 0,
    };
    upwind_oracle_with(params, init, t_end, grid, &opts)
}

pub fn upwind_oracle_with(
    params: &ModelParams,
    init: &SystemState,
    t_end: f64,
    grid: &Grid,
    opts: &MarchOptions,
) -> Result<Trajectory> {
    check_inputs(init, t_end, grid)?;
    let h = grid.spacing();
    let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let kern = Kernels::new(params, grid);
    let (mut q1, mut q2) = to_characteristic(init, params, grid)?;
    let mut p0 = init.p0;
    let loss = params.lambda1 + params.lambda2;
    let weighted = |q: &[f64], w: &[f64]| -> f64 {
        let prod: Vec<f64> = q.iter().zip(w).map(|(a, b)| a * b).collect();
        trapezoid(&prod, h)
    };

    let mut rec = Recorder::new(grid, opts, init);
    rec.record(0.0, init.clone(), false)?;
    for m in 1..=steps {
        let gain = weighted(&q1, &kern.k1) + weighted(&q2, &kern.k2);
        p0 += h * (-loss * p0 + gain);
        q1.rotate_right(1);
        q2.rotate_right(1);
        q1[0] = params.lambda1 * p0;
        let phat1 = weighted(&q1, &kern.e1);
        q2[0] = params.lambda2 * (p0 + phat1);
        let state = SystemState::new(
            p0,
            q1.iter().zip(&kern.e1).map(|(q, w)| q * w).collect(),
            q2.iter().zip(&kern.s2).map(|(q, w)| q * w).collect(),
        );
        rec.record(m as f64 * h, state, m == steps)?;
    }
    Ok(rec.out)
}

/// Largest drift of the march started at the steady state over
/// `[0, t_end]`: the numerical noise floor for distance measurements.
pub fn equilibrium_floor(params: &ModelParams, grid: &Grid, t_end: f64) -> Result<f64> {
    let steady = steady_state(params, grid);
    let traj = solve_open_loop(params, &steady, t_end, grid)?;
    Ok(traj.max_dist().unwrap_or(0.0))
}

/// `dist(t) ≈ M e^{-eps t}` over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Fitted amplitude `M`.
    pub amplitude: f64,
    /// Fitted rate `eps`.
    pub rate: f64,
    pub window: (f64, f64),
    /// RMS residual of `ln dist`.
    pub residual: f64,
    /// `max ln dist - min ln dist` over the window.
    pub log_range: f64,
    pub r_squared: f64,
}

impl DecayFit {
    /// Residual as a fraction of the fitted range.
    pub fn relative_residual(&self) -> f64 {
        if self.log_range > 0.0 {
            self.residual / self.log_range
        } else {
            f64::INFINITY
        }
    }
}

/// `[t_end / 4, 3 t_end / 4]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (0.25 * t_end, 0.75 * t_end)
}

/// Log-linear fit of the recorded distances over `window`. Samples at or
/// below `10 * floor` mean the orbit settled before the window ended.
pub fn decay_rate_fit(traj: &Trajectory, window: (f64, f64), floor: f64) -> Result<DecayFit> {
    let dist = traj
        .dist
        .as_ref()
        .ok_or_else(|| Error::Precondition("trajectory carries no distances".to_string()))?;
    fit_decay_samples(&traj.times, dist, window, floor)
}

pub fn fit_decay_samples(
    times: &[f64],
    dist: &[f64],
    window: (f64, f64),
    floor: f64,
) -> Result<DecayFit> {
    if times.len() != dist.len() {
        return Err(Error::Shape {
            expected: times.len(),
            got: dist.len(),
        });
    }
    let (a, b) = window;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &d) in times.iter().zip(dist) {
        if t < a || t > b {
            continue;
        }
        if !(d > 10.0 * floor) || d <= 0.0 {
            return Err(Error::ConvergedBeforeWindow);
        }
        xs.push(t);
        ys.push(d.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData { start: a, end: b });
    }
    let line = fit_line(&xs, &ys)?;
    let hi = ys.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let lo = ys.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let fit = DecayFit {
        amplitude: line.intercept.exp(),
        rate: -line.slope,
        window,
        residual: line.rms_residual,
        log_range: hi - lo,
        r_squared: line.r_squared,
    };
    if fit.rate > 0.0 {
        Ok(fit)
    } else {
        Err(Error::Inconclusive(
            "fitted decay rate is not positive".to_string(),
        ))
    }
}
