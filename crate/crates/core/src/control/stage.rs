//! One stage of the closed loop.
//!
//! Under the feedback law the ratio `rho_i = p_i / p_i*` is transported with
//! speed `j alpha_i / p_i*(x)`, so `phi_i = j alpha_i rho_i` is constant along
//! the curves `ptilde_i(x) - tau = const`. Every value inside the stage is
//! either the stage's initial ratio carried forward or a delayed inflow
//! `B_i(tau - ptilde_i(x)) / p_i*(0)`. The inflows depend on `p0` only, and
//! `p0` is the initial mass minus what is still in transit, which closes a
//! renewal equation marched on the stage-local grid.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::desired::DesiredState;
use super::schedule::{ControlSchedule, Transit};
use crate::error::{Error, Result};
use crate::history::{Affine, History};
use crate::model::{Grid, ModelParams, SystemState};
use crate::quadrature::{cumulative_trapezoid, interp_uniform};

/// State between stages: `p0` and the ratios `rho_i = p_i / p_i*` on all
/// nodes, including `x = L` where `p_i*` vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    pub p0: f64,
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
}

fn ratio(p: &[f64], pstar: &[f64]) -> Result<Vec<f64>> {
    let n = p.len() - 1;
    let mut rho = Vec::with_capacity(n + 1);
    for k in 0..n {
        if !(pstar[k] > 0.0) {
            return Err(Error::Precondition(format!(
                "target density vanishes at interior node {k}"
            )));
        }
        rho.push(p[k] / pstar[k]);
    }
    rho.push(2.0 * rho[n - 1] - rho[n - 2]);
    Ok(rho)
}

impl StageState {
    /// Ratios of `state` to `target`; the value at `L` is extrapolated.
    pub fn from_state(state: &SystemState, target: &DesiredState, grid: &Grid) -> Result<Self> {
        state.check_shape(grid)?;
        target.check_shape(grid)?;
        Ok(Self {
            p0: state.p0,
            rho1: ratio(&state.p1, &target.p1_star)?,
            rho2: ratio(&state.p2, &target.p2_star)?,
        })
    }

    /// The target itself: `rho = 1`.
    pub fn at_target(target: &DesiredState) -> Self {
        Self {
            p0: target.p0_star,
            rho1: alloc::vec![1.0; target.p1_star.len()],
            rho2: alloc::vec![1.0; target.p2_star.len()],
        }
    }

    pub fn to_state(&self, target: &DesiredState) -> SystemState {
        let mul = |rho: &[f64], p: &[f64]| rho.iter().zip(p).map(|(r, p)| r * p).collect();
        SystemState::new(
            self.p0,
            mul(&self.rho1, &target.p1_star),
            mul(&self.rho2, &target.p2_star),
        )
    }

    pub(crate) fn rho(&self, mode: u8) -> &[f64] {
        if mode == 1 {
            &self.rho1
        } else {
            &self.rho2
        }
    }
}

/// One repair mode inside a stage.
#[derive(Debug, Clone)]
struct ModeStage {
    transit: Transit,
    /// `ptilde(L)`.
    delay: f64,
    /// `j alpha`.
    speed: f64,
    /// `j alpha / p*(0)`.
    kappa: f64,
    pstar0: f64,
    rho_in: Vec<f64>,
    /// `int_0^x p* rho_in`.
    carried: Vec<f64>,
    /// Inflow `B(tau) = p(0, tau)`.
    inflow: History,
    h: f64,
}

impl ModeStage {
    fn new(
        mode: u8,
        j: usize,
        init: &StageState,
        target: &DesiredState,
        sched: &ControlSchedule,
        grid: &Grid,
        dt: f64,
    ) -> Self {
        let h = grid.spacing();
        let transit = Transit::new(target, mode, j, sched, grid);
        let speed = sched.effective_gain(mode, j);
        let pstar = target.density(mode);
        let rho_in = init.rho(mode).to_vec();
        let weighted: Vec<f64> = pstar.iter().zip(&rho_in).map(|(p, r)| p * r).collect();
        Self {
            delay: transit.total(),
            transit,
            speed,
            kappa: speed / pstar[0],
            pstar0: pstar[0],
            carried: cumulative_trapezoid(&weighted, h),
            rho_in,
            inflow: History::new(dt, 0.0),
            h,
        }
    }

    /// Far end of the initial data still in the domain at `tau`.
    fn carried_front(&self, tau: f64) -> f64 {
        self.transit.inverse(self.delay - tau)
    }

    /// `int_0^L p_i(x, tau) dx`.
    fn mass(&self, tau: f64) -> Affine {
        let from_inflow = self.inflow.integral((tau - self.delay).max(0.0), tau) * self.kappa;
        if tau < self.delay {
            from_inflow
                + Affine::constant(interp_uniform(
                    &self.carried,
                    self.h,
                    self.carried_front(tau),
                ))
        } else {
            from_inflow
        }
    }

    /// `int_0^tau (phi(L, s) - phi(0, s)) ds`.
    fn net_outflow(&self, tau: f64) -> Affine {
        let total = self.carried[self.carried.len() - 1];
        let initial_part = total
            - interp_uniform(
                &self.carried,
                self.h,
                self.carried_front(tau.min(self.delay)),
            );
        let delayed = if tau > self.delay {
            self.inflow.integral(0.0, tau - self.delay) * self.kappa
        } else {
            Affine::ZERO
        };
        Affine::constant(initial_part) + delayed - self.inflow.integral(0.0, tau) * self.kappa
    }

    /// `phi(L, tau)`.
    fn outflow(&self, tau: f64) -> f64 {
        if tau > self.delay {
            self.kappa * self.inflow.at(tau - self.delay).value
        } else {
            self.speed * interp_uniform(&self.rho_in, self.h, self.carried_front(tau))
        }
    }

    fn ratio_at(&self, tau: f64) -> Vec<f64> {
        let n = self.rho_in.len() - 1;
        (0..=n)
            .map(|k| {
                let pk = self.transit.node(k);
                if pk < tau {
                    self.inflow.at(tau - pk).value / self.pstar0
                } else {
                    interp_uniform(&self.rho_in, self.h, self.transit.inverse(pk - tau))
                }
            })
            .collect()
    }
}

/// Per-step record of one stage, in stage-local time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub p0: Vec<f64>,
    /// `p1(0, tau)`, `p2(0, tau)`.
    pub inflow1: Vec<f64>,
    pub inflow2: Vec<f64>,
    /// `phi_1(L, tau)`, `phi_2(L, tau)`.
    pub outflow1: Vec<f64>,
    pub outflow2: Vec<f64>,
    /// `p0 + int p1 + int p2` carried by the march.
    pub mass: Vec<f64>,
}

/// A solved stage; the state can be read back at any stage-local time.
#[derive(Debug, Clone)]
pub struct StageRun {
    pub j: usize,
    pub length: f64,
    modes: [ModeStage; 2],
    p0: History,
    pub trace: StageTrace,
}

impl StageRun {
    pub fn dt(&self) -> f64 {
        self.trace.dt
    }

    /// Stage state at local time `tau` in `[0, length]`.
    pub fn state_at(&self, tau: f64) -> StageState {
        let tau = tau.clamp(0.0, self.length);
        StageState {
            p0: self.p0.at(tau).value,
            rho1: self.modes[0].ratio_at(tau),
            rho2: self.modes[1].ratio_at(tau),
        }
    }

    pub fn end(&self) -> StageState {
        self.state_at(self.length)
    }
}

/// Marches stage `j` from `init` over `[0, r0 / j^2]`.
pub fn run_stage(
    j: usize,
    init: &StageState,
    sched: &ControlSchedule,
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<StageRun> {
    if j == 0 {
        return Err(Error::InvalidParameter {
            name: "j",
            reason: "stages are numbered from 1".into(),
        });
    }
    target.check_shape(grid)?;
    grid.check(&init.rho1)?;
    grid.check(&init.rho2)?;
    sched.check_gains(target, params)?;

    let length = sched.stage_length(j);
    let steps = (length / sched.stage_dt(j, grid.dt()) - 1e-9)
        .ceil()
        .max(1.0) as usize;
    let dt = length / steps as f64;
    let (l1, l2) = (params.lambda1, params.lambda2);

    let mut m1 = ModeStage::new(1, j, init, target, sched, grid, dt);
    let mut m2 = ModeStage::new(2, j, init, target, sched, grid, dt);
    let mass0 = init.p0 + m1.carried[m1.carried.len() - 1] + m2.carried[m2.carried.len() - 1];

    let b1 = l1 * init.p0;
    m1.inflow = History::new(dt, b1);
    let b2 = l2 * (init.p0 + m1.mass(0.0).value);
    m2.inflow = History::new(dt, b2);
    let mut p0 = History::new(dt, init.p0);

    let mut trace = StageTrace {
        dt,
        ..StageTrace::default()
    };
    let record = |tau: f64, p0: f64, m1: &ModeStage, m2: &ModeStage, trace: &mut StageTrace| {
        trace.times.push(tau);
        trace.p0.push(p0);
        trace.inflow1.push(m1.inflow.last());
        trace.inflow2.push(m2.inflow.last());
        trace.outflow1.push(m1.outflow(tau));
        trace.outflow2.push(m2.outflow(tau));
        trace
            .mass
            .push(p0 + m1.mass(tau).value + m2.mass(tau).value);
    };
    record(0.0, init.p0, &m1, &m2, &mut trace);

    for m in 1..=steps {
        let tau = if m == steps { length } else { m as f64 * dt };
        m1.inflow.set_pending(Affine::unknown() * l1);
        let b2 = (Affine::unknown() + m1.mass(tau)) * l2;
        m2.inflow.set_pending(b2);
        let rhs = Affine::constant(init.p0) + m1.net_outflow(tau) + m2.net_outflow(tau);
        let u = rhs.fixed_point();
        if !u.is_finite() {
            return Err(Error::Precondition(format!(
                "stage {j} diverged at local time {tau}"
            )));
        }
        m1.inflow.push(l1 * u);
        m2.inflow.push(b2.eval(u));
        p0.push(u);
        record(tau, u, &m1, &m2, &mut trace);
    }
    debug_assert!((trace.mass[trace.mass.len() - 1] - mass0).abs() <= 1e-9 * mass0.abs().max(1.0));

    Ok(StageRun {
        j,
        length,
        modes: [m1, m2],
        p0,
        trace,
    })
}

/// Evolves `state_in` through stage `j` and returns the state at `t_j^-`.
pub fn solve_closed_loop_stage(
    j: usize,
    state_in: &SystemState,
    sched: &ControlSchedule,
    target: &DesiredState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<(SystemState, StageTrace)> {
    if !state_in.is_nonnegative(1e-12) {
        return Err(Error::Precondition(
            "initial state has negative entries".into(),
        ));
    }
    let norm = state_in.norm_x(grid)?;
    if (norm - 1.0).abs() > 1e-3 {
        return Err(Error::Precondition(format!(
            "initial state has X-norm {norm}, expected 1"
        )));
    }
    let init = StageState::from_state(state_in, target, grid)?;
    let run = run_stage(j, &init, sched, target, params, grid)?;
    Ok((run.end().to_state(target), run.trace))
}
