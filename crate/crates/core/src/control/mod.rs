//! Finite-time steering by bilinear feedback of the repair rates.
//!
//! Time is split into stages of length `r0 / j^2` that sum to `t_f`. In
//! stage `j` the feedback gains are `j alpha_i`, so each stage transports the
//! deviation from the target faster than the last.

mod desired;
mod feedback;
mod run;
mod schedule;
mod stage;

pub use desired::{
    construct_desired, linear_shape, linear_target, validate_desired, ConditionCheck, DesiredState,
    ValidationReport, VALIDATION_TOL,
};
pub use feedback::{
    design_static_rates, feedback_from_stage_state, feedback_mu, static_kernels, RateProfile,
    NEGATIVITY_TOL,
};
pub use run::{
    check_mu_bounded, fit_stage_decay, run_controllability, BoundednessVerdict, ControlReport,
    RunOptions, StageDecayFit, StageRecord, Termination, DISTANCE_FLOOR,
};
pub use schedule::{
    gain_bounds, harmonic, ptilde, ptilde_inverse, r0_for, schedule, ControlSchedule, GainBounds,
    ScheduleOverrides, Transit, DEFAULT_STAGES, DEFAULT_STOP_TOL,
};
pub use stage::{run_stage, solve_closed_loop_stage, StageRun, StageState, StageTrace};
