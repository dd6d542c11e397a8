use num_complex::Complex64;
use proptest::prelude::*;
use repairflow_core::control::*;
use repairflow_core::open_loop::{solve_open_loop, steady_state};
use repairflow_core::spectral::phi;
use repairflow_core::{Grid, ModelParams, RepairRateSpec, SystemState};

fn params(l1: f64, l2: f64, c: f64, c0: f64) -> ModelParams {
    let mu = RepairRateSpec::inverse_linear(c, c0).unwrap();
    ModelParams::new(l1, l2, 1.0, mu, mu).unwrap()
}

/// Normalized nonnegative state with smooth densities.
fn smooth_state(grid: &Grid, a: f64, b: f64, w: f64, share: f64) -> SystemState {
    let p1 = grid.sample(|x| (1.0 - x) * (a + (w * x).sin().abs()));
    let p2 = grid.sample(|x| (1.0 - x * x) * (b + (w * x).cos().abs()));
    let raw = SystemState::new(0.0, p1, p2);
    let (m1, m2) = raw.marginals(grid).unwrap();
    let s = (1.0 - share) / (m1 + m2);
    SystemState::new(share, raw.scaled(s).p1, raw.scaled(s).p2)
}

/// Normalized state meeting the inflow conditions `p1(0) = lambda1 p0`,
/// `p2(0) = lambda2 (p0 + int p1)`, so no jump enters at `x = 0`. The
/// densities are smooth multiples of the survival weights.
fn compatible_state(grid: &Grid, p: &ModelParams, a: f64, w: f64) -> SystemState {
    let f1 = grid.sample(|x| p.degraded_weight(x) * (1.0 + a * (w * x).sin()));
    let f2 = grid.sample(|x| p.failed_weight(x) * (1.0 + a * (1.0 - (w * x).cos())));
    let i1 = grid.integrate(&f1).unwrap();
    let i2 = grid.integrate(&f2).unwrap();
    let (l1, l2) = (p.lambda1, p.lambda2);
    let c2 = l2 * (1.0 + l1 * i1);
    let s = 1.0 / (1.0 + l1 * i1 + c2 * i2);
    SystemState::new(
        s,
        f1.iter().map(|v| s * l1 * v).collect(),
        f2.iter().map(|v| s * c2 * v).collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn survival_decreases_from_one_to_zero(c in 1.0f64..4.0, c0 in 0.0f64..3.0, l in 0.5f64..3.0) {
        let spec = RepairRateSpec::inverse_linear(c, c0).unwrap();
        let mut prev = spec.survival(l, 0.0).unwrap();
        prop_assert_eq!(prev, 1.0);
        for k in 1..=200 {
            let x = if k == 200 { l } else { l * k as f64 / 200.0 };
            let s = spec.survival(l, x).unwrap();
            prop_assert!(s <= prev && s >= 0.0);
            prev = s;
        }
        prop_assert_eq!(prev, 0.0);
    }

    #[test]
    fn x_norm_is_a_norm(a in 0.0f64..2.0, b in 0.0f64..2.0, w in 0.5f64..9.0, share in 0.0f64..1.0, k in -3.0f64..3.0) {
        let grid = Grid::new(64, 1.0).unwrap();
        let u = smooth_state(&grid, a, b, w, share);
        let v = smooth_state(&grid, b, a, 2.0 * w, 1.0 - share);
        let nu = u.norm_x(&grid).unwrap();
        prop_assert!((nu - 1.0).abs() < 1e-12);
        prop_assert!((u.scaled(k).norm_x(&grid).unwrap() - k.abs() * nu).abs() < 1e-12);
        let duv = u.distance(&v, &grid).unwrap();
        prop_assert!(duv >= 0.0 && (duv - v.distance(&u, &grid).unwrap()).abs() < 1e-15);
        let zero = SystemState::zeros(&grid);
        prop_assert!(duv <= u.distance(&zero, &grid).unwrap() + v.distance(&zero, &grid).unwrap() + 1e-14);
    }

    #[test]
    fn open_loop_conserves_probability(
        l1 in 0.2f64..3.0, l2 in 0.2f64..3.0, c in 1.0f64..3.0, c0 in 0.0f64..2.0,
        a in 0.0f64..0.9, w in 0.5f64..6.0,
    ) {
        let p = params(l1, l2, c, c0);
        let grid = Grid::for_params(200, &p).unwrap();
        let init = compatible_state(&grid, &p, a, w);
        prop_assert!((init.norm_x(&grid).unwrap() - 1.0).abs() < 1e-14);
        let traj = solve_open_loop(&p, &init, 3.0, &grid).unwrap();
        prop_assert!(traj.max_norm_defect() < 1e-4, "defect {}", traj.max_norm_defect());
        prop_assert!(traj.min_value >= -1e-12);
    }

    #[test]
    fn phi_commutes_with_conjugation(re in -0.5f64..5.0, im in -40.0f64..40.0, l1 in 0.2f64..3.0, l2 in 0.2f64..3.0) {
        let p = params(l1, l2, 1.0, 0.0);
        let grid = Grid::for_params(128, &p).unwrap();
        let r = Complex64::new(re, im);
        let a = phi(r.conj(), &p, &grid);
        let b = phi(r, &p, &grid).conj();
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn schedule_telescopes(j in 1usize..=1_000_000, t_f in 0.1f64..20.0) {
        let p = ModelParams::reference();
        let grid = Grid::for_params(32, &p).unwrap();
        let target = linear_target(&p, &grid).unwrap();
        let s = schedule(t_f, &target, &p, ScheduleOverrides::default()).unwrap();
        let bounds = s.boundaries(j);
        // smallest terms first keeps the reference sum within a few ulps
        let direct = s.r0 * (1..=j).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum::<f64>();
        prop_assert!((bounds[j] - direct).abs() <= 8.0 * f64::EPSILON * t_f);
        let steps: f64 = bounds.windows(2).map(|w| w[1] - w[0]).sum();
        prop_assert!((steps - bounds[j]).abs() <= 1e-12 * t_f);
        let lengths = (1..=j.min(1000)).all(|k| (bounds[k] - bounds[k - 1] - s.stage_length(k)).abs() <= 4.0 * f64::EPSILON * t_f);
        prop_assert!(lengths);
        prop_assert!(bounds.windows(2).all(|w| w[1] > w[0]));
        // the tail sum_{k>j} 1/k^2 lies between 1/(j+1) and 1/j
        let tail = t_f - bounds[j];
        prop_assert!(tail <= s.r0 / j as f64 + 1e-12 && tail >= s.r0 / (j + 1) as f64 - 1e-12);
    }

    #[test]
    fn feedback_matches_static_design_at_target(beta in 0.6f64..2.0, gamma in 0.0f64..2.0, j in 1usize..40) {
        let p = ModelParams::reference();
        let grid = Grid::for_params(200, &p).unwrap();
        let target = construct_desired(
            |x| (1.0 - x) * (1.0 + gamma * (1.0 - x)),
            |x| (1.0 - x).powf(beta).min(1.0) * (2.0 - x),
            &p,
            &grid,
        ).unwrap();
        let s = schedule(5.0, &target, &p, ScheduleOverrides::default()).unwrap();
        let fb = feedback_mu(&target.to_state(), j, &s, &target, &p, &grid);
        let stat = design_static_rates(&target, &p, &grid);
        if let (Ok(fb), Ok(stat)) = (fb, stat) {
            for k in 0..grid.cells() {
                prop_assert!((fb.mu1[k] - stat.mu1[k]).abs() <= 1e-6);
                prop_assert!((fb.mu2[k] - stat.mu2[k]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn stage_conserves_and_keeps_sign(a in 0.0f64..1.0, w in 0.5f64..8.0, share in 0.0f64..1.0, j in 1usize..8) {
        let p = ModelParams::reference();
        let grid = Grid::for_params(400, &p).unwrap();
        let target = linear_target(&p, &grid).unwrap();
        let s = schedule(5.0, &target, &p, ScheduleOverrides::default()).unwrap();

        // any data: the carried mass is exact, jumps keep their sign
        let rough = smooth_state(&grid, a, 1.0 - a, w, share);
        let (out, trace) = solve_closed_loop_stage(j, &rough, &s, &target, &p, &grid).unwrap();
        prop_assert!(trace.mass.iter().all(|m| (m - 1.0).abs() <= 1e-12));
        prop_assert!(out.is_nonnegative(0.0));

        let smooth = compatible_state(&grid, &p, 0.9 * a, w);
        let (out, _) = solve_closed_loop_stage(j, &smooth, &s, &target, &p, &grid).unwrap();
        prop_assert!((out.norm_x(&grid).unwrap() - 1.0).abs() <= 1e-4, "norm {}", out.norm_x(&grid).unwrap());
        prop_assert!(out.is_nonnegative(0.0));
    }

    #[test]
    fn larger_gains_do_not_slow_a_stage(kappa in 1.1f64..4.0, a in 0.0f64..1.0, w in 0.5f64..8.0, share in 0.0f64..1.0, j in 1usize..4) {
        let p = ModelParams::reference();
        let grid = Grid::for_params(200, &p).unwrap();
        let target = DesiredState::from_steady_state(&p, &grid);
        let base = schedule(5.0, &target, &p, ScheduleOverrides::default()).unwrap();
        let fast = schedule(5.0, &target, &p, ScheduleOverrides { alpha_scale: Some(kappa), ..Default::default() }).unwrap();
        let init = smooth_state(&grid, a, 1.0 - a, w, share);
        let d0 = init.distance(&target.to_state(), &grid).unwrap();
        let (o1, _) = solve_closed_loop_stage(j, &init, &base, &target, &p, &grid).unwrap();
        let (o2, _) = solve_closed_loop_stage(j, &init, &fast, &target, &p, &grid).unwrap();
        let rate = |d: f64| -(d / d0).ln();
        let d1 = o1.distance(&target.to_state(), &grid).unwrap();
        let d2 = o2.distance(&target.to_state(), &grid).unwrap();
        prop_assert!(rate(d2) >= rate(d1) - 1e-9 || d2 <= 1e-9, "base {d1:e}, scaled {d2:e}");
    }

    #[test]
    fn stage_branches_join_continuously(a in -0.5f64..0.5, b in -0.5f64..0.5, c in 0.5f64..1.5, j in 1usize..5) {
        let p = ModelParams::reference();
        let grid = Grid::for_params(400, &p).unwrap();
        let target = linear_target(&p, &grid).unwrap();
        let s = schedule(5.0, &target, &p, ScheduleOverrides::default()).unwrap();
        // ratios whose values at x = 0 match the inflows of the initial p0
        let p0 = c * target.p0_star;
        let rho1: Vec<f64> = grid.nodes().map(|x| c + a * x).collect();
        let mass1: f64 = grid.integrate(&rho1.iter().zip(&target.p1_star).map(|(r, q)| r * q).collect::<Vec<_>>()).unwrap();
        let r2 = p.lambda2 * (p0 + mass1) / target.p2_star[0];
        let rho2: Vec<f64> = grid.nodes().map(|x| r2 + b * x).collect();
        let init = StageState { p0, rho1, rho2 };
        let run = run_stage(j, &init, &s, &target, &p, &grid).unwrap();
        let dt = run.dt();
        for out in [&run.trace.outflow1, &run.trace.outflow2] {
            let jump = out.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]).abs()));
            prop_assert!(jump <= 20.0 * dt * j as f64, "jump {jump} at dt {dt}");
        }
    }
}

#[test]
fn steady_state_is_a_fixed_point_for_random_rates() {
    for (l1, l2, c, c0) in [
        (0.5, 2.0, 1.0, 0.0),
        (2.0, 0.3, 2.5, 1.0),
        (1.0, 1.0, 1.5, 0.5),
    ] {
        let p = params(l1, l2, c, c0);
        let grid = Grid::for_params(200, &p).unwrap();
        let traj = solve_open_loop(&p, &steady_state(&p, &grid), 5.0, &grid).unwrap();
        assert!(traj.max_dist().unwrap() < 1e-4);
    }
}
