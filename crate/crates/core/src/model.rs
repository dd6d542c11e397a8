//! Domain types of the three-state repairable system: failure rates, repair
//! rate families, the spatial grid over elapsed repair time, and states in
//! `X = R x L1(0, L) x L1(0, L)` with their norm.

use alloc::string::ToString;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::quadrature::trapezoid;

/// Parametric family of a repair rate.
///
/// Only the inverse-linear family is built in. A tabulated survival function
/// would be added as a further variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[non_exhaustive]
pub enum RateFamily {
    /// `mu(x) = c / (L - x) + c0`.
    InverseLinear,
}

/// Repair rate `mu(x) = c / (L - x) + c0` on `[0, L)`.
///
/// The rate is singular at `x = L`; every formula in this crate goes through
/// the survival function `S(x) = ((L - x) / L)^c e^{-c0 x}` and its density
/// `-S'(x)`, both finite on the closed interval when `c >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairRateSpec {
    pub family: RateFamily,
    pub c: f64,
    pub c0: f64,
}

impl RepairRateSpec {
    pub fn inverse_linear(c: f64, c0: f64) -> Result<Self> {
        if !c.is_finite() || c < 1.0 {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "exponent must be finite and >= 1".to_string(),
            });
        }
        if !c0.is_finite() || c0 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "c0",
                reason: "baseline rate must be finite and >= 0".to_string(),
            });
        }
        Ok(Self {
            family: RateFamily::InverseLinear,
            c,
            c0,
        })
    }

    /// Pointwise rate; `+inf` at `x >= horizon`.
    pub fn rate(&self, horizon: f64, x: f64) -> f64 {
        if x >= horizon {
            return f64::INFINITY;
        }
        self.c / (horizon - x) + self.c0
    }

    /// `S(x) = exp(-int_0^x mu)`, checked against `[0, horizon]`.
    pub fn survival(&self, horizon: f64, x: f64) -> Result<f64> {
        if !(0.0..=horizon).contains(&x) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "[0, L]",
            });
        }
        Ok(self.survival_at(horizon, x))
    }

    /// Unchecked survival; arguments are clamped into `[0, horizon]`.
    pub fn survival_at(&self, horizon: f64, x: f64) -> f64 {
        let x = x.clamp(0.0, horizon);
        ((horizon - x) / horizon).powf(self.c) * (-self.c0 * x).exp()
    }

    /// Repair-completion density `-S'(x) = mu(x) S(x)`, finite on `[0, L]`.
    pub fn hazard_density(&self, horizon: f64, x: f64) -> f64 {
        let x = x.clamp(0.0, horizon);
        let frac = (horizon - x) / horizon;
        let decay = (-self.c0 * x).exp();
        self.c / horizon * frac.powf(self.c - 1.0) * decay + self.c0 * frac.powf(self.c) * decay
    }
}

/// Rates and horizon of the open-loop system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Good -> degraded failure rate.
    pub lambda1: f64,
    /// Good -> failed and degraded -> failed rate.
    pub lambda2: f64,
    /// Maximum repair time `L`.
    pub horizon: f64,
    pub mu1: RepairRateSpec,
    pub mu2: RepairRateSpec,
}

impl ModelParams {
    pub fn new(
        lambda1: f64,
        lambda2: f64,
        horizon: f64,
        mu1: RepairRateSpec,
        mu2: RepairRateSpec,
    ) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("L", horizon)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and > 0".to_string(),
                });
            }
        }
        Ok(Self {
            lambda1,
            lambda2,
            horizon,
            mu1,
            mu2,
        })
    }

    /// `lambda1 = lambda2 = 1`, `L = 1`, `mu1 = mu2 = 1/(1 - x)`.
    pub fn reference() -> Self {
        let mu = RepairRateSpec {
            family: RateFamily::InverseLinear,
            c: 1.0,
            c0: 0.0,
        };
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            horizon: 1.0,
            mu1: mu,
            mu2: mu,
        }
    }

    /// Fraction of degraded units still in the degraded state after
    /// elapsed repair time `x`: `e^{-lambda2 x} S1(x)`.
    pub fn degraded_weight(&self, x: f64) -> f64 {
        (-self.lambda2 * x).exp() * self.mu1.survival_at(self.horizon, x)
    }

    /// Repair-completion kernel of the degraded state:
    /// `mu1(x) e^{-int_0^x (mu1 + lambda2)} = e^{-lambda2 x} (-S1'(x))`.
    pub fn degraded_kernel(&self, x: f64) -> f64 {
        (-self.lambda2 * x).exp() * self.mu1.hazard_density(self.horizon, x)
    }

    /// `S2(x)`.
    pub fn failed_weight(&self, x: f64) -> f64 {
        self.mu2.survival_at(self.horizon, x)
    }

    /// `-S2'(x)`.
    pub fn failed_kernel(&self, x: f64) -> f64 {
        self.mu2.hazard_density(self.horizon, x)
    }
}

/// Uniform grid `x_k = k L / n`, `k = 0..=n`, with a time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    horizon: f64,
    dt: f64,
}

impl Grid {
    pub const MIN_CELLS: usize = 16;

    /// Grid with the default time step `dt = L / n`.
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n < Self::MIN_CELLS {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: "grid needs at least 16 cells".to_string(),
            });
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: "must be finite and > 0".to_string(),
            });
        }
        Ok(Self {
            n,
            horizon,
            dt: horizon / n as f64,
        })
    }

    pub fn for_params(n: usize, params: &ModelParams) -> Result<Self> {
        Self::new(n, params.horizon)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be finite and > 0".to_string(),
            });
        }
        self.dt = dt;
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn spacing(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n {
            self.horizon
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(move |k| self.node(k))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// Trapezoid integral of nodal samples.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check(values)?;
        Ok(trapezoid(values, self.spacing()))
    }

    pub(crate) fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(())
    }
}

/// `(p0, p1(.), p2(.))` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Probability of the good state.
    pub p0: f64,
    /// Degraded-state density over elapsed repair time.
    pub p1: Vec<f64>,
    /// Failed-state density over elapsed repair time.
    pub p2: Vec<f64>,
}

impl SystemState {
    pub fn new(p0: f64, p1: Vec<f64>, p2: Vec<f64>) -> Self {
        Self { p0, p1, p2 }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::new(
            0.0,
            alloc::vec![0.0; grid.len()],
            alloc::vec![0.0; grid.len()],
        )
    }

    /// All probability in the good state: `(1, 0, 0)`.
    pub fn pulse(grid: &Grid) -> Self {
        Self {
            p0: 1.0,
            ..Self::zeros(grid)
        }
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<()> {
        grid.check(&self.p1)?;
        grid.check(&self.p2)
    }

    /// `p_i >= -tol` everywhere.
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.p0 >= -tol && self.p1.iter().chain(self.p2.iter()).all(|&v| v >= -tol)
    }

    pub fn min_value(&self) -> f64 {
        self.p1
            .iter()
            .chain(self.p2.iter())
            .fold(self.p0, |m, &v| m.min(v))
    }

    /// `|p0| + int |p1| + int |p2|`.
    pub fn norm_x(&self, grid: &Grid) -> Result<f64> {
        self.check_shape(grid)?;
        let h = grid.spacing();
        let abs1: Vec<f64> = self.p1.iter().map(|v| v.abs()).collect();
        let abs2: Vec<f64> = self.p2.iter().map(|v| v.abs()).collect();
        Ok(self.p0.abs() + trapezoid(&abs1, h) + trapezoid(&abs2, h))
    }

    /// Degraded and failed probabilities `(int p1, int p2)`.
    pub fn marginals(&self, grid: &Grid) -> Result<(f64, f64)> {
        self.check_shape(grid)?;
        let h = grid.spacing();
        Ok((trapezoid(&self.p1, h), trapezoid(&self.p2, h)))
    }

    /// `p0`, or `p0 + int p1` when the degraded state counts as operational.
    pub fn availability(&self, grid: &Grid, include_degraded: bool) -> Result<f64> {
        if include_degraded {
            let (phat1, _) = self.marginals(grid)?;
            Ok(self.p0 + phat1)
        } else {
            Ok(self.p0)
        }
    }

    /// X-norm distance.
    pub fn distance(&self, other: &SystemState, grid: &Grid) -> Result<f64> {
        self.check_shape(grid)?;
        other.check_shape(grid)?;
        self.sub(other).norm_x(grid)
    }

    pub fn sub(&self, other: &SystemState) -> SystemState {
        SystemState {
            p0: self.p0 - other.p0,
            p1: self.p1.iter().zip(&other.p1).map(|(a, b)| a - b).collect(),
            p2: self.p2.iter().zip(&other.p2).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> SystemState {
        SystemState {
            p0: factor * self.p0,
            p1: self.p1.iter().map(|v| factor * v).collect(),
            p2: self.p2.iter().map(|v| factor * v).collect(),
        }
    }

    /// Boundary mismatches `(p1(0) - lambda1 p0, p2(0) - lambda2 (p0 + int p1))`.
    pub fn boundary_defect(&self, params: &ModelParams, grid: &Grid) -> Result<(f64, f64)> {
        let (phat1, _) = self.marginals(grid)?;
        Ok((
            self.p1[0] - params.lambda1 * self.p0,
            self.p2[0] - params.lambda2 * (self.p0 + phat1),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn unit_rate(c: f64) -> RepairRateSpec {
        RepairRateSpec::inverse_linear(c, 0.0).unwrap()
    }

    #[test]
    fn survival_examples() {
        let s = unit_rate(1.0);
        assert_eq!(s.survival(1.0, 0.0).unwrap(), 1.0);
        assert!((s.survival(1.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(unit_rate(2.0).survival(1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_rejects_points_outside_horizon() {
        let s = unit_rate(1.0);
        assert!(matches!(s.survival(1.0, 1.5), Err(Error::Domain { .. })));
        assert!(matches!(s.survival(1.0, -0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn family_restriction() {
        assert!(RepairRateSpec::inverse_linear(0.5, 0.0).is_err());
        assert!(RepairRateSpec::inverse_linear(1.0, -1.0).is_err());
        assert!(RepairRateSpec::inverse_linear(3.0, 0.2).is_ok());
    }

    #[test]
    fn survival_matches_integrated_rate_away_from_horizon() {
        let s = RepairRateSpec::inverse_linear(1.5, 0.3).unwrap();
        for &x in &[0.1, 0.4, 0.9, 1.7] {
            let cum = crate::quadrature::gauss_legendre(|u| s.rate(2.0, u), 0.0, x, 64);
            assert!((s.survival_at(2.0, x) - (-cum).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn hazard_density_is_minus_survival_derivative() {
        let s = RepairRateSpec::inverse_linear(2.0, 0.5).unwrap();
        let d = 1e-6;
        for &x in &[0.1, 0.5, 0.8] {
            let fd = -(s.survival_at(1.0, x + d) - s.survival_at(1.0, x - d)) / (2.0 * d);
            assert!((s.hazard_density(1.0, x) - fd).abs() < 1e-8);
        }
        // c = 1 keeps a finite, nonzero density at the horizon.
        assert!((unit_rate(1.0).hazard_density(1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rates_and_grids() {
        let mu = unit_rate(1.0);
        assert!(ModelParams::new(-1.0, 1.0, 1.0, mu, mu).is_err());
        assert!(ModelParams::new(1.0, 1.0, f64::INFINITY, mu, mu).is_err());
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(16, 1.0).unwrap().with_dt(0.0).is_err());
    }

    #[test]
    fn norm_examples() {
        let grid = Grid::new(16, 1.0).unwrap();
        assert_eq!(SystemState::pulse(&grid).norm_x(&grid).unwrap(), 1.0);
        assert_eq!(SystemState::zeros(&grid).norm_x(&grid).unwrap(), 0.0);
        let s = SystemState::new(0.5, vec![0.25; 17], vec![0.25; 17]);
        assert!((s.norm_x(&grid).unwrap() - 1.0).abs() < 1e-15);
        let bad = SystemState::new(0.5, vec![0.25; 3], vec![0.25; 17]);
        assert!(matches!(bad.norm_x(&grid), Err(Error::Shape { .. })));
    }

    #[test]
    fn marginals_and_availability() {
        let grid = Grid::new(20, 1.0).unwrap();
        let p1 = grid.sample(|x| 1.0 - x);
        let s = SystemState::new(0.0, p1, vec![0.0; 21]);
        let (a, b) = s.marginals(&grid).unwrap();
        assert!((a - 0.5).abs() < 1e-15);
        assert_eq!(b, 0.0);

        assert_eq!(
            SystemState::pulse(&grid)
                .availability(&grid, false)
                .unwrap(),
            1.0
        );
        let failed = SystemState::new(0.0, vec![0.0; 21], vec![1.0; 21]);
        assert_eq!(failed.availability(&grid, true).unwrap(), 0.0);
    }
}
