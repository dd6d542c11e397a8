//! Characteristic function, resolvent and numerical generator.
//!
//! `Phi(r) = r (1 + lambda1 A1 + lambda2 A2 + lambda1 lambda2 A1 A2)` with
//! `A1(r) = int e^{-r x} e^{-lambda2 x} S1` and `A2(r) = int e^{-r x} S2`.
//! `r` is in the resolvent set exactly when `Phi(r) != 0`.

use alloc::string::ToString;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, RepairRateSpec, SystemState};
use crate::open_loop::Kernels;
use crate::quadrature::{gauss_legendre, gauss_legendre_cell, trapezoid};

/// Resolvent evaluation refuses `|Phi(r)|` below this.
pub const SINGULAR_THRESHOLD: f64 = 1e-8;

/// Default radius of the disc around the origin left out of scans.
pub const DEFAULT_EXCLUSION: f64 = 0.05;

fn trapezoid_c(values: &[Complex64], h: f64) -> Complex64 {
    let n = values.len();
    if n < 2 {
        return Complex64::zero();
    }
    let inner: Complex64 = values[1..n - 1].iter().sum();
    (inner + (values[0] + values[n - 1]) * 0.5) * h
}

/// `e^{-r x_k}` on the grid by repeated multiplication.
fn exp_table(r: Complex64, grid: &Grid) -> Vec<Complex64> {
    let step = (-r * grid.spacing()).exp();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = Complex64::new(1.0, 0.0);
    for k in 0..grid.len() {
        if k % 64 == 0 {
            acc = (-r * grid.node(k)).exp();
        }
        out.push(acc);
        acc *= step;
    }
    out
}

fn laplace(r: Complex64, weights: &[f64], grid: &Grid) -> Complex64 {
    let e = exp_table(r, grid);
    let prod: Vec<Complex64> = e.iter().zip(weights).map(|(e, w)| e * w).collect();
    trapezoid_c(&prod, grid.spacing())
}

/// `(A1(r), A2(r))` by trapezoid quadrature.
pub fn laplace_weights(r: Complex64, params: &ModelParams, grid: &Grid) -> (Complex64, Complex64) {
    let k = Kernels::new(params, grid);
    (laplace(r, &k.e1, grid), laplace(r, &k.s2, grid))
}

fn phi_from(r: Complex64, a1: Complex64, a2: Complex64, params: &ModelParams) -> Complex64 {
    let (l1, l2) = (params.lambda1, params.lambda2);
    r * (Complex64::new(1.0, 0.0) + a1 * l1 + a2 * l2 + a1 * a2 * (l1 * l2))
}

/// Characteristic function in factored form.
pub fn phi(r: Complex64, params: &ModelParams, grid: &Grid) -> Complex64 {
    let (a1, a2) = laplace_weights(r, params, grid);
    phi_from(r, a1, a2, params)
}

/// Same as [`phi`] with the weights sampled once for many evaluations.
pub struct PhiEvaluator<'a> {
    params: &'a ModelParams,
    grid: &'a Grid,
    kern: Kernels,
}

impl<'a> PhiEvaluator<'a> {
    pub fn new(params: &'a ModelParams, grid: &'a Grid) -> Self {
        Self {
            params,
            grid,
            kern: Kernels::new(params, grid),
        }
    }

    pub fn eval(&self, r: Complex64) -> Complex64 {
        let a1 = laplace(r, &self.kern.e1, self.grid);
        let a2 = laplace(r, &self.kern.s2, self.grid);
        phi_from(r, a1, a2, self.params)
    }
}

/// `(Phi(0), dPhi/dr(0))`, the derivative by a central difference.
pub fn verify_simple_zero(params: &ModelParams, grid: &Grid) -> (Complex64, Complex64) {
    let ev = PhiEvaluator::new(params, grid);
    let d = 1e-4;
    let phi0 = ev.eval(Complex64::zero());
    let dphi0 = (ev.eval(Complex64::new(d, 0.0)) - ev.eval(Complex64::new(-d, 0.0))) / (2.0 * d);
    (phi0, dphi0)
}

/// `1 + lambda1 A1(0) + lambda2 A2(0) + lambda1 lambda2 A1(0) A2(0)`.
pub fn phi_slope_at_origin(params: &ModelParams, grid: &Grid) -> f64 {
    let (a1, a2) = laplace_weights(Complex64::zero(), params, grid);
    let (l1, l2) = (params.lambda1, params.lambda2);
    1.0 + l1 * a1.re + l2 * a2.re + l1 * l2 * a1.re * a2.re
}

/// Rectangle `[re_min, re_max] x [im_min, im_max]`; a degenerate side gives
/// a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Region {
    /// `r = i a` for `a` in `[a_min, a_max]`.
    pub fn imaginary_segment(a_min: f64, a_max: f64) -> Self {
        Self {
            re_min: 0.0,
            re_max: 0.0,
            im_min: a_min,
            im_max: a_max,
        }
    }

    pub fn contains_origin(&self) -> bool {
        self.re_min <= 0.0 && self.re_max >= 0.0 && self.im_min <= 0.0 && self.im_max >= 0.0
    }

    fn sample(&self, i: usize, ni: usize, j: usize, nj: usize) -> Complex64 {
        let lerp = |a: f64, b: f64, k: usize, n: usize| {
            if n <= 1 {
                a
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        Complex64::new(
            lerp(self.re_min, self.re_max, i, ni),
            lerp(self.im_min, self.im_max, j, nj),
        )
    }
}

/// Outcome of a scan of `|Phi|` over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScanReport {
    pub region: Region,
    pub samples_re: usize,
    pub samples_im: usize,
    pub evaluated: usize,
    pub exclusion: f64,
    pub min_abs: f64,
    pub argmin: Complex64,
    pub phi0: Complex64,
    pub dphi0: Complex64,
}

impl SpectralScanReport {
    /// The scan witnessed no zero of `Phi`.
    pub fn zero_free(&self) -> bool {
        self.min_abs > 0.0
    }
}

/// Samples `|Phi|` on a `samples_re x samples_im` lattice over `region`,
/// skipping the disc `|r| < exclusion`.
pub fn scan_region(
    params: &ModelParams,
    grid: &Grid,
    region: Region,
    samples_re: usize,
    samples_im: usize,
    exclusion: f64,
) -> Result<SpectralScanReport> {
    if samples_re == 0 || samples_im == 0 {
        return Err(Error::Precondition(
            "scan needs at least one sample per axis".to_string(),
        ));
    }
    if region.contains_origin() && !(exclusion > 0.0) {
        return Err(Error::Precondition(
            "region contains the origin but no exclusion disc was given".to_string(),
        ));
    }
    let ev = PhiEvaluator::new(params, grid);
    let mut min_abs = f64::INFINITY;
    let mut argmin = Complex64::zero();
    let mut evaluated = 0;
    for i in 0..samples_re {
        for j in 0..samples_im {
            let r = region.sample(i, samples_re, j, samples_im);
            if r.norm() < exclusion {
                continue;
            }
            let v = ev.eval(r).norm();
            evaluated += 1;
            if v < min_abs {
                min_abs = v;
                argmin = r;
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::Precondition(
            "every sample fell inside the exclusion disc".to_string(),
        ));
    }
    let (phi0, dphi0) = verify_simple_zero(params, grid);
    Ok(SpectralScanReport {
        region,
        samples_re,
        samples_im,
        evaluated,
        exclusion,
        min_abs,
        argmin,
        phi0,
        dphi0,
    })
}

/// `int mu e^{-int (r + mu)}` computed as a kernel quadrature minus the same
/// quantity from `1 - r int e^{-r x} S`. Zero up to quadrature error.
pub fn kernel_identity_defect(spec: &RepairRateSpec, horizon: f64, r: f64, grid: &Grid) -> f64 {
    let h = grid.spacing();
    let kern: Vec<f64> = grid
        .nodes()
        .map(|x| (-r * x).exp() * spec.hazard_density(horizon, x))
        .collect();
    let surv: Vec<f64> = grid
        .nodes()
        .map(|x| (-r * x).exp() * spec.survival_at(horizon, x))
        .collect();
    trapezoid(&kern, h) - (1.0 - r * trapezoid(&surv, h))
}

/// A state with complex entries, as produced by the resolvent at complex `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    pub p0: Complex64,
    pub p1: Vec<Complex64>,
    pub p2: Vec<Complex64>,
}

impl ComplexState {
    pub fn re(&self) -> SystemState {
        SystemState::new(
            self.p0.re,
            self.p1.iter().map(|v| v.re).collect(),
            self.p2.iter().map(|v| v.re).collect(),
        )
    }

    pub fn max_imag(&self) -> f64 {
        self.p1
            .iter()
            .chain(&self.p2)
            .fold(self.p0.im.abs(), |m, v| m.max(v.im.abs()))
    }
}

/// Forward and backward Volterra recurrences of one mode with weight `W`
/// (`e^{-lambda2 x} S1` or `S2`). Cell integrals use Gauss-Legendre on the
/// exact kernel `W(x_b) / W(s)`, which varies like `1 / (L - s)` near the
/// horizon.
struct Mode<'a, F: Fn(f64) -> f64> {
    r: Complex64,
    grid: &'a Grid,
    weight: F,
    w: Vec<f64>,
}

impl<'a, F: Fn(f64) -> f64> Mode<'a, F> {
    fn new(r: Complex64, grid: &'a Grid, weight: F) -> Self {
        let w = grid.sample(&weight);
        Self { r, grid, weight, w }
    }

    /// `V(x) = int_0^x e^{-r (x - s)} W(x) / W(s) y(s) ds`, `y` linear per cell.
    fn forward(&self, y: &[f64]) -> Vec<Complex64> {
        let n = self.grid.cells();
        let h = self.grid.spacing();
        let mut v = alloc::vec![Complex64::zero(); n + 1];
        for k in 0..n {
            let wb = self.w[k + 1];
            if wb <= 0.0 {
                continue;
            }
            let (xa, xb) = (self.grid.node(k), self.grid.node(k + 1));
            let carry = (-self.r * h).exp() * (wb / self.w[k]);
            let mut local = Complex64::zero();
            for (s, wt) in gauss_legendre_cell(xa, xb) {
                let theta = (s - xa) / h;
                let ys = y[k] * (1.0 - theta) + y[k + 1] * theta;
                local += (-self.r * (xb - s)).exp() * (wt * wb / (self.weight)(s) * ys);
            }
            v[k + 1] = carry * v[k] + local;
        }
        v
    }

    /// `U(x) = int_x^L e^{-r (s - x)} W(s) / W(x) ds` at the nodes.
    fn backward(&self) -> Vec<Complex64> {
        let n = self.grid.cells();
        let h = self.grid.spacing();
        let mut u = alloc::vec![Complex64::zero(); n + 1];
        for k in (0..n).rev() {
            let wa = self.w[k];
            if wa <= 0.0 {
                continue;
            }
            let (xa, xb) = (self.grid.node(k), self.grid.node(k + 1));
            let carry = (-self.r * h).exp() * (self.w[k + 1] / wa);
            let mut local = Complex64::zero();
            for (s, wt) in gauss_legendre_cell(xa, xb) {
                local += (-self.r * (s - xa)).exp() * (wt * (self.weight)(s) / wa);
            }
            u[k] = carry * u[k + 1] + local;
        }
        u
    }
}

fn weighted_integral(y: &[f64], g: &[Complex64], h: f64) -> Complex64 {
    let prod: Vec<Complex64> = y.iter().zip(g).map(|(y, g)| g * y).collect();
    trapezoid_c(&prod, h)
}

/// `R(r) y = (r I - A)^{-1} y`.
pub fn resolvent_apply(
    r: Complex64,
    y: &SystemState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<ComplexState> {
    y.check_shape(grid)?;
    let h = grid.spacing();
    let kern = Kernels::new(params, grid);
    let (l1, l2) = (params.lambda1, params.lambda2);
    let a1 = laplace(r, &kern.e1, grid);
    let a2 = laplace(r, &kern.s2, grid);
    let phi_r = phi_from(r, a1, a2, params);
    if phi_r.norm() <= SINGULAR_THRESHOLD {
        return Err(Error::NearSingular {
            re: r.re,
            im: r.im,
            modulus: phi_r.norm(),
        });
    }

    let m1 = Mode::new(r, grid, |x| params.degraded_weight(x));
    let m2 = Mode::new(r, grid, |x| params.failed_weight(x));
    let v1 = m1.forward(&y.p1);
    let v2 = m2.forward(&y.p2);
    let g1: Vec<Complex64> = m1.backward().iter().map(|u| 1.0 - (r + l2) * u).collect();
    let g2: Vec<Complex64> = m2.backward().iter().map(|u| 1.0 - r * u).collect();
    let int_v1 = trapezoid_c(&v1, h);

    let f = y.p0
        + weighted_integral(&y.p1, &g1, h)
        + (1.0 - r * a2) * int_v1 * l2
        + weighted_integral(&y.p2, &g2, h);
    let p0 = f / phi_r;
    let inflow2 = (p0 + p0 * a1 * l1 + int_v1) * l2;

    let e = exp_table(r, grid);
    let p1 = (0..grid.len())
        .map(|k| p0 * l1 * e[k] * kern.e1[k] + v1[k])
        .collect();
    let p2 = (0..grid.len())
        .map(|k| inflow2 * e[k] * kern.s2[k] + v2[k])
        .collect();
    Ok(ComplexState { p0, p1, p2 })
}

/// Transport flux `p' + mu p = S (p / S)'` on the grid and `int mu p`, for one
/// mode with survival function `S`.
///
/// `q = p / S` may grow like `ln(L - x)` near the horizon, so derivatives of
/// `q` are taken in `z = -ln(1 - x / L)`, where that growth is linear, and the
/// last cell is integrated with `q` linear in `z`. The difference at `x = 0`
/// is one-sided.
fn transport_terms(p: &[f64], spec: &RepairRateSpec, grid: &Grid) -> (Vec<f64>, f64) {
    let l = grid.horizon();
    let n = grid.cells();
    let h = grid.spacing();
    let s = grid.sample(|x| spec.survival_at(l, x));
    let q: Vec<f64> = (0..n).map(|k| p[k] / s[k]).collect();
    let z: Vec<f64> = (0..n).map(|k| -(-grid.node(k) / l).ln_1p()).collect();
    // S(x) / (L - x), finite for c >= 1
    let lean = |x: f64| ((l - x) / l).powf(spec.c - 1.0) * (-spec.c0 * x).exp() / l;

    let mut dq = alloc::vec![0.0; n + 1];
    dq[0] = (q[1] - q[0]) / (z[1] - z[0]);
    for k in 1..n - 1 {
        dq[k] = (q[k + 1] - q[k - 1]) / (z[k + 1] - z[k - 1]);
    }
    let tail = (q[n - 1] - q[n - 2]) / (z[n - 1] - z[n - 2]);
    dq[n - 1] = tail;
    dq[n] = tail;
    let flux = (0..=n).map(|k| lean(grid.node(k)) * dq[k]).collect();

    let dens: Vec<f64> = (0..n)
        .map(|k| spec.hazard_density(l, grid.node(k)) * q[k])
        .collect();
    let x_last = grid.node(n - 1);
    let last_cell = s[n - 1] * q[n - 1] + tail * gauss_legendre(lean, x_last, l, 2);
    (flux, trapezoid(&dens, h) + last_cell)
}

/// Finite-difference generator: `(A p)_0 = -(lambda1 + lambda2) p0 + int mu1 p1
/// + int mu2 p2`, `(A p)_1 = -p1' - (mu1 + lambda2) p1`, `(A p)_2 = -p2' - mu2 p2`.
pub fn apply_generator(
    state: &SystemState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<SystemState> {
    state.check_shape(grid)?;
    let (flux1, out1) = transport_terms(&state.p1, &params.mu1, grid);
    let (flux2, out2) = transport_terms(&state.p2, &params.mu2, grid);
    let a0 = -(params.lambda1 + params.lambda2) * state.p0 + out1 + out2;
    let a1 = (0..grid.len())
        .map(|k| -flux1[k] - params.lambda2 * state.p1[k])
        .collect();
    let a2 = flux2.iter().map(|f| -f).collect();
    Ok(SystemState::new(a0, a1, a2))
}

/// `|| (r I - A) p - y ||_X` for real `r`.
pub fn resolvent_residual(
    r: f64,
    p: &SystemState,
    y: &SystemState,
    params: &ModelParams,
    grid: &Grid,
) -> Result<f64> {
    let ap = apply_generator(p, params, grid)?;
    let lhs = p.scaled(r).sub(&ap);
    lhs.distance(y, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_a(n: usize) -> (ModelParams, Grid) {
        (ModelParams::reference(), Grid::new(n, 1.0).unwrap())
    }

    #[test]
    fn phi_vanishes_at_origin() {
        let (p, g) = cfg_a(64);
        assert_eq!(phi(Complex64::zero(), &p, &g), Complex64::zero());
    }

    #[test]
    fn phi_real_and_above_r_on_positive_axis() {
        let (p, g) = cfg_a(200);
        let v = phi(Complex64::new(1.0, 0.0), &p, &g);
        assert_eq!(v.im, 0.0);
        assert!(v.re > 1.0);
    }

    #[test]
    fn conjugate_symmetry() {
        let (p, g) = cfg_a(200);
        let a = phi(Complex64::new(0.0, 0.1), &p, &g);
        let b = phi(Complex64::new(0.0, -0.1), &p, &g);
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn scan_requires_exclusion_disc() {
        let (p, g) = cfg_a(32);
        let region = Region {
            re_min: -1.0,
            re_max: 1.0,
            im_min: -1.0,
            im_max: 1.0,
        };
        assert!(scan_region(&p, &g, region, 5, 5, 0.0).is_err());
        assert!(scan_region(&p, &g, region, 5, 5, 0.05).is_ok());
    }

    #[test]
    fn resolvent_of_zero_is_zero() {
        let (p, g) = cfg_a(32);
        let out =
            resolvent_apply(Complex64::new(1.0, 0.0), &SystemState::zeros(&g), &p, &g).unwrap();
        assert_eq!(out.p0, Complex64::zero());
        assert!(out.p1.iter().chain(&out.p2).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn resolvent_rejects_origin() {
        let (p, g) = cfg_a(32);
        let r = resolvent_apply(Complex64::zero(), &SystemState::pulse(&g), &p, &g);
        assert!(matches!(r, Err(Error::NearSingular { .. })));
    }
}
