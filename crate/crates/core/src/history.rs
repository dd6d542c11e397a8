//! Uniformly sampled scalar history whose newest value may still be unknown.
//!
//! Implicit time steps need delayed lookups that reach into the step being
//! solved. Every lookup therefore returns an [`Affine`] function of that one
//! unknown, and the step closes by solving a scalar linear equation.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// `value + coef * u`, where `u` is the unknown of the current step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Affine {
    pub value: f64,
    pub coef: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine {
        value: 0.0,
        coef: 0.0,
    };

    pub fn constant(value: f64) -> Self {
        Self { value, coef: 0.0 }
    }

    /// The unknown itself.
    pub fn unknown() -> Self {
        Self {
            value: 0.0,
            coef: 1.0,
        }
    }

    pub fn eval(self, u: f64) -> f64 {
        self.value + self.coef * u
    }

    /// Solves `u = self(u)`.
    pub fn fixed_point(self) -> f64 {
        self.value / (1.0 - self.coef)
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(self, rhs: Affine) -> Affine {
        Affine {
            value: self.value + rhs.value,
            coef: self.coef + rhs.coef,
        }
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        Affine {
            value: self.value - rhs.value,
            coef: self.coef - rhs.coef,
        }
    }
}

impl Mul<f64> for Affine {
    type Output = Affine;
    fn mul(self, rhs: f64) -> Affine {
        Affine {
            value: self.value * rhs,
            coef: self.coef * rhs,
        }
    }
}

impl Mul<Affine> for f64 {
    type Output = Affine;
    fn mul(self, rhs: Affine) -> Affine {
        rhs * self
    }
}

/// Values at `s_i = i * step`, read through the piecewise-linear
/// interpolant. An optional pending sample sits after the committed ones.
#[derive(Debug, Clone)]
pub struct History {
    step: f64,
    known: Vec<f64>,
    cum: Vec<f64>,
    pending: Option<Affine>,
}

impl History {
    pub fn new(step: f64, first: f64) -> Self {
        Self {
            step,
            known: alloc::vec![first],
            cum: alloc::vec![0.0],
            pending: None,
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.known
    }

    pub fn last(&self) -> f64 {
        self.known[self.known.len() - 1]
    }

    pub fn set_pending(&mut self, value: Affine) {
        self.pending = Some(value);
    }

    /// Commits a value for the pending slot (or appends one).
    pub fn push(&mut self, value: f64) {
        let prev = self.last();
        let acc = self.cum[self.cum.len() - 1] + 0.5 * self.step * (prev + value);
        self.known.push(value);
        self.cum.push(acc);
        self.pending = None;
    }

    fn count(&self) -> usize {
        self.known.len() + usize::from(self.pending.is_some())
    }

    /// Time of the newest sample, pending included.
    pub fn span(&self) -> f64 {
        (self.count() - 1) as f64 * self.step
    }

    fn node(&self, i: usize) -> Affine {
        if i < self.known.len() {
            Affine::constant(self.known[i])
        } else {
            self.pending.expect("history lookup past the newest sample")
        }
    }

    fn cum_node(&self, i: usize) -> Affine {
        if i < self.cum.len() {
            Affine::constant(self.cum[i])
        } else {
            let last = self.known.len() - 1;
            Affine::constant(self.cum[last])
                + (Affine::constant(self.known[last]) + self.node(i)) * (0.5 * self.step)
        }
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let top = self.count() - 1;
        let pos = (s / self.step).max(0.0);
        if top == 0 {
            return (0, 0.0);
        }
        if pos >= top as f64 {
            return (top - 1, 1.0);
        }
        let i = pos.floor() as usize;
        (i, pos - i as f64)
    }

    /// Interpolated value at `s`, clamped to the stored span.
    pub fn at(&self, s: f64) -> Affine {
        let (i, w) = self.locate(s);
        if w == 0.0 {
            return self.node(i);
        }
        if w == 1.0 {
            return self.node(i + 1);
        }
        self.node(i) * (1.0 - w) + self.node(i + 1) * w
    }

    fn antiderivative(&self, s: f64) -> Affine {
        if self.count() == 1 {
            return Affine::ZERO;
        }
        let (i, w) = self.locate(s);
        let a = self.node(i);
        let b = self.node(i + 1);
        self.cum_node(i) + (a * (w * (1.0 - 0.5 * w)) + b * (0.5 * w * w)) * self.step
    }

    /// Exact integral of the interpolant over `[a, b]`, both clamped to the span.
    pub fn integral(&self, a: f64, b: f64) -> Affine {
        self.antiderivative(b) - self.antiderivative(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fixed_point() {
        let a = Affine {
            value: 1.0,
            coef: 0.5,
        };
        assert_eq!(a.fixed_point(), 2.0);
        assert_eq!(a.eval(2.0), 2.0);
    }

    #[test]
    fn lookups_reach_into_pending_sample() {
        let mut h = History::new(0.5, 1.0);
        h.push(2.0);
        h.set_pending(Affine::unknown());
        let mid = h.at(0.75);
        assert_eq!(
            mid,
            Affine {
                value: 1.0,
                coef: 0.5
            }
        );
        assert_eq!(h.at(0.5), Affine::constant(2.0));
        assert_eq!(h.span(), 1.0);
    }

    #[test]
    fn integral_of_linear_interpolant_is_exact() {
        let mut h = History::new(0.25, 0.0);
        for k in 1..=4 {
            h.push(k as f64 * 0.25);
        }
        // int_0.1^0.9 s ds
        let got = h.integral(0.1, 0.9);
        assert!((got.value - 0.4).abs() < 1e-15);
        assert_eq!(got.coef, 0.0);

        h.set_pending(Affine::unknown());
        let tail = h.integral(1.0, 1.25);
        assert!((tail.value - 0.125).abs() < 1e-15);
        assert!((tail.coef - 0.125).abs() < 1e-15);
    }
}
