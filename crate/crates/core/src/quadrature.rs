//! Grid calculus on uniform meshes: trapezoid rules, Gauss-Legendre panels,
//! linear interpolation and finite differences.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

/// Composite trapezoid rule for samples spaced `h` apart.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => {
            let inner: f64 = values[1..len - 1].iter().sum();
            h * (0.5 * (values[0] + values[len - 1]) + inner)
        }
    }
}

/// Running trapezoid integral; `out[k]` integrates samples `0..=k`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            acc += 0.5 * h * (values[k - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Trapezoid rule for a function sampled at `n` equal cells of `[a, b]`.
pub fn trapezoid_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..n {
        acc += f(a + k as f64 * h);
    }
    acc * h
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Composite five-point Gauss-Legendre rule over `panels` equal panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        for (node, weight) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            acc += weight * f(mid + 0.5 * width * node);
        }
    }
    0.5 * width * acc
}

/// Nodes and weights of the five-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre_cell(a: f64, b: f64) -> [(f64, f64); 5] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    core::array::from_fn(|i| (mid + half * GL5_NODES[i], half * GL5_WEIGHTS[i]))
}

/// Linear interpolation of samples spaced `h` apart starting at 0.
/// Arguments outside the sampled range are clamped to the end values.
pub fn interp_uniform(values: &[f64], h: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let s = x / h;
    if s <= 0.0 {
        return values[0];
    }
    if s >= last as f64 {
        return values[last];
    }
    let k = s.floor() as usize;
    let w = s - k as f64;
    if w == 0.0 {
        values[k]
    } else {
        (1.0 - w) * values[k] + w * values[k + 1]
    }
}

/// Finite-difference derivative: central in the interior, first-order
/// one-sided at both ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    if n < 2 {
        out.resize(n, 0.0);
        return out;
    }
    out.push((values[1] - values[0]) / h);
    for k in 1..n - 1 {
        out.push((values[k + 1] - values[k - 1]) / (2.0 * h));
    }
    out.push((values[n - 1] - values[n - 2]) / h);
    out
}
