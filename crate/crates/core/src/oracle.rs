//! Adaptive Gauss–Kronrod quadrature, used as an independent check on
//! closed-form moment expressions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 on a finite interval. Stops once the summed
/// error estimate is below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Quadrature> {
    const MAX_PANELS: usize = 20_000;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integrate needs finite limits".into()));
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut value = v;
    let mut error = e;
    let mut evals = 15;
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= MAX_PANELS {
            return Err(Error::Convergence { iterations: heap.len(), residual: error });
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (lv, le) = gk15(&f, p.a, m);
        let (rv, re) = gk15(&f, m, p.b);
        evals += 30;
        value += lv + rv - p.value;
        error += le + re - p.error;
        heap.push(Panel { a: p.a, b: m, value: lv, error: le });
        heap.push(Panel { a: m, b: p.b, value: rv, error: re });
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
    }
    // Re-sum to shed the drift from incremental updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(Quadrature { value, error, evaluations: evals })
}

/// `∫_a^∞ f` through `x = a / t`, `t ∈ (0, 1]`; needs `a > 0`.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, rel_tol: f64, abs_tol: f64) -> Result<Quadrature> {
    if a <= 0.0 {
        return Err(Error::Domain("semi-infinite map needs a positive lower limit".into()));
    }
    integrate(
        |t| {
            let x = a / t;
            f(x) * a / (t * t)
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Second moment double integral
/// `(τ−1)² ∫∫_{[1,∞)²} (x∧y)^{σ−τ} (x∨y)^{1−τ} dx dy`
/// evaluated by nested adaptive quadrature over the lower triangle.
pub fn second_moment_quadrature(tau: f64, sigma: f64, rel_tol: f64) -> Result<Quadrature> {
    if !(tau > 2.0) || !(sigma > 0.0) || 2.0 * tau - sigma - 3.0 <= 0.0 {
        return Err(Error::Domain(format!("second moment integral diverges for tau={tau}, sigma={sigma}")));
    }
    let inner_tol = rel_tol * 1e-2;
    let failed = std::cell::Cell::new(None);
    let outer = integrate_to_infinity(
        |x| {
            let inner = integrate_to_infinity(|y| y.powf(1.0 - tau), x, inner_tol, 0.0);
            match inner {
                Ok(q) => x.powf(sigma - tau) * q.value,
                Err(e) => {
                    failed.set(Some(e.to_string()));
                    0.0
                }
            }
        },
        1.0,
        rel_tol,
        0.0,
    )?;
    if let Some(msg) = failed.take() {
        return Err(Error::Numerical(format!("inner quadrature failed: {msg}")));
    }
    let c = 2.0 * (tau - 1.0) * (tau - 1.0);
    Ok(Quadrature { value: c * outer.value, error: c * outer.error, evaluations: outer.evaluations })
}
