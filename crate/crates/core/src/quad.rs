//! Adaptive Gauss–Kronrod (7–15) quadrature with helpers for geometric panels and
//! semi-infinite tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-10, rel: 1e-12, max_intervals: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel, ..Default::default() }
    }
}

/// One 15-point Kronrod panel: (kronrod value, |kronrod - gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
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

/// Globally adaptive bisection on [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evals: 0, converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut evals = 15;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return QuadResult { value: total, error: err, evals, converged: false };
        }
        let p = heap.pop().expect("non-empty heap");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            return QuadResult { value: total, error: err, evals, converged: false };
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
        if heap.len() % 64 == 0 {
            // re-sum to limit drift from incremental updates
            total = heap.iter().map(|p| p.value).sum();
            err = heap.iter().map(|p| p.error).sum();
        }
    }
    QuadResult { value: total, error: err, evals, converged: true }
}

/// Integral over [a, b] with 0 < a < b, split into panels of ratio 2.
pub fn integrate_geometric<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    assert!(a > 0.0 && b >= a);
    let mut out = QuadResult { value: 0.0, error: 0.0, evals: 0, converged: true };
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        let hi = if b - hi < 1e-9 * b { b } else { hi };
        let r = integrate(&mut f, lo, hi, tol);
        out.value += r.value;
        out.error += r.error;
        out.evals += r.evals;
        out.converged &= r.converged;
        lo = hi;
    }
    out
}

/// Integral over [a, ∞) for a > 0, in the variable y = ln t on unit panels. Once the
/// panel values settle into a geometric sequence (power-law integrand) the remaining
/// tail is summed in closed form.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> QuadResult {
    assert!(a > 0.0);
    let mut g = |y: f64| {
        let t = y.exp();
        f(t) * t
    };
    let mut out = QuadResult { value: 0.0, error: 0.0, evals: 0, converged: false };
    let y0 = a.ln();
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    for k in 0..(690.0 - y0).max(1.0) as usize {
        let lo = y0 + k as f64;
        let r = integrate(&mut g, lo, lo + 1.0, tol);
        out.value += r.value;
        out.error += r.error;
        out.evals += r.evals;
        if r.value.abs() <= 1e-300 || r.value.abs() <= 1e-18 * out.value.abs() {
            out.converged = true;
            return out;
        }
        if let Some(p) = prev {
            let ratio = r.value / p;
            if let Some(q) = prev_ratio {
                if ratio > 0.0 && ratio < 1.0 && (ratio - q).abs() < 1e-11 {
                    let tail = r.value * ratio / (1.0 - ratio);
                    out.value += tail;
                    out.error += (ratio - q).abs() * tail.abs() / (1.0 - ratio);
                    out.converged = true;
                    return out;
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(r.value);
    }
    out
}
