//! Explicit embedded Runge–Kutta pairs on flat complex vectors.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::field::{C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pair {
    /// Classical fourth-order method with Zonneveld's third-order companion.
    Zonneveld43,
    /// Heun with embedded Euler.
    HeunEuler21,
}

struct Tableau {
    c: &'static [f64],
    a: &'static [&'static [f64]],
    b: &'static [f64],
    bhat: &'static [f64],
    order: usize,
}

const ZONNEVELD: Tableau = Tableau {
    c: &[0.0, 0.5, 0.5, 1.0, 0.75],
    a: &[&[], &[0.5], &[0.0, 0.5], &[0.0, 0.0, 1.0], &[5.0 / 32.0, 7.0 / 32.0, 13.0 / 32.0, -1.0 / 32.0]],
    b: &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 0.0],
    bhat: &[-0.5, 7.0 / 3.0, 7.0 / 3.0, 13.0 / 6.0, -16.0 / 3.0],
    order: 4,
};

const HEUN_EULER: Tableau = Tableau { c: &[0.0, 1.0], a: &[&[], &[1.0]], b: &[0.5, 0.5], bhat: &[1.0, 0.0], order: 2 };

impl Pair {
    pub fn from_order(order: usize) -> Result<Pair> {
        match order {
            4 => Ok(Pair::Zonneveld43),
            2 => Ok(Pair::HeunEuler21),
            o => Err(Error::InvalidInput(format!("stepper order {o} not in {{2, 4}}"))),
        }
    }

    pub fn order(self) -> usize {
        self.tableau().order
    }

    fn tableau(self) -> &'static Tableau {
        match self {
            Pair::Zonneveld43 => &ZONNEVELD,
            Pair::HeunEuler21 => &HEUN_EULER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Smallest step relative to `|t|` before giving up.
    pub min_rel_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(u, v)| *u += a * v);
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// One step; returns the higher-order update and the embedded error estimate.
fn step<F>(pair: Pair, f: &mut F, t: f64, y: &[C64], h: f64, f0: &[C64], stats: &mut StepStats) -> Result<(Vec<C64>, Vec<C64>)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let tb = pair.tableau();
    let mut k: Vec<Vec<C64>> = vec![f0.to_vec()];
    for s in 1..tb.c.len() {
        let mut ys = y.to_vec();
        for (j, &a) in tb.a[s].iter().enumerate() {
            if a != 0.0 {
                axpy(&mut ys, h * a, &k[j]);
            }
        }
        k.push(f(t + tb.c[s] * h, &ys)?);
        stats.rhs_evals += 1;
    }
    let mut y1 = y.to_vec();
    let mut err = vec![ZERO; y.len()];
    for (j, kj) in k.iter().enumerate() {
        if tb.b[j] != 0.0 {
            axpy(&mut y1, h * tb.b[j], kj);
        }
        let d = tb.b[j] - tb.bhat[j];
        if d != 0.0 {
            axpy(&mut err, h * d, kj);
        }
    }
    Ok((y1, err))
}

/// Largest block error relative to `abs_tol + rel_tol · max|y|` in that block.
fn error_ratio(err: &[C64], y0: &[C64], y1: &[C64], blocks: &[Range<usize>], ctrl: &StepControl) -> f64 {
    blocks
        .iter()
        .map(|r| {
            let scale = ctrl.abs_tol + ctrl.rel_tol * max_abs(&y0[r.clone()]).max(max_abs(&y1[r.clone()]));
            max_abs(&err[r.clone()]) / scale
        })
        .fold(0.0, f64::max)
}

/// Adaptive integration from `t0` to `t1` in either direction. Every time in `outputs`
/// between the endpoints is hit exactly and reported through `on_output`; `on_step` sees
/// each accepted step.
#[allow(clippy::too_many_arguments)]
pub fn integrate_adaptive<F, O, S>(
    pair: Pair,
    mut f: F,
    t0: f64,
    y0: Vec<C64>,
    t1: f64,
    outputs: &[f64],
    blocks: &[Range<usize>],
    ctrl: &StepControl,
    mut on_output: O,
    mut on_step: S,
) -> Result<(Vec<C64>, StepStats)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    O: FnMut(f64, &[C64]) -> Result<()>,
    S: FnMut(f64, &[C64]) -> Result<()>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = outputs.iter().copied().filter(|&s| (s - t0) * dir > 0.0 && (t1 - s) * dir > 0.0).collect();
    stops.sort_by(|a, b| (dir * a).total_cmp(&(dir * b)));
    stops.dedup();
    stops.push(t1);
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    if outputs.contains(&t0) {
        on_output(t0, &y)?;
    }
    if t0 == t1 {
        return Ok((y, stats));
    }
    let mut fy = f(t, &y)?;
    stats.rhs_evals += 1;
    let q = pair.tableau().order - 1;
    let mut h = initial_step(t0, &y, &fy, blocks, ctrl, q).min(ctrl.max_step).min((t1 - t0).abs());
    for &stop in &stops {
        while (stop - t) * dir > 0.0 {
            if stats.accepted + stats.rejected >= ctrl.max_steps {
                return Err(Error::StepFailure { t, h });
            }
            let remaining = (stop - t).abs();
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            if hs < ctrl.min_rel_step * t.abs().max(1.0) {
                return Err(Error::StepFailure { t, h: hs });
            }
            let (y1, err) = step(pair, &mut f, t, &y, dir * hs, &fy, &mut stats)?;
            let ratio = error_ratio(&err, &y, &y1, blocks, ctrl);
            if !ratio.is_finite() {
                stats.rejected += 1;
                h = hs * 0.2;
                continue;
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-1.0 / (q as f64 + 1.0))).clamp(0.2, 5.0) };
            if ratio <= 1.0 {
                t = if last { stop } else { t + dir * hs };
                y = y1;
                fy = f(t, &y)?;
                stats.rhs_evals += 1;
                stats.accepted += 1;
                on_step(t, &y)?;
                h = if last { h.max(hs * factor) } else { hs * factor };
                h = h.min(ctrl.max_step);
            } else {
                stats.rejected += 1;
                h = hs * factor;
            }
        }
        if outputs.contains(&stop) {
            on_output(stop, &y)?;
        }
    }
    Ok((y, stats))
}

fn initial_step(t: f64, y: &[C64], fy: &[C64], blocks: &[Range<usize>], ctrl: &StepControl, q: usize) -> f64 {
    let d = blocks
        .iter()
        .map(|r| {
            let scale = ctrl.abs_tol + ctrl.rel_tol * max_abs(&y[r.clone()]);
            max_abs(&fy[r.clone()]) / scale
        })
        .fold(0.0, f64::max);
    let guess = if d > 0.0 { 0.5 * d.powf(-1.0 / (q as f64 + 1.0)) } else { 0.1 * t.abs().max(1.0) };
    guess.min(0.1 * t.abs().max(1.0))
}

/// Fixed steps on a geometric time grid from `t0` to `t1` (both positive).
pub fn integrate_geometric<F>(pair: Pair, mut f: F, t0: f64, y0: Vec<C64>, t1: f64, steps: usize) -> Result<(Vec<C64>, StepStats)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    if !(t0 > 0.0 && t1 > 0.0 && steps > 0) {
        return Err(Error::InvalidInput("geometric stepping needs positive times and steps".into()));
    }
    let r = (t1 / t0).ln() / steps as f64;
    let mut stats = StepStats::default();
    let mut y = y0;
    let mut t = t0;
    for j in 1..=steps {
        let tn = if j == steps { t1 } else { t0 * (r * j as f64).exp() };
        let fy = f(t, &y)?;
        stats.rhs_evals += 1;
        y = step(pair, &mut f, t, &y, tn - t, &fy, &mut stats)?.0;
        stats.accepted += 1;
        t = tn;
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[C64]) -> Result<Vec<C64>> {
        Ok(y.iter().map(|v| -v).collect())
    }

    #[test]
    fn fixed_step_orders() {
        for pair in [Pair::Zonneveld43, Pair::HeunEuler21] {
            let run = |n| integrate_geometric(pair, decay, 1.0, vec![C64::new(1.0, 0.0)], 3.0, n).unwrap().0[0];
            let exact = (-2.0f64).exp();
            let e1 = (run(20) - exact).norm();
            let e2 = (run(40) - exact).norm();
            let order = (e1 / e2).log2();
            assert!((order - pair.order() as f64).abs() < 0.3, "{pair:?}: {order}");
        }
    }

    #[test]
    fn adaptive_hits_outputs_backward() {
        let ctrl = StepControl { rel_tol: 1e-10, abs_tol: 1e-14, max_step: f64::INFINITY, min_rel_step: 1e-14, max_steps: 100_000 };
        let mut seen = Vec::new();
        let (y, _) = integrate_adaptive(
            Pair::Zonneveld43,
            decay,
            5.0,
            vec![C64::new(1.0, 0.0)],
            1.0,
            &[4.0, 2.5, 5.0],
            &[0..1],
            &ctrl,
            |t, _| {
                seen.push(t);
                Ok(())
            },
            |_, _| Ok(()),
        )
        .unwrap();
        assert_eq!(seen, vec![5.0, 4.0, 2.5]);
        assert!((y[0].re - 4f64.exp()).abs() < 1e-7 * 4f64.exp());
    }
}
