//! Scalar functions of time on `[1, ∞)`: exact sums of `c·t^a·lnᵏt`, or tables on a
//! logarithmic grid carrying such a sum as their large-time tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EXPONENT_MERGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    pub a: f64,
    pub k: u32,
}

/// `Σ c·t^a·lnᵏt`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Powers {
    pub terms: Vec<Term>,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl Powers {
    pub fn zero() -> Self {
        Powers { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Powers::term(c, 0.0, 0)
    }

    pub fn term(c: f64, a: f64, k: u32) -> Self {
        Powers { terms: vec![Term { c, a, k }] }.normalized()
    }

    /// `c·t^a`.
    pub fn power(c: f64, a: f64) -> Self {
        Powers::term(c, a, 0)
    }

    /// Merges equal `(a, k)` pairs and drops zero coefficients; terms are sorted by
    /// decreasing exponent.
    fn normalized(mut self) -> Self {
        self.terms.sort_by(|x, y| y.a.total_cmp(&x.a).then(y.k.cmp(&x.k)));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            if let Some(last) = out.last_mut() {
                if (last.a - t.a).abs() <= EXPONENT_MERGE * (1.0 + t.a.abs()) && last.k == t.k {
                    last.c += t.c;
                    continue;
                }
            }
            out.push(t);
        }
        out.retain(|t| t.c != 0.0);
        Powers { terms: out }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let l = t.ln();
        self.terms.iter().map(|x| x.c * t.powf(x.a) * l.powi(x.k as i32)).sum()
    }

    /// Largest `(a, k)` present, in the order of growth at infinity.
    pub fn leading(&self) -> Option<(f64, u32)> {
        self.terms.iter().map(|t| (t.a, t.k)).max_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
    }

    pub fn scale(&self, s: f64) -> Self {
        Powers { terms: self.terms.iter().map(|t| Term { c: t.c * s, ..*t }).collect() }.normalized()
    }

    pub fn add(&self, o: &Powers) -> Self {
        Powers { terms: self.terms.iter().chain(&o.terms).copied().collect() }.normalized()
    }

    pub fn sub(&self, o: &Powers) -> Self {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Powers) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * o.terms.len());
        for x in &self.terms {
            for y in &o.terms {
                terms.push(Term { c: x.c * y.c, a: x.a + y.a, k: x.k + y.k });
            }
        }
        Powers { terms }.normalized()
    }

    pub fn powi(&self, m: u32) -> Self {
        let mut out = Powers::constant(1.0);
        for _ in 0..m {
            out = out.mul(self);
        }
        out
    }

    /// Antiderivative of one term, without constant.
    fn antiderivative_term(t: &Term) -> Powers {
        let b = t.a + 1.0;
        if b.abs() <= EXPONENT_MERGE {
            return Powers::term(t.c / f64::from(t.k + 1), 0.0, t.k + 1);
        }
        // ∫ t^a lnᵏt = t^{a+1} Σ_j (−1)^j k!/(k−j)! lnᵏ⁻ʲt / b^{j+1}
        let kf = factorial(t.k);
        let terms = (0..=t.k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                Term { c: t.c * sign * kf / factorial(t.k - j) / b.powi(j as i32 + 1), a: b, k: t.k - j }
            })
            .collect();
        Powers { terms }.normalized()
    }

    /// `∫₁ᵗ`.
    pub fn integral_from_one(&self) -> Self {
        let mut out = Powers::zero();
        for t in &self.terms {
            let f = Powers::antiderivative_term(t);
            out = out.add(&f).add(&Powers::constant(-f.eval(1.0)));
        }
        out
    }

    /// `∫ₜ^∞`; every term must decay faster than `1/t`.
    pub fn tail_integral(&self) -> Result<Self> {
        let mut out = Powers::zero();
        for t in &self.terms {
            if t.a >= -1.0 + EXPONENT_MERGE {
                return Err(Error::TailDiverges(t.a));
            }
            out = out.sub(&Powers::antiderivative_term(t));
        }
        Ok(out)
    }
}

/// Samples on `s = ln t ∈ [0, ln T_max]` with step `ds`, and an exact tail beyond `T_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub ds: f64,
    pub values: Vec<f64>,
    pub tail: Powers,
}

/// Relative misfit above which a fitted power-law tail is rejected.
pub const TAIL_FIT_TOL: f64 = 0.01;

impl Table {
    pub fn t_max(&self) -> f64 {
        (self.ds * (self.values.len() - 1) as f64).exp()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| (i as f64 * self.ds).exp())
    }

    /// Tabulates `f` and fits `c·t^α` to its last decade.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, t_max: f64, per_decade: usize) -> Result<Self> {
        let (ds, len) = layout(t_max, per_decade)?;
        let values: Vec<f64> = (0..len).map(|i| f((i as f64 * ds).exp())).collect();
        let tail = fit_tail(ds, &values)?;
        Ok(Table { ds, values, tail })
    }

    /// Tabulates exact powers; the tail is the input itself.
    pub fn from_powers(p: &Powers, t_max: f64, per_decade: usize) -> Result<Self> {
        let (ds, len) = layout(t_max, per_decade)?;
        Ok(Table { ds, values: (0..len).map(|i| p.eval((i as f64 * ds).exp())).collect(), tail: p.clone() })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = t.max(1.0).ln();
        let last = self.values.len() - 1;
        let x = s / self.ds;
        if x >= last as f64 {
            if x <= last as f64 + 1e-9 {
                return self.values[last];
            }
            return self.tail.eval(t);
        }
        // cubic Lagrange on four neighbouring nodes
        let i = (x.floor() as usize).clamp(1, last.saturating_sub(2).max(1));
        let i0 = i - 1;
        let u = x - i0 as f64;
        let v = &self.values[i0..(i0 + 4).min(self.values.len())];
        if v.len() < 4 {
            let j = x.floor() as usize;
            let w = x - j as f64;
            return self.values[j] * (1.0 - w) + self.values[(j + 1).min(last)] * w;
        }
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3]
    }

    fn zip_with(&self, o: &Table, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        if self.values.len() != o.values.len() || (self.ds - o.ds).abs() > 1e-15 {
            return Err(Error::InvalidInput("time tables on different grids".into()));
        }
        Ok(self.values.iter().zip(&o.values).map(|(a, b)| f(*a, *b)).collect())
    }

    /// `g(s) = f(e^s)e^s` integrated panel by panel with cubic weights.
    fn panel_integrals(&self) -> Vec<f64> {
        let n = self.values.len();
        let g: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| v * (i as f64 * self.ds).exp()).collect();
        let h = self.ds;
        (0..n - 1)
            .map(|i| {
                if i == 0 && n >= 4 {
                    h * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]) / 24.0
                } else if i == n - 2 && n >= 4 {
                    h * (9.0 * g[n - 1] + 19.0 * g[n - 2] - 5.0 * g[n - 3] + g[n - 4]) / 24.0
                } else if n >= 4 {
                    h * (-g[i - 1] + 13.0 * g[i] + 13.0 * g[i + 1] - g[i + 2]) / 24.0
                } else {
                    0.5 * h * (g[i] + g[i + 1])
                }
            })
            .collect()
    }

    pub fn integral_from_one(&self) -> Table {
        let p = self.panel_integrals();
        let mut values = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        values.push(0.0);
        for v in p {
            acc += v;
            values.push(acc);
        }
        let t_max = self.t_max();
        let anti = self.tail.integral_from_one();
        let tail = anti.add(&Powers::constant(acc - anti.eval(t_max)));
        Table { ds: self.ds, values, tail }
    }

    pub fn tail_integral(&self) -> Result<Table> {
        let beyond = self.tail.tail_integral()?;
        let p = self.panel_integrals();
        let mut values = vec![0.0; self.values.len()];
        let mut acc = beyond.eval(self.t_max());
        *values.last_mut().expect("non-empty") = acc;
        for i in (0..p.len()).rev() {
            acc += p[i];
            values[i] = acc;
        }
        Ok(Table { ds: self.ds, values, tail: beyond })
    }
}

impl Table {
    /// Replaces the carried tail with a power law fitted to the last decade.
    pub fn refit_tail(mut self) -> Result<Table> {
        self.tail = fit_tail(self.ds, &self.values)?;
        Ok(self)
    }
}

fn layout(t_max: f64, per_decade: usize) -> Result<(f64, usize)> {
    if !(t_max > 10.0) || per_decade < 4 {
        return Err(Error::InvalidInput(format!("table range t_max = {t_max}, {per_decade} points per decade")));
    }
    let ds = std::f64::consts::LN_10 / per_decade as f64;
    let len = (t_max.ln() / ds).ceil() as usize + 1;
    Ok((ds, len))
}

/// Least-squares `ln|f| ≈ ln c + α s` over the last decade.
fn fit_tail(ds: f64, values: &[f64]) -> Result<Powers> {
    let n = values.len();
    let span = ((std::f64::consts::LN_10 / ds).round() as usize).min(n - 1);
    let idx: Vec<usize> = (n - 1 - span..n).collect();
    let sign = values[n - 1].signum();
    if sign == 0.0 {
        return Ok(Powers::zero());
    }
    if idx.iter().any(|&i| values[i].signum() != sign) {
        return Err(Error::TailFitFailure(f64::INFINITY));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| i as f64 * ds).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| values[i].abs().ln()).collect();
    let m = xs.len() as f64;
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let alpha = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let lc = (sy - alpha * sx) / m;
    let misfit = xs.iter().zip(&ys).map(|(x, y)| (lc + alpha * x - y).exp_m1().abs()).fold(0.0, f64::max);
    if misfit > TAIL_FIT_TOL {
        return Err(Error::TailFitFailure(misfit));
    }
    Ok(Powers::power(sign * lc.exp(), alpha))
}

/// A time factor: exact powers or a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimeFn {
    Powers(Powers),
    Table(Table),
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Powers(p) => p.eval(t),
            TimeFn::Table(tb) => tb.eval(t),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, TimeFn::Powers(_))
    }

    /// Converts to a table on the given layout (no-op for tables).
    pub fn tabulate(&self, t_max: f64, per_decade: usize) -> Result<Table> {
        match self {
            TimeFn::Powers(p) => Table::from_powers(p, t_max, per_decade),
            TimeFn::Table(tb) => Ok(tb.clone()),
        }
    }

    fn combine(&self, o: &TimeFn, exact: impl Fn(&Powers, &Powers) -> Powers, pointwise: impl Fn(f64, f64) -> f64) -> Result<TimeFn> {
        match (self, o) {
            (TimeFn::Powers(a), TimeFn::Powers(b)) => Ok(TimeFn::Powers(exact(a, b))),
            (TimeFn::Table(a), TimeFn::Table(b)) => {
                Ok(TimeFn::Table(Table { ds: a.ds, values: a.zip_with(b, pointwise)?, tail: exact(&a.tail, &b.tail) }))
            }
            (TimeFn::Table(a), TimeFn::Powers(p)) => {
                let values = a.values.iter().zip(a.times()).map(|(v, t)| pointwise(*v, p.eval(t))).collect();
                Ok(TimeFn::Table(Table { ds: a.ds, values, tail: exact(&a.tail, p) }))
            }
            (TimeFn::Powers(p), TimeFn::Table(a)) => {
                let values = a.values.iter().zip(a.times()).map(|(v, t)| pointwise(p.eval(t), *v)).collect();
                Ok(TimeFn::Table(Table { ds: a.ds, values, tail: exact(p, &a.tail) }))
            }
        }
    }

    pub fn mul(&self, o: &TimeFn) -> Result<TimeFn> {
        self.combine(o, |a, b| a.mul(b), |x, y| x * y)
    }

    pub fn add(&self, o: &TimeFn) -> Result<TimeFn> {
        self.combine(o, |a, b| a.add(b), |x, y| x + y)
    }

    pub fn scale(&self, s: f64) -> TimeFn {
        match self {
            TimeFn::Powers(p) => TimeFn::Powers(p.scale(s)),
            TimeFn::Table(tb) => {
                TimeFn::Table(Table { ds: tb.ds, values: tb.values.iter().map(|v| v * s).collect(), tail: tb.tail.scale(s) })
            }
        }
    }

    pub fn integral_from_one(&self) -> TimeFn {
        match self {
            TimeFn::Powers(p) => TimeFn::Powers(p.integral_from_one()),
            TimeFn::Table(tb) => TimeFn::Table(tb.integral_from_one()),
        }
    }

    pub fn tail_integral(&self) -> Result<TimeFn> {
        Ok(match self {
            TimeFn::Powers(p) => TimeFn::Powers(p.tail_integral()?),
            TimeFn::Table(tb) => TimeFn::Table(tb.tail_integral()?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_antiderivative() {
        // ∫₁ᵗ s⁻¹ ln s ds = ln²t / 2
        let p = Powers::term(1.0, -1.0, 1).integral_from_one();
        for t in [1.0, 2.0, 50.0] {
            assert!((p.eval(t) - 0.5 * t.ln().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn power_times_log_antiderivative() {
        // ∫ₜ^∞ s⁻² ln s ds = (1 + ln t)/t
        let p = Powers::term(1.0, -2.0, 1).tail_integral().unwrap();
        for t in [1.0, 3.0, 1e3] {
            assert!((p.eval(t) - (1.0 + t.ln()) / t).abs() < 1e-14 * (1.0 + t.ln()));
        }
    }

    #[test]
    fn divergent_tail() {
        assert!(matches!(Powers::power(1.0, -0.5).tail_integral(), Err(Error::TailDiverges(_))));
    }

    #[test]
    fn tail_fit_rejects_non_power() {
        let r = Table::from_fn(|t| (1.0 + (t.ln()).sin()) / t, 1e6, 50);
        assert!(matches!(r, Err(Error::TailFitFailure(_))));
    }
}
