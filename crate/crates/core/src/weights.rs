//! Gevrey weights `exp(ρ|ξ|^ν)`, the capped weight `exp(ρ(|ξ|^ν ∨ 1))`, the series weight
//! `Σ (j!)^{-1/ν}|ξ|^j`, its antiderivative, and the pointwise inequalities they satisfy.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

pub const J_CAP: usize = 10_000;
const LOG_SLACK: f64 = 1e-12;
const NEGLIGIBLE: f64 = 42.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    F0,
    F,
    FTilde,
    FCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub rho: f64,
    pub nu: f64,
    pub variant: Variant,
}

impl WeightParams {
    pub fn new(rho: f64, nu: f64, variant: Variant) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidInput(format!("nu = {nu} outside (0, 1]")));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!("rho = {rho} must be finite and >= 0")));
        }
        Ok(WeightParams { rho, nu, variant })
    }

    pub fn with_rho(self, rho: f64) -> Self {
        WeightParams { rho, ..self }
    }

    /// Argument scaling that turns the unit-radius series into the radius-ρ one.
    pub fn series_scale(&self) -> f64 {
        self.rho.powf(1.0 / self.nu)
    }
}

pub fn ln_factorial(j: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        (0..=2 * J_CAP + 2).map(|j| if j < 2 { 0.0 } else { ln_gamma(j as f64 + 1.0) }).collect()
    });
    if j < t.len() {
        t[j]
    } else {
        ln_gamma(j as f64 + 1.0)
    }
}

/// Multiplier applied to the j-th series term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    /// `Σ a_j x^j`
    Plain,
    /// `Σ_{j≥1} a_j x^j`
    Tail,
    /// `Σ j a_j x^j`
    J,
    /// `Σ (j+1) a_j x^j`
    JPlusOne,
    /// `Σ (j+1)^{-1} a_j x^{j+1}`
    Antiderivative,
}

/// Logs of the series moments at one radius, from a single pass over the terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSums {
    pub plain: f64,
    pub tail: f64,
    pub j: f64,
    pub j_plus_one: f64,
    pub antiderivative: f64,
}

impl SeriesSums {
    pub fn get(&self, m: Moment) -> f64 {
        match m {
            Moment::Plain => self.plain,
            Moment::Tail => self.tail,
            Moment::J => self.j,
            Moment::JPlusOne => self.j_plus_one,
            Moment::Antiderivative => self.antiderivative,
        }
    }
}

fn plain_term(j: usize, lx: f64, nu: f64) -> f64 {
    j as f64 * lx - ln_factorial(j) / nu
}

/// Index of the largest term of a log-concave sequence, starting from `guess`.
fn climb<F: Fn(usize) -> f64>(term: &F, first: usize, guess: usize) -> usize {
    let mut j0 = guess.clamp(first, J_CAP);
    while j0 < J_CAP && term(j0 + 1) > term(j0) {
        j0 += 1;
    }
    while j0 > first && term(j0 - 1) > term(j0) {
        j0 -= 1;
    }
    j0
}

/// Visits the indices carrying the series mass, largest term first; `visit` gets
/// `(j, exp(term_j − term_max))`. Returns the log of the largest term.
fn sweep<F: Fn(usize) -> f64, V: FnMut(usize, f64)>(term: F, first: usize, guess: usize, mut visit: V) -> Result<f64> {
    let j0 = climb(&term, first, guess);
    let tmax = term(j0);
    visit(j0, 1.0);
    let mut j = j0;
    loop {
        j += 1;
        if j > J_CAP {
            return Err(Error::SeriesNotConverged(J_CAP));
        }
        let t = term(j);
        visit(j, (t - tmax).exp());
        if t - tmax < -NEGLIGIBLE {
            let ratio = (term(j + 1) - t).exp();
            if ratio < 1.0 && (t - tmax).exp() * ratio / (1.0 - ratio) < 1e-15 {
                break;
            }
        }
    }
    let mut j = j0;
    while j > first {
        j -= 1;
        let t = term(j);
        visit(j, (t - tmax).exp());
        if t - tmax < -NEGLIGIBLE {
            break;
        }
    }
    Ok(tmax)
}

pub fn series_sums(x: f64, nu: f64) -> Result<SeriesSums> {
    if x == 0.0 {
        let ninf = f64::NEG_INFINITY;
        return Ok(SeriesSums { plain: 0.0, tail: ninf, j: ninf, j_plus_one: 0.0, antiderivative: ninf });
    }
    let lx = x.ln();
    let (mut s0, mut st, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let guess = x.powf(nu).round() as usize;
    let tmax = sweep(
        |j| plain_term(j, lx, nu),
        0,
        guess,
        |j, e| {
            let jf = j as f64;
            s0 += e;
            if j > 0 {
                st += e;
            }
            s1 += jf * e;
            s2 += (jf + 1.0) * e;
            s3 += e / (jf + 1.0);
        },
    )?;
    let tail = if st > 0.0 { tmax + st.ln() } else { SeriesSums::tail_direct(x, nu)? };
    Ok(SeriesSums {
        plain: tmax + s0.ln(),
        tail,
        j: if s1 > 0.0 { tmax + s1.ln() } else { tail },
        j_plus_one: tmax + s2.ln(),
        antiderivative: lx + tmax + s3.ln(),
    })
}

impl SeriesSums {
    fn tail_direct(x: f64, nu: f64) -> Result<f64> {
        let lx = x.ln();
        let mut s = 0.0;
        let tmax = sweep(|j| plain_term(j, lx, nu), 1, 1, |_, e| s += e)?;
        Ok(tmax + s.ln())
    }
}

/// Natural log of a moment of the series weight at radius `x` (unit ρ).
pub fn log_series(x: f64, nu: f64, m: Moment) -> Result<f64> {
    Ok(series_sums(x, nu)?.get(m))
}

/// `ln(f̃(x) − f̃(y))` for `x ≥ y ≥ 0` with `delta = x − y` supplied accurately.
pub fn log_series_diff(x: f64, y: f64, delta: f64, nu: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if y == 0.0 {
        return log_series(x, nu, Moment::Tail);
    }
    let lx = x.ln();
    let l = (-delta / x).ln_1p();
    let term = |j: usize| plain_term(j, lx, nu) + (-(j as f64 * l).exp_m1()).ln();
    let mut s = 0.0;
    let guess = x.powf(nu).round() as usize;
    let tmax = sweep(term, 1, guess.max(1), |_, e| s += e)?;
    Ok(tmax + s.ln())
}

/// Log of the selected weight at radius `r`.
pub fn eval_log_weight(p: &WeightParams, r: f64) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidInput(format!("radius {r}")));
    }
    Ok(match p.variant {
        Variant::F0 => p.rho * r.powf(p.nu),
        Variant::F => p.rho * r.powf(p.nu).max(1.0),
        Variant::FTilde => log_series(p.series_scale() * r, p.nu, Moment::Plain)?,
        Variant::FCap => log_series(p.series_scale() * r, p.nu, Moment::Antiderivative)?,
    })
}

pub fn eval_weight(p: &WeightParams, r: f64) -> Result<f64> {
    let l = eval_log_weight(p, r)?;
    if l > 709.0 {
        return Err(Error::WeightOverflow(l));
    }
    Ok(l.exp())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `ln(e^y − 1)` for y ≥ 0.
fn log_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// `(1−ν) ln r` with `0^0 = 1`.
fn log_pow(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * r.ln()
    }
}

/// Position of `|ξ−η|` relative to `|ξ|` and `|η|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    ShiftSmallest,
    ShiftMiddle,
    ShiftLargest,
    Pointwise,
}

impl Region {
    fn classify(a: f64, b: f64, d: f64) -> Region {
        if d <= a.min(b) {
            Region::ShiftSmallest
        } else if d >= a.max(b) {
            Region::ShiftLargest
        } else {
            Region::ShiftMiddle
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inequality {
    Submultiplicative,
    ShiftedSubmultiplicative,
    Lipschitz,
    LipschitzNearShift,
    LipschitzFarShift,
    MomentUpper,
    MomentLower,
    AntiderivativeBound,
    LogDerivativeUpper,
    LogDerivativeLower,
    DerivativeGrowth,
    SandwichLower,
    SandwichUpper,
    SeriesSubmultiplicative,
    SeriesShifted,
    SeriesOneSided,
    SeriesLipschitz,
    SeriesLipschitzNearShift,
    SeriesLipschitzFarShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub which: Inequality,
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub region: Region,
    pub constant_used: f64,
    pub satisfied: bool,
}

impl InequalityReport {
    fn new(which: Inequality, log_lhs: f64, log_rhs: f64, region: Region, constant_used: f64) -> Self {
        let satisfied = log_lhs == f64::NEG_INFINITY || log_lhs <= log_rhs + LOG_SLACK.ln_1p();
        InequalityReport {
            which,
            lhs: log_lhs.exp(),
            rhs: log_rhs.exp(),
            log_lhs,
            log_rhs,
            region,
            constant_used,
            satisfied,
        }
    }

    /// `log_rhs − log_lhs`; negative means violated.
    pub fn margin(&self) -> f64 {
        self.log_rhs - self.log_lhs
    }
}

struct Radii {
    a: f64,
    b: f64,
    d: f64,
    /// `|ξ| − |η|` without cancellation.
    gap: f64,
    region: Region,
}

fn radii(xi: &[f64], eta: &[f64]) -> Result<Radii> {
    if xi.len() != eta.len() || xi.is_empty() || xi.len() > 3 {
        return Err(Error::InvalidInput("xi and eta must share a dimension in 1..=3".into()));
    }
    let (a, b, d) = (norm(xi), norm(eta), diff_norm(xi, eta));
    let gap = if a + b == 0.0 { 0.0 } else { xi.iter().zip(eta).map(|(x, y)| (x - y) * (x + y)).sum::<f64>() / (a + b) };
    Ok(Radii { a, b, d, gap, region: Region::classify(a, b, d) })
}

/// `hi^ν − lo^ν` for `hi ≥ lo ≥ 0`, `delta = hi − lo`.
fn pow_gap(hi: f64, lo: f64, delta: f64, nu: f64) -> f64 {
    if lo == 0.0 {
        return hi.powf(nu);
    }
    -hi.powf(nu) * (nu * (-delta / hi).ln_1p()).exp_m1()
}

/// `ln|f(a) − f(b)|` for the exponential weights, given `gap = a − b`.
fn log_weight_diff(p: &WeightParams, a: f64, b: f64, gap: f64) -> f64 {
    let (hi, lo, delta) = if gap >= 0.0 { (a, b, gap) } else { (b, a, -gap) };
    if delta == 0.0 {
        return f64::NEG_INFINITY;
    }
    let nu = p.nu;
    let e = match p.variant {
        Variant::F0 => pow_gap(hi, lo, delta, nu),
        _ if hi <= 1.0 => return f64::NEG_INFINITY,
        _ if lo <= 1.0 => (nu * hi.ln()).exp_m1(),
        _ => pow_gap(hi, lo, delta, nu),
    };
    let top = p.rho * hi.powf(nu).max(if p.variant == Variant::F { 1.0 } else { 0.0 });
    top + (-(-p.rho * e).exp_m1()).ln()
}

/// Submultiplicativity and its shifted form, for `f`, `f₀` and the series weight.
pub fn check_submultiplicative(p: &WeightParams, xi: &[f64], eta: &[f64]) -> Result<Vec<InequalityReport>> {
    let Radii { a, b, d, region, .. } = radii(xi, eta)?;
    let mut out = Vec::with_capacity(2);
    match p.variant {
        Variant::F0 | Variant::F => {
            let lf = |r| eval_log_weight(p, r);
            let f0 = WeightParams { variant: Variant::F0, ..*p };
            out.push(InequalityReport::new(Inequality::Submultiplicative, lf(a)?, lf(d)? + lf(b)?, region, 1.0));
            if a.min(b) <= d {
                let rhs = lf(d)? + p.nu * eval_log_weight(&f0, b)?;
                out.push(InequalityReport::new(Inequality::ShiftedSubmultiplicative, lf(a)?, rhs, region, 1.0));
            }
        }
        Variant::FTilde => {
            let r = ScaledRadii::new(p, a, b, d, 0.0)?;
            series_product_reports(p.nu, &r, region, &mut out);
        }
        Variant::FCap => return Err(Error::InvalidInput("no product inequality for the antiderivative weight".into())),
    }
    Ok(out)
}

/// Difference estimates `|f(ξ)−f(η)||η|^{1−ν} ≤ …` in every region where they apply.
pub fn check_lipschitz_family(p: &WeightParams, xi: &[f64], eta: &[f64]) -> Result<Vec<InequalityReport>> {
    let Radii { a, b, d, gap, region } = radii(xi, eta)?;
    let nu = p.nu;
    let c = if a <= d && d <= b { 2f64.powf(1.0 - nu) } else { 1.0 };
    let mut out = Vec::with_capacity(4);
    match p.variant {
        Variant::F0 | Variant::F => {
            let lf = |r| eval_log_weight(p, r);
            let f0 = WeightParams { variant: Variant::F0, ..*p };
            let lf0 = |r| eval_log_weight(&f0, r);
            let lhs = log_weight_diff(p, a, b, gap) + log_pow(b, 1.0 - nu);
            let dp = log_pow(d, 1.0 - nu);
            out.push(InequalityReport::new(Inequality::Lipschitz, lhs, dp + lf(d)? + lf(b)?, region, 1.0));
            if a.min(d) <= b {
                let rhs = c.ln() + dp + nu * lf0(d)? + lf(b)?;
                out.push(InequalityReport::new(Inequality::LipschitzNearShift, lhs, rhs, region, c));
            }
            if a.min(b) <= d {
                let rhs = c.ln() + dp + lf(d)? + nu * lf0(b)?;
                out.push(InequalityReport::new(Inequality::LipschitzFarShift, lhs, rhs, region, c));
            }
        }
        Variant::FTilde => {
            let r = ScaledRadii::new(p, a, b, d, gap)?;
            series_difference_reports(nu, &r, region, &mut out)?;
        }
        Variant::FCap => return Err(Error::InvalidInput("no difference inequality for the antiderivative weight".into())),
    }
    Ok(out)
}

/// Series radii after scaling by `ρ^{1/ν}`, with their moment sums.
struct ScaledRadii {
    a: f64,
    b: f64,
    d: f64,
    gap: f64,
    sa: SeriesSums,
    sb: SeriesSums,
    sd: SeriesSums,
}

impl ScaledRadii {
    fn new(p: &WeightParams, a: f64, b: f64, d: f64, gap: f64) -> Result<Self> {
        let s = p.series_scale();
        let (a, b, d, gap) = (s * a, s * b, s * d, s * gap);
        Ok(ScaledRadii { a, b, d, gap, sa: series_sums(a, p.nu)?, sb: series_sums(b, p.nu)?, sd: series_sums(d, p.nu)? })
    }
}

fn series_product_reports(nu: f64, r: &ScaledRadii, region: Region, out: &mut Vec<InequalityReport>) {
    let (la, lb, ld) = (r.sa.plain, r.sb.plain, r.sd.plain);
    out.push(InequalityReport::new(Inequality::SeriesSubmultiplicative, la, ld + lb, region, 1.0));
    if r.a.min(r.b) <= r.d {
        out.push(InequalityReport::new(Inequality::SeriesShifted, la, ld + r.b.powf(nu), region, 1.0));
    }
}

fn series_difference_reports(nu: f64, r: &ScaledRadii, region: Region, out: &mut Vec<InequalityReport>) -> Result<()> {
    let ScaledRadii { a, b, d, gap, .. } = *r;
    let c = if a <= d && d <= b { 2f64.powf(1.0 - nu) } else { 1.0 };
    let diff = if gap >= 0.0 { log_series_diff(a, b, gap, nu)? } else { log_series_diff(b, a, -gap, nu)? };
    let lb = r.sb.plain;
    let lhs = diff + log_pow(b, 1.0 - nu);
    let dp = log_pow(d, 1.0 - nu);
    if a <= b {
        out.push(InequalityReport::new(Inequality::SeriesOneSided, lhs, d.ln() + lb, region, 1.0));
    }
    out.push(InequalityReport::new(Inequality::SeriesLipschitz, lhs, dp + r.sd.plain + lb, region, 1.0));
    if a.min(d) <= b {
        let rhs = dp + log_expm1(d.powf(nu)) + lb;
        out.push(InequalityReport::new(Inequality::SeriesLipschitzNearShift, lhs, rhs, region, 1.0));
    }
    if a.min(b) <= d {
        let rhs = c.ln() + dp + r.sd.tail + b.powf(nu);
        out.push(InequalityReport::new(Inequality::SeriesLipschitzFarShift, lhs, rhs, region, c));
    }
    Ok(())
}

fn series_bound_reports(nu: f64, x: f64, a: f64, sx: &SeriesSums, sa: &SeriesSums) -> Vec<InequalityReport> {
    let lx = x.ln();
    let (plain, jm, jp, anti) = (sx.plain, sx.j, sx.j_plus_one, sx.antiderivative);
    let deriv = jm - lx;
    let r = Region::Pointwise;
    let lower = sa.antiderivative + (nu - 1.0) * x.max(a).ln() + (x.powf(nu) - a.powf(nu)) / nu;
    vec![
        InequalityReport::new(Inequality::MomentUpper, jm, nu * lx + plain, r, 1.0),
        InequalityReport::new(Inequality::MomentLower, nu * lx + plain, jp, r, 1.0),
        InequalityReport::new(Inequality::AntiderivativeBound, anti, (1.0 - nu) * lx + plain, r, 1.0),
        InequalityReport::new(Inequality::LogDerivativeUpper, deriv - plain, (nu - 1.0) * lx, r, 1.0),
        InequalityReport::new(Inequality::LogDerivativeLower, (nu - 1.0) * lx, plain - anti, r, 1.0),
        InequalityReport::new(Inequality::DerivativeGrowth, nu * lx + plain, jp, r, 1.0),
        InequalityReport::new(Inequality::SandwichLower, lower, plain, r, 1.0),
        InequalityReport::new(Inequality::SandwichUpper, plain, x.powf(nu) / nu, r, 1.0),
    ]
}

/// One-variable comparisons between the series weight, its moments, its antiderivative
/// and `exp(|ξ|^ν/ν)`, at unit ρ and radius `x > 0`; `a > 0` is the sandwich anchor.
pub fn check_series_bounds(nu: f64, x: f64, a: f64) -> Result<Vec<InequalityReport>> {
    if !(x > 0.0 && a > 0.0) {
        return Err(Error::InvalidInput("radius and anchor must be positive".into()));
    }
    Ok(series_bound_reports(nu, x, a, &series_sums(x, nu)?, &series_sums(a, nu)?))
}

/// Every series check for one pair: product, difference, and the one-variable bounds at
/// `ρ^{1/ν}|ξ|` anchored at `ρ^{1/ν}|η|`.
pub fn check_series_pair(p: &WeightParams, xi: &[f64], eta: &[f64]) -> Result<Vec<InequalityReport>> {
    if p.variant != Variant::FTilde {
        return Err(Error::InvalidInput("series checks need the series weight".into()));
    }
    let Radii { a, b, d, gap, region } = radii(xi, eta)?;
    let r = ScaledRadii::new(p, a, b, d, gap)?;
    let mut out = Vec::with_capacity(14);
    series_product_reports(p.nu, &r, region, &mut out);
    series_difference_reports(p.nu, &r, region, &mut out)?;
    if r.a > 0.0 && r.b > 0.0 {
        out.extend(series_bound_reports(p.nu, r.a, r.b, &r.sa, &r.sb));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    pub log_a: Vec<f64>,
    pub log_b: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn a(&self, j: usize) -> f64 {
        self.log_a[j].exp()
    }
    pub fn b(&self, k: usize) -> f64 {
        self.log_b[k].exp()
    }
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `a_j = (j!)^{-1/ν}` and `b_k` with `b_k² = Σ_{j≤2k} a_j a_{2k−j}`, in log space.
pub fn series_coefficients(nu: f64, j_max: usize) -> SeriesCoefficients {
    let full: Vec<f64> = (0..=2 * j_max).map(|j| -ln_factorial(j) / nu).collect();
    let log_b = (0..=j_max)
        .map(|k| 0.5 * log_sum_exp((0..=2 * k).map(|j| full[j] + full[2 * k - j])))
        .collect();
    SeriesCoefficients { log_a: full[..=j_max].to_vec(), log_b }
}

/// Ratio of the series weight to its large-argument asymptotic form.
pub fn asymptotic_ratio(p: &WeightParams, r: f64) -> Result<f64> {
    if p.variant != Variant::FTilde {
        return Err(Error::InvalidInput("asymptotic ratio needs the series weight".into()));
    }
    let nu = p.nu;
    let x = p.series_scale() * r;
    if x <= 0.0 {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    let lf = log_series(x, nu, Moment::Plain)?;
    let la = (nu - 1.0) / (2.0 * nu) * (2.0 * PI).ln() + 0.5 * nu.ln() + 0.5 * (nu - 1.0) * x.ln() + x.powf(nu) / nu;
    Ok((lf - la).exp())
}

/// Surface measure of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / ln_gamma(n as f64 / 2.0).exp()
}

/// Product-algebra constant: the square root of
/// `∫ f̄(η)^{-2}(1 + 2^{2k} f₀(η)^{2ν}) dη` with `f̄ = f·(|η|_>^{k_high} + |η|_<^{k_low})`.
pub fn algebra_constant(p: &WeightParams, k_low: f64, k_high: f64, n: usize) -> Result<f64> {
    algebra_constant_with_tol(p, k_low, k_high, n, 1e-12)
}

pub fn algebra_constant_with_tol(p: &WeightParams, k_low: f64, k_high: f64, n: usize, tol: f64) -> Result<f64> {
    let nf = n as f64;
    if p.nu >= 1.0 {
        return Err(Error::DivergentIntegral("large-frequency tail does not decay for nu = 1".into()));
    }
    if k_low >= nf / 2.0 || k_low < 0.0 {
        return Err(Error::DivergentIntegral(format!("k_low = {k_low} must lie in [0, n/2)")));
    }
    if p.rho <= 0.0 {
        return Err(Error::DivergentIntegral("rho must be positive".into()));
    }
    if !matches!(p.variant, Variant::F | Variant::F0) {
        return Err(Error::InvalidInput("algebra constant defined for f or f0".into()));
    }
    let (rho, nu) = (p.rho, p.nu);
    let k = k_low.max(k_high);
    let c4 = 4f64.powf(k);
    let tol = Tolerance { abs: tol * 1e-3, rel: tol, max_intervals: 20_000 };
    let lw = |r: f64| match p.variant {
        Variant::F => rho * r.powf(nu).max(1.0),
        _ => rho * r.powf(nu),
    };
    let q = 1.0 / (nf - 2.0 * k_low);
    let low = quad::integrate(
        |u: f64| {
            let r = u.powf(q);
            q * (-2.0 * lw(r)).exp() * (1.0 + c4 * (2.0 * nu * rho * r.powf(nu)).exp())
        },
        0.0,
        1.0,
        tol,
    );
    let ex = (nf - 2.0 * k_high) / nu - 1.0;
    let mut high = 0.0;
    let mut converged = low.converged;
    let mut lo = 1.0;
    loop {
        let r = quad::integrate(
            |u: f64| u.powf(ex) / nu * ((-2.0 * rho * u).exp() + c4 * (-2.0 * rho * (1.0 - nu) * u).exp()),
            lo,
            2.0 * lo,
            tol,
        );
        converged &= r.converged;
        high += r.value;
        if r.value.abs() < 1e-18 * high.abs() || lo > 1e7 {
            break;
        }
        lo *= 2.0;
    }
    if !converged {
        return Err(Error::Quadrature("algebra constant did not converge".into()));
    }
    let c2 = sphere_area(n) * (low.value + high);
    Ok(c2.sqrt())
}

/// Draws a pair (ξ, η) in ℝⁿ following the sampling rule of the inequality suites.
pub fn sample_pair<R: Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    const SCALES: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
    let s = SCALES[rng.gen_range(0..4)];
    let xi: Vec<f64> = (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
    let eta: Vec<f64> = if rng.gen_bool(0.25) {
        let eps = [1e-6, 1e-3, 1e-1][rng.gen_range(0..3)] * s;
        xi.iter().map(|x| x + eps * rng.sample::<f64, _>(StandardNormal)).collect()
    } else {
        let s2 = SCALES[rng.gen_range(0..4)];
        (0..n).map(|_| s2 * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    (xi, eta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub rho: f64,
    pub nu: f64,
    pub n: usize,
    pub variant: Variant,
    pub pairs: usize,
    pub checks: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub worst: Option<InequalityReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuiteKind {
    /// Product and difference estimates for `f` and `f₀`.
    Weights,
    /// Product and difference estimates for the series weight plus the one-variable bounds.
    Series,
}

/// Randomized sweep over (ρ, ν, n) cells; each cell has its own deterministic stream.
pub fn run_suite(kind: SuiteKind, rhos: &[f64], nus: &[f64], dims: &[usize], pairs: usize, seed: u64) -> Result<Vec<CellSummary>> {
    let variants: &[Variant] = match kind {
        SuiteKind::Weights => &[Variant::F, Variant::F0],
        SuiteKind::Series => &[Variant::FTilde],
    };
    let mut cells = Vec::new();
    for &variant in variants {
        for &rho in rhos {
            for &nu in nus {
                for &n in dims {
                    cells.push((variant, rho, nu, n));
                }
            }
        }
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(idx, &(variant, rho, nu, n))| {
            let p = WeightParams::new(rho, nu, variant)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx as u64));
            let mut s = CellSummary { rho, nu, n, variant, pairs, checks: 0, violations: 0, worst_margin: f64::INFINITY, worst: None };
            let record = |reps: Vec<InequalityReport>, s: &mut CellSummary| {
                for r in reps {
                    s.checks += 1;
                    if !r.satisfied {
                        s.violations += 1;
                    }
                    let m = if r.log_lhs == f64::NEG_INFINITY { f64::INFINITY } else { r.margin() };
                    if m < s.worst_margin {
                        s.worst_margin = m;
                        s.worst = Some(r);
                    }
                }
            };
            for _ in 0..pairs {
                let (xi, eta) = sample_pair(&mut rng, n);
                if kind == SuiteKind::Series {
                    record(check_series_pair(&p, &xi, &eta)?, &mut s);
                } else {
                    record(check_submultiplicative(&p, &xi, &eta)?, &mut s);
                    record(check_lipschitz_family(&p, &xi, &eta)?, &mut s);
                }
            }
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(rho: f64, nu: f64, v: Variant) -> WeightParams {
        WeightParams::new(rho, nu, v).unwrap()
    }

    #[test]
    fn closed_values() {
        assert_eq!(eval_weight(&w(1.0, 0.5, Variant::F0), 0.0).unwrap(), 1.0);
        assert!((eval_weight(&w(1.0, 0.5, Variant::F), 0.0).unwrap() - std::f64::consts::E).abs() < 1e-15);
        assert!((eval_weight(&w(1.0, 0.5, Variant::F0), 4.0).unwrap() - 7.389_056_098_930_65).abs() < 1e-12);
        for x in [0.0, 0.3, 1.0, 7.5, 40.0, 300.0] {
            let l = eval_log_weight(&w(1.0, 1.0, Variant::FTilde), x).unwrap();
            assert!((l - x).abs() < 1e-13 * (1.0 + x), "{x}: {l}");
        }
    }

    #[test]
    fn antiderivative_at_unit_nu() {
        for x in [0.1, 2.0, 30.0] {
            let l = eval_log_weight(&w(1.0, 1.0, Variant::FCap), x).unwrap();
            let exact = f64::exp_m1(x).ln();
            assert!((l - exact).abs() < 1e-12 * (1.0 + x));
        }
        assert_eq!(eval_weight(&w(1.0, 0.5, Variant::FCap), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn overflow_signalled() {
        let p = w(2.0, 1.0, Variant::F0);
        assert!(matches!(eval_weight(&p, 1e3), Err(Error::WeightOverflow(_))));
        assert!(eval_log_weight(&p, 1e3).is_ok());
    }

    #[test]
    fn series_matches_direct_sum() {
        for nu in [0.25, 0.5, 0.75] {
            for x in [0.5, 3.0, 12.0] {
                let mut s = 0.0;
                for j in 0..200 {
                    s += (j as f64 * f64::ln(x) - ln_factorial(j) / nu).exp();
                }
                let l = log_series(x, nu, Moment::Plain).unwrap();
                assert!((l - s.ln()).abs() < 1e-13, "{nu} {x}");
            }
        }
    }

    #[test]
    fn binomial_coefficients_at_unit_nu() {
        let c = series_coefficients(1.0, 40);
        assert_eq!(c.a(0), 1.0);
        assert_eq!(c.b(0), 1.0);
        for k in 0..=40 {
            let exact = 0.5 * (2.0 * k as f64 * 2f64.ln() - ln_factorial(2 * k));
            assert!((c.log_b[k] - exact).abs() < 1e-12, "{k} {} {exact}", c.log_b[k]);
        }
    }

    #[test]
    fn trivial_pairs() {
        let p = w(1.0, 0.5, Variant::F);
        let xi = [0.7, -1.3];
        let r = check_submultiplicative(&p, &xi, &[0.0, 0.0]).unwrap();
        assert!(r.iter().all(|r| r.satisfied));
        let r = check_submultiplicative(&p, &xi, &xi).unwrap();
        assert!(r[0].satisfied);
        let r = check_lipschitz_family(&p, &xi, &xi).unwrap();
        assert!(r.iter().all(|r| r.lhs == 0.0 && r.satisfied));
        let r = check_lipschitz_family(&p, &xi, &[0.0, 0.0]).unwrap();
        assert!(r.iter().all(|r| r.lhs == 0.0));
    }

    #[test]
    fn middle_region_constant() {
        let p = w(1.0, 0.5, Variant::F0);
        let r = check_lipschitz_family(&p, &[1.0], &[2.5]).unwrap();
        assert!(r.iter().filter(|r| r.which != Inequality::Lipschitz).all(|r| r.constant_used == 2f64.sqrt()));
        assert_eq!(r[0].region, Region::ShiftMiddle);
    }

    #[test]
    fn algebra_constant_gates() {
        let p = w(1.0, 0.5, Variant::F);
        assert!(matches!(algebra_constant(&p, 0.5, 1.0, 1), Err(Error::DivergentIntegral(_))));
        let p1 = w(1.0, 1.0, Variant::F);
        assert!(matches!(algebra_constant(&p1, 0.25, 1.0, 1), Err(Error::DivergentIntegral(_))));
        let c = algebra_constant(&p, 0.25, 1.0, 1).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
