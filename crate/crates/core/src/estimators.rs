//! Estimating functions `h`, `N_m`, `Q_m`, `P_m` built from `h₀′`, the relations between
//! them, and the `ρ(t)` and decay schedules used by the asymptotic solver.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_geometric, integrate_to_infinity, Tolerance};
use crate::timefn::{Powers, Table, TimeFn};

pub const TABLE_T_MAX: f64 = 1e7;
pub const TABLE_PER_DECADE: usize = 200;

/// Derivative `h₀′` of the basic time weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum H0Spec {
    /// `h₀′ = t^{−γ}`.
    PowerLaw { gamma: f64 },
    /// Positive samples of `h₀′`, interpolated linearly in log-log coordinates and
    /// continued by the last segment's power law.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl H0Spec {
    pub fn power_law(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma = {gamma} outside (0, 1]")));
        }
        Ok(H0Spec::PowerLaw { gamma })
    }

    fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
        let n = times.len();
        let seg = match times.iter().position(|&x| x > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
        .min(n - 2);
        let (t0, t1) = (times[seg].ln(), times[seg + 1].ln());
        let (v0, v1) = (values[seg].ln(), values[seg + 1].ln());
        (v0 + (v1 - v0) * (t.ln() - t0) / (t1 - t0)).exp()
    }

    /// `h₀′` as a time function.
    pub fn hprime(&self) -> Result<TimeFn> {
        match self {
            H0Spec::PowerLaw { gamma } => Ok(TimeFn::Powers(Powers::power(1.0, -gamma))),
            H0Spec::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(Error::InvalidInput("tabulated h0' needs at least two matching samples".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) || times[0] > 1.0 {
                    return Err(Error::InvalidInput("tabulated times must increase and start at or before 1".into()));
                }
                if values.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidInput("tabulated h0' must be positive".into()));
                }
                let tb = Table::from_fn(|t| H0Spec::interpolate(times, values, t), TABLE_T_MAX, TABLE_PER_DECADE)?;
                Ok(TimeFn::Table(tb))
            }
        }
    }
}

/// `h₀′`, `h₀` (with `h₀(1) = 0`), `h` and `N_m`, `Q_m`, `P_m` for `m ≤ m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimators {
    pub hprime: TimeFn,
    pub h0: TimeFn,
    pub h: TimeFn,
    pub n: Vec<TimeFn>,
    pub q: Vec<TimeFn>,
    /// `None` where `P_m(1)` diverges.
    pub p: Vec<Option<TimeFn>>,
}

fn tail_exponent(f: &TimeFn) -> Option<(f64, u32)> {
    match f {
        TimeFn::Powers(p) => p.leading(),
        TimeFn::Table(t) => t.tail.leading(),
    }
}

impl Estimators {
    pub fn new(spec: &H0Spec, m_max: usize) -> Result<Self> {
        if m_max > 6 {
            return Err(Error::InvalidInput(format!("m_max = {m_max} exceeds 6")));
        }
        let hprime = spec.hprime()?;
        if let Some((a, _)) = tail_exponent(&hprime) {
            if a >= 0.0 {
                return Err(Error::InvalidInput(format!("t^-1 h0' not integrable: tail exponent {a}")));
            }
        }
        let inv_t = TimeFn::Powers(Powers::power(1.0, -1.0));
        let h0 = hprime.integral_from_one();
        let h = inv_t.mul(&h0)?.add(&inv_t.mul(&hprime)?.tail_integral()?)?;
        let mut n = Vec::with_capacity(m_max + 2);
        let mut q = Vec::with_capacity(m_max + 2);
        let mut p = Vec::with_capacity(m_max + 2);
        let mut hm = TimeFn::Powers(Powers::constant(1.0));
        // one level beyond m_max so that N_{m+1} and Q_{m+1} are available to the checks
        for m in 0..=m_max + 1 {
            let g = hprime.mul(&hm)?;
            let nm = g.integral_from_one();
            let qm = inv_t.mul(&nm)?.add(&inv_t.mul(&g)?.tail_integral()?)?;
            let pm = match g.mul(&h)?.tail_integral() {
                Ok(tail) => Some(h.mul(&nm)?.add(&tail)?),
                Err(Error::TailDiverges(_)) => None,
                Err(e) => return Err(e),
            };
            n.push(nm);
            q.push(qm);
            p.push(pm);
            if m <= m_max {
                hm = hm.mul(&h)?;
            }
        }
        Ok(Estimators { hprime, h0, h, n, q, p })
    }

    pub fn m_max(&self) -> usize {
        self.n.len() - 2
    }

    /// `Q_m` with `Q_{−1} = 1`.
    pub fn q_at(&self, m: i64, t: f64) -> f64 {
        if m < 0 {
            1.0
        } else {
            self.q[m as usize].eval(t)
        }
    }

    pub fn p_finite(&self, m: usize) -> Result<&TimeFn> {
        self.p[m].as_ref().ok_or(Error::PInfinite(m))
    }
}

/// Estimating functions sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTable {
    pub time_grid: Vec<f64>,
    pub h: Vec<f64>,
    pub n: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Option<Vec<f64>>>,
}

/// Logarithmic grid on `[t0, t1]` with `per_decade` points per decade.
pub fn log_grid(t0: f64, t1: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t1 / t0).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n).map(|i| t0 * 10f64.powf(decades * i as f64 / n as f64)).collect()
}

pub fn compute_table(spec: &H0Spec, m_max: usize, time_grid: &[f64]) -> Result<EstimatorTable> {
    if time_grid.iter().any(|&t| !(1.0..=1e6).contains(&t)) || time_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("time grid must increase within [1, 1e6]".into()));
    }
    let e = Estimators::new(spec, m_max)?;
    let sample = |f: &TimeFn| time_grid.iter().map(|&t| f.eval(t)).collect::<Vec<f64>>();
    Ok(EstimatorTable {
        time_grid: time_grid.to_vec(),
        h: sample(&e.h),
        n: e.n[..=m_max].iter().map(sample).collect(),
        q: e.q[..=m_max].iter().map(sample).collect(),
        p: e.p[..=m_max].iter().map(|p| p.as_ref().map(sample)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub name: String,
    pub holds: bool,
}

impl EstimatorTable {
    /// Monotonicity of `h`, `th`, `N_m`, `Q_m`, `tQ_m`, `P_m`, `P_m/h` along the grid.
    pub fn monotonicity(&self) -> Vec<MonotonicityCheck> {
        let t = &self.time_grid;
        let slack = |a: f64| 1e-13 * a.abs();
        let dec = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + slack(w[0]));
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] - slack(w[0]));
        let times = |v: &[f64]| v.iter().zip(t).map(|(a, b)| a * b).collect::<Vec<f64>>();
        let mut out = vec![
            MonotonicityCheck { name: "h decreasing".into(), holds: dec(&self.h) },
            MonotonicityCheck { name: "t h increasing".into(), holds: inc(&times(&self.h)) },
        ];
        for (m, n) in self.n.iter().enumerate() {
            out.push(MonotonicityCheck { name: format!("N_{m} increasing"), holds: inc(n) });
        }
        for (m, q) in self.q.iter().enumerate() {
            out.push(MonotonicityCheck { name: format!("Q_{m} decreasing"), holds: dec(q) });
            out.push(MonotonicityCheck { name: format!("t Q_{m} increasing"), holds: inc(&times(q)) });
        }
        for (m, p) in self.p.iter().enumerate() {
            if let Some(p) = p {
                let ratio: Vec<f64> = p.iter().zip(&self.h).map(|(a, b)| a / b).collect();
                out.push(MonotonicityCheck { name: format!("P_{m} decreasing"), holds: dec(p) });
                out.push(MonotonicityCheck { name: format!("P_{m}/h increasing"), holds: inc(&ratio) });
            }
        }
        out
    }

    /// Columns `t, h, N_0.., Q_0.., P_0..` (empty cells where `P_m` diverges).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,h");
        for m in 0..self.n.len() {
            let _ = write!(s, ",N_{m}");
        }
        for m in 0..self.q.len() {
            let _ = write!(s, ",Q_{m}");
        }
        for m in 0..self.p.len() {
            let _ = write!(s, ",P_{m}");
        }
        s.push('\n');
        for (i, t) in self.time_grid.iter().enumerate() {
            let _ = write!(s, "{t:.17e},{:.17e}", self.h[i]);
            for n in &self.n {
                let _ = write!(s, ",{:.17e}", n[i]);
            }
            for q in &self.q {
                let _ = write!(s, ",{:.17e}", q[i]);
            }
            for p in &self.p {
                match p {
                    Some(p) => {
                        let _ = write!(s, ",{:.17e}", p[i]);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// The relations among the estimating functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// `∫ₜ^∞ s⁻²N_m = Q_m(t)`.
    TailOfN,
    /// `∫₁ᵗ s⁻²N₀N_m = N_{m+1}(t) − h(t)N_m(t)`.
    HeadOfProduct,
    /// `N_{m+1} − hN_m ≤ N_{m+1}`.
    HeadOfProductBound,
    /// `∫ₜ^∞ s⁻²N₀N_m = P_m(t)`.
    TailOfProduct,
    /// `N_iN_j ≤ N₀N_{i+j}`.
    NProduct,
    /// `N_iQ_j ≤ hN_{i+j}`.
    NQProduct,
    /// `hN_{i+j} ≤ N_{i+j+1}`.
    NQProductShift,
    /// `Q_iQ_j ≤ hQ_{i+j}`.
    QProduct,
    /// `hQ_{i+j} ≤ 2Q_{i+j+1}`.
    QProductShift,
    /// `∫ₜ^∞ h₀′hQ_{m−1} ≤ ∫ₜ^∞ h₀′Q_m`.
    TailLowering,
    /// `∫ₜ^∞ h₀′Q_m ≤ P_m(t)`.
    TailByP,
    /// `∫₁ᵗ h₀′hQ_{m−1} ≤ N_{m+1}(t)`.
    HeadLowering,
    /// `∫₁ᵗ h₀′Q_m ≤ N_{m+1}(t)`.
    HeadByN,
    /// `∫_a^b h₀′Q_m ≤ Q_m(a)(h₀(b) − h₀(a))`.
    WindowBound,
    /// `∫_a^b h₀′hQ_{m−1} ≤ 2Q_m(a)(h₀(b) − h₀(a))`.
    WindowLowering,
    /// `N_{i+j} ≤ h(1)^i N_j ≤ h(1)^{i+j} N₀`.
    NIndexShift,
    /// `Q_{i+j} ≤ h(1)^i Q_j ≤ h(1)^{i+j} h ≤ h(1)^{i+j+1}`.
    QIndexShift,
    /// `P_m(1)h(t) ≤ h(1)P_m(t) ≤ h(1)P_m(1)`.
    PSandwich,
    /// `t₂⁻¹h₀(t₂) − t₁⁻¹h₀(t₁) = ∫ t⁻¹h₀′ − ∫ t⁻²h₀`.
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub relation: Relation,
    pub identity: bool,
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub t: f64,
    pub t2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const IDENTITY_TOL: f64 = 1e-6;
pub const INEQUALITY_SLACK: f64 = 1e-9;
/// Extra relative slack for tabulated `h₀′`, whose estimators carry interpolation error.
pub const TABLE_REL_SLACK: f64 = 1e-8;
/// Identities between quantities that both vanish are compared absolutely.
const ZERO_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub checks: Vec<RelationCheck>,
}

impl RelationReport {
    pub fn failures(&self) -> impl Iterator<Item = &RelationCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    /// Largest relative defect among identities.
    pub fn worst_identity_error(&self) -> f64 {
        self.checks.iter().filter(|c| c.identity).map(|c| rel_err(c.lhs, c.rhs)).fold(0.0, f64::max)
    }
}

/// Relative defect, with values below the zero floor compared absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs()) + ZERO_FLOOR / IDENTITY_TOL)
}

struct Checker<'a> {
    e: &'a Estimators,
    tol: Tolerance,
    table_slack: f64,
    out: Vec<RelationCheck>,
}

impl Checker<'_> {
    fn push(&mut self, relation: Relation, identity: bool, (i, j, m): (usize, usize, usize), t: f64, t2: f64, lhs: f64, rhs: f64) {
        let holds = if identity {
            rel_err(lhs, rhs) <= IDENTITY_TOL
        } else {
            lhs <= rhs + INEQUALITY_SLACK + self.table_slack * rhs.abs()
        };
        self.out.push(RelationCheck { relation, identity, i, j, m, t, t2, lhs, rhs, holds });
    }

    fn head<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        integrate_geometric(f, a, b, self.tol).value
    }

    fn tail<F: Fn(f64) -> f64>(&self, f: F, a: f64) -> f64 {
        integrate_to_infinity(f, a, self.tol).value
    }
}

/// Checks every relation at the sample times, for all `i, j, m` with `i + j ≤ m_max`,
/// and the window bounds on the `(a, b)` pairs. Integrals are computed by quadrature of
/// the pointwise values, independently of the closed forms.
pub fn verify_relations(e: &Estimators, sample_times: &[f64], a_b_pairs: &[(f64, f64)]) -> Result<RelationReport> {
    let mm = e.m_max();
    let table_slack = if e.hprime.is_exact() { 0.0 } else { TABLE_REL_SLACK };
    let mut c = Checker { e, tol: Tolerance::new(1e-14, 1e-11), table_slack, out: Vec::new() };
    let h1 = e.h.eval(1.0);
    for &t in sample_times {
        if t < 1.0 {
            return Err(Error::InvalidInput(format!("sample time {t} below 1")));
        }
        let ev = |f: &TimeFn| f.eval(t);
        let h = ev(&e.h);
        for m in 0..=mm {
            let nm = |s: f64| c.e.n[m].eval(s);
            let n0 = |s: f64| c.e.n[0].eval(s);
            let lhs = c.tail(|s| nm(s) / (s * s), t);
            c.push(Relation::TailOfN, true, (0, 0, m), t, t, lhs, ev(&e.q[m]));
            let lhs = c.head(|s| n0(s) * nm(s) / (s * s), 1.0, t);
            let rhs = ev(&e.n[m + 1]) - h * ev(&e.n[m]);
            c.push(Relation::HeadOfProduct, true, (0, 0, m), t, t, lhs, rhs);
            c.push(Relation::HeadOfProductBound, false, (0, 0, m), t, t, rhs, ev(&e.n[m + 1]));
            if let Some(pm) = &e.p[m] {
                let lhs = c.tail(|s| n0(s) * nm(s) / (s * s), t);
                c.push(Relation::TailOfProduct, true, (0, 0, m), t, t, lhs, pm.eval(t));
            }
            let hp = |s: f64| c.e.hprime.eval(s);
            let tail_lower = c.tail(|s| hp(s) * c.e.h.eval(s) * c.e.q_at(m as i64 - 1, s), t);
            let tail_q = c.tail(|s| hp(s) * c.e.q[m].eval(s), t);
            c.push(Relation::TailLowering, false, (0, 0, m), t, t, tail_lower, tail_q);
            if let Some(pm) = &e.p[m] {
                c.push(Relation::TailByP, false, (0, 0, m), t, t, tail_q, pm.eval(t));
            }
            let head_lower = c.head(|s| hp(s) * c.e.h.eval(s) * c.e.q_at(m as i64 - 1, s), 1.0, t);
            c.push(Relation::HeadLowering, false, (0, 0, m), t, t, head_lower, ev(&e.n[m + 1]));
            let head_q = c.head(|s| hp(s) * c.e.q[m].eval(s), 1.0, t);
            c.push(Relation::HeadByN, false, (0, 0, m), t, t, head_q, ev(&e.n[m + 1]));
            if let Some(pm) = &e.p[m] {
                let p1 = pm.eval(1.0);
                let pt = pm.eval(t);
                c.push(Relation::PSandwich, false, (0, 0, m), t, t, p1 * h, h1 * pt);
                c.push(Relation::PSandwich, false, (0, 0, m), t, t, h1 * pt, h1 * p1);
            }
        }
        for i in 0..=mm {
            for j in 0..=mm - i {
                let idx = (i, j, i + j);
                let (ni, nj, nij) = (ev(&e.n[i]), ev(&e.n[j]), ev(&e.n[i + j]));
                let (qi, qj, qij) = (ev(&e.q[i]), ev(&e.q[j]), ev(&e.q[i + j]));
                c.push(Relation::NProduct, false, idx, t, t, ni * nj, ev(&e.n[0]) * nij);
                c.push(Relation::NQProduct, false, idx, t, t, ni * qj, h * nij);
                c.push(Relation::NQProductShift, false, idx, t, t, h * nij, ev(&e.n[i + j + 1]));
                c.push(Relation::QProduct, false, idx, t, t, qi * qj, h * qij);
                c.push(Relation::QProductShift, false, idx, t, t, h * qij, 2.0 * ev(&e.q[i + j + 1]));
                let hi = h1.powi(i as i32);
                c.push(Relation::NIndexShift, false, idx, t, t, nij, hi * nj);
                c.push(Relation::NIndexShift, false, idx, t, t, hi * nj, hi * h1.powi(j as i32) * ev(&e.n[0]));
                c.push(Relation::QIndexShift, false, idx, t, t, qij, hi * qj);
                c.push(Relation::QIndexShift, false, idx, t, t, hi * qj, h1.powi((i + j) as i32) * h);
                c.push(Relation::QIndexShift, false, idx, t, t, h1.powi((i + j) as i32) * h, h1.powi((i + j + 1) as i32));
            }
        }
    }
    for &(a, b) in a_b_pairs {
        if !(1.0 <= a && a <= b) {
            return Err(Error::InvalidInput(format!("window ({a}, {b}) needs 1 <= a <= b")));
        }
        let dh = e.h0.eval(b) - e.h0.eval(a);
        let hp = |s: f64| c.e.hprime.eval(s);
        for m in 0..=mm {
            let qa = e.q[m].eval(a);
            let lhs = c.head(|s| hp(s) * c.e.q[m].eval(s), a, b);
            c.push(Relation::WindowBound, false, (0, 0, m), a, b, lhs, qa * dh);
            let lhs = c.head(|s| hp(s) * c.e.h.eval(s) * c.e.q_at(m as i64 - 1, s), a, b);
            c.push(Relation::WindowLowering, false, (0, 0, m), a, b, lhs, 2.0 * qa * dh);
        }
        let lhs = e.h0.eval(b) / b - e.h0.eval(a) / a;
        let i1 = c.head(|s| hp(s) / s, a, b);
        let i2 = c.head(|s| c.e.h0.eval(s) / (s * s), a, b);
        if b > a {
            c.push(Relation::Reconstruction, true, (0, 0, 0), a, b, lhs, i1 - i2);
        }
    }
    Ok(RelationReport { checks: c.out })
}

/// `|ρ′|` as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RhoPrime {
    /// `amp·t^{−1−ε}`.
    Power { amp: f64, eps: f64 },
    /// `amp·t⁻¹(α + ln t)^{−α}`, `α > 1`.
    LogPower { amp: f64, alpha: f64 },
}

impl RhoPrime {
    fn validate(&self) -> Result<()> {
        match *self {
            RhoPrime::Power { amp, eps } if amp > 0.0 && eps > 0.0 => Ok(()),
            RhoPrime::LogPower { amp, alpha } if amp > 0.0 && alpha > 1.0 => Ok(()),
            _ => Err(Error::InvalidInput(format!("|rho'| not integrable or not positive: {self:?}"))),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            RhoPrime::Power { amp, eps } => amp * t.powf(-1.0 - eps),
            RhoPrime::LogPower { amp, alpha } => amp / t * (alpha + t.ln()).powf(-alpha),
        }
    }

    /// `∫ₜ^∞ |ρ′|`.
    pub fn tail(&self, t: f64) -> f64 {
        match *self {
            RhoPrime::Power { amp, eps } => amp * t.powf(-eps) / eps,
            RhoPrime::LogPower { amp, alpha } => amp * (alpha + t.ln()).powf(1.0 - alpha) / (alpha - 1.0),
        }
    }

    /// `t^{−γ}|ρ′|⁻¹` nondecreasing and `t^{−2}|ρ′|⁻¹` nonincreasing on the grid, the
    /// latter also tending to zero.
    pub fn admissible(&self, gamma: f64, grid: &[f64]) -> bool {
        let a: Vec<f64> = grid.iter().map(|&t| t.powf(-gamma) / self.eval(t)).collect();
        let b: Vec<f64> = grid.iter().map(|&t| t.powi(-2) / self.eval(t)).collect();
        let tol = 1e-12;
        a.windows(2).all(|w| w[1] >= w[0] * (1.0 - tol))
            && b.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
            && match *self {
                RhoPrime::Power { eps, .. } => eps < 1.0,
                RhoPrime::LogPower { .. } => true,
            }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Direction {
    /// `ρ(t) = ρ(t₀) − |∫_{t₀}^t |ρ′||`, peaked at `t₀`.
    Decreasing,
    /// `ρ(t) = ρ_∞ − ∫ₜ^∞ |ρ′|`.
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSchedule {
    /// `ρ(t₀)` when decreasing, `ρ_∞` when increasing.
    pub rho_ref: f64,
    pub rho_prime: RhoPrime,
    pub direction: Direction,
    pub t0: f64,
}

impl RhoSchedule {
    pub fn increasing(rho_inf: f64, rho_prime: RhoPrime) -> Result<Self> {
        rho_prime.validate()?;
        Ok(RhoSchedule { rho_ref: rho_inf, rho_prime, direction: Direction::Increasing, t0: f64::INFINITY })
    }

    pub fn decreasing(rho_t0: f64, t0: f64, rho_prime: RhoPrime) -> Result<Self> {
        rho_prime.validate()?;
        if !(t0 >= 1.0 && t0.is_finite()) {
            return Err(Error::InvalidInput(format!("anchor t0 = {t0}")));
        }
        Ok(RhoSchedule { rho_ref: rho_t0, rho_prime, direction: Direction::Decreasing, t0 })
    }

    pub fn rho_at(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::InvalidInput(format!("t = {t} below 1")));
        }
        let rho = match self.direction {
            Direction::Increasing => self.rho_ref - self.rho_prime.tail(t),
            Direction::Decreasing => self.rho_ref - (self.rho_prime.tail(t) - self.rho_prime.tail(self.t0)).abs(),
        };
        if rho < 0.0 {
            return Err(Error::NegativeRho { t, rho });
        }
        Ok(rho)
    }

    /// Signed derivative `ρ′(t)`.
    pub fn rho_prime_at(&self, t: f64) -> f64 {
        let m = self.rho_prime.eval(t);
        match self.direction {
            Direction::Increasing => m,
            Direction::Decreasing if t <= self.t0 => m,
            Direction::Decreasing => -m,
        }
    }
}

/// `coef·t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSchedule {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerSchedule {
    pub fn eval(&self, t: f64) -> f64 {
        self.coef * t.powf(self.exponent)
    }

    /// Same decay with unit prefactor.
    pub fn shape(&self) -> PowerSchedule {
        PowerSchedule { coef: 1.0, exponent: self.exponent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleConstraint {
    /// `h̄₁ ≥ t⁻²ρ′⁻¹h̄₀`.
    PhaseLead,
    /// `h₂ ≥ t⁻²ρ′⁻¹N̄_p`.
    AmplitudeByN,
    /// `h₂ ≥ Q̄_p` (p ≥ 1).
    AmplitudeByQ,
    /// `h₃ ≥ t^{−γ}ρ′⁻¹h₂`.
    PhaseByAmplitude,
    /// `h₁ ≥ t⁻²ρ′⁻¹h₃h₂⁻¹`.
    AmplitudeCorrection,
    /// `h₃ ≥ C·h̄₁` with `C = 1`.
    PhaseDominates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub constraint: ScheduleConstraint,
    /// `min (schedule / required)` over the grid.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// Decay schedules for the Cauchy problem at infinite initial time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub gamma: f64,
    pub epsilon: f64,
    pub p: usize,
    pub rho_prime: RhoPrime,
    pub hbar1: PowerSchedule,
    pub h1: PowerSchedule,
    pub h2: PowerSchedule,
    pub h3: PowerSchedule,
    /// `1 − (p+2)γ + 2ε`, the phase exponent quoted for `(p+1)γ < 1`.
    pub h3_exponent_small_gamma: f64,
    pub report: Vec<ConstraintReport>,
}

/// Range over which the minimal prefactors are taken.
const PREFACTOR_GRID: (f64, f64, usize) = (1.0, 1e12, 40);

/// Saturated power-law schedules for `|ρ′| = amp·t^{−1−ε}`. The amplitude exponent is
/// `min((p+1)γ, 1) − ε`, so the quoted small-`γ` formulas are recovered when
/// `(p+1)γ < 1`. Prefactors are the least constants that satisfy every constraint on a
/// long logarithmic grid, and the constraints are then re-checked on `check_grid`.
pub fn build_schedules(gamma: f64, epsilon: f64, p: usize, rho_prime: RhoPrime, check_grid: &[f64]) -> Result<ScheduleSet> {
    match rho_prime {
        RhoPrime::Power { eps, .. } if (eps - epsilon).abs() < 1e-15 => {}
        _ => return Err(Error::InvalidInput("schedules need |rho'| = amp t^(-1-eps) with the same eps".into())),
    };
    rho_prime.validate()?;
    let pf = (p + 2) as f64;
    if pf * gamma <= 1.0 {
        return Err(Error::ScheduleInfeasible(format!("(p+2) gamma = {} <= 1: h3 cannot decrease", pf * gamma)));
    }
    if 2.0 * epsilon >= pf * gamma - 1.0 {
        return Err(Error::ScheduleInfeasible(format!("2 eps = {} >= (p+2) gamma - 1 = {}", 2.0 * epsilon, pf * gamma - 1.0)));
    }
    let a = ((p + 1) as f64 * gamma).min(1.0);
    let shapes = [-gamma + epsilon, -a + epsilon, 1.0 - gamma - a + 2.0 * epsilon, -gamma + 2.0 * epsilon];
    if shapes.iter().any(|&e| e >= 0.0) {
        return Err(Error::ScheduleInfeasible(format!("non-decaying schedule exponents {shapes:?}")));
    }
    let est = Estimators::new(&H0Spec::power_law(gamma)?, p.max(1))?;
    let inv = |t: f64| 1.0 / rho_prime.eval(t);
    let hbar0 = |t: f64| est.n[0].eval(t);
    let nbar = |t: f64| est.n[p].eval(t);
    let qbar = |t: f64| est.q[p].eval(t);
    let long = log_grid(PREFACTOR_GRID.0, PREFACTOR_GRID.1, PREFACTOR_GRID.2);
    let least = |exponent: f64, req: &dyn Fn(f64) -> f64| {
        long.iter().map(|&t| req(t) / t.powf(exponent)).fold(0.0, f64::max)
    };
    let hbar1 = PowerSchedule { coef: least(shapes[0], &|t| t.powi(-2) * inv(t) * hbar0(t)), exponent: shapes[0] };
    let mut c2 = least(shapes[1], &|t| t.powi(-2) * inv(t) * nbar(t));
    if p >= 1 {
        c2 = c2.max(least(shapes[1], &qbar));
    }
    let h2 = PowerSchedule { coef: c2, exponent: shapes[1] };
    let c3 = least(shapes[2], &|t| t.powf(-gamma) * inv(t) * h2.eval(t)).max(least(shapes[2], &|t| hbar1.eval(t)));
    let h3 = PowerSchedule { coef: c3, exponent: shapes[2] };
    let h1 = PowerSchedule { coef: least(shapes[3], &|t| t.powi(-2) * inv(t) * h3.eval(t) / h2.eval(t)), exponent: shapes[3] };

    let mut report = Vec::new();
    let mut check = |constraint, have: &dyn Fn(f64) -> f64, need: &dyn Fn(f64) -> f64| {
        let worst = check_grid
            .iter()
            .filter(|&&t| need(t) > 0.0)
            .map(|&t| have(t) / need(t))
            .fold(f64::INFINITY, f64::min);
        report.push(ConstraintReport { constraint, worst_ratio: worst, holds: worst >= 1.0 - 1e-12 });
    };
    check(ScheduleConstraint::PhaseLead, &|t| hbar1.eval(t), &|t| t.powi(-2) * inv(t) * hbar0(t));
    check(ScheduleConstraint::AmplitudeByN, &|t| h2.eval(t), &|t| t.powi(-2) * inv(t) * nbar(t));
    if p >= 1 {
        check(ScheduleConstraint::AmplitudeByQ, &|t| h2.eval(t), &qbar);
    }
    check(ScheduleConstraint::PhaseByAmplitude, &|t| h3.eval(t), &|t| t.powf(-gamma) * inv(t) * h2.eval(t));
    check(ScheduleConstraint::AmplitudeCorrection, &|t| h1.eval(t), &|t| t.powi(-2) * inv(t) * h3.eval(t) / h2.eval(t));
    check(ScheduleConstraint::PhaseDominates, &|t| h3.eval(t), &|t| hbar1.eval(t));
    if let Some(bad) = report.iter().find(|r| !r.holds) {
        return Err(Error::ScheduleInfeasible(format!("{:?} fails (ratio {})", bad.constraint, bad.worst_ratio)));
    }
    Ok(ScheduleSet {
        gamma,
        epsilon,
        p,
        rho_prime,
        hbar1,
        h1,
        h2,
        h3,
        h3_exponent_small_gamma: 1.0 - pf * gamma + 2.0 * epsilon,
        report,
    })
}

/// `∫ₜ^∞ f` for a pointwise-defined integrand, used by callers that need a one-off tail.
pub fn tail_quadrature<F: Fn(f64) -> f64>(f: F, t: f64) -> f64 {
    integrate_to_infinity(f, t, Tolerance::new(1e-14, 1e-11)).value
}

/// `∫_a^b f`.
pub fn window_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(f, a, b, Tolerance::new(1e-14, 1e-11)).value
}
