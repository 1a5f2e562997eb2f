//! The amplitude/phase hierarchy solved by successive time integrations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimators, H0Spec};
use crate::spectral::field::C64;
use crate::spectral::norms::{k_norm_at, y_norm_at};
use crate::spectral::ops::{g0, grad_dot, mul_phase, transport_operator};
use crate::spectral::{NormSpec, SpectralField};
use crate::timefn::{Powers, TimeFn};

/// `Σ aᵢ(t) Fᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separable {
    pub terms: Vec<(TimeFn, SpectralField)>,
}

fn same_powers(a: &Powers, b: &Powers) -> bool {
    a.terms.len() == b.terms.len()
        && a.terms.iter().zip(&b.terms).all(|(x, y)| {
            x.k == y.k && (x.a - y.a).abs() < 1e-12 && (x.c - y.c).abs() <= 1e-13 * x.c.abs().max(y.c.abs())
        })
}

impl Separable {
    pub fn empty() -> Self {
        Separable { terms: Vec::new() }
    }

    pub fn constant(f: SpectralField) -> Self {
        Separable { terms: vec![(TimeFn::Powers(Powers::constant(1.0)), f)] }
    }

    /// Adds a term, merging it into an existing one with the same exact time factor.
    pub fn push(&mut self, a: TimeFn, f: SpectralField) {
        if let TimeFn::Powers(p) = &a {
            if p.is_zero() || f.is_zero() {
                return;
            }
            for (b, g) in self.terms.iter_mut() {
                if let TimeFn::Powers(q) = b {
                    if same_powers(p, q) {
                        g.axpy(C64::new(1.0, 0.0), &f);
                        g.real &= f.real;
                        return;
                    }
                }
            }
        }
        self.terms.push((a, f));
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64, template: &SpectralField, real: bool) -> SpectralField {
        let mut out = SpectralField::zeros(template.grid, real);
        for (a, f) in &self.terms {
            out.axpy(C64::new(a.eval(t), 0.0), f);
        }
        out
    }

    pub fn extend(&mut self, o: &Separable) {
        for (a, f) in &o.terms {
            self.push(a.clone(), f.clone());
        }
    }
}

/// How time factors beyond the exact levels are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeQuadrature {
    /// Closed-form powers at every level.
    Exact,
    /// Levels above `exact_levels` are tabulated up to `t_max`, with a power-law tail fitted
    /// to the last decade of each integrand.
    Tabulated { exact_levels: usize, t_max: f64, per_decade: usize },
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature::Tabulated { exact_levels: 1, t_max: 1e7, per_decade: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub p: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    /// Regularity of `w₊`, used for the exponent ladder.
    pub k: f64,
    /// Also build `φ_{p+1}` normalised by `φ_{p+1}(∞) = 0`.
    pub next_phase: bool,
    pub quadrature: TimeQuadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticHierarchy {
    pub config: HierarchyConfig,
    pub w_plus: SpectralField,
    /// `w_0 … w_{p+1}`.
    pub w: Vec<Separable>,
    /// `φ_0 … φ_p`.
    pub phi: Vec<Separable>,
    pub phi_next: Option<Separable>,
    pub time_grid: Vec<f64>,
}

impl HierarchyConfig {
    pub fn lambda(&self, n: usize) -> f64 {
        self.mu - n as f64 + 2.0
    }

    pub fn lambda_bar(&self, n: usize) -> f64 {
        self.lambda(n).max(1.0)
    }

    /// `k_m = k − m λ̄`.
    pub fn k_m(&self, n: usize, m: usize) -> f64 {
        self.k - m as f64 * self.lambda_bar(n)
    }

    /// `ℓ_m = k − m λ̄ − λ`.
    pub fn ell_m(&self, n: usize, m: usize) -> f64 {
        self.k - m as f64 * self.lambda_bar(n) - self.lambda(n)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidInput(format!("gamma = {} outside (0, 1]", self.gamma)));
        }
        if self.next_phase && (self.p + 2) as f64 * self.gamma <= 1.0 {
            return Err(Error::InvalidInput("next phase needs (p+2) gamma > 1".into()));
        }
        let need = (self.p + 2) as f64 * self.lambda_bar(n) - 1.0;
        if !(self.k > n as f64 / 2.0 && self.k >= need - 1e-12) {
            return Err(Error::InvalidInput(format!("k = {} must exceed n/2 and reach {need}", self.k)));
        }
        Ok(())
    }
}

fn power(c: f64, a: f64) -> TimeFn {
    TimeFn::Powers(Powers::power(c, a))
}

struct Builder {
    cfg: HierarchyConfig,
}

impl Builder {
    fn prepare(&self, level: usize, f: TimeFn) -> Result<TimeFn> {
        match self.cfg.quadrature {
            TimeQuadrature::Tabulated { exact_levels, t_max, per_decade } if level > exact_levels => {
                Ok(TimeFn::Table(f.tabulate(t_max, per_decade)?.refit_tail()?))
            }
            _ => Ok(f),
        }
    }

    /// `∂ₜw_{m+1}` as a separable sum.
    fn amplitude_rhs(&self, w: &[Separable], phi: &[Separable], m: usize) -> Result<Vec<(TimeFn, SpectralField)>> {
        let half_inv_sq = power(0.5, -2.0);
        let mut out = Vec::new();
        for j in 0..=m {
            for (a, f) in &phi[j].terms {
                for (b, g) in &w[m - j].terms {
                    out.push((half_inv_sq.mul(&a.mul(b)?)?, transport_operator(f, g)?));
                }
            }
        }
        Ok(out)
    }

    /// `∂ₜφ_{m+1}` as a separable sum.
    fn phase_rhs(&self, w: &[Separable], phi: &[Separable], m: i64) -> Result<Vec<(TimeFn, SpectralField)>> {
        let half_inv_sq = power(0.5, -2.0);
        let coupling = power(1.0, -self.cfg.gamma);
        let mut out = Vec::new();
        for j in 0..=m.max(-1) {
            let (j, mj) = (j as usize, (m - j) as usize);
            for (a, f) in &phi[j].terms {
                for (b, g) in &phi[mj].terms {
                    out.push((half_inv_sq.mul(&a.mul(b)?)?, grad_dot(f, g)?));
                }
            }
        }
        let top = (m + 1) as usize;
        for j in 0..=top {
            for (a, f) in &w[j].terms {
                for (b, g) in &w[top - j].terms {
                    out.push((coupling.mul(&a.mul(b)?)?, g0(f, g, self.cfg.kappa, self.cfg.mu)?));
                }
            }
        }
        Ok(out)
    }

    fn integrate_from_infinity(&self, level: usize, rhs: Vec<(TimeFn, SpectralField)>) -> Result<Separable> {
        let mut s = Separable::empty();
        for (a, f) in rhs {
            let a = self.prepare(level, a)?;
            s.push(a.tail_integral()?.scale(-1.0), f);
        }
        Ok(s)
    }

    fn integrate_from_one(&self, level: usize, rhs: Vec<(TimeFn, SpectralField)>) -> Result<Separable> {
        let mut s = Separable::empty();
        for (a, mut f) in rhs {
            let a = self.prepare(level, a)?;
            f.real = true;
            s.push(a.integral_from_one(), f);
        }
        Ok(s)
    }
}

/// Builds `w_0 … w_{p+1}`, `φ_0 … φ_p` (and optionally `φ_{p+1}`) with `w_0 = w₊`,
/// `w_m(∞) = 0` for `m ≥ 1` and `φ_m(1) = 0`.
pub fn solve_hierarchy(w_plus: &SpectralField, cfg: HierarchyConfig, time_grid: &[f64]) -> Result<AsymptoticHierarchy> {
    cfg.validate(w_plus.grid.n)?;
    if time_grid.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
        return Err(Error::InvalidInput("time grid must lie in [1, inf)".into()));
    }
    let b = Builder { cfg };
    let p = cfg.p;
    let mut w = vec![Separable::constant(w_plus.clone())];
    let mut phi: Vec<Separable> = Vec::new();
    phi.push(b.integrate_from_one(0, b.phase_rhs(&w, &phi, -1)?)?);
    for m in 0..=p {
        w.push(b.integrate_from_infinity(m + 1, b.amplitude_rhs(&w, &phi, m)?)?);
        if m < p {
            phi.push(b.integrate_from_one(m + 1, b.phase_rhs(&w, &phi, m as i64)?)?);
        }
    }
    let phi_next = if cfg.next_phase {
        let rhs = b.phase_rhs(&w, &phi, p as i64)?;
        let mut s = b.integrate_from_infinity(p + 1, rhs)?;
        s.terms.iter_mut().for_each(|(_, f)| f.real = true);
        Some(s)
    } else {
        None
    };
    Ok(AsymptoticHierarchy { config: cfg, w_plus: w_plus.clone(), w, phi, phi_next, time_grid: time_grid.to_vec() })
}

impl AsymptoticHierarchy {
    pub fn w_at(&self, m: usize, t: f64) -> SpectralField {
        self.w[m].eval(t, &self.w_plus, false)
    }

    pub fn phi_at(&self, m: usize, t: f64) -> SpectralField {
        self.phi[m].eval(t, &self.w_plus, true)
    }

    pub fn phi_next_at(&self, t: f64) -> Option<SpectralField> {
        self.phi_next.as_ref().map(|s| s.eval(t, &self.w_plus, true))
    }

    /// Trajectories of every level on the stored time grid.
    pub fn trajectories(&self) -> (Vec<Vec<SpectralField>>, Vec<Vec<SpectralField>>) {
        let w = (0..self.w.len()).map(|m| self.time_grid.iter().map(|&t| self.w_at(m, t)).collect()).collect();
        let phi = (0..self.phi.len()).map(|m| self.time_grid.iter().map(|&t| self.phi_at(m, t)).collect()).collect();
        (w, phi)
    }

    /// `(W_m, φ_m)` as separable sums.
    pub fn partial_sums(&self, m: usize) -> Result<(Separable, Separable)> {
        if m > self.config.p {
            return Err(Error::InvalidInput(format!("m = {m} exceeds p = {}", self.config.p)));
        }
        let mut ws = Separable::empty();
        let mut ps = Separable::empty();
        for j in 0..=m {
            ws.terms.extend(self.w[j].terms.iter().cloned());
            ps.terms.extend(self.phi[j].terms.iter().cloned());
        }
        Ok((ws, ps))
    }

    /// `W_m(t)` and `φ_m(t)` as fields.
    pub fn partial_sums_at(&self, m: usize, t: f64) -> Result<(SpectralField, SpectralField)> {
        let (ws, ps) = self.partial_sums(m)?;
        Ok((ws.eval(t, &self.w_plus, false), ps.eval(t, &self.w_plus, true)))
    }
}

/// Ratio of a level norm to its estimating function over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub quantity: String,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max/min − 1` of the ratios.
    pub variation: f64,
    /// Log-log slope of the norms.
    pub slope: f64,
    /// Log-log slope of the estimating function.
    pub reference_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub entries: Vec<DecayEntry>,
}

impl DecayReport {
    pub fn max_variation(&self) -> f64 {
        self.entries.iter().map(|e| e.variation).fold(0.0, f64::max)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn entry(quantity: String, times: &[f64], norms: Vec<f64>, reference: Vec<f64>) -> DecayEntry {
    let ratios: Vec<f64> = norms.iter().zip(&reference).map(|(a, b)| a / b).collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    DecayEntry {
        quantity,
        times: times.to_vec(),
        slope: loglog_slope(times, &norms),
        reference_slope: loglog_slope(times, &reference),
        norms,
        ratios,
        variation: hi / lo - 1.0,
    }
}

/// Compares `|w_{m+1}|_{k_{m+1}}` with `Q̄_m`, `|φ_m|_{ℓ_m}` with `N̄_m` and, when built,
/// `|φ_{p+1}|_{ℓ_{p+1}}` with `P̄_p`, for `h₀′ = t^{−γ}`.
pub fn verify_decay(h: &AsymptoticHierarchy, spec: &NormSpec, times: &[f64]) -> Result<DecayReport> {
    if times.len() < 2 || times[times.len() - 1] / times[0] < 100.0 - 1e-9 {
        return Err(Error::InvalidInput("decay window must span two decades".into()));
    }
    let cfg = h.config;
    let n = h.w_plus.grid.n;
    let est = Estimators::new(&H0Spec::power_law(cfg.gamma)?, cfg.p.max(1))?;
    let mut entries = Vec::new();
    for m in 0..=cfg.p {
        let k = cfg.k_m(n, m + 1);
        let norms = times.iter().map(|&t| k_norm_at(&h.w_at(m + 1, t), spec, k)).collect::<Result<Vec<f64>>>()?;
        let reference = times.iter().map(|&t| est.q[m].eval(t)).collect();
        entries.push(entry(format!("|w_{}|/Q_{m}", m + 1), times, norms, reference));
        let ell = cfg.ell_m(n, m);
        let norms = times.iter().map(|&t| y_norm_at(&h.phi_at(m, t), spec, ell)).collect::<Result<Vec<f64>>>()?;
        let reference = times.iter().map(|&t| est.n[m].eval(t)).collect();
        entries.push(entry(format!("|phi_{m}|/N_{m}"), times, norms, reference));
    }
    if let Some(pn) = &h.phi_next {
        let pp = est.p_finite(cfg.p)?;
        let ell = cfg.ell_m(n, cfg.p + 1);
        let norms = times
            .iter()
            .map(|&t| y_norm_at(&pn.eval(t, &h.w_plus, true), spec, ell))
            .collect::<Result<Vec<f64>>>()?;
        let reference = times.iter().map(|&t| pp.eval(t)).collect();
        entries.push(entry(format!("|phi_{}|/P_{}", cfg.p + 1, cfg.p), times, norms, reference));
    }
    Ok(DecayReport { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    /// `max_{m,t} |φ_m − φ′_m|_{ℓ_m}`.
    pub max_phase_deviation: f64,
    /// `max_{m,t} |φ_m|_{ℓ_m}`.
    pub max_phase_norm: f64,
    /// `max_{m ≥ 1,t} |w_m − w′_m|_{k_m}`.
    pub max_amplitude_deviation: f64,
}

/// Builds the hierarchies for `w₊` and `w₊e^{iω}` and compares them on `times`.
pub fn gauge_shift_check(
    w_plus: &SpectralField,
    omega: &SpectralField,
    cfg: HierarchyConfig,
    spec: &NormSpec,
    times: &[f64],
) -> Result<GaugeReport> {
    if !omega.real {
        return Err(Error::InvalidInput("gauge function must be real".into()));
    }
    let shifted = if omega.is_zero() { w_plus.clone() } else { mul_phase(w_plus, omega, 1.0)? };
    let a = solve_hierarchy(w_plus, cfg, times)?;
    let b = solve_hierarchy(&shifted, cfg, times)?;
    let n = w_plus.grid.n;
    let mut rep = GaugeReport { max_phase_deviation: 0.0, max_phase_norm: 0.0, max_amplitude_deviation: 0.0 };
    for &t in times {
        for m in 0..a.phi.len() {
            let ell = cfg.ell_m(n, m);
            let pa = a.phi_at(m, t);
            let mut d = b.phi_at(m, t);
            d.axpy(C64::new(-1.0, 0.0), &pa);
            rep.max_phase_deviation = rep.max_phase_deviation.max(y_norm_at(&d, spec, ell)?);
            rep.max_phase_norm = rep.max_phase_norm.max(y_norm_at(&pa, spec, ell)?);
        }
        for m in 1..a.w.len() {
            let mut d = b.w_at(m, t);
            d.axpy(C64::new(-1.0, 0.0), &a.w_at(m, t));
            rep.max_amplitude_deviation = rep.max_amplitude_deviation.max(k_norm_at(&d, spec, cfg.k_m(n, m))?);
        }
    }
    Ok(rep)
}
