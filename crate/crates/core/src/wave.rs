//! Wave operators built from the amplitude/phase solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auxiliary::{cauchy_from_t0, AuxParams, AuxState, CauchyRun, Diagnostics, SolverConfig};
use crate::error::{Error, Result};
use crate::estimators::PowerSchedule;
use crate::hierarchy::{loglog_slope, solve_hierarchy, AsymptoticHierarchy, HierarchyConfig};
use crate::spectral::dilation::{apply_mdu, bracket_norm, fourier_as_field, LensField, Mdu};
use crate::spectral::field::C64;
use crate::spectral::norms::{k_norm, y_norm};
use crate::spectral::ops::{fractional_multiplier, laplacian, mul_phase};
use crate::spectral::{NormSpec, SpectralField};

fn sub(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let mut d = a.clone();
    d.axpy(C64::new(-1.0, 0.0), b);
    d
}

/// `u = M(t)D(t)e^{−iφ}w` on the grid of `w`.
pub fn lambda_map(w: &SpectralField, phi: &SpectralField, t: f64) -> Result<SpectralField> {
    let v = mul_phase(w, phi, -1.0)?;
    apply_mdu(&apply_mdu(&v, t, Mdu::D)?, t, Mdu::M)
}

/// `u = M(t)D(t)e^{−iφ}w` in the lens frame, where no mass can leave the box.
pub fn lambda_lens(w: &SpectralField, phi: &SpectralField, t: f64) -> Result<LensField> {
    LensField::new(t, mul_phase(w, phi, -1.0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// Final (smallest) time of every run.
    pub t_final: f64,
    /// First anchor; later anchors double.
    pub t0_first: f64,
    pub rungs: usize,
    /// Acceptance: last difference below `factor·h₃(t₀)`.
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub t0: f64,
    /// Distance to the previous rung on the common times; `NaN` for the first.
    pub difference: f64,
    /// `h₃` at the previous anchor.
    pub h3: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<LadderRung>,
    pub converged: bool,
    /// `max/min − 1` of `difference / h₃` over the rungs.
    pub ratio_drift: f64,
    /// Log-log slope of the differences against the anchors.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega0Result {
    pub ladder: LadderReport,
    /// Run at the largest anchor.
    pub run: CauchyRun,
}

/// Largest `max(|Δw|_k, |Δφ|_ℓ)` over the times stored by both trajectories, with
/// `ρ(t)` from `diag`.
pub fn trajectory_distance(a: &[AuxState], b: &[AuxState], diag: &Diagnostics) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut any = false;
    for s in a {
        if let Some(o) = b.iter().find(|o| (o.t - s.t).abs() <= 1e-12 * s.t) {
            any = true;
            let rho = match &diag.rho {
                Some(r) => r.rho_at(s.t)?,
                None => diag.spec.weight.rho,
            };
            let spec = diag.spec.with_rho(rho);
            worst = worst.max(k_norm(&sub(&s.rotated(), &o.rotated()), &spec)?);
            worst = worst.max(y_norm(&sub(&s.phi, &o.phi), &spec)?);
        }
    }
    if !any {
        return Err(Error::InvalidInput("trajectories share no stored time".into()));
    }
    Ok(worst)
}

/// Runs the Cauchy problem from every anchor of the ladder and compares neighbours.
#[allow(clippy::too_many_arguments)]
pub fn run_ladder(
    hierarchy: &AsymptoticHierarchy,
    psi_plus: &SpectralField,
    ladder: &LadderConfig,
    h3: &PowerSchedule,
    params: &AuxParams,
    config: &SolverConfig,
    diag: &Diagnostics,
    outputs: &[f64],
) -> Result<Omega0Result> {
    if ladder.rungs < 2 || !(ladder.t0_first > ladder.t_final) {
        return Err(Error::InvalidInput("ladder needs two rungs above the final time".into()));
    }
    let anchors: Vec<f64> = (0..ladder.rungs).map(|j| ladder.t0_first * 2f64.powi(j as i32)).collect();
    let runs: Vec<CauchyRun> = anchors
        .par_iter()
        .map(|&t0| cauchy_from_t0(hierarchy, psi_plus, t0, ladder.t_final, params, config, diag, outputs))
        .collect::<Result<Vec<_>>>()?;
    let mut rungs = vec![LadderRung { t0: anchors[0], difference: f64::NAN, h3: f64::NAN, ratio: f64::NAN }];
    for j in 1..runs.len() {
        let d = trajectory_distance(&runs[j - 1].trajectory.states, &runs[j].trajectory.states, diag)?;
        let h = h3.eval(anchors[j - 1]);
        rungs.push(LadderRung { t0: anchors[j], difference: d, h3: h, ratio: d / h });
    }
    let ratios: Vec<f64> = rungs[1..].iter().map(|r| r.ratio).collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let last = rungs[rungs.len() - 1];
    let slope = if rungs.len() > 2 {
        let t: Vec<f64> = rungs[1..].iter().map(|r| r.t0).collect();
        let d: Vec<f64> = rungs[1..].iter().map(|r| r.difference).collect();
        loglog_slope(&t, &d)
    } else {
        f64::NAN
    };
    let ladder = LadderReport { converged: last.difference < ladder.factor * last.h3, ratio_drift: hi / lo - 1.0, slope, rungs };
    Ok(Omega0Result { ladder, run: runs.into_iter().last().expect("two rungs") })
}

/// `Ω₀(w₊, ψ₊)`: the ladder run, failing when the last rung does not meet its bound.
#[allow(clippy::too_many_arguments)]
pub fn omega0(
    hierarchy: &AsymptoticHierarchy,
    psi_plus: &SpectralField,
    ladder: &LadderConfig,
    h3: &PowerSchedule,
    params: &AuxParams,
    config: &SolverConfig,
    diag: &Diagnostics,
    outputs: &[f64],
) -> Result<Omega0Result> {
    let r = run_ladder(hierarchy, psi_plus, ladder, h3, params, config, diag, outputs)?;
    if !r.ladder.converged {
        let last = r.ladder.rungs[r.ladder.rungs.len() - 1];
        return Err(Error::LadderNotConverged(format!(
            "difference {:e} at t0 = {} exceeds {} h3 = {:e}",
            last.difference,
            last.t0,
            ladder.factor,
            ladder.factor * last.h3
        )));
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaResult {
    pub w_plus: SpectralField,
    pub hierarchy: AsymptoticHierarchy,
    pub omega0: Omega0Result,
    /// `u(t)` in the lens frame at every stored time, in increasing time.
    pub u: Vec<LensField>,
}

/// `Ω(u₊) = Λ ∘ Ω₀(Fu₊, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn omega(
    u_plus: &SpectralField,
    hcfg: HierarchyConfig,
    ladder: &LadderConfig,
    h3: &PowerSchedule,
    params: &AuxParams,
    config: &SolverConfig,
    diag: &Diagnostics,
    outputs: &[f64],
) -> Result<OmegaResult> {
    let w_plus = fourier_as_field(u_plus, false)?;
    let hierarchy = solve_hierarchy(&w_plus, hcfg, &[])?;
    let zero = SpectralField::zeros(w_plus.grid, true);
    let omega0 = omega0(&hierarchy, &zero, ladder, h3, params, config, diag, outputs)?;
    let u = omega0
        .run
        .trajectory
        .sorted()
        .into_iter()
        .map(|s| lambda_lens(&s.w, &s.phi, s.t))
        .collect::<Result<Vec<_>>>()?;
    Ok(OmegaResult { w_plus, hierarchy, omega0, u })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeCheck {
    pub equivalent: bool,
    pub max_deviation: f64,
}

/// `max_t ‖w₁e^{−iφ₁} − w₂e^{−iφ₂}‖₂` over the times stored by both.
pub fn gauge_equivalent(a: &[AuxState], b: &[AuxState], tol: f64) -> Result<GaugeCheck> {
    let mut worst = 0.0f64;
    let mut any = false;
    for s in a {
        if let Some(o) = b.iter().find(|o| (o.t - s.t).abs() <= 1e-12 * s.t) {
            any = true;
            worst = worst.max(asymptotic_gauge_deviation(&s.w, &s.phi, &o.w, &o.phi)?);
        }
    }
    if !any {
        return Err(Error::InvalidInput("no common times".into()));
    }
    Ok(GaugeCheck { equivalent: worst <= tol, max_deviation: worst })
}

/// `‖w₁e^{−iψ₁} − w₂e^{−iψ₂}‖₂`.
pub fn asymptotic_gauge_deviation(w1: &SpectralField, psi1: &SpectralField, w2: &SpectralField, psi2: &SpectralField) -> Result<f64> {
    Ok(sub(&mul_phase(w1, psi1, -1.0)?, &mul_phase(w2, psi2, -1.0)?).l2_norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
    pub slope: f64,
    pub reference_slope: f64,
}

impl EstimateSeries {
    fn new(name: String, times: Vec<f64>, values: Vec<f64>, reference: Vec<f64>) -> Self {
        let slope = loglog_slope(&times, &values);
        let reference_slope = loglog_slope(&times, &reference);
        EstimateSeries { name, times, values, reference, slope, reference_slope }
    }

    pub fn slope_mismatch(&self) -> f64 {
        ((self.slope - self.reference_slope) / self.reference_slope).abs()
    }

    /// `max/min − 1` of `value / reference`.
    pub fn ratio_variation(&self) -> f64 {
        let r: Vec<f64> = self.values.iter().zip(&self.reference).map(|(a, b)| a / b).collect();
        r.iter().cloned().fold(f64::MIN, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min) - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub weighted: EstimateSeries,
    /// One series per Lebesgue exponent (`f64::INFINITY` for the sup norm).
    pub lebesgue: Vec<(f64, EstimateSeries)>,
}

/// Settings of the asymptotic-estimate report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub spec: NormSpec,
    pub h3: PowerSchedule,
    /// `ε` in the exponent `β` for `r = ∞` with `k ≤ n/2`.
    pub epsilon: f64,
}

/// `δ(r) = n/2 − n/r`.
pub fn delta_r(n: usize, r: f64) -> f64 {
    n as f64 / 2.0 - n as f64 / r
}

/// Exponent `β` of `ρ(t)^{−β}` in the Lebesgue estimate.
pub fn beta_r(n: usize, r: f64, k: f64, nu: f64, epsilon: f64) -> f64 {
    let h = n as f64 / 2.0;
    if r.is_finite() || k > h {
        ((delta_r(n, r) - k) / nu).max(0.0)
    } else {
        (h - k + epsilon) / nu
    }
}

/// Profile of `e^{iφ_p(t,x/t)}u(t) − M(t)D(t)w₊`, i.e. `e^{i(φ_p − φ)}w − w₊`.
fn corrected_profile(u: &LensField, hierarchy: &AsymptoticHierarchy) -> Result<SpectralField> {
    let (_, phip) = hierarchy.partial_sums_at(hierarchy.config.p, u.t)?;
    Ok(sub(&mul_phase(&u.profile, &phip, 1.0)?, &hierarchy.w_plus))
}

/// Lebesgue norm of the physical field `M(t)D(t)v` from the samples of `v`.
fn lebesgue_norm(v: &SpectralField, t: f64, r: f64) -> f64 {
    let n = v.grid.n;
    let s = v.samples();
    let base = if r.is_infinite() {
        s.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    } else {
        (s.iter().map(|z| z.norm().powf(r)).sum::<f64>() * v.grid.dx().powi(n as i32)).powf(1.0 / r)
    };
    base * t.powf(-delta_r(n, r))
}

/// The weighted and Lebesgue distances of `u` from its modified free asymptote.
pub fn check_asymptotic_estimate(
    u: &[LensField],
    hierarchy: &AsymptoticHierarchy,
    rho_at: &dyn Fn(f64) -> Result<f64>,
    cfg: &EstimateConfig,
) -> Result<EstimateReport> {
    let times: Vec<f64> = u.iter().map(|x| x.t).collect();
    let n = hierarchy.w_plus.grid.n;
    let mut weighted = Vec::new();
    let mut leb = vec![Vec::new(), Vec::new()];
    let rs = [2.0, f64::INFINITY];
    let mut rho = Vec::new();
    for x in u {
        let d = corrected_profile(x, hierarchy)?;
        let r = rho_at(x.t)?;
        rho.push(r);
        weighted.push(bracket_norm(&d, &cfg.spec.with_rho(r))?);
        for (i, &p) in rs.iter().enumerate() {
            leb[i].push(lebesgue_norm(&d, x.t, p));
        }
    }
    let h3: Vec<f64> = times.iter().map(|&t| cfg.h3.eval(t)).collect();
    let weighted = EstimateSeries::new("weighted".into(), times.clone(), weighted, h3.clone());
    let lebesgue = rs
        .iter()
        .zip(leb)
        .map(|(&r, vals)| {
            let beta = beta_r(n, r, cfg.spec.k, cfg.spec.weight.nu, cfg.epsilon);
            let reference = times
                .iter()
                .zip(&h3)
                .zip(&rho)
                .map(|((&t, &h), &p)| if beta == 0.0 { 1.0 } else { p.powf(-beta) } * t.powf(-delta_r(n, r)) * h)
                .collect();
            (r, EstimateSeries::new(format!("L^{r}"), times.clone(), vals, reference))
        })
        .collect();
    Ok(EstimateReport { weighted, lebesgue })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsResidual {
    pub t: f64,
    pub residual: f64,
    pub norm: f64,
}

/// L² defect of `i∂ₜu + ½Δu − κt^{μ−γ}|∇|^{μ−n}|u|² u` for `u = M(t)D(t)v`. Conjugating by
/// the unitary `M(t)D(t)` turns it into `i∂ₜv + (2t²)⁻¹Δv − κt^{−γ}(|∇|^{μ−n}|v|²)v`, which
/// is evaluated on the profiles with a five-point time stencil.
pub fn nls_residual(profiles: &dyn Fn(f64) -> Option<SpectralField>, centres: &[f64], rel_delta: f64, params: &AuxParams) -> Result<Vec<NlsResidual>> {
    let get = |t: f64| profiles(t).ok_or_else(|| Error::InvalidInput(format!("no profile at t = {t}")));
    centres
        .iter()
        .map(|&t| {
            let d = rel_delta * t;
            let mut dv = get(t - 2.0 * d)?;
            dv.axpy(C64::new(-8.0, 0.0), &get(t - d)?);
            dv.axpy(C64::new(8.0, 0.0), &get(t + d)?);
            dv.axpy(C64::new(-1.0, 0.0), &get(t + 2.0 * d)?);
            let v = get(t)?;
            let mut res = dv.scale(C64::new(0.0, 1.0 / (12.0 * d)));
            res.axpy(C64::new(0.5 / (t * t), 0.0), &laplacian(&v));
            let pot = hartree_potential(&v, params)?.scale_re(t.powf(-params.gamma));
            res.axpy(C64::new(-1.0, 0.0), &pointwise(&pot, &v));
            Ok(NlsResidual { t, residual: res.l2_norm(), norm: v.l2_norm() })
        })
        .collect()
}

/// `κ|∇|^{μ−n}|v|²` with the dealiased modulus.
pub fn hartree_potential(v: &SpectralField, params: &AuxParams) -> Result<SpectralField> {
    crate::spectral::ops::g0(v, v, params.kappa, params.mu)
}

fn pointwise(pot: &SpectralField, v: &SpectralField) -> SpectralField {
    crate::spectral::ops::product(pot, v).expect("same grid")
}

/// Same defect for a physical field on a fixed grid (`u(t)` given directly).
pub fn nls_residual_physical(
    fields: &dyn Fn(f64) -> Option<SpectralField>,
    centres: &[f64],
    rel_delta: f64,
    params: &AuxParams,
) -> Result<Vec<NlsResidual>> {
    let get = |t: f64| fields(t).ok_or_else(|| Error::InvalidInput(format!("no field at t = {t}")));
    centres
        .iter()
        .map(|&t| {
            let d = rel_delta * t;
            let mut du = get(t - 2.0 * d)?;
            du.axpy(C64::new(-8.0, 0.0), &get(t - d)?);
            du.axpy(C64::new(8.0, 0.0), &get(t + d)?);
            du.axpy(C64::new(-1.0, 0.0), &get(t + 2.0 * d)?);
            let u = get(t)?;
            let mut res = du.scale(C64::new(0.0, 1.0 / (12.0 * d)));
            res.axpy(C64::new(0.5, 0.0), &laplacian(&u));
            let n = u.grid.n as f64;
            let modulus = crate::spectral::ops::product(&u, &u.conj())?;
            let mut pot = fractional_multiplier(&modulus, params.mu - n)?.re_part();
            pot = pot.scale_re(params.kappa * t.powf(params.mu - params.gamma));
            res.axpy(C64::new(-1.0, 0.0), &pointwise(&pot, &u));
            Ok(NlsResidual { t, residual: res.l2_norm(), norm: u.l2_norm() })
        })
        .collect()
}

/// `‖Ω(a)(t) − Ω(b)(t)‖₂` from lens profiles at the same time.
pub fn separation(a: &LensField, b: &LensField) -> Result<f64> {
    if a.t != b.t {
        return Err(Error::InvalidInput("profiles at different times".into()));
    }
    a.profile.check_grid(&b.profile)?;
    Ok(sub(&a.profile, &b.profile).l2_norm())
}
