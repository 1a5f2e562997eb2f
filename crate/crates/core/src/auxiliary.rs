//! Numerical integration of the amplitude/phase system and of its transport equations.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RhoSchedule;
use crate::hierarchy::{loglog_slope, AsymptoticHierarchy};
use crate::spectral::dilation::propagate;
use crate::spectral::field::C64;
use crate::spectral::norms::{k_norm, y_norm};
use crate::spectral::ops::{g0, grad_dot, gradient, laplacian, product, transport_operator};
use crate::spectral::{Grid, NormSpec, SpectralField};
use crate::stepper::{integrate_adaptive, integrate_geometric, Pair, StepControl, StepStats};

/// Physical constants entering the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxParams {
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub t: f64,
    pub w: SpectralField,
    pub phi: SpectralField,
}

impl AuxState {
    pub fn new(t: f64, w: SpectralField, phi: SpectralField) -> Result<Self> {
        w.check_grid(&phi)?;
        if !phi.real {
            return Err(Error::InvalidInput("phase must be a real field".into()));
        }
        if !(t >= 1.0) {
            return Err(Error::InvalidInput(format!("t = {t} below 1")));
        }
        Ok(AuxState { t, w, phi })
    }

    /// `w̃ = U(1/t)w`.
    pub fn rotated(&self) -> SpectralField {
        propagate(&self.w, 1.0 / self.t)
    }

    pub fn from_rotated(t: f64, w_rot: &SpectralField, phi: SpectralField) -> Self {
        AuxState { t, w: propagate(w_rot, -1.0 / t), phi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Coefficient of the added `θΔ`; its sign follows the direction of integration.
    pub theta: f64,
    pub max_step: f64,
    pub stepper_order: usize,
    /// `NormBlowup` is raised when either diagnostic norm exceeds this.
    pub norm_ceiling: f64,
    /// Fixed geometric steps instead of adaptive control.
    pub fixed_steps: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            theta: 0.0,
            max_step: f64::INFINITY,
            stepper_order: 4,
            norm_ceiling: 1e8,
            fixed_steps: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| (1e-12..=1e-4).contains(&x);
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::InvalidInput(format!("tolerances {} / {} outside [1e-12, 1e-4]", self.rel_tol, self.abs_tol)));
        }
        if !(self.theta >= 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidInput("theta must be >= 0 and max_step > 0".into()));
        }
        Pair::from_order(self.stepper_order)?;
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl { rel_tol: self.rel_tol, abs_tol: self.abs_tol, max_step: self.max_step, min_rel_step: 1e-13, max_steps: 2_000_000 }
    }
}

/// Norms recorded after each accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub spec: NormSpec,
    /// `ρ(t)` for the norms; `spec.weight.rho` is used when absent.
    pub rho: Option<RhoSchedule>,
}

impl Diagnostics {
    pub fn plain() -> Self {
        Diagnostics { spec: NormSpec::plain(0.0, 0.0, 0.0), rho: None }
    }

    fn rho_at(&self, t: f64) -> Result<f64> {
        match &self.rho {
            Some(r) => r.rho_at(t),
            None => Ok(self.spec.weight.rho),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub rho: f64,
    pub w_norm: f64,
    pub phi_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: AuxParams,
    pub config: SolverConfig,
    /// States at the requested output times, in integration order.
    pub states: Vec<AuxState>,
    pub steps: Vec<StepRecord>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn state_at(&self, t: f64) -> Option<&AuxState> {
        self.states.iter().find(|s| (s.t - t).abs() <= 1e-12 * t.abs())
    }

    /// State with the largest time.
    pub fn latest(&self) -> Option<&AuxState> {
        self.states.iter().max_by(|a, b| a.t.total_cmp(&b.t))
    }

    /// States sorted by increasing time.
    pub fn sorted(&self) -> Vec<&AuxState> {
        let mut v: Vec<&AuxState> = self.states.iter().collect();
        v.sort_by(|a, b| a.t.total_cmp(&b.t));
        v
    }
}

/// `(∂ₜw, ∂ₜφ)` of the amplitude/phase system.
pub fn rhs_auxiliary(state: &AuxState, params: &AuxParams) -> Result<(SpectralField, SpectralField)> {
    let t = state.t;
    let c = 0.5 / (t * t);
    let mut dw = transport_operator(&state.phi, &state.w)?.scale_re(c);
    dw.axpy(C64::new(0.0, c), &laplacian(&state.w));
    let mut dphi = grad_dot(&state.phi, &state.phi)?.scale_re(c);
    dphi.axpy(C64::new(t.powf(-params.gamma), 0.0), &g0(&state.w, &state.w, params.kappa, params.mu)?);
    dphi.real = true;
    Ok((dw, dphi))
}

/// Right side of the equation for `s = ∇φ`: `t⁻² s·∇s + t^{−γ}∇g₀(w, w)`.
pub fn s_equation_rhs(state: &AuxState, params: &AuxParams) -> Result<Vec<SpectralField>> {
    let t = state.t;
    let s = gradient(&state.phi);
    let dg = gradient(&g0(&state.w, &state.w, params.kappa, params.mu)?);
    let mut out = Vec::with_capacity(s.len());
    for a in 0..s.len() {
        let mut acc = SpectralField::zeros(state.phi.grid, true);
        for (b, sb) in s.iter().enumerate() {
            acc.axpy(C64::new(1.0, 0.0), &product(sb, &gradient(&s[a])[b])?);
        }
        let mut v = acc.scale_re(1.0 / (t * t));
        v.axpy(C64::new(t.powf(-params.gamma), 0.0), &dg[a]);
        v.real = true;
        out.push(v);
    }
    Ok(out)
}

struct Layout {
    grid: Grid,
    len: usize,
}

impl Layout {
    fn blocks(&self) -> Vec<Range<usize>> {
        vec![0..self.len, self.len..2 * self.len]
    }

    fn pack(&self, w: &SpectralField, phi: &SpectralField) -> Vec<C64> {
        let mut y = w.coeffs.clone();
        y.extend_from_slice(&phi.coeffs);
        y
    }

    fn unpack(&self, y: &[C64]) -> (SpectralField, SpectralField) {
        let w = SpectralField { grid: self.grid, coeffs: y[..self.len].to_vec(), real: false };
        let phi = SpectralField { grid: self.grid, coeffs: y[self.len..].to_vec(), real: true };
        (w, phi)
    }
}

/// Right side in the rotated amplitude, with the regularisation `sign·θΔ`.
fn rotated_rhs(t: f64, w_rot: &SpectralField, phi: &SpectralField, params: &AuxParams, theta: f64) -> Result<(SpectralField, SpectralField)> {
    let w = propagate(w_rot, -1.0 / t);
    let c = 0.5 / (t * t);
    let mut dw = propagate(&transport_operator(phi, &w)?, 1.0 / t).scale_re(c);
    let mut dphi = grad_dot(phi, phi)?.scale_re(c);
    dphi.axpy(C64::new(t.powf(-params.gamma), 0.0), &g0(&w, &w, params.kappa, params.mu)?);
    if theta != 0.0 {
        dw.axpy(C64::new(theta, 0.0), &laplacian(w_rot));
        dphi.axpy(C64::new(theta, 0.0), &laplacian(phi));
    }
    Ok((dw, dphi))
}

fn record(diag: &Diagnostics, ceiling: f64, t: f64, w_rot: &SpectralField, phi: &SpectralField) -> Result<StepRecord> {
    let rho = diag.rho_at(t)?;
    let spec = diag.spec.with_rho(rho);
    let w_norm = k_norm(w_rot, &spec)?;
    let phi_norm = y_norm(phi, &spec)?;
    let worst = w_norm.max(phi_norm);
    if !(worst <= ceiling) {
        return Err(Error::NormBlowup { t, rho, norm: worst });
    }
    Ok(StepRecord { t, rho, w_norm, phi_norm })
}

/// Integrates from `state.t` to `t_end`, reporting states at `outputs` (and at both ends
/// when listed). Norm diagnostics use `ρ(t)` at every accepted step.
pub fn integrate(
    state: &AuxState,
    t_end: f64,
    params: &AuxParams,
    config: &SolverConfig,
    diag: &Diagnostics,
    outputs: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    if !(t_end >= 1.0) {
        return Err(Error::InvalidInput(format!("t_end = {t_end} below 1")));
    }
    diag.rho_at(state.t)?;
    diag.rho_at(t_end)?;
    let layout = Layout { grid: state.w.grid, len: state.w.grid.len() };
    let theta = if t_end >= state.t { config.theta } else { -config.theta };
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let (w, phi) = layout.unpack(y);
        let (dw, dphi) = rotated_rhs(t, &w, &phi, params, theta)?;
        Ok(layout.pack(&dw, &dphi))
    };
    let y0 = layout.pack(&state.rotated(), &state.phi);
    let pair = Pair::from_order(config.stepper_order)?;
    let mut states = Vec::new();
    let mut steps = Vec::new();
    {
        let (w, phi) = layout.unpack(&y0);
        steps.push(record(diag, config.norm_ceiling, state.t, &w, &phi)?);
    }
    let stats = match config.fixed_steps {
        Some(n) => {
            let (y, stats) = integrate_geometric(pair, rhs, state.t, y0.clone(), t_end, n)?;
            for (t, v) in [(state.t, &y0), (t_end, &y)] {
                if outputs.contains(&t) {
                    let (w, phi) = layout.unpack(v);
                    states.push(AuxState::from_rotated(t, &w, phi));
                }
            }
            let (w, phi) = layout.unpack(&y);
            steps.push(record(diag, config.norm_ceiling, t_end, &w, &phi)?);
            stats
        }
        None => {
            let (_, stats) = integrate_adaptive(
                pair,
                rhs,
                state.t,
                y0,
                t_end,
                outputs,
                &layout.blocks(),
                &config.control(),
                |t, y| {
                    let (w, phi) = layout.unpack(y);
                    states.push(AuxState::from_rotated(t, &w, phi));
                    Ok(())
                },
                |t, y| {
                    let (w, phi) = layout.unpack(y);
                    steps.push(record(diag, config.norm_ceiling, t, &w, &phi)?);
                    Ok(())
                },
            )?;
            stats
        }
    };
    Ok(Trajectory { params: *params, config: *config, states, steps, stats })
}

/// Output times `t, t ± δ, t ± 2δ` with `δ = rel_delta·t` around each centre.
pub fn stencil_times(centres: &[f64], rel_delta: f64) -> Vec<f64> {
    let mut v = Vec::new();
    for &t in centres {
        let d = rel_delta * t;
        v.extend([t - 2.0 * d, t - d, t, t + d, t + 2.0 * d]);
    }
    v
}

/// Five-point derivative of a stored quantity.
fn five_point<F: Fn(&AuxState) -> SpectralField>(traj: &Trajectory, t: f64, d: f64, f: F) -> Result<SpectralField> {
    let get = |s: f64| traj.state_at(s).map(&f).ok_or_else(|| Error::InvalidInput(format!("no state stored at t = {s}")));
    let mut out = get(t - 2.0 * d)?;
    out.axpy(C64::new(-8.0, 0.0), &get(t - d)?);
    out.axpy(C64::new(8.0, 0.0), &get(t + d)?);
    out.axpy(C64::new(-1.0, 0.0), &get(t + 2.0 * d)?);
    Ok(out.scale_re(1.0 / (12.0 * d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub t: f64,
    pub w_residual: f64,
    pub phi_residual: f64,
    pub w_rhs_norm: f64,
    pub phi_rhs_norm: f64,
}

/// Defect of the system along a trajectory whose outputs include `stencil_times(centres,
/// rel_delta)`, measured in L².
pub fn residual(traj: &Trajectory, centres: &[f64], rel_delta: f64) -> Result<Vec<ResidualRecord>> {
    centres
        .iter()
        .map(|&t| {
            let d = rel_delta * t;
            let s = traj.state_at(t).ok_or_else(|| Error::InvalidInput(format!("no state stored at t = {t}")))?;
            let (fw, fp) = rhs_auxiliary(s, &traj.params)?;
            let mut dw = five_point(traj, t, d, |s| s.w.clone())?;
            let mut dp = five_point(traj, t, d, |s| s.phi.clone())?;
            dw.axpy(C64::new(-1.0, 0.0), &fw);
            dp.axpy(C64::new(-1.0, 0.0), &fp);
            Ok(ResidualRecord {
                t,
                w_residual: dw.l2_norm(),
                phi_residual: dp.l2_norm(),
                w_rhs_norm: fw.l2_norm(),
                phi_rhs_norm: fp.l2_norm(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportKind {
    /// `∂ₜV = (2t²)⁻¹(2∇φ·∇ + Δφ)V`.
    Amplitude,
    /// `∂ₜχ = t⁻²∇φ·∇χ`.
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSeries {
    pub kind: TransportKind,
    pub t0: f64,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
}

impl TransportSeries {
    pub fn at(&self, t: f64) -> Option<&SpectralField> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs()).map(|i| &self.fields[i])
    }
}

/// Solves a transport equation from `seed` at `t0` towards `t_end`, storing `outputs`.
pub fn solve_transport<P>(
    phi_ref: P,
    seed: &SpectralField,
    t0: f64,
    t_end: f64,
    outputs: &[f64],
    kind: TransportKind,
    config: &SolverConfig,
) -> Result<TransportSeries>
where
    P: Fn(f64) -> SpectralField,
{
    config.validate()?;
    if kind == TransportKind::Phase && !seed.real {
        return Err(Error::InvalidInput("phase transport needs a real seed".into()));
    }
    let grid = seed.grid;
    let real = kind == TransportKind::Phase;
    let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let v = SpectralField { grid, coeffs: y.to_vec(), real };
        let phi = phi_ref(t);
        let out = match kind {
            TransportKind::Amplitude => transport_operator(&phi, &v)?.scale_re(0.5 / (t * t)),
            TransportKind::Phase => grad_dot(&phi, &v)?.scale_re(1.0 / (t * t)),
        };
        Ok(out.coeffs)
    };
    let mut times = Vec::new();
    let mut fields = Vec::new();
    let ctrl = config.control();
    integrate_adaptive(
        Pair::from_order(config.stepper_order)?,
        rhs,
        t0,
        seed.coeffs.clone(),
        t_end,
        outputs,
        &[0..grid.len()],
        &ctrl,
        |t, y| {
            times.push(t);
            fields.push(SpectralField { grid, coeffs: y.to_vec(), real });
            Ok(())
        },
        |_, _| Ok(()),
    )?;
    Ok(TransportSeries { kind, t0, times, fields })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRun {
    pub t0: f64,
    pub amplitude: TransportSeries,
    pub phase: TransportSeries,
    pub trajectory: Trajectory,
}

/// Data at `t0` built from the hierarchy, the two transports, and the backward solution of
/// the system on `[t_final, t0]`. Outputs outside that window are ignored.
#[allow(clippy::too_many_arguments)]
pub fn cauchy_from_t0(
    hierarchy: &AsymptoticHierarchy,
    psi_plus: &SpectralField,
    t0: f64,
    t_final: f64,
    params: &AuxParams,
    config: &SolverConfig,
    diag: &Diagnostics,
    outputs: &[f64],
) -> Result<CauchyRun> {
    if !(t_final >= 1.0 && t0 > t_final) {
        return Err(Error::InvalidInput(format!("need 1 <= T < t0, got T = {t_final}, t0 = {t0}")));
    }
    if !psi_plus.real {
        return Err(Error::InvalidInput("psi_plus must be real".into()));
    }
    let p = hierarchy.config.p;
    let (wp, phip) = hierarchy.partial_sums_at(p, t0)?;
    let lower = if p == 0 { None } else { Some(hierarchy.partial_sums(p - 1)?.1) };
    let template = &hierarchy.w_plus;
    let phi_ref = |t: f64| match &lower {
        Some(s) => s.eval(t, template, true),
        None => SpectralField::zeros(template.grid, true),
    };
    let mut outs: Vec<f64> = outputs.iter().copied().filter(|&t| t >= t_final && t <= t0).collect();
    outs.extend([t0, t_final]);
    let amplitude = solve_transport(phi_ref, &wp, t0, t_final, &outs, TransportKind::Amplitude, config)?;
    let phase = solve_transport(phi_ref, psi_plus, t0, t_final, &outs, TransportKind::Phase, config)?;
    let v0 = amplitude.at(t0).expect("anchor stored").clone();
    let mut phi0 = phip;
    phi0.axpy(C64::new(1.0, 0.0), phase.at(t0).expect("anchor stored"));
    let start = AuxState::new(t0, v0, phi0)?;
    let trajectory = integrate(&start, t_final, params, config, diag, &outs)?;
    Ok(CauchyRun { t0, amplitude, phase, trajectory })
}

/// Distance of a converging quantity from its final value against a reference shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub times: Vec<f64>,
    pub differences: Vec<f64>,
    pub reference: Vec<f64>,
    pub slope: f64,
    pub reference_slope: f64,
}

impl RateReport {
    /// Relative mismatch of the fitted slopes.
    pub fn slope_mismatch(&self) -> f64 {
        ((self.slope - self.reference_slope) / self.reference_slope).abs()
    }

    pub fn max_ratio(&self) -> f64 {
        self.differences.iter().zip(&self.reference).map(|(d, r)| d / r).fold(0.0, f64::max)
    }
}

/// Differences below `ROUNDOFF` times the limit's norm count as exact convergence.
const ROUNDOFF: f64 = 1e-13;

fn rate_report<R: Fn(f64) -> f64>(times: Vec<f64>, differences: Vec<f64>, scale: f64, reference: R) -> Result<RateReport> {
    let reference_vals: Vec<f64> = times.iter().map(|&t| reference(t)).collect();
    if !times.is_empty() && differences.iter().all(|&d| d <= ROUNDOFF * scale) {
        let reference_slope = if times.len() > 1 { loglog_slope(&times, &reference_vals) } else { f64::NAN };
        return Ok(RateReport { times, differences, reference: reference_vals, slope: f64::NEG_INFINITY, reference_slope });
    }
    let fit: Vec<usize> = (0..times.len()).filter(|&i| differences[i] > 0.0).collect();
    if fit.len() < 2 {
        return Err(Error::NotConverged("fewer than two nonzero differences".into()));
    }
    let ft: Vec<f64> = fit.iter().map(|&i| times[i]).collect();
    let fd: Vec<f64> = fit.iter().map(|&i| differences[i]).collect();
    let fr: Vec<f64> = fit.iter().map(|&i| reference_vals[i]).collect();
    let slope = loglog_slope(&ft, &fd);
    if !(slope < 0.0) {
        return Err(Error::NotConverged(format!("differences do not decrease (slope {slope})")));
    }
    Ok(RateReport { reference_slope: loglog_slope(&ft, &fr), times, differences, reference: reference_vals, slope })
}

/// Times at least `margin` below the last one, where the Cauchy differences are measured.
fn cauchy_window(states: &[&AuxState], margin: f64) -> Vec<usize> {
    let last = states.last().map(|s| s.t).unwrap_or(1.0);
    (0..states.len()).filter(|&i| states[i].t * margin <= last).collect()
}

/// `w̃` at the latest time, with `|w̃(t) − w̃(t_last)|_k` against `reference`.
pub fn extract_w_plus<R: Fn(f64) -> f64>(traj: &Trajectory, spec: &NormSpec, reference: R) -> Result<(SpectralField, RateReport)> {
    let states = traj.sorted();
    let last = states.last().ok_or_else(|| Error::NotConverged("empty trajectory".into()))?;
    let w_plus = last.rotated();
    let idx = cauchy_window(&states, 4.0);
    let mut times = Vec::new();
    let mut diffs = Vec::new();
    for i in idx {
        let mut d = states[i].rotated();
        d.axpy(C64::new(-1.0, 0.0), &w_plus);
        times.push(states[i].t);
        diffs.push(k_norm(&d, spec)?);
    }
    let scale = k_norm(&w_plus, spec)?;
    Ok((w_plus, rate_report(times, diffs, scale, reference)?))
}

/// `ψ = φ − φ_p` at the latest time, with `|ψ(t) − ψ(t_last)|_ℓ` against `reference`.
pub fn extract_psi_plus<R: Fn(f64) -> f64>(
    traj: &Trajectory,
    hierarchy: &AsymptoticHierarchy,
    spec: &NormSpec,
    reference: R,
) -> Result<(SpectralField, RateReport)> {
    let cfg = hierarchy.config;
    if (cfg.p + 2) as f64 * cfg.gamma <= 1.0 {
        return Err(Error::PInfinite(cfg.p));
    }
    let remainder = |s: &AuxState| -> Result<SpectralField> {
        let (_, phip) = hierarchy.partial_sums_at(cfg.p, s.t)?;
        let mut d = s.phi.clone();
        d.axpy(C64::new(-1.0, 0.0), &phip);
        Ok(d)
    };
    let states = traj.sorted();
    let last = states.last().ok_or_else(|| Error::NotConverged("empty trajectory".into()))?;
    let psi_plus = remainder(last)?;
    let idx = cauchy_window(&states, 4.0);
    let mut times = Vec::new();
    let mut diffs = Vec::new();
    for i in idx {
        let mut d = remainder(states[i])?;
        d.axpy(C64::new(-1.0, 0.0), &psi_plus);
        times.push(states[i].t);
        diffs.push(y_norm(&d, spec)?);
    }
    let scale = y_norm(&psi_plus, spec)?;
    Ok((psi_plus, rate_report(times, diffs, scale, reference)?))
}

/// `‖w‖²` rate of change from the regularisation alone: `−2θ‖∇w‖²`.
pub fn regularised_mass_rate(w: &SpectralField, theta: f64) -> f64 {
    let g = gradient(w);
    -2.0 * theta * g.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>()
}
