use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fft::apply_axis_matrix;
use super::field::{SpectralField, C64};
use super::grid::Grid;
use super::norms::{weighted_norm, NormSpec};
use super::ops::mul_fn;
use crate::error::{Error, Result};

/// Mass fraction above which a dilation or transform is rejected.
pub const LEAKAGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mdu {
    M,
    D,
    U,
    Minv,
    Dinv,
    Uinv,
}

/// `i^{p}` for real `p`.
fn i_pow(p: f64) -> C64 {
    C64::from_polar(1.0, p * PI / 2.0)
}

fn squared(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `exp(i·sign·x²/2t)` by real-space multiplication.
pub fn chirp(u: &SpectralField, t: f64, sign: f64) -> SpectralField {
    mul_fn(u, |x| C64::from_polar(1.0, sign * squared(x) / (2.0 * t)))
}

/// Free Schrödinger group `exp(−i t|ξ|²/2)`.
pub fn propagate(u: &SpectralField, t: f64) -> SpectralField {
    let mut out = u.apply_multiplier(|_, r| C64::from_polar(1.0, -0.5 * t * r * r));
    out.real = false;
    out
}

fn leak_ratio(lost: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        (lost / total).sqrt()
    }
}

/// `s^{−n/2} f(x/s)` on the same grid.
fn rescale(u: &SpectralField, s: f64) -> Result<SpectralField> {
    let g = u.grid;
    let m = g.modes;
    let nf = g.n as f64;
    if s == 1.0 {
        return Ok(u.clone());
    }
    if s > 1.0 {
        // Samples of f beyond |x| = L/s leave the box.
        let samples = u.samples();
        let lim = g.half_width / s;
        let (mut lost, mut total) = (0.0, 0.0);
        for (i, v) in samples.iter().enumerate() {
            let p = g.point(i);
            let m2 = v.norm_sqr();
            total += m2;
            if p[..g.n].iter().any(|x| x.abs() > lim) {
                lost += m2;
            }
        }
        let leak = leak_ratio(lost, total);
        if leak > LEAKAGE_TOL {
            return Err(Error::DilationOffGrid(leak));
        }
        let x = g.x_axis();
        let c = g.dxi() / (2.0 * PI).sqrt();
        let mut mat = vec![C64::new(0.0, 0.0); m * m];
        for (j, xj) in x.iter().enumerate() {
            for k in 0..m {
                let xi = g.signed(k) as f64 * g.dxi();
                let y = xj / s;
                mat[j * m + k] = if k == m / 2 { C64::new(c * (xi * y).cos(), 0.0) } else { c * C64::from_polar(1.0, xi * y) };
            }
        }
        let mut data = u.coeffs.clone();
        apply_axis_matrix(&mut data, g.n, m, &mat);
        let amp = s.powf(-nf / 2.0);
        data.iter_mut().for_each(|v| *v *= amp);
        Ok(SpectralField::from_samples(g, &data, u.real))
    } else {
        // Coefficients beyond s·ξ_max are not represented after compression.
        let lim = s * g.xi_max();
        let (mut lost, mut total) = (0.0, 0.0);
        for (i, c) in u.coeffs.iter().enumerate() {
            let f = g.freq(i);
            let m2 = c.norm_sqr();
            total += m2;
            if f[..g.n].iter().any(|z| z.abs() > lim) {
                lost += m2;
            }
        }
        let leak = leak_ratio(lost, total);
        if leak > LEAKAGE_TOL {
            return Err(Error::DilationOffGrid(leak));
        }
        let x = g.x_axis();
        let c = g.dx() / (2.0 * PI).sqrt();
        let mut mat = vec![C64::new(0.0, 0.0); m * m];
        for k in 0..m {
            let zeta = s * g.signed(k) as f64 * g.dxi();
            for (j, xj) in x.iter().enumerate() {
                mat[k * m + j] = c * C64::from_polar(1.0, -zeta * xj);
            }
        }
        let mut data = u.samples();
        apply_axis_matrix(&mut data, g.n, m, &mat);
        let amp = s.powf(nf / 2.0);
        data.iter_mut().for_each(|v| *v *= amp);
        let mut out = SpectralField::from_coeffs(g, data, u.real)?;
        if u.real {
            out.symmetrize();
        }
        Ok(out)
    }
}

/// `(D(t)f)(x) = (it)^{−n/2} f(x/t)` on the same grid.
pub fn dilate(u: &SpectralField, t: f64) -> Result<SpectralField> {
    let r = rescale(u, t)?;
    Ok(r.scale(i_pow(-(u.grid.n as f64) / 2.0)))
}

/// `D(t)⁻¹ = i^n D(1/t)` on the same grid.
pub fn undilate(u: &SpectralField, t: f64) -> Result<SpectralField> {
    let r = rescale(u, 1.0 / t)?;
    Ok(r.scale(i_pow(u.grid.n as f64 / 2.0)))
}

/// `D(t)f` as an exact relabelling onto the box scaled by `t`.
pub fn dilate_onto_scaled(u: &SpectralField, t: f64) -> SpectralField {
    let mut out = u.scale(i_pow(-(u.grid.n as f64) / 2.0) * t.powf(u.grid.n as f64 / 2.0));
    out.grid = u.grid.scaled(t);
    out
}

/// `D(t)⁻¹f` as an exact relabelling onto the box scaled by `1/t`.
pub fn undilate_onto_scaled(u: &SpectralField, t: f64) -> SpectralField {
    let mut out = u.scale(i_pow(u.grid.n as f64 / 2.0) * t.powf(-(u.grid.n as f64) / 2.0));
    out.grid = u.grid.scaled(1.0 / t);
    out
}

pub fn apply_mdu(u: &SpectralField, t: f64, which: Mdu) -> Result<SpectralField> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t = {t} must be positive")));
    }
    Ok(match which {
        Mdu::M => chirp(u, t, 1.0),
        Mdu::Minv => chirp(u, t, -1.0),
        Mdu::D => dilate(u, t)?,
        Mdu::Dinv => undilate(u, t)?,
        Mdu::U => propagate(u, t),
        Mdu::Uinv => propagate(u, -t),
    })
}

/// Field whose samples are the Fourier transform (or inverse transform) of `u` at the
/// grid points, evaluated from the sample sum.
pub fn fourier_as_field(u: &SpectralField, inverse: bool) -> Result<SpectralField> {
    let g = u.grid;
    let m = g.modes;
    if g.half_width > g.xi_max() {
        return Err(Error::InvalidInput("box wider than the frequency range; transform not representable".into()));
    }
    let lim = g.half_width;
    let (mut lost, mut total) = (0.0, 0.0);
    for (i, c) in u.coeffs.iter().enumerate() {
        let f = g.freq(i);
        let m2 = c.norm_sqr();
        total += m2;
        if f[..g.n].iter().any(|z| z.abs() > lim) {
            lost += m2;
        }
    }
    let leak = leak_ratio(lost, total);
    if leak > LEAKAGE_TOL {
        return Err(Error::DilationOffGrid(leak));
    }
    let x = g.x_axis();
    let c = g.dx() / (2.0 * PI).sqrt();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut mat = vec![C64::new(0.0, 0.0); m * m];
    for (k, zeta) in x.iter().enumerate() {
        for (j, xj) in x.iter().enumerate() {
            mat[k * m + j] = c * C64::from_polar(1.0, sign * zeta * xj);
        }
    }
    let mut data = u.samples();
    apply_axis_matrix(&mut data, g.n, m, &mat);
    Ok(SpectralField::from_samples(g, &data, false))
}

/// `u(t) = M(t)D(t)v` held through its profile `v`; the physical field lives on the box
/// scaled by `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensField {
    pub t: f64,
    pub profile: SpectralField,
}

impl LensField {
    pub fn new(t: f64, profile: SpectralField) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("t = {t} must be positive")));
        }
        Ok(LensField { t, profile })
    }

    pub fn physical_grid(&self) -> Grid {
        self.profile.grid.scaled(self.t)
    }

    /// `M(t)D(t)v` on the scaled box.
    pub fn to_physical(&self) -> SpectralField {
        chirp(&dilate_onto_scaled(&self.profile, self.t), self.t, 1.0)
    }

    /// Profile of a physical field given on the box scaled by `t`.
    pub fn from_physical(u: &SpectralField, t: f64) -> Result<Self> {
        LensField::new(t, undilate_onto_scaled(&chirp(u, t, -1.0), t))
    }

    /// `‖<J(t)>^k f(J(t)) u‖₂`.
    pub fn j_weighted_norm(&self, spec: &NormSpec) -> Result<f64> {
        bracket_norm(&self.profile, spec)
    }
}

/// `‖<ξ>^k f(ξ) v̂‖₂` over every mode.
pub fn bracket_norm(v: &SpectralField, spec: &NormSpec) -> Result<f64> {
    let k = spec.k;
    weighted_norm(v, &spec.weight, |r| (1.0 + r * r).powf(k / 2.0))
}

/// `‖<J(t)>^k f(J(t)) u‖₂` for a physical field, via `J(t) = M(t)D(t)ξD(t)*M(t)*`
/// read in Fourier variables.
pub fn j_weighted_norm(u: &SpectralField, t: f64, spec: &NormSpec) -> Result<f64> {
    LensField::from_physical(u, t)?.j_weighted_norm(spec)
}
