use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::field::{SpectralField, C64, ZERO};
use super::grid::Grid;
use super::ops::product;
use crate::error::{Error, Result};
use crate::weights::{eval_log_weight, Variant, WeightParams};

/// Weight and regularity exponents of the amplitude and phase spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub weight: WeightParams,
    pub k: f64,
    pub ell: f64,
    pub ell_low: f64,
}

impl NormSpec {
    pub fn new(weight: WeightParams, k: f64, ell: f64, ell_low: f64) -> Result<Self> {
        if !(k >= 0.0 && ell.is_finite() && ell_low >= 0.0) {
            return Err(Error::InvalidInput(format!("norm exponents k = {k}, ell = {ell}, ell_low = {ell_low}")));
        }
        Ok(NormSpec { weight, k, ell, ell_low })
    }

    /// Unweighted spec (`ρ = 0`).
    pub fn plain(k: f64, ell: f64, ell_low: f64) -> Self {
        let weight = WeightParams::new(0.0, 1.0, Variant::F).expect("rho = 0 is valid");
        NormSpec { weight, k, ell, ell_low }
    }

    pub fn with_rho(self, rho: f64) -> Self {
        NormSpec { weight: self.weight.with_rho(rho), ..self }
    }

    /// Checks `0 ≤ ℓ_< < n/2` and, when `mu` is given, `ℓ_< > n/2 − μ`.
    pub fn check_phase_space(&self, n: usize, mu: Option<f64>) -> Result<()> {
        let h = n as f64 / 2.0;
        if self.ell_low >= h {
            return Err(Error::InvalidInput(format!("ell_low = {} must be below n/2 = {h}", self.ell_low)));
        }
        if let Some(mu) = mu {
            if self.ell_low <= h - mu {
                return Err(Error::InvalidInput(format!("ell_low = {} must exceed n/2 - mu = {}", self.ell_low, h - mu)));
            }
        }
        Ok(())
    }
}

fn log_weight(w: &WeightParams, r: f64) -> Result<f64> {
    let l = eval_log_weight(w, r)?;
    if l > 350.0 {
        return Err(Error::WeightOverflow(l));
    }
    Ok(l)
}

/// `(Σ m(|ξ|)² f(ξ)² |ĉ|² Δξⁿ)^{1/2}` with `m` evaluated per mode.
pub fn weighted_norm<M: Fn(f64) -> f64>(u: &SpectralField, weight: &WeightParams, m: M) -> Result<f64> {
    let g = u.grid;
    let mut s = 0.0;
    for (i, c) in u.coeffs.iter().enumerate() {
        if *c == ZERO {
            continue;
        }
        let r = g.freq_norm(i);
        let a = m(r) * log_weight(weight, r)?.exp();
        s += a * a * c.norm_sqr();
    }
    Ok((s * g.cell()).sqrt())
}

fn pow0(r: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        r.powf(e)
    }
}

/// Amplitude norm: `|ξ|^k f` above the unit sphere, `f` below.
pub fn k_norm(w: &SpectralField, spec: &NormSpec) -> Result<f64> {
    weighted_norm(w, &spec.weight, |r| if r > 1.0 { r.powf(spec.k) } else { 1.0 })
}

/// Amplitude norm at an arbitrary regularity `k`.
pub fn k_norm_at(w: &SpectralField, spec: &NormSpec, k: f64) -> Result<f64> {
    k_norm(w, &NormSpec { k, ..*spec })
}

/// Phase norm: `|ξ|^{ℓ+2} f` above the unit sphere, `|ξ|^{ℓ_<} f` below.
pub fn y_norm(phi: &SpectralField, spec: &NormSpec) -> Result<f64> {
    if !phi.real {
        return Err(Error::InvalidInput("phase norm needs a real field".into()));
    }
    y_norm_unchecked(phi, spec)
}

/// Phase norm at an arbitrary regularity `ℓ`.
pub fn y_norm_at(phi: &SpectralField, spec: &NormSpec, ell: f64) -> Result<f64> {
    y_norm(phi, &NormSpec { ell, ..*spec })
}

pub(crate) fn y_norm_unchecked(phi: &SpectralField, spec: &NormSpec) -> Result<f64> {
    weighted_norm(phi, &spec.weight, |r| if r > 1.0 { r.powf(spec.ell + 2.0) } else { pow0(r, spec.ell_low) })
}

/// Partition into modes with `|ξ| ≤ threshold` and the rest.
pub fn split_low_high(u: &SpectralField, threshold: f64) -> (SpectralField, SpectralField) {
    let g = u.grid;
    let mut low = SpectralField::zeros(g, u.real);
    let mut high = SpectralField::zeros(g, u.real);
    for (i, &c) in u.coeffs.iter().enumerate() {
        if g.freq_norm(i) <= threshold {
            low.coeffs[i] = c;
        } else {
            high.coeffs[i] = c;
        }
    }
    (low, high)
}

/// `∂_ρ |w|_k²` split by the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoDerivative {
    pub low: f64,
    pub high: f64,
}

impl RhoDerivative {
    pub fn total(&self) -> f64 {
        self.low + self.high
    }
}

/// Exact `ρ`-derivative of the squared amplitude norm, mode by mode.
pub fn rho_derivative(w: &SpectralField, spec: &NormSpec) -> Result<RhoDerivative> {
    let g = w.grid;
    let nu = spec.weight.nu;
    let capped = spec.weight.variant == Variant::F;
    let (mut low, mut high) = (0.0, 0.0);
    for (i, c) in w.coeffs.iter().enumerate() {
        if *c == ZERO {
            continue;
        }
        let r = g.freq_norm(i);
        let f2 = (2.0 * log_weight(&spec.weight, r)?).exp() * c.norm_sqr();
        let e = if capped { r.powf(nu).max(1.0) } else { pow0(r, nu) };
        if r > 1.0 {
            high += 2.0 * e * r.powf(2.0 * spec.k) * f2;
        } else {
            low += 2.0 * e * f2;
        }
    }
    Ok(RhoDerivative { low: low * g.cell(), high: high * g.cell() })
}

/// `‖f f₁ û‖₂` with `f₁ = |ξ|^{k_>}` outside the unit ball and `|ξ|^{k_<}` inside.
pub fn algebra_norm(u: &SpectralField, weight: &WeightParams, k_low: f64, k_high: f64) -> Result<f64> {
    weighted_norm(u, weight, |r| if r > 1.0 { pow0(r, k_high) } else { pow0(r, k_low) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductFit {
    pub pairs: usize,
    /// Largest observed `‖u₁u₂‖ / (‖u₁‖‖u₂‖)`.
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

fn random_field<R: Rng>(rng: &mut R, g: Grid, weight: &WeightParams, k_low: f64, k_high: f64) -> Result<SpectralField> {
    let decay = rng.gen_range(0.6..2.5);
    let scale = [0.3, 1.0, 3.0, 10.0][rng.gen_range(0..4)];
    let shift = rng.gen_range(-1.0..1.0) * scale;
    let mut u = SpectralField::zeros(g, false);
    for i in 0..g.len() {
        let r = g.freq_norm(i);
        if r == 0.0 || g.is_nyquist(i) {
            continue;
        }
        let f1 = if r > 1.0 { pow0(r, k_high) } else { pow0(r, k_low) };
        let fr = log_weight(weight, r)?.exp() * f1;
        let env = (-((g.freq(i)[0] - shift) / scale).powi(2) / 2.0).exp() / (1.0 + r).powf(decay);
        let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        u.coeffs[i] = z * env / fr;
    }
    Ok(u)
}

/// Samples random pairs and records the product ratio in the algebra norm. Zero modes
/// are left empty since `f₁` vanishes there when `k_< > 0`.
pub fn fit_product_constant(g: Grid, weight: &WeightParams, k_low: f64, k_high: f64, pairs: usize, seed: u64) -> Result<ProductFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_ratio, mut sum) = (0.0f64, 0.0);
    for _ in 0..pairs {
        let u1 = random_field(&mut rng, g, weight, k_low, k_high)?;
        let u2 = random_field(&mut rng, g, weight, k_low, k_high)?;
        let p = product(&u1, &u2)?;
        let ratio = algebra_norm(&p, weight, k_low, k_high)? / (algebra_norm(&u1, weight, k_low, k_high)? * algebra_norm(&u2, weight, k_low, k_high)?);
        max_ratio = max_ratio.max(ratio);
        sum += ratio;
    }
    Ok(ProductFit { pairs, max_ratio, mean_ratio: sum / pairs.max(1) as f64 })
}
