use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::fft_nd;
use super::grid::Grid;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Function on the periodic box stored as samples of its unitary Fourier transform on
/// the frequency lattice, in FFT order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<C64>,
    pub real: bool,
}

fn parity_sign(grid: &Grid, idx: usize) -> f64 {
    let p = grid.unflatten(idx);
    let s: usize = p[..grid.n].iter().sum();
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Real-space samples → lattice coefficients.
pub(crate) fn forward(grid: &Grid, samples: &[C64]) -> Vec<C64> {
    let mut data = samples.to_vec();
    fft_nd(&mut data, grid.n, grid.modes, false);
    let scale = (grid.dx() / (2.0 * PI).sqrt()).powi(grid.n as i32);
    for (i, v) in data.iter_mut().enumerate() {
        *v *= scale * parity_sign(grid, i);
    }
    data
}

/// Lattice coefficients → real-space samples.
pub(crate) fn inverse(grid: &Grid, coeffs: &[C64]) -> Vec<C64> {
    let mut data: Vec<C64> = coeffs.iter().enumerate().map(|(i, c)| c * parity_sign(grid, i)).collect();
    fft_nd(&mut data, grid.n, grid.modes, true);
    let scale = (grid.dxi() / (2.0 * PI).sqrt()).powi(grid.n as i32);
    for v in data.iter_mut() {
        *v *= scale;
    }
    data
}

impl SpectralField {
    pub fn zeros(grid: Grid, real: bool) -> Self {
        SpectralField { grid, coeffs: vec![ZERO; grid.len()], real }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<C64>, real: bool) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidInput(format!("expected {} coefficients, got {}", grid.len(), coeffs.len())));
        }
        Ok(SpectralField { grid, coeffs, real })
    }

    pub fn from_samples(grid: Grid, samples: &[C64], real: bool) -> Self {
        let mut f = SpectralField { grid, coeffs: forward(&grid, samples), real };
        if real {
            f.symmetrize();
        }
        f
    }

    pub fn from_fn<F: Fn(&[f64]) -> C64>(grid: Grid, real: bool, f: F) -> Self {
        let samples: Vec<C64> = (0..grid.len()).map(|i| f(&grid.point(i)[..grid.n])).collect();
        SpectralField::from_samples(grid, &samples, real)
    }

    pub fn from_real_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Self {
        SpectralField::from_fn(grid, true, |x| C64::new(f(x), 0.0))
    }

    /// Field whose only coefficient is `amp` at the signed index `k`.
    pub fn single_mode(grid: Grid, k: &[i64], amp: C64) -> Result<Self> {
        let mut pos = [0usize; 3];
        for a in 0..grid.n {
            pos[a] = grid.position(k[a]).ok_or_else(|| Error::InvalidInput("mode outside lattice".into()))?;
        }
        let mut f = SpectralField::zeros(grid, false);
        f.coeffs[grid.flatten(&pos[..grid.n])] = amp;
        Ok(f)
    }

    pub fn samples(&self) -> Vec<C64> {
        inverse(&self.grid, &self.coeffs)
    }

    pub fn real_samples(&self) -> Vec<f64> {
        self.samples().iter().map(|c| c.re).collect()
    }

    pub fn coeff_at(&self, k: &[i64]) -> Option<C64> {
        let mut pos = [0usize; 3];
        for a in 0..self.grid.n {
            pos[a] = self.grid.position(k[a])?;
        }
        Some(self.coeffs[self.grid.flatten(&pos[..self.grid.n])])
    }

    pub fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `(Σ |ĉ|² Δξⁿ)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell()).sqrt()
    }

    /// `(Σ |w(x_j)|² dxⁿ)^{1/2}` from real-space samples.
    pub fn l2_norm_real_space(&self) -> f64 {
        let dv = self.grid.dx().powi(self.grid.n as i32);
        (self.samples().iter().map(|c| c.norm_sqr()).sum::<f64>() * dv).sqrt()
    }

    pub fn inner(&self, other: &SpectralField) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.cell()
    }

    pub fn map_coeffs<F: Fn(usize, C64) -> C64>(&self, f: F) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| f(i, c)).collect(),
            real: self.real,
        }
    }

    /// Multiplies each coefficient by `m(ξ, |ξ|)`.
    pub fn apply_multiplier<F: Fn(&[f64; 3], f64) -> C64>(&self, m: F) -> SpectralField {
        let g = self.grid;
        self.map_coeffs(|i, c| {
            let xi = g.freq(i);
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            c * m(&xi, r)
        })
    }

    pub fn scale(&self, s: C64) -> SpectralField {
        let mut f = self.map_coeffs(|_, c| c * s);
        f.real = self.real && s.im == 0.0;
        f
    }

    pub fn scale_re(&self, s: f64) -> SpectralField {
        self.map_coeffs(|_, c| c * s)
    }

    /// Coefficients of the complex conjugate function: `ĉ'(ξ) = conj(ĉ(−ξ))`.
    pub fn conj(&self) -> SpectralField {
        let g = self.grid;
        let mut out = SpectralField::zeros(g, self.real);
        for i in 0..g.len() {
            out.coeffs[g.negate(i)] = self.coeffs[i].conj();
        }
        out
    }

    /// Coefficients of `Re w`.
    pub fn re_part(&self) -> SpectralField {
        let c = self.conj();
        let mut out = (self + &c).scale_re(0.5);
        out.real = true;
        out
    }

    /// Coefficients of `Im w`.
    pub fn im_part(&self) -> SpectralField {
        let c = self.conj();
        let mut out = (self - &c).scale(C64::new(0.0, -0.5));
        out.real = true;
        out
    }

    /// Projects onto Hermitian-symmetric coefficients.
    pub fn symmetrize(&mut self) {
        let g = self.grid;
        let old = self.coeffs.clone();
        for i in 0..g.len() {
            self.coeffs[i] = 0.5 * (old[i] + old[g.negate(i)].conj());
        }
    }

    /// `max |ĉ(−ξ) − conj ĉ(ξ)|` relative to `max |ĉ|`.
    pub fn hermitian_defect(&self) -> f64 {
        let g = self.grid;
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (0..g.len()).map(|i| (self.coeffs[g.negate(i)] - self.coeffs[i].conj()).norm()).fold(0.0, f64::max) / scale
    }

    pub fn zero_nyquist(&mut self) {
        let g = self.grid;
        for i in 0..g.len() {
            if g.is_nyquist(i) {
                self.coeffs[i] = ZERO;
            }
        }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&mut self, a: C64, x: &SpectralField) {
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * xv;
        }
        self.real = self.real && x.real && a.im == 0.0;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, o: &SpectralField) -> SpectralField {
        assert!(self.grid.same_as(&o.grid), "grid mismatch");
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
            real: self.real && o.real,
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, o: &SpectralField) -> SpectralField {
        assert!(self.grid.same_as(&o.grid), "grid mismatch");
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a - b).collect(),
            real: self.real && o.real,
        }
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale_re(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        self.scale_re(s)
    }
}

impl Mul<C64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: C64) -> SpectralField {
        self.scale(s)
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, o: &SpectralField) {
        self.axpy(C64::new(1.0, 0.0), o);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, o: &SpectralField) {
        self.axpy(C64::new(-1.0, 0.0), o);
    }
}
