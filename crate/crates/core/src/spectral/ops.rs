use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use super::field::{forward, inverse, SpectralField, C64, ZERO};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Padded side length used for dealiased products.
pub fn padded_modes(m: usize) -> usize {
    let p = (3 * m).div_ceil(2);
    p + p % 2
}

fn padded_grid(g: &Grid) -> Grid {
    g.with_modes(padded_modes(g.modes))
}

/// Base-lattice → padded-lattice positions (`None` on the Nyquist planes).
fn embed_map(g: &Grid) -> Vec<Option<usize>> {
    let pg = padded_grid(g);
    (0..g.len())
        .map(|i| {
            if g.is_nyquist(i) {
                return None;
            }
            let p = g.unflatten(i);
            let mut q = [0usize; 3];
            for a in 0..g.n {
                q[a] = pg.position(g.signed(p[a])).expect("padded lattice contains base lattice");
            }
            Some(pg.flatten(&q[..g.n]))
        })
        .collect()
}

/// Real-space samples of `f` on the 3/2-padded grid.
pub fn to_padded(f: &SpectralField) -> Vec<C64> {
    let pg = padded_grid(&f.grid);
    let mut c = vec![ZERO; pg.len()];
    for (i, pos) in embed_map(&f.grid).into_iter().enumerate() {
        if let Some(j) = pos {
            c[j] = f.coeffs[i];
        }
    }
    inverse(&pg, &c)
}

/// Truncates padded real-space samples back onto the base lattice.
pub fn from_padded(grid: Grid, samples: &[C64], real: bool) -> SpectralField {
    let pg = padded_grid(&grid);
    let c = forward(&pg, samples);
    let mut out = SpectralField::zeros(grid, real);
    for (i, pos) in embed_map(&grid).into_iter().enumerate() {
        if let Some(j) = pos {
            out.coeffs[i] = c[j];
        }
    }
    if real {
        out.symmetrize();
    }
    out
}

/// Dealiased pointwise product.
pub fn product(u1: &SpectralField, u2: &SpectralField) -> Result<SpectralField> {
    u1.check_grid(u2)?;
    let a = to_padded(u1);
    let b = to_padded(u2);
    let s: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(from_padded(u1.grid, &s, u1.real && u2.real))
}

/// Spectral gradient (Nyquist components dropped).
pub fn gradient(u: &SpectralField) -> Vec<SpectralField> {
    let g = u.grid;
    (0..g.n)
        .map(|a| {
            let mut d = u.map_coeffs(|i, c| if g.is_nyquist(i) { ZERO } else { c * C64::new(0.0, g.freq(i)[a]) });
            d.real = u.real;
            d
        })
        .collect()
}

pub fn laplacian(u: &SpectralField) -> SpectralField {
    let g = u.grid;
    u.map_coeffs(|i, c| if g.is_nyquist(i) { ZERO } else { -c * g.freq_norm(i).powi(2) })
}

pub fn divergence(v: &[SpectralField]) -> Result<SpectralField> {
    let g = v.first().ok_or_else(|| Error::InvalidInput("empty vector field".into()))?.grid;
    let mut out = SpectralField::zeros(g, v.iter().all(|c| c.real));
    for (a, comp) in v.iter().enumerate() {
        comp.check_grid(&out)?;
        for i in 0..g.len() {
            if !g.is_nyquist(i) {
                out.coeffs[i] += comp.coeffs[i] * C64::new(0.0, g.freq(i)[a]);
            }
        }
    }
    Ok(out)
}

/// `Σ_a ∂_a u1 ∂_a u2` with one dealiased transform.
pub fn grad_dot(u1: &SpectralField, u2: &SpectralField) -> Result<SpectralField> {
    u1.check_grid(u2)?;
    let g1 = gradient(u1);
    let g2 = gradient(u2);
    let mut acc: Option<Vec<C64>> = None;
    for (a, b) in g1.iter().zip(&g2) {
        let pa = to_padded(a);
        let pb = to_padded(b);
        match acc.as_mut() {
            None => acc = Some(pa.iter().zip(&pb).map(|(x, y)| x * y).collect()),
            Some(v) => v.iter_mut().zip(pa.iter().zip(&pb)).for_each(|(s, (x, y))| *s += x * y),
        }
    }
    Ok(from_padded(u1.grid, &acc.expect("n >= 1"), u1.real && u2.real))
}

/// `(2∇φ·∇ + Δφ)w` with dealiased products.
pub fn transport_operator(phi: &SpectralField, w: &SpectralField) -> Result<SpectralField> {
    phi.check_grid(w)?;
    let mut acc: Vec<C64> = {
        let a = to_padded(&laplacian(phi));
        let b = to_padded(w);
        a.iter().zip(&b).map(|(x, y)| x * y).collect()
    };
    for (gp, gw) in gradient(phi).iter().zip(gradient(w).iter()) {
        let a = to_padded(gp);
        let b = to_padded(gw);
        acc.iter_mut().zip(a.iter().zip(&b)).for_each(|(s, (x, y))| *s += 2.0 * x * y);
    }
    Ok(from_padded(w.grid, &acc, false))
}

/// Mean of `|ξ|^s` over the ball with the volume of one lattice cell.
pub fn zero_mode_average(grid: &Grid, s: f64) -> f64 {
    let n = grid.n as f64;
    let r = grid.dxi() * ((ln_gamma(n / 2.0 + 1.0) - (n / 2.0) * PI.ln()) / n).exp();
    n / (n + s) * r.powf(s)
}

/// Multiplies by `|ξ|^exponent`, using the cell average at `ξ = 0`.
pub fn fractional_multiplier(u: &SpectralField, exponent: f64) -> Result<SpectralField> {
    let n = u.grid.n as f64;
    if !(exponent > -n && exponent <= 0.0) {
        return Err(Error::InvalidInput(format!("exponent {exponent} outside (-n, 0]")));
    }
    if exponent == 0.0 {
        return Ok(u.clone());
    }
    let z = zero_mode_average(&u.grid, exponent);
    Ok(u.apply_multiplier(|_, r| C64::new(if r == 0.0 { z } else { r.powf(exponent) }, 0.0)))
}

/// `κ Re |∇|^{μ−n}(w1 w̄2)`.
pub fn g0(w1: &SpectralField, w2: &SpectralField, kappa: f64, mu: f64) -> Result<SpectralField> {
    let n = w1.grid.n as f64;
    if !(mu > 0.0 && mu <= n) {
        return Err(Error::InvalidInput(format!("mu = {mu} outside (0, n]")));
    }
    w1.check_grid(w2)?;
    let a = to_padded(w1);
    let b = to_padded(w2);
    let s: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect();
    let prod = from_padded(w1.grid, &s, false);
    let mut out = fractional_multiplier(&prod, mu - n)?.re_part().scale_re(kappa);
    out.real = true;
    Ok(out)
}

/// `w · exp(i·sign·φ)` by real-space multiplication.
pub fn mul_phase(w: &SpectralField, phi: &SpectralField, sign: f64) -> Result<SpectralField> {
    w.check_grid(phi)?;
    let ws = w.samples();
    let ps = phi.samples();
    let s: Vec<C64> = ws.iter().zip(&ps).map(|(a, p)| a * C64::from_polar(1.0, sign * p.re)).collect();
    Ok(SpectralField::from_samples(w.grid, &s, false))
}

/// Real-space multiplication by a function of position.
pub fn mul_fn<F: Fn(&[f64]) -> C64>(w: &SpectralField, f: F) -> SpectralField {
    let g = w.grid;
    let s: Vec<C64> = w.samples().iter().enumerate().map(|(i, v)| v * f(&g.point(i)[..g.n])).collect();
    SpectralField::from_samples(g, &s, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> Grid {
        Grid::new(1, 16.0, 64).unwrap()
    }

    #[test]
    fn padded_sizes() {
        assert_eq!(padded_modes(16), 24);
        assert_eq!(padded_modes(18), 28);
        assert_eq!(padded_modes(256), 384);
    }

    #[test]
    fn zero_mode_average_one_dim() {
        let g = grid1();
        let s = -0.5;
        let exact = (g.dxi() / 2.0).powf(s) / (1.0 + s);
        assert!((zero_mode_average(&g, s) - exact).abs() < 1e-14);
    }

    #[test]
    fn single_mode_derivatives() {
        let g = grid1();
        let u = SpectralField::single_mode(g, &[3], C64::new(2.0, 1.0)).unwrap();
        let du = &gradient(&u)[0];
        let xi = 3.0 * g.dxi();
        assert!((du.coeff_at(&[3]).unwrap() - C64::new(2.0, 1.0) * C64::new(0.0, xi)).norm() < 1e-14);
        let l = laplacian(&u);
        assert!((l.coeff_at(&[3]).unwrap() + C64::new(2.0, 1.0) * xi * xi).norm() < 1e-13);
    }
}
