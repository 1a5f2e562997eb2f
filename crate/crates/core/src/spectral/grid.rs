use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[−L, L]ⁿ` sampled with `modes` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub half_width: f64,
    pub modes: usize,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, modes: usize) -> Result<Self> {
        let g = Grid::raw(n, half_width, modes)?;
        if g.dxi() > 0.25 {
            return Err(Error::InvalidInput(format!(
                "frequency spacing {} does not resolve the unit sphere (needs half_width >= 4π)",
                g.dxi()
            )));
        }
        Ok(g)
    }

    /// Same as `new` without the frequency-resolution requirement.
    pub fn raw(n: usize, half_width: f64, modes: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidInput(format!("dimension {n} not in 1..=3")));
        }
        if modes < 16 || modes % 2 != 0 {
            return Err(Error::InvalidInput(format!("modes_per_dim {modes} must be even and >= 16")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput("half_width must be positive".into()));
        }
        Ok(Grid { n, half_width, modes })
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.modes as f64
    }

    pub fn xi_max(&self) -> f64 {
        self.dxi() * (self.modes / 2) as f64
    }

    pub fn len(&self) -> usize {
        self.modes.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice cell volume in frequency space.
    pub fn cell(&self) -> f64 {
        self.dxi().powi(self.n as i32)
    }

    /// Signed frequency index of FFT position `j`.
    pub fn signed(&self, j: usize) -> i64 {
        let m = self.modes as i64;
        let j = j as i64;
        if j < m / 2 {
            j
        } else {
            j - m
        }
    }

    /// FFT position of signed index `k`, if it lies on the lattice.
    pub fn position(&self, k: i64) -> Option<usize> {
        let m = self.modes as i64;
        if k < -m / 2 || k >= m / 2 {
            None
        } else {
            Some(((k + m) % m) as usize)
        }
    }

    /// Per-axis positions of a flat index (axis 0 slowest).
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for a in (0..self.n).rev() {
            out[a] = idx % self.modes;
            idx /= self.modes;
        }
        out
    }

    pub fn flatten(&self, pos: &[usize]) -> usize {
        pos.iter().take(self.n).fold(0, |acc, &p| acc * self.modes + p)
    }

    /// Frequency vector at flat index.
    pub fn freq(&self, idx: usize) -> [f64; 3] {
        let p = self.unflatten(idx);
        let mut out = [0.0; 3];
        for a in 0..self.n {
            out[a] = self.signed(p[a]) as f64 * self.dxi();
        }
        out
    }

    pub fn freq_norm(&self, idx: usize) -> f64 {
        let f = self.freq(idx);
        (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt()
    }

    /// True when any axis sits on the unpaired Nyquist index.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let p = self.unflatten(idx);
        (0..self.n).any(|a| p[a] == self.modes / 2)
    }

    /// Position of −ξ for the mode at `idx` (Nyquist maps to itself).
    pub fn negate(&self, idx: usize) -> usize {
        let p = self.unflatten(idx);
        let mut q = [0; 3];
        for a in 0..self.n {
            q[a] = (self.modes - p[a]) % self.modes;
        }
        self.flatten(&q[..self.n])
    }

    pub fn x_axis(&self) -> Vec<f64> {
        (0..self.modes).map(|j| -self.half_width + j as f64 * self.dx()).collect()
    }

    /// Spatial point at flat real-space index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let p = self.unflatten(idx);
        let mut out = [0.0; 3];
        for a in 0..self.n {
            out[a] = -self.half_width + p[a] as f64 * self.dx();
        }
        out
    }

    /// Grid with the same box and `modes` replaced.
    pub fn with_modes(&self, modes: usize) -> Grid {
        Grid { modes, ..*self }
    }

    /// Box scaled by `s` (the frequency lattice shrinks by `1/s`).
    pub fn scaled(&self, s: f64) -> Grid {
        Grid { half_width: self.half_width * s, ..*self }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n && self.modes == other.modes && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}
