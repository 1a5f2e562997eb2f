use serde::{Deserialize, Serialize};

use super::field::{SpectralField, C64};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"LRSF";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldRecord {
    version: u32,
    grid: Grid,
    real: bool,
    /// Interleaved `re, im` pairs in FFT order.
    coeffs: Vec<f64>,
}

pub fn to_json(f: &SpectralField) -> Result<String> {
    let rec = FieldRecord {
        version: FORMAT_VERSION,
        grid: f.grid,
        real: f.real,
        coeffs: f.coeffs.iter().flat_map(|c| [c.re, c.im]).collect(),
    };
    serde_json::to_string(&rec).map_err(|e| Error::Io(e.to_string()))
}

pub fn from_json(s: &str) -> Result<SpectralField> {
    let rec: FieldRecord = serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))?;
    if rec.version != FORMAT_VERSION {
        return Err(Error::Io(format!("unsupported field format version {}", rec.version)));
    }
    let grid = Grid::raw(rec.grid.n, rec.grid.half_width, rec.grid.modes)?;
    if rec.coeffs.len() != 2 * grid.len() {
        return Err(Error::Io("coefficient count does not match grid".into()));
    }
    let coeffs = rec.coeffs.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
    SpectralField::from_coeffs(grid, coeffs, rec.real)
}

/// Little-endian binary layout: magic, version, n, modes, half_width, real flag, then
/// interleaved coefficients.
pub fn to_bytes(f: &SpectralField) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + 16 * f.coeffs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(f.grid.n as u32).to_le_bytes());
    out.extend_from_slice(&(f.grid.modes as u32).to_le_bytes());
    out.extend_from_slice(&f.grid.half_width.to_le_bytes());
    out.push(f.real as u8);
    for c in &f.coeffs {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn from_bytes(b: &[u8]) -> Result<SpectralField> {
    let bad = || Error::Io("truncated or malformed field record".into());
    if b.len() < 25 || &b[..4] != MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Io(format!("unsupported field format version {version}")));
    }
    let grid = Grid::raw(u32_at(8) as usize, f64_at(16), u32_at(12) as usize)?;
    let real = b[24] != 0;
    if b.len() != 25 + 16 * grid.len() {
        return Err(bad());
    }
    let coeffs = (0..grid.len()).map(|i| C64::new(f64_at(25 + 16 * i), f64_at(33 + 16 * i))).collect();
    SpectralField::from_coeffs(grid, coeffs, real)
}
