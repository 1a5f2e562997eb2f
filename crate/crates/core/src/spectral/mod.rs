//! Fields on a periodic truncation of ℝⁿ stored as Fourier coefficients.

pub mod dilation;
pub mod fft;
pub mod field;
pub mod grid;
pub mod io;
pub mod norms;
pub mod ops;

pub use dilation::{apply_mdu, fourier_as_field, j_weighted_norm, LensField, Mdu};
pub use field::{SpectralField, C64, ZERO};
pub use grid::Grid;
pub use norms::{k_norm, split_low_high, y_norm, NormSpec};
