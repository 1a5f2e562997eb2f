use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

fn plan(len: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().expect("fft cache poisoned");
    let (planner, map) = &mut *guard;
    map.entry((len, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(len) } else { planner.plan_fft_forward(len) })
        .clone()
}

/// Unnormalized n-dimensional transform of a row-major cube with side `m`.
pub fn fft_nd(data: &mut [Complex64], n: usize, m: usize, inverse: bool) {
    let p = plan(m, inverse);
    let total = data.len();
    debug_assert_eq!(total, m.pow(n as u32));
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut scratch = vec![Complex64::new(0.0, 0.0); p.get_inplace_scratch_len()];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                if stride == 1 {
                    p.process_with_scratch(&mut data[base..base + m], &mut scratch);
                    continue;
                }
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                p.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Applies the dense `m × m` matrix `mat` (row-major, `out_i = Σ_j mat_ij in_j`) along every axis.
pub fn apply_axis_matrix(data: &mut [Complex64], n: usize, m: usize, mat: &[Complex64]) {
    let total = data.len();
    debug_assert_eq!(mat.len(), m * m);
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                for (i, o) in out.iter_mut().enumerate() {
                    *o = mat[i * m..(i + 1) * m].iter().zip(&line).map(|(a, b)| a * b).sum();
                }
                for (j, v) in out.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
