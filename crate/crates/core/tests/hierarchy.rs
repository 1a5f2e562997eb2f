use std::f64::consts::PI;

use lrscatter::estimators::log_grid;
use lrscatter::hierarchy::*;
use lrscatter::spectral::field::C64;
use lrscatter::spectral::ops::{g0, gradient, grad_dot, laplacian, product};
use lrscatter::spectral::{k_norm, Grid, NormSpec, SpectralField};
use proptest::prelude::*;

fn grid(modes: usize) -> Grid {
    Grid::new(1, 8.0 * PI, modes).unwrap()
}

fn gaussian(g: Grid, amp: f64, shift: f64) -> SpectralField {
    SpectralField::from_fn(g, false, |x| C64::new(amp * (-(x[0] - shift).powi(2) / 2.0).exp(), 0.3 * amp * x[0] * (-x[0] * x[0] / 2.0).exp()))
}

fn cfg(p: usize, quadrature: TimeQuadrature) -> HierarchyConfig {
    HierarchyConfig { p, gamma: 0.6, kappa: 1.0, mu: 0.5, k: 5.0, next_phase: false, quadrature }
}

fn diff_norm(a: &SpectralField, b: &SpectralField) -> f64 {
    let mut d = a.clone();
    d.axpy(C64::new(-1.0, 0.0), b);
    d.l2_norm()
}

/// `(2∇G·∇ + ΔG)w` from gradients and products taken one at a time.
fn transport_oracle(phi: &SpectralField, w: &SpectralField) -> SpectralField {
    let mut out = product(&laplacian(phi), w).unwrap();
    for (a, b) in gradient(phi).iter().zip(gradient(w).iter()) {
        out.axpy(C64::new(2.0, 0.0), &product(a, b).unwrap());
    }
    out
}

#[test]
fn phase_zero_is_hbar_times_g0() {
    let gamma = 0.6;
    let w = gaussian(grid(256), 0.3, 0.0);
    let h = solve_hierarchy(&w, cfg(1, TimeQuadrature::default()), &[]).unwrap();
    let g = g0(&w, &w, 1.0, 0.5).unwrap();
    for t in [1.0f64, 3.0, 1e2, 1e4] {
        let hbar0 = (t.powf(1.0 - gamma) - 1.0) / (1.0 - gamma);
        let expect = g.scale_re(hbar0);
        let got = h.phi_at(0, t);
        assert!(diff_norm(&got, &expect) <= 1e-8 * expect.l2_norm().max(1e-300), "t = {t}");
    }
}

#[test]
fn amplitude_one_closed_form() {
    let gamma: f64 = 0.6;
    let w = gaussian(grid(256), 0.3, 0.0);
    let h = solve_hierarchy(&w, cfg(1, TimeQuadrature::default()), &[]).unwrap();
    let field = transport_oracle(&g0(&w, &w, 1.0, 0.5).unwrap(), &w);
    let (a, b) = (1.0 / gamma + 1.0 / (1.0 - gamma), 1.0 / (1.0 - gamma));
    for t in [1.0f64, 10.0, 1e3, 1e5] {
        let q0 = a * t.powf(-gamma) - b / t;
        let expect = field.scale_re(-0.5 * q0);
        assert!(diff_norm(&h.w_at(1, t), &expect) <= 1e-6 * expect.l2_norm(), "t = {t}");
    }
}

#[test]
fn no_interaction_no_corrections() {
    let w = gaussian(grid(64), 0.5, 0.0);
    let c = HierarchyConfig { kappa: 0.0, ..cfg(2, TimeQuadrature::Exact) };
    let h = solve_hierarchy(&w, c, &[]).unwrap();
    for t in [1.0, 50.0] {
        for m in 0..=2 {
            assert!(h.phi_at(m, t).is_zero());
            assert!(h.w_at(m + 1, t).is_zero());
        }
    }
}

#[test]
fn levels_satisfy_their_evolution_equations() {
    // central differences of the stored levels against the right sides evaluated from fields
    let w = gaussian(grid(128), 0.4, 0.5);
    let h = solve_hierarchy(&w, cfg(2, TimeQuadrature::Exact), &[]).unwrap();
    let gamma = 0.6;
    for t in [2.0, 40.0] {
        let d = 1e-4 * t;
        let ws: Vec<SpectralField> = (0..=3).map(|m| h.w_at(m, t)).collect();
        let ps: Vec<SpectralField> = (0..=2).map(|m| h.phi_at(m, t)).collect();
        for m in 0..=2usize {
            let mut rhs = SpectralField::zeros(w.grid, false);
            for j in 0..=m {
                rhs.axpy(C64::new(0.5 / (t * t), 0.0), &transport_oracle(&ps[j], &ws[m - j]));
            }
            let mut fd = h.w_at(m + 1, t + d);
            fd.axpy(C64::new(-1.0, 0.0), &h.w_at(m + 1, t - d));
            let fd = fd.scale_re(0.5 / d);
            assert!(diff_norm(&fd, &rhs) <= 1e-6 * rhs.l2_norm(), "w_{} at {t}", m + 1);
        }
        for m in 0..2usize {
            let mut rhs = SpectralField::zeros(w.grid, true);
            for j in 0..=m {
                rhs.axpy(C64::new(0.5 / (t * t), 0.0), &grad_dot(&ps[j], &ps[m - j]).unwrap());
            }
            for j in 0..=m + 1 {
                rhs.axpy(C64::new(t.powf(-gamma), 0.0), &g0(&ws[j], &ws[m + 1 - j], 1.0, 0.5).unwrap());
            }
            let mut fd = h.phi_at(m + 1, t + d);
            fd.axpy(C64::new(-1.0, 0.0), &h.phi_at(m + 1, t - d));
            let fd = fd.scale_re(0.5 / d);
            assert!(diff_norm(&fd, &rhs) <= 1e-6 * rhs.l2_norm(), "phi_{} at {t}", m + 1);
        }
    }
}

#[test]
fn boundary_conditions() {
    let w = gaussian(grid(128), 0.4, 0.0);
    let h = solve_hierarchy(&w, cfg(2, TimeQuadrature::default()), &[]).unwrap();
    for m in 0..=2 {
        assert!(h.phi_at(m, 1.0).l2_norm() <= 1e-14);
    }
    let late = 1e12;
    for m in 1..=3 {
        assert!(h.w_at(m, late).l2_norm() <= 1e-5 * h.w_at(m, 1.0).l2_norm());
    }
    assert!(diff_norm(&h.w_at(0, 17.0), &w) == 0.0);
}

#[test]
fn tabulated_levels_match_exact() {
    let w = gaussian(grid(128), 0.4, 0.3);
    let exact = solve_hierarchy(&w, cfg(2, TimeQuadrature::Exact), &[]).unwrap();
    let tab = solve_hierarchy(&w, cfg(2, TimeQuadrature::Tabulated { exact_levels: 0, t_max: 1e7, per_decade: 128 }), &[]).unwrap();
    for t in [1.5, 30.0, 1e4] {
        for m in 1..=3 {
            let e = exact.w_at(m, t);
            assert!(diff_norm(&tab.w_at(m, t), &e) <= 1e-4 * e.l2_norm(), "w_{m} at {t}");
        }
        for m in 1..=2 {
            let e = exact.phi_at(m, t);
            assert!(diff_norm(&tab.phi_at(m, t), &e) <= 1e-5 * e.l2_norm(), "phi_{m} at {t}");
        }
    }
}

#[test]
fn partial_sums_telescope() {
    let w = gaussian(grid(64), 0.4, 0.0);
    let h = solve_hierarchy(&w, cfg(2, TimeQuadrature::Exact), &[]).unwrap();
    let (w0, p0) = h.partial_sums_at(0, 5.0).unwrap();
    assert!(diff_norm(&w0, &w) == 0.0);
    assert!(diff_norm(&p0, &h.phi_at(0, 5.0)) == 0.0);
    let (w2, p2) = h.partial_sums_at(2, 5.0).unwrap();
    let (w1, _) = h.partial_sums_at(1, 5.0).unwrap();
    assert!(diff_norm(&w2, &w1.clone()) > 0.0);
    let mut d = w2.clone();
    d.axpy(C64::new(-1.0, 0.0), &w1);
    assert!(diff_norm(&d, &h.w_at(2, 5.0)) <= 1e-15 * w2.l2_norm());
    assert!(p2.real);
    assert!(h.partial_sums_at(2, 1.0).unwrap().1.l2_norm() <= 1e-14);
    assert!(h.partial_sums(3).is_err());
}

#[test]
fn lower_levels_independent_of_depth() {
    let w = gaussian(grid(64), 0.4, 0.0);
    let shallow = solve_hierarchy(&w, HierarchyConfig { k: 3.5, ..cfg(1, TimeQuadrature::Exact) }, &[]).unwrap();
    let deep = solve_hierarchy(&w, cfg(2, TimeQuadrature::Exact), &[]).unwrap();
    for t in [1.0, 7.0, 300.0] {
        for m in 0..=1 {
            assert!(diff_norm(&shallow.phi_at(m, t), &deep.phi_at(m, t)) <= 1e-12 * deep.phi_at(m, t).l2_norm().max(1e-300));
        }
        for m in 0..=2 {
            assert!(diff_norm(&shallow.w_at(m, t), &deep.w_at(m, t)) <= 1e-12 * deep.w_at(m, t).l2_norm());
        }
    }
}

#[test]
fn bilinear_scaling() {
    let g = grid(64);
    let w = gaussian(g, 0.2, 0.0);
    let w2 = w.scale_re(2.0);
    let a = solve_hierarchy(&w, cfg(1, TimeQuadrature::Exact), &[]).unwrap();
    let b = solve_hierarchy(&w2, cfg(1, TimeQuadrature::Exact), &[]).unwrap();
    for t in [2.0, 90.0] {
        let p = a.phi_at(0, t);
        assert!(diff_norm(&b.phi_at(0, t), &p.scale_re(4.0)) <= 1e-13 * p.l2_norm());
        let w1 = a.w_at(1, t);
        assert!(diff_norm(&b.w_at(1, t), &w1.scale_re(8.0)) <= 1e-13 * w1.l2_norm());
    }
}

#[test]
fn phases_are_real() {
    let w = gaussian(grid(64), 0.4, 0.7);
    let h = solve_hierarchy(&w, cfg(2, TimeQuadrature::default()), &[]).unwrap();
    for m in 0..=2 {
        let p = h.phi_at(m, 33.0);
        assert!(p.real);
        assert!(p.im_part().l2_norm() <= 1e-12 * p.l2_norm());
    }
}

fn refined_norms(mu: f64, half_width: f64, modes: usize) -> Vec<f64> {
    let g = Grid::new(1, half_width, modes).unwrap();
    let w = gaussian(g, 0.4, 0.0);
    let c = HierarchyConfig { mu, k: 7.0, ..cfg(2, TimeQuadrature::Exact) };
    let h = solve_hierarchy(&w, c, &[]).unwrap();
    let spec = NormSpec::plain(2.0, 0.0, 0.25);
    (1..=3).map(|m| k_norm(&h.w_at(m, 20.0), &spec).unwrap()).collect()
}

#[test]
fn refinement_leaves_norms_unchanged() {
    // local interaction; halving the frequency step by doubling box and mode count
    let a = refined_norms(1.0, 8.0 * PI, 512);
    let b = refined_norms(1.0, 16.0 * PI, 1024);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6 * y, "{x} vs {y}");
    }
}

#[test]
fn riesz_interaction_converges_with_box() {
    // |ξ|^{μ−n} is singular at the origin, so the periodic box converges algebraically
    let n8 = refined_norms(0.5, 8.0 * PI, 512);
    let n16 = refined_norms(0.5, 16.0 * PI, 1024);
    let n32 = refined_norms(0.5, 32.0 * PI, 2048);
    for m in 0..3 {
        let d1 = (n16[m] - n8[m]).abs();
        let d2 = (n32[m] - n16[m]).abs();
        assert!(d2 < 0.5 * d1 && d2 < 1e-5 * n32[m], "level {}: {d1:e} {d2:e}", m + 1);
    }
}

#[test]
fn decay_of_first_levels_is_exact() {
    let w = gaussian(grid(256), 0.3, 0.0);
    let h = solve_hierarchy(&w, cfg(1, TimeQuadrature::default()), &[]).unwrap();
    let spec = NormSpec::plain(5.0, 0.0, 0.25);
    let r = verify_decay(&h, &spec, &log_grid(10.0, 1e3, 8)).unwrap();
    assert!(r.entries[0].variation < 0.05);
    assert!(r.entries[1].variation < 1e-10);
    assert!(verify_decay(&h, &spec, &[10.0, 100.0]).is_err());
}

#[test]
fn next_phase_bounded_by_p() {
    let w = gaussian(grid(128), 0.3, 0.0);
    let c = HierarchyConfig { next_phase: true, k: 3.5, ..cfg(1, TimeQuadrature::default()) };
    let h = solve_hierarchy(&w, c, &[]).unwrap();
    let r = verify_decay(&h, &NormSpec::plain(3.5, 0.0, 0.25), &log_grid(10.0, 1e4, 8)).unwrap();
    let e = r.entries.last().unwrap();
    assert!(e.quantity.starts_with("|phi_2|"));
    let hi = e.ratios.iter().cloned().fold(0.0, f64::max);
    let lo = e.ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo < 3.0, "{:?}", e.ratios);
    assert!(h.phi_next_at(1e15).unwrap().l2_norm() < 1e-3 * h.phi_next_at(1.0).unwrap().l2_norm());
}

#[test]
fn infeasible_configuration() {
    let w = gaussian(grid(64), 0.3, 0.0);
    let c = HierarchyConfig { next_phase: true, gamma: 0.3, ..cfg(1, TimeQuadrature::Exact) };
    assert!(solve_hierarchy(&w, c, &[]).is_err());
    let c = HierarchyConfig { k: 2.0, ..cfg(2, TimeQuadrature::Exact) };
    assert!(solve_hierarchy(&w, c, &[]).is_err());
}

#[test]
fn gauge_shift_cases() {
    let g = grid(256);
    let w = gaussian(g, 0.3, 0.0);
    let spec = NormSpec::plain(5.0, 0.0, 0.25);
    let times = log_grid(1.0, 1e4, 2);
    let c = cfg(1, TimeQuadrature::default());
    let zero = SpectralField::zeros(g, true);
    assert_eq!(gauge_shift_check(&w, &zero, c, &spec, &times).unwrap().max_phase_deviation, 0.0);
    let constant = SpectralField::from_real_fn(g, |_| 0.7);
    let r = gauge_shift_check(&w, &constant, c, &spec, &times).unwrap();
    assert!(r.max_phase_deviation <= 1e-10 * r.max_phase_norm);
    let omega = SpectralField::from_real_fn(g, |x| 0.5 * (-(x[0] * x[0]) / 8.0).exp() * x[0]);
    let r = gauge_shift_check(&w, &omega, c, &spec, &times).unwrap();
    assert!(r.max_phase_deviation <= 1e-8 * r.max_phase_norm, "{r:?}");
    assert!(r.max_amplitude_deviation > 1e-6 * r.max_phase_norm, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_gauge_is_invisible(c in -3.0f64..3.0, amp in 0.05f64..0.5, shift in -1.0f64..1.0) {
        let g = grid(64);
        let w = gaussian(g, amp, shift);
        let omega = SpectralField::from_real_fn(g, |_| c);
        let r = gauge_shift_check(&w, &omega, cfg(1, TimeQuadrature::Exact), &NormSpec::plain(5.0, 0.0, 0.25), &[1.0, 10.0, 1e3]).unwrap();
        prop_assert!(r.max_phase_deviation <= 1e-10 * r.max_phase_norm);
    }

    #[test]
    fn phase_zero_scales_quadratically(s in 0.1f64..3.0) {
        let w = gaussian(grid(64), 0.3, 0.0);
        let a = solve_hierarchy(&w, cfg(0, TimeQuadrature::Exact), &[]);
        let c = HierarchyConfig { k: 3.5, ..cfg(0, TimeQuadrature::Exact) };
        let a = a.or_else(|_| solve_hierarchy(&w, c, &[])).unwrap();
        let b = solve_hierarchy(&w.scale_re(s), a.config, &[]).unwrap();
        let p = a.phi_at(0, 12.0);
        prop_assert!(diff_norm(&b.phi_at(0, 12.0), &p.scale_re(s * s)) <= 1e-12 * s * s * p.l2_norm());
    }
}
