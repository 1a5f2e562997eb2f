use std::f64::consts::PI;

use lrscatter::spectral::norms::{algebra_norm, fit_product_constant};
use lrscatter::spectral::Grid;
use lrscatter::weights::*;
use lrscatter::Error;
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

fn w(rho: f64, nu: f64, v: Variant) -> WeightParams {
    WeightParams::new(rho, nu, v).unwrap()
}

/// `ln Σ x^j (j!)^{-1/ν}` by brute force over a fixed index range.
fn brute_log_series(x: f64, nu: f64) -> f64 {
    let terms: Vec<f64> = (0..4000).map(|j| j as f64 * x.ln() - ln_gamma(j as f64 + 1.0) / nu).collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn asymptotic_form(x: f64, nu: f64) -> f64 {
    (nu - 1.0) / (2.0 * nu) * (2.0 * PI).ln() + 0.5 * nu.ln() + 0.5 * (nu - 1.0) * x.ln() + x.powf(nu) / nu
}

#[test]
fn weight_suite_has_no_violations() {
    let cells = run_suite(SuiteKind::Weights, &[0.1, 0.5, 1.0, 2.0], &[0.25, 0.5, 0.75, 1.0], &[1, 2, 3], 2000, 7).unwrap();
    assert_eq!(cells.len(), 2 * 4 * 4 * 3);
    for c in &cells {
        assert_eq!(c.violations, 0, "{c:?}");
        assert!(c.checks >= 2 * c.pairs);
    }
}

#[test]
fn series_suite_has_no_violations() {
    let cells = run_suite(SuiteKind::Series, &[0.1, 1.0, 2.0], &[0.25, 0.5, 0.75, 1.0], &[1, 3], 500, 11).unwrap();
    for c in &cells {
        assert_eq!(c.violations, 0, "{c:?}");
    }
}

#[test]
fn suite_is_deterministic() {
    let a = run_suite(SuiteKind::Weights, &[1.0], &[0.5], &[2], 300, 3).unwrap();
    let b = run_suite(SuiteKind::Weights, &[1.0], &[0.5], &[2], 300, 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn series_matches_brute_force() {
    for nu in [0.25, 0.5, 0.75, 1.0] {
        for x in [1e-3, 0.7, 5.0, 50.0, 80.0] {
            let l = eval_log_weight(&w(1.0, nu, Variant::FTilde), x).unwrap();
            let b = brute_log_series(x, nu);
            assert!((l - b).abs() < 1e-12 * b.abs().max(1.0), "{nu} {x}: {l} {b}");
        }
    }
}

#[test]
fn large_argument_ratio() {
    for x in [0.5, 3.0, 50.0] {
        assert!((asymptotic_ratio(&w(1.0, 1.0, Variant::FTilde), x).unwrap() - 1.0).abs() < 1e-12);
    }
    for (nu, x) in [(0.5, 50.0), (0.75, 50.0), (0.75, 80.0)] {
        let oracle = (brute_log_series(x, nu) - asymptotic_form(x, nu)).exp();
        let r = asymptotic_ratio(&w(1.0, nu, Variant::FTilde), x).unwrap();
        assert!((r - oracle).abs() < 1e-10, "{nu} {x}");
        assert!((r - 1.0).abs() < 0.02, "{nu} {x}: {r}");
    }
    // ρ enters through the argument scaling
    let r = asymptotic_ratio(&w(4.0, 0.5, Variant::FTilde), 50.0 / 16.0).unwrap();
    assert!((r - asymptotic_ratio(&w(1.0, 0.5, Variant::FTilde), 50.0).unwrap()).abs() < 1e-12);
}

#[test]
fn square_root_coefficients_track_the_power_series() {
    for nu in [0.5, 0.75] {
        let c = series_coefficients(nu, 200);
        let j = 200usize;
        let direct: f64 = (0..=2 * j)
            .map(|i| (-(ln_gamma(i as f64 + 1.0) + ln_gamma((2 * j - i) as f64 + 1.0)) / nu + 2.0 * ln_gamma(j as f64 + 1.0) / nu).exp())
            .sum();
        let log_b = 0.5 * direct.ln() - ln_gamma(j as f64 + 1.0) / nu;
        assert!((c.log_b[j] - log_b).abs() < 1e-12);
        let ratio = (c.log_b[j] - c.log_a[j]).exp() / (PI * nu * j as f64).powf(0.25);
        assert!((ratio - 1.0).abs() < 0.02, "{nu}: {ratio}");
    }
}

/// Trapezoid rule on `∫_ℝ f̄^{-2}(1 + 4^k f₀^{2ν})` for n = 1 and the capped weight, with
/// `r = s²` near the origin and `r = v²` in the tail.
fn algebra_integral_1d(rho: f64, nu: f64, k_low: f64, k_high: f64, steps: usize) -> f64 {
    let k = k_low.max(k_high);
    let g = |r: f64| {
        let lf = rho * r.powf(nu).max(1.0);
        let f1 = if r > 1.0 { r.powf(k_high) } else { r.powf(k_low) };
        (-2.0 * lf).exp() / (f1 * f1) * (1.0 + 4f64.powf(k) * (2.0 * nu * rho * r.powf(nu)).exp())
    };
    let trap = |h: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let dx = (b - a) / steps as f64;
        (0..=steps).map(|i| h(a + i as f64 * dx) * if i == 0 || i == steps { 0.5 } else { 1.0 }).sum::<f64>() * dx
    };
    let near = trap(&|s: f64| if s == 0.0 { 2.0 * (-2.0 * rho).exp() * (1.0 + 4f64.powf(k)) } else { 2.0 * s * g(s * s) }, 0.0, 1.0);
    let far = trap(&|v: f64| 2.0 * v * g(v * v), 1.0, 120.0);
    2.0 * (near + far)
}

#[test]
fn algebra_constant_is_grid_stable_and_matches_quadrature() {
    let p = w(1.0, 0.5, Variant::F);
    let c = algebra_constant(&p, 0.25, 1.0, 1).unwrap();
    let coarse = algebra_constant_with_tol(&p, 0.25, 1.0, 1, 1e-8).unwrap();
    assert!(c.is_finite() && c > 0.0);
    assert!((c - coarse).abs() < 1e-6 * c);
    let oracle = algebra_integral_1d(1.0, 0.5, 0.25, 1.0, 400_000).sqrt();
    assert!((c - oracle).abs() < 1e-5 * c, "{c} {oracle}");
}

#[test]
fn algebra_constant_gates() {
    let p = w(1.0, 0.5, Variant::F);
    assert!(matches!(algebra_constant(&p, 0.5, 1.0, 1), Err(Error::DivergentIntegral(_))));
    assert!(matches!(algebra_constant(&w(1.0, 1.0, Variant::F), 0.25, 1.0, 1), Err(Error::DivergentIntegral(_))));
    assert!(algebra_constant(&p, 1.2, 0.0, 3).is_ok());
}

#[test]
fn sampled_product_constant_stays_below_the_integral_bound() {
    let p = w(1.0, 0.5, Variant::F);
    let c = algebra_constant(&p, 0.25, 1.0, 1).unwrap();
    let g = Grid::new(1, 8.0 * PI, 128).unwrap();
    let fit = fit_product_constant(g, &p, 0.25, 1.0, 1000, 5).unwrap();
    assert!(fit.max_ratio > 0.0 && fit.max_ratio <= c, "{fit:?} vs {c}");
    assert!(fit.max_ratio <= c / (2.0 * PI).sqrt());
}

#[test]
fn algebra_norm_vanishes_only_for_zero() {
    let g = Grid::new(1, 4.0 * PI, 32).unwrap();
    let p = w(1.0, 0.5, Variant::F);
    let zero = lrscatter::spectral::SpectralField::zeros(g, false);
    assert_eq!(algebra_norm(&zero, &p, 0.25, 1.0).unwrap(), 0.0);
    let one = lrscatter::spectral::SpectralField::single_mode(g, &[3], lrscatter::spectral::C64::new(1.0, 0.0)).unwrap();
    let r: f64 = 3.0 * g.dxi();
    let expect = (1.0f64 * r.sqrt().max(1.0)).exp() * r.powf(if r > 1.0 { 1.0 } else { 0.25 }) * g.cell().sqrt();
    assert!((algebra_norm(&one, &p, 0.25, 1.0).unwrap() - expect).abs() < 1e-12 * expect);
}

proptest! {
    #[test]
    fn weights_are_monotone(r in 0.0f64..200.0, dr in 0.0f64..5.0, rho in 0.0f64..2.0, nu in 0.05f64..1.0) {
        for v in [Variant::F0, Variant::F, Variant::FTilde, Variant::FCap] {
            let p = w(rho, nu, v);
            prop_assert!(eval_log_weight(&p, r + dr).unwrap() >= eval_log_weight(&p, r).unwrap() - 1e-12);
            let q = w(rho + 0.1, nu, v);
            prop_assert!(eval_log_weight(&q, r).unwrap() >= eval_log_weight(&p, r).unwrap() - 1e-12);
        }
    }

    #[test]
    fn capped_weight_is_sandwiched(r in 0.0f64..500.0, rho in 0.0f64..2.0, nu in 0.05f64..1.0) {
        let l0 = eval_log_weight(&w(rho, nu, Variant::F0), r).unwrap();
        let l = eval_log_weight(&w(rho, nu, Variant::F), r).unwrap();
        prop_assert!(l0 <= l && l <= l0 + rho + 1e-15);
    }

    #[test]
    fn series_sandwich_and_ratios(x in 1e-3f64..300.0, a in 1e-3f64..300.0, nu in 0.1f64..1.0) {
        for rep in check_series_bounds(nu, x, a).unwrap() {
            prop_assert!(rep.satisfied, "{:?}", rep);
        }
    }

    #[test]
    fn sampled_pairs_satisfy_every_inequality(seed in 0u64..1000, rho in 0.05f64..2.0, nu in 0.1f64..1.0) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for n in 1..=3 {
            let (xi, eta) = sample_pair(&mut rng, n);
            for v in [Variant::F0, Variant::F] {
                let p = w(rho, nu, v);
                for rep in check_submultiplicative(&p, &xi, &eta).unwrap().into_iter().chain(check_lipschitz_family(&p, &xi, &eta).unwrap()) {
                    prop_assert!(rep.satisfied, "{:?}", rep);
                }
            }
            for rep in check_series_pair(&w(rho, nu, Variant::FTilde), &xi, &eta).unwrap() {
                prop_assert!(rep.satisfied, "{:?}", rep);
            }
        }
    }
}
