use std::f64::consts::PI;

use lrscatter::auxiliary::*;
use lrscatter::hierarchy::{solve_hierarchy, HierarchyConfig, TimeQuadrature};
use lrscatter::spectral::dilation::propagate;
use lrscatter::spectral::field::C64;
use lrscatter::spectral::ops::{g0, gradient, laplacian, mul_phase, product};
use lrscatter::spectral::{Grid, SpectralField};
use lrscatter::Error;

fn grid(modes: usize) -> Grid {
    Grid::new(1, 8.0 * PI, modes).unwrap()
}

fn gaussian(g: Grid, amp: f64) -> SpectralField {
    SpectralField::from_fn(g, false, |x| C64::new(amp * (-x[0] * x[0] / 2.0).exp(), 0.3 * amp * x[0] * (-x[0] * x[0] / 2.0).exp()))
}

fn bump_phase(g: Grid, amp: f64) -> SpectralField {
    SpectralField::from_real_fn(g, |x| amp * (-(x[0] - 0.5).powi(2) / 3.0).exp())
}

fn diff(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let mut d = a.clone();
    d.axpy(C64::new(-1.0, 0.0), b);
    d
}

const PARAMS: AuxParams = AuxParams { gamma: 0.6, kappa: 1.0, mu: 0.5 };

fn start(modes: usize, t: f64) -> AuxState {
    let g = grid(modes);
    AuxState::new(t, gaussian(g, 0.3), bump_phase(g, 0.5)).unwrap()
}

fn tight() -> SolverConfig {
    SolverConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..SolverConfig::default() }
}

#[test]
fn rhs_without_amplitude_is_phase_quadratic() {
    let g = grid(64);
    let s = AuxState::new(2.0, SpectralField::zeros(g, false), bump_phase(g, 1.0)).unwrap();
    let (dw, dphi) = rhs_auxiliary(&s, &PARAMS).unwrap();
    assert!(dw.is_zero());
    let s0 = &gradient(&s.phi)[0];
    let expect = product(s0, s0).unwrap().scale_re(0.125);
    assert!(diff(&dphi, &expect).l2_norm() < 1e-15);
}

#[test]
fn rhs_free_when_phase_and_coupling_vanish() {
    let g = grid(64);
    let s = AuxState::new(3.0, gaussian(g, 1.0), SpectralField::zeros(g, true)).unwrap();
    let p = AuxParams { kappa: 0.0, ..PARAMS };
    let (dw, dphi) = rhs_auxiliary(&s, &p).unwrap();
    let expect = laplacian(&s.w).scale(C64::new(0.0, 1.0 / 18.0));
    assert!(diff(&dw, &expect).l2_norm() < 1e-15);
    assert!(dphi.is_zero());
}

#[test]
fn phase_gradient_matches_velocity_equation() {
    let s = start(128, 1.7);
    let (_, dphi) = rhs_auxiliary(&s, &PARAMS).unwrap();
    let lhs = &gradient(&dphi)[0];
    let rhs = &s_equation_rhs(&s, &PARAMS).unwrap()[0];
    assert!(diff(lhs, rhs).l2_norm() <= 1e-10 * rhs.l2_norm());
}

#[test]
fn zero_data_stays_zero() {
    let g = grid(64);
    let s = AuxState::new(1.0, SpectralField::zeros(g, false), SpectralField::zeros(g, true)).unwrap();
    let tr = integrate(&s, 50.0, &PARAMS, &SolverConfig::default(), &Diagnostics::plain(), &[10.0, 50.0]).unwrap();
    assert_eq!(tr.states.len(), 2);
    for st in &tr.states {
        assert!(st.w.is_zero() && st.phi.is_zero());
    }
}

#[test]
fn tolerances_are_range_checked() {
    let s = start(32, 1.0);
    for (r, a) in [(1e-13, 1e-12), (1e-3, 1e-12), (1e-8, 1e-2)] {
        let c = SolverConfig { rel_tol: r, abs_tol: a, ..SolverConfig::default() };
        assert!(matches!(integrate(&s, 2.0, &PARAMS, &c, &Diagnostics::plain(), &[]), Err(Error::InvalidInput(_))));
    }
    let c = SolverConfig { stepper_order: 3, ..SolverConfig::default() };
    assert!(integrate(&s, 2.0, &PARAMS, &c, &Diagnostics::plain(), &[]).is_err());
}

fn final_state(order: usize, steps: usize, t1: f64) -> AuxState {
    let s = start(128, 1.0);
    let c = SolverConfig { stepper_order: order, fixed_steps: Some(steps), ..SolverConfig::default() };
    integrate(&s, t1, &PARAMS, &c, &Diagnostics::plain(), &[t1]).unwrap().states.pop().unwrap()
}

fn observed_order(order: usize, base: usize) -> f64 {
    let a = final_state(order, base, 20.0);
    let b = final_state(order, 2 * base, 20.0);
    let c = final_state(order, 4 * base, 20.0);
    let e1 = diff(&a.w, &b.w).l2_norm() + diff(&a.phi, &b.phi).l2_norm();
    let e2 = diff(&b.w, &c.w).l2_norm() + diff(&b.phi, &c.phi).l2_norm();
    (e1 / e2).log2()
}

#[test]
fn self_convergence_fourth_order() {
    let q = observed_order(4, 40);
    assert!(q >= 3.5, "observed order {q}");
}

#[test]
fn self_convergence_second_order() {
    let q = observed_order(2, 80);
    assert!(q >= 1.5, "observed order {q}");
}

#[test]
fn residual_small_forward_and_backward() {
    let centres = [1.5, 4.0, 12.0, 30.0];
    let outs = stencil_times(&centres, 1e-3);
    let c = SolverConfig { rel_tol: 1e-8, abs_tol: 1e-12, ..SolverConfig::default() };
    let fwd = integrate(&start(128, 1.0), 40.0, &PARAMS, &c, &Diagnostics::plain(), &outs).unwrap();
    let bwd = integrate(&start(128, 40.0), 1.0, &PARAMS, &c, &Diagnostics::plain(), &outs).unwrap();
    for tr in [fwd, bwd] {
        for r in residual(&tr, &centres, 1e-3).unwrap() {
            assert!(r.w_residual < 1e-6 && r.phi_residual < 1e-6, "{r:?}");
        }
    }
}

#[test]
fn regularisation_limit_is_linear_in_theta() {
    let s = start(128, 2.0);
    let run = |theta: f64| {
        let c = SolverConfig { theta, ..tight() };
        integrate(&s, 8.0, &PARAMS, &c, &Diagnostics::plain(), &[8.0]).unwrap().states.pop().unwrap()
    };
    let base = run(0.0);
    let thetas = [1e-3, 1e-4, 1e-5];
    let sols: Vec<AuxState> = thetas.iter().map(|&th| run(th)).collect();
    let slopes: Vec<f64> = sols.iter().zip(&thetas).map(|(s, th)| diff(&s.w, &base.w).l2_norm() / th).collect();
    for sl in &slopes {
        assert!((sl / slopes[2] - 1.0).abs() < 0.02, "{slopes:?}");
    }
    // linear extrapolation from the two larger values recovers θ = 0 well below either distance
    let extrap = {
        let mut e = sols[1].w.scale_re(10.0 / 9.0);
        e.axpy(C64::new(-1.0 / 9.0, 0.0), &sols[0].w);
        e
    };
    assert!(diff(&extrap, &base.w).l2_norm() < 0.05 * diff(&sols[1].w, &base.w).l2_norm());
}

#[test]
fn regularisation_drains_mass_at_gradient_rate() {
    let theta = 1e-3;
    let centre = 3.0;
    let outs = stencil_times(&[centre], 1e-3);
    let c = SolverConfig { theta, ..tight() };
    let tr = integrate(&start(128, 2.0), 5.0, &PARAMS, &c, &Diagnostics::plain(), &outs).unwrap();
    let mass = |t: f64| tr.state_at(t).unwrap().w.l2_norm().powi(2);
    let d = 1e-3 * centre;
    let rate = (mass(centre - 2.0 * d) - 8.0 * mass(centre - d) + 8.0 * mass(centre + d) - mass(centre + 2.0 * d)) / (12.0 * d);
    let expect = regularised_mass_rate(&tr.state_at(centre).unwrap().rotated(), theta);
    assert!(((rate - expect) / expect).abs() < 1e-3, "{rate} vs {expect}");
}

#[test]
fn phase_stays_real() {
    let tr = integrate(&start(128, 1.0), 100.0, &PARAMS, &SolverConfig::default(), &Diagnostics::plain(), &[10.0, 100.0]).unwrap();
    for s in &tr.states {
        assert!(s.phi.hermitian_defect() < 1e-11, "{}", s.phi.hermitian_defect());
    }
}

#[test]
fn backward_then_forward_returns() {
    let s = start(128, 20.0);
    let c = tight();
    let back = integrate(&s, 1.0, &PARAMS, &c, &Diagnostics::plain(), &[1.0]).unwrap();
    let mid = back.states[0].clone();
    let fwd = integrate(&mid, 20.0, &PARAMS, &c, &Diagnostics::plain(), &[20.0]).unwrap();
    let end = &fwd.states[0];
    assert!(diff(&end.w, &s.w).l2_norm() < 1e-8 * s.w.l2_norm());
    assert!(diff(&end.phi, &s.phi).l2_norm() < 1e-8 * s.phi.l2_norm());
}

#[test]
fn gauge_equivalent_data_stay_equivalent() {
    let g = grid(256);
    let s = AuxState::new(2.0, gaussian(g, 0.3), bump_phase(g, 0.5)).unwrap();
    let omega = SpectralField::from_real_fn(g, |x| 0.2 * (x[0] / 2.0).sin() * (-x[0] * x[0] / 20.0).exp());
    let mut phi2 = s.phi.clone();
    phi2.axpy(C64::new(1.0, 0.0), &omega);
    let s2 = AuxState::new(2.0, mul_phase(&s.w, &omega, 1.0).unwrap(), phi2).unwrap();
    let outs = [3.0, 10.0, 40.0];
    let c = tight();
    let a = integrate(&s, 40.0, &PARAMS, &c, &Diagnostics::plain(), &outs).unwrap();
    let b = integrate(&s2, 40.0, &PARAMS, &c, &Diagnostics::plain(), &outs).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        let ux = mul_phase(&x.w, &x.phi, -1.0).unwrap();
        let uy = mul_phase(&y.w, &y.phi, -1.0).unwrap();
        assert!(diff(&ux, &uy).l2_norm() < 1e-8, "t = {}: {}", x.t, diff(&ux, &uy).l2_norm());
    }
}

#[test]
fn norm_ceiling_reports_rho() {
    let s = start(64, 1.0);
    let c = SolverConfig { norm_ceiling: 1e-3, ..SolverConfig::default() };
    match integrate(&s, 2.0, &PARAMS, &c, &Diagnostics::plain(), &[]) {
        Err(Error::NormBlowup { rho, .. }) => assert_eq!(rho, 0.0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn transport_with_flat_phase_is_constant() {
    let g = grid(64);
    let v = gaussian(g, 1.0);
    let zero = |_t: f64| SpectralField::zeros(g, true);
    let c = SolverConfig::default();
    let tr = solve_transport(zero, &v, 50.0, 1.0, &[50.0, 1.0], TransportKind::Amplitude, &c).unwrap();
    assert_eq!(tr.at(50.0).unwrap(), &v);
    assert!(diff(tr.at(1.0).unwrap(), &v).l2_norm() == 0.0);
    let chi = SpectralField::from_real_fn(g, |_| 0.7);
    let phi = |t: f64| bump_phase(g, t.powf(0.4));
    let tr = solve_transport(phi, &chi, 50.0, 1.0, &[1.0], TransportKind::Phase, &c).unwrap();
    assert!(diff(tr.at(1.0).unwrap(), &chi).l2_norm() < 1e-13);
}

#[test]
fn transport_gauge_product_solves_amplitude_equation() {
    let g = grid(256);
    let phi = move |t: f64| bump_phase(g, 0.5 * t.powf(0.4));
    let centres = [4.0, 10.0, 25.0];
    let delta = 1e-3;
    let outs = stencil_times(&centres, delta);
    let c = SolverConfig { rel_tol: 1e-11, abs_tol: 1e-12, ..SolverConfig::default() };
    let v = solve_transport(phi, &gaussian(g, 0.5), 30.0, 1.0, &outs, TransportKind::Amplitude, &c).unwrap();
    let psi = SpectralField::from_real_fn(g, |x| 0.3 * (-x[0] * x[0] / 8.0).exp());
    let chi = solve_transport(phi, &psi, 30.0, 1.0, &outs, TransportKind::Phase, &c).unwrap();
    let z = |t: f64| mul_phase(v.at(t).unwrap(), chi.at(t).unwrap(), -1.0).unwrap();
    for &t in &centres {
        let d = delta * t;
        let mut dz = z(t - 2.0 * d);
        dz.axpy(C64::new(-8.0, 0.0), &z(t - d));
        dz.axpy(C64::new(8.0, 0.0), &z(t + d));
        dz.axpy(C64::new(-1.0, 0.0), &z(t + 2.0 * d));
        let dz = dz.scale_re(1.0 / (12.0 * d));
        let f = lrscatter::spectral::ops::transport_operator(&phi(t), &z(t)).unwrap().scale_re(0.5 / (t * t));
        assert!(diff(&dz, &f).l2_norm() < 1e-9, "t = {t}: {}", diff(&dz, &f).l2_norm());
    }
}

fn hierarchy_cfg(kappa: f64) -> HierarchyConfig {
    HierarchyConfig { p: 1, gamma: 0.6, kappa, mu: 0.5, k: 5.0, next_phase: true, quadrature: TimeQuadrature::default() }
}

#[test]
fn decoupled_cauchy_problem_is_free() {
    let g = grid(64);
    let w = gaussian(g, 0.2);
    let h = solve_hierarchy(&w, hierarchy_cfg(0.0), &[]).unwrap();
    let params = AuxParams { kappa: 0.0, ..PARAMS };
    let run = cauchy_from_t0(&h, &SpectralField::zeros(g, true), 100.0, 1.0, &params, &SolverConfig::default(), &Diagnostics::plain(), &[1.0, 10.0])
        .unwrap();
    let expect = propagate(&w, 0.01);
    for s in &run.trajectory.states {
        assert!(s.phi.is_zero());
        assert!(diff(&s.rotated(), &expect).l2_norm() < 1e-13);
    }
    assert_eq!(run.amplitude.at(100.0).unwrap(), &w);
    let (wp, rep) = extract_w_plus(&run.trajectory, &lrscatter::spectral::NormSpec::plain(0.0, 0.0, 0.0), |t| t.powf(-0.5)).unwrap();
    assert_eq!(wp, run.trajectory.latest().unwrap().rotated());
    assert!(rep.slope == f64::NEG_INFINITY);
}

#[test]
fn cauchy_round_trip_recovers_data() {
    let g = grid(128);
    let w = gaussian(g, 0.1);
    let psi = SpectralField::from_real_fn(g, |x| 0.05 * (-x[0] * x[0] / 4.0).exp());
    let h = solve_hierarchy(&w, hierarchy_cfg(1.0), &[]).unwrap();
    let outs = lrscatter::estimators::log_grid(1.0, 1e3, 4);
    let run = cauchy_from_t0(&h, &psi, 1e3, 1.0, &PARAMS, &SolverConfig::default(), &Diagnostics::plain(), &outs).unwrap();
    let spec = lrscatter::spectral::NormSpec::plain(0.0, 0.0, 0.0);
    let (wp, _) = extract_w_plus(&run.trajectory, &spec, |t| t.powf(-0.5)).unwrap();
    assert!(diff(&wp, &w).l2_norm() < 0.05 * w.l2_norm());
    let (pp, rep) = extract_psi_plus(&run.trajectory, &h, &spec, |t| t.powf(-0.5)).unwrap();
    assert!(diff(&pp, &psi).l2_norm() < 1e-12 * psi.l2_norm().max(1.0));
    assert!(rep.slope < 0.0);
    let g0f = g0(&w, &w, 1.0, 0.5).unwrap();
    assert!(g0f.l2_norm() > 0.0);
}

#[test]
fn psi_extraction_needs_finite_remainder() {
    let g = grid(32);
    let w = gaussian(g, 0.1);
    let c = HierarchyConfig { gamma: 0.3, k: 5.0, next_phase: false, p: 1, ..hierarchy_cfg(1.0) };
    let h = solve_hierarchy(&w, c, &[]).unwrap();
    let s = AuxState::new(1.0, w.clone(), SpectralField::zeros(g, true)).unwrap();
    let tr = integrate(&s, 2.0, &PARAMS, &SolverConfig::default(), &Diagnostics::plain(), &[1.0, 2.0]).unwrap();
    let spec = lrscatter::spectral::NormSpec::plain(0.0, 0.0, 0.0);
    assert!(matches!(extract_psi_plus(&tr, &h, &spec, |t| t), Err(Error::PInfinite(1))));
}
