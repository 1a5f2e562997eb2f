//! Acceptance criteria, one line each. Every suite runs with its default configuration.

use std::io::Write;
use std::time::{Duration, Instant};

use lrscatter::auxiliary::{integrate, AuxState, Diagnostics, SolverConfig};
use lrscatter::spectral::{C64, SpectralField};
use lrscatter_cli::suites::{self, Assertion, Outcome};
use lrscatter_cli::{Experiment, ExperimentConfig};

struct Timed {
    outcome: Outcome,
    elapsed: Duration,
}

fn run(x: Experiment) -> Timed {
    let cfg = ExperimentConfig::new(x);
    cfg.validate().unwrap();
    let start = Instant::now();
    let outcome = suites::run(&cfg).unwrap();
    Timed { outcome, elapsed: start.elapsed() }
}

fn pick<'a>(o: &'a Outcome, pred: impl Fn(&str) -> bool) -> Vec<&'a Assertion> {
    let v: Vec<_> = o.assertions.iter().filter(|a| pred(&a.name)).collect();
    assert!(!v.is_empty());
    v
}

struct Line {
    passed: bool,
    text: String,
}

fn judge(name: &str, parts: &[&Assertion], extra: &[(bool, String)]) -> Line {
    let mut notes: Vec<String> = Vec::new();
    let mut passed = true;
    for a in parts {
        if !a.passed {
            passed = false;
            notes.push(format!("{} {}", a.name, a.detail));
        }
    }
    for (ok, note) in extra {
        passed &= ok;
        if !ok {
            notes.push(note.clone());
        }
    }
    let summary = if passed {
        let mut s: Vec<String> = parts.iter().map(|a| format!("{} {}", a.name, a.detail)).collect();
        s.extend(extra.iter().map(|(_, n)| n.clone()));
        s.join("; ")
    } else {
        notes.join("; ")
    };
    Line { passed, text: format!("{} {name}: {summary}", if passed { "PASS" } else { "FAIL" }) }
}

fn under(t: &Timed, secs: f64) -> (bool, String) {
    let s = t.elapsed.as_secs_f64();
    (s < secs, format!("runtime {s:.1} s (limit {secs} s)"))
}

fn start_state(modes: usize, t: f64) -> AuxState {
    let mut cfg = ExperimentConfig::new(Experiment::AuxSolve);
    cfg.numerics.grid.modes = modes;
    cfg.numerics.grid.half_width_pi = 8.0;
    cfg.data.amplitude = 0.3;
    cfg.data.phase_amplitude = 0.5;
    let phi = cfg.psi_plus().unwrap();
    AuxState::new(t, cfg.w_plus().unwrap(), phi).unwrap()
}

fn dist(a: &AuxState, b: &AuxState) -> f64 {
    let mut dw = a.w.clone();
    dw.axpy(C64::new(-1.0, 0.0), &b.w);
    let mut dp = a.phi.clone();
    dp.axpy(C64::new(-1.0, 0.0), &b.phi);
    dw.l2_norm() + dp.l2_norm()
}

fn self_convergence_order() -> f64 {
    let cfg = ExperimentConfig::new(Experiment::AuxSolve);
    let s = start_state(128, 1.0);
    let at = |steps: usize| {
        let c = SolverConfig { stepper_order: 4, fixed_steps: Some(steps), ..SolverConfig::default() };
        integrate(&s, 20.0, &cfg.physical.aux(), &c, &Diagnostics::plain(), &[20.0]).unwrap().states.pop().unwrap()
    };
    let (a, b, c) = (at(40), at(80), at(160));
    (dist(&a, &b) / dist(&b, &c)).log2()
}

/// Distances to θ = 0 divided by θ, and the error of the two-point linear extrapolation relative
/// to the distance at the smaller θ.
fn regularisation_limit() -> (Vec<f64>, f64) {
    let cfg = ExperimentConfig::new(Experiment::AuxSolve);
    let s = start_state(128, 2.0);
    let run = |theta: f64| {
        let c = SolverConfig { theta, rel_tol: 1e-10, abs_tol: 1e-12, ..SolverConfig::default() };
        integrate(&s, 8.0, &cfg.physical.aux(), &c, &Diagnostics::plain(), &[8.0]).unwrap().states.pop().unwrap()
    };
    let base = run(0.0);
    let thetas = [1e-3, 1e-4, 1e-5];
    let sols: Vec<AuxState> = thetas.iter().map(|&th| run(th)).collect();
    let slopes = sols.iter().zip(&thetas).map(|(x, th)| dist(x, &base) / th).collect();
    let extrap = |f: fn(&AuxState) -> &SpectralField| {
        let mut e = f(&sols[1]).scale_re(10.0 / 9.0);
        e.axpy(C64::new(-1.0 / 9.0, 0.0), f(&sols[0]));
        e.axpy(C64::new(-1.0, 0.0), f(&base));
        e.l2_norm()
    };
    let err = (extrap(|s| &s.w) + extrap(|s| &s.phi)) / dist(&sols[1], &base);
    (slopes, err)
}

#[test]
fn acceptance() {
    let mut lines = Vec::new();

    let w = run(Experiment::Weights);
    lines.push(judge("weight inequalities", &pick(&w.outcome, |_| true), &[under(&w, 60.0)]));

    let a = run(Experiment::AppendixA);
    lines.push(judge("series weight inequalities and ratios", &pick(&a.outcome, |_| true), &[under(&a, 60.0)]));

    let b = run(Experiment::AppendixB);
    lines.push(judge("algebra constant and product fit", &pick(&b.outcome, |_| true), &[]));

    let e = run(Experiment::Estimators);
    lines.push(judge("estimating function identities", &pick(&e.outcome, |_| true), &[under(&e, 60.0)]));

    let h = run(Experiment::Hierarchy);
    lines.push(judge("hierarchy closed forms", &pick(&h.outcome, |n| n.contains("closed form")), &[under(&h, 60.0)]));
    lines.push(judge("hierarchy decay shapes", &pick(&h.outcome, |n| n.starts_with("decay shape")), &[under(&h, 300.0)]));

    let g = run(Experiment::Gauge);
    lines.push(judge("phase levels gauge invariant", &pick(&g.outcome, |n| n.contains("levels")), &[]));

    let s = run(Experiment::AuxSolve);
    let q = self_convergence_order();
    let (slopes, extrap) = regularisation_limit();
    let spread = slopes.iter().map(|x| (x / slopes[2] - 1.0).abs()).fold(0.0, f64::max);
    lines.push(judge(
        "auxiliary solver",
        &pick(&s.outcome, |_| true),
        &[
            (q >= 3.5, format!("observed order {q:.2} (limit 3.5)")),
            (spread < 0.02, format!("theta slope spread {spread:.2e} (limit 2e-2)")),
            (extrap < 0.05, format!("extrapolation error {extrap:.2e} (limit 5e-2)")),
        ],
    ));

    let o = run(Experiment::WaveOp);
    lines.push(judge(
        "wave operator round trip",
        &pick(&o.outcome, |n| n.starts_with("recovered") || n.starts_with("ladder")),
        &[],
    ));
    let mut parts = pick(&o.outcome, |n| n.starts_with("weighted decay slope"));
    parts.extend(pick(&g.outcome, |n| n.starts_with("equivalent asymptotic data")));
    lines.push(judge("asymptotic estimate slope and gauge equivalence", &parts, &[]));
    lines.push(judge("wave operator equation residual", &pick(&o.outcome, |n| n.starts_with("equation residual")), &[]));

    let mut err = std::io::stderr().lock();
    for (i, l) in lines.iter().enumerate() {
        writeln!(err, "[criterion {:>2}] {}", i + 1, l.text).unwrap();
    }
    let failed: Vec<usize> = lines.iter().enumerate().filter(|(_, l)| !l.passed).map(|(i, _)| i + 1).collect();
    writeln!(err, "acceptance: {} of {} criteria pass", lines.len() - failed.len(), lines.len()).unwrap();
    assert!(failed.is_empty(), "failing criteria {failed:?}");
}
