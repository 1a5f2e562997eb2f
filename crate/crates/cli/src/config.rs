//! Experiment configuration, read from TOML.

use std::f64::consts::PI;
use std::path::PathBuf;

use lrscatter::auxiliary::{AuxParams, SolverConfig};
use lrscatter::estimators::{RhoPrime, RhoSchedule};
use lrscatter::hierarchy::{HierarchyConfig, TimeQuadrature};
use lrscatter::spectral::{Grid, NormSpec, SpectralField, C64};
use lrscatter::weights::{Variant, WeightParams};
use lrscatter::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Experiment {
    Weights,
    AppendixA,
    AppendixB,
    Estimators,
    Hierarchy,
    AuxSolve,
    WaveOp,
    Gauge,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Weights,
        Experiment::AppendixA,
        Experiment::AppendixB,
        Experiment::Estimators,
        Experiment::Hierarchy,
        Experiment::AuxSolve,
        Experiment::WaveOp,
        Experiment::Gauge,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Experiment::Weights => "weights",
            Experiment::AppendixA => "appendix-a",
            Experiment::AppendixB => "appendix-b",
            Experiment::Estimators => "estimators",
            Experiment::Hierarchy => "hierarchy",
            Experiment::AuxSolve => "aux-solve",
            Experiment::WaveOp => "wave-op",
            Experiment::Gauge => "gauge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physical {
    pub n: usize,
    pub gamma: f64,
    pub kappa: f64,
    pub mu: f64,
    pub nu: f64,
    pub p: usize,
}

impl Default for Physical {
    fn default() -> Self {
        Physical { n: 1, gamma: 0.6, kappa: 1.0, mu: 0.5, nu: 1.0, p: 1 }
    }
}

impl Physical {
    pub fn aux(&self) -> AuxParams {
        AuxParams { gamma: self.gamma, kappa: self.kappa, mu: self.mu }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Box half-width in units of π.
    pub half_width_pi: f64,
    pub modes: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { half_width_pi: 6.0, modes: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub theta: f64,
    pub stepper_order: usize,
    pub norm_ceiling: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection { rel_tol: d.rel_tol, abs_tol: d.abs_tol, theta: d.theta, stepper_order: d.stepper_order, norm_ceiling: d.norm_ceiling }
    }
}

impl SolverSection {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            theta: self.theta,
            stepper_order: self.stepper_order,
            norm_ceiling: self.norm_ceiling,
            ..SolverConfig::default()
        }
    }
}

/// `ρ(t) = ρ_∞ − ∫ₜ^∞ amp·s^{−1−ε} ds`, and the norm exponents measured with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhoSection {
    pub rho_inf: f64,
    pub amp: f64,
    pub epsilon: f64,
    pub k: f64,
    pub ell: f64,
    pub ell_low: f64,
}

impl Default for RhoSection {
    fn default() -> Self {
        RhoSection { rho_inf: 1.0, amp: 0.02, epsilon: 0.05, k: 2.0, ell: 1.0, ell_low: 0.25 }
    }
}

impl RhoSection {
    pub fn rho_prime(&self) -> RhoPrime {
        RhoPrime::Power { amp: self.amp, eps: self.epsilon }
    }

    pub fn schedule(&self) -> Result<RhoSchedule> {
        RhoSchedule::increasing(self.rho_inf, self.rho_prime())
    }

    pub fn spec(&self, nu: f64) -> Result<NormSpec> {
        NormSpec::new(WeightParams::new(self.rho_inf, nu, Variant::F)?, self.k, self.ell, self.ell_low)
    }
}

/// Gaussian asymptotic data `w₊ = a(1 + i c x)e^{−|x−x₀|²/2s²}` and phase `ψ₊ = b e^{−|x|²/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub amplitude: f64,
    pub width: f64,
    pub centre: f64,
    pub chirp: f64,
    pub phase_amplitude: f64,
    /// Amplitude of the smooth gauge function `ω = a cos(x/4)` used by the gauge suites.
    pub gauge_amplitude: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { amplitude: 0.1, width: 1.0, centre: 0.0, chirp: 0.3, phase_amplitude: 0.05, gauge_amplitude: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub rhos: Vec<f64>,
    pub nus: Vec<f64>,
    pub dims: Vec<usize>,
    pub pairs: usize,
    pub product_pairs: usize,
    /// Radius, exponent and regularities of the product-algebra check.
    pub algebra_rho: f64,
    pub algebra_nu: f64,
    pub k_low: f64,
    pub k_high: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            rhos: vec![0.1, 0.5, 1.0, 2.0],
            nus: vec![0.25, 0.5, 0.75, 1.0],
            dims: vec![1, 2, 3],
            pairs: 100_000,
            product_pairs: 1000,
            algebra_rho: 1.0,
            algebra_nu: 0.5,
            k_low: 0.25,
            k_high: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    /// Exponents γ swept by the estimator suite.
    pub gammas: Vec<f64>,
    pub m_max: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub per_decade: usize,
    /// Final time `T` of the wave operator.
    pub t_final: f64,
    pub t0_first: f64,
    pub rungs: usize,
    pub ladder_factor: f64,
    /// ε in the `L^∞` exponent when `k ≤ n/2`.
    pub beta_epsilon: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            gammas: vec![0.55, 0.7, 0.9],
            m_max: 3,
            t_start: 1.0,
            t_end: 1e4,
            per_decade: 8,
            t_final: 1.0,
            t0_first: 1000.0,
            rungs: 3,
            ladder_factor: 10.0,
            beta_epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub grid: GridSection,
    pub solver: SolverSection,
    pub rho: RhoSection,
    pub seed: u64,
    pub sampling: SamplingSection,
    pub time: TimeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub physical: Physical,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            physical: Physical::default(),
            numerics: Numerics::default(),
            data: DataSection::default(),
            output_dir: None,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Hard errors for invalid parameters, warnings for conditions kept open for probing.
    pub fn validate(&self) -> Result<Vec<String>> {
        let ph = &self.physical;
        let nf = ph.n as f64;
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(1..=3).contains(&ph.n) {
            return bad(format!("n = {} outside 1..=3", ph.n));
        }
        if !(ph.mu > 0.0 && ph.mu <= nf) {
            return bad(format!("mu = {} outside (0, n]", ph.mu));
        }
        if !(ph.gamma > 0.0 && ph.gamma <= 1.0) {
            return bad(format!("gamma = {} outside (0, 1]", ph.gamma));
        }
        if !(ph.nu > 0.0 && ph.nu <= 1.0) {
            return bad(format!("nu = {} outside (0, 1]", ph.nu));
        }
        let g = &self.numerics.grid;
        if g.modes < 8 || g.modes % 2 != 0 || !(g.half_width_pi > 0.0) {
            return bad(format!("grid needs an even mode count >= 8 and a positive width, got {} / {}", g.modes, g.half_width_pi));
        }
        self.numerics.solver.solver().validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let t = &self.numerics.time;
        if !(t.t_start >= 1.0 && t.t_end > t.t_start && t.per_decade > 0) {
            return bad("time window must satisfy 1 <= t_start < t_end".into());
        }
        if !(t.t_final >= 1.0 && t.t0_first > t.t_final && t.rungs >= 2 && t.ladder_factor > 0.0) {
            return bad("ladder needs 1 <= t_final < t0_first, at least two rungs and a positive factor".into());
        }
        let r = &self.numerics.rho;
        if !(r.rho_inf > 0.0 && r.amp > 0.0 && r.epsilon > 0.0) {
            return bad("rho schedule needs positive rho_inf, amp and epsilon".into());
        }
        let mut warnings = Vec::new();
        if ph.mu > nf - 2.0 + 2.0 * ph.nu {
            warnings.push(format!("mu = {} exceeds n - 2 + 2 nu = {}; results are outside the covered range", ph.mu, nf - 2.0 + 2.0 * ph.nu));
        }
        let needs_p = matches!(self.experiment, Experiment::AuxSolve | Experiment::WaveOp | Experiment::Gauge);
        if needs_p && (ph.p + 2) as f64 * ph.gamma <= 1.0 {
            warnings.push(format!("(p + 2) gamma = {} <= 1: the decay schedules do not exist", (ph.p + 2) as f64 * ph.gamma));
        }
        Ok(warnings)
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.numerics.grid;
        Grid::new(self.physical.n, g.half_width_pi * PI, g.modes)
    }

    pub fn hierarchy(&self) -> HierarchyConfig {
        let ph = &self.physical;
        HierarchyConfig {
            p: ph.p,
            gamma: ph.gamma,
            kappa: ph.kappa,
            mu: ph.mu,
            k: 5.0,
            next_phase: false,
            quadrature: TimeQuadrature::default(),
        }
    }

    pub fn w_plus(&self) -> Result<SpectralField> {
        let d = self.data;
        Ok(SpectralField::from_fn(self.grid()?, false, |x| {
            let r2: f64 = x.iter().enumerate().map(|(i, v)| (v - if i == 0 { d.centre } else { 0.0 }).powi(2)).sum();
            let e = d.amplitude * (-r2 / (2.0 * d.width * d.width)).exp();
            C64::new(e, d.chirp * x[0] * e)
        }))
    }

    pub fn psi_plus(&self) -> Result<SpectralField> {
        let b = self.data.phase_amplitude;
        Ok(SpectralField::from_real_fn(self.grid()?, |x| b * (-x.iter().map(|v| v * v).sum::<f64>() / 4.0).exp()))
    }

    pub fn gauge_function(&self) -> Result<SpectralField> {
        let a = self.data.gauge_amplitude;
        Ok(SpectralField::from_real_fn(self.grid()?, |x| a * (x[0] / 4.0).cos()))
    }
}

/// Every default, as the TOML a user would write, with one comment per section.
pub fn reference_page() -> String {
    let mut out = String::from("# Configuration reference\n\nEvery key is optional except `experiment`. Defaults:\n\n```toml\n");
    out.push_str(&ExperimentConfig::new(Experiment::Weights).to_toml());
    out.push_str("```\n\n");
    let notes = [
        ("experiment", "one of WEIGHTS, APPENDIX_A, APPENDIX_B, ESTIMATORS, HIERARCHY, AUX_SOLVE, WAVE_OP, GAUGE"),
        ("physical", "dimension n, decay exponent gamma, coupling kappa, interaction exponent mu, Gevrey exponent nu, hierarchy depth p"),
        ("numerics.grid", "periodic box [-L, L]^n with L = half_width_pi * pi and `modes` Fourier modes per axis"),
        ("numerics.solver", "tolerances of the embedded Runge-Kutta pair (order 4 or 2) and the parabolic coefficient theta"),
        ("numerics.rho", "increasing radius rho(t) with |rho'| = amp t^(-1-epsilon), plus the norm exponents k, ell, ell_low"),
        ("numerics.sampling", "random sweeps of the weight suites and the product-norm fit"),
        ("numerics.time", "estimator time window, the gamma sweep and the wave-operator ladder"),
        ("data", "Gaussian asymptotic amplitude, its phase, and the gauge function amplitude"),
        ("output_dir", "output root; `--out` overrides it, and LRSCATTER_OUT is used when neither is set"),
    ];
    for (k, v) in notes {
        out.push_str(&format!("- `{k}`: {v}\n"));
    }
    out
}
