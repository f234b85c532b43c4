//! Experiment configuration: one plain-text TOML file describes a complete
//! run — the command, the model with its parameters, the discretization, the
//! driving rough path, the solver exponent frame, and the output location.
//!
//! Two properties the rest of the suite leans on:
//!
//! * **Validation before compute.**  [`ExperimentConfig::validate`] checks
//!   every parameter inequality — the exponent-frame window, model
//!   admissibility, grid and seed bounds — and returns the violated
//!   inequality verbatim in the error.  Drivers run it before touching any
//!   file, so a failing configuration never produces partial artifacts.
//! * **Self-description.**  [`ExperimentConfig::resolved`] fills every
//!   defaulted parameter the named command and model will consume, and
//!   [`ExperimentConfig::comment_header`] renders that resolved form as a
//!   `#`-comment block; emitters prepend it to each CSV so an artifact
//!   records exactly the run that produced it.
//!
//! Model vocabulary: `heat` (linear shifted diffusion, zero drift and zero
//! noise coefficient — the solver must reproduce the semigroup exactly),
//! `llg` (three-component magnetization dynamics), and `skt`
//! (two-species cross-diffusion).  Parameters that do not apply to the named
//! model are rejected rather than ignored.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::controlled::CrpParams;
use crate::grid::TimeGrid;
use crate::models::{llg_model, skt_model, SktCoeffs};
use crate::propagator::GeneratorSnapshot;
use crate::roughpath::LiftKind;
use crate::scale::{lambda_k, SpectralField};
use crate::solver::{QuasilinearModel, SolveOptions};
use crate::{Error, Result};

/// Commands the experiment driver understands.
pub const COMMANDS: &[&str] = &["lift", "solve", "rates", "cocycle", "wongzakai", "norms"];

/// Models the configuration can instantiate.
pub const MODELS: &[&str] = &["heat", "llg", "skt"];

/// A full experiment description (one TOML document).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of [`COMMANDS`].
    pub command: String,
    pub model: ModelConfig,
    pub discretization: Discretization,
    pub roughpath: RoughPathConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

/// Model block: the name plus model-specific parameters.  Optional fields
/// default per model; setting one the named model does not consume is a
/// validation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of [`MODELS`].
    pub name: String,
    /// Spatial period of the torus (default 2).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Path to a saved field file used as the initial datum; overrides the
    /// built-in datum.  Component count and period must match the model; the
    /// mode cap is embedded or projected onto the model scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    /// Component values of the built-in datum's constant part
    /// (`heat`: 1 value, `llg`: a direction of 3, `skt`: 2 values).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_constant: Option<Vec<f64>>,
    /// Amplitude of the `cos(2πx/P)` perturbation added to every component
    /// of the built-in datum (`heat` and `skt` only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_mode_amplitude: Option<f64>,
    /// `heat` only: diffusion rate `a` of the generator `aΔ − 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
    /// `llg` only: constant value of the scalar noise-modulation weight.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<f64>,
    /// `llg` only: damping flag (0 or 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub damping: Option<u8>,
    /// `llg` only: amplitude of the in-plane tilt `tilt·sin(2πx/P)` applied
    /// to the constant direction; 0 gives an exactly constant unit field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt: Option<f64>,
    /// `skt` only: coefficient overrides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skt: Option<SktBlock>,
}

/// Cross-diffusion coefficients in configuration form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SktBlock {
    pub diffusion: [f64; 2],
    pub self_diffusion: [f64; 2],
    pub cross_diffusion: [f64; 2],
    pub growth: [f64; 2],
    pub competition: [[f64; 2]; 2],
}

impl SktBlock {
    fn desk_defaults() -> Self {
        let c = SktCoeffs::desk_defaults();
        SktBlock {
            diffusion: c.diffusion,
            self_diffusion: c.self_diffusion,
            cross_diffusion: c.cross_diffusion,
            growth: c.growth,
            competition: c.competition,
        }
    }

    fn to_coeffs(&self) -> SktCoeffs {
        SktCoeffs {
            diffusion: self.diffusion,
            self_diffusion: self.self_diffusion,
            cross_diffusion: self.cross_diffusion,
            growth: self.growth,
            competition: self.competition,
        }
    }
}

/// Discretization block: mode cap `N`, dyadic step count `M`, horizon `T`,
/// and propagator substeps per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub n_modes: usize,
    pub steps: usize,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

/// Rough-path block: enhancement kind, Hölder index, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughPathConfig {
    /// `"ito"` or `"stratonovich"`.
    pub kind: String,
    pub gamma0: f64,
    /// Seeds must stay below 2^63 so the resolved configuration re-parses.
    pub seed: u64,
}

/// Solver block: exponent frame, localization radius, and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub gamma: f64,
    pub gamma_p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub r_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_max: Option<usize>,
}

/// Output block: directory and file-name stem for artifacts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

/// Study block: extra knobs for the table-producing commands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// `norms`: trajectory file to analyze (required for that command).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    /// `norms`: optional saved driver; when absent the driver is rebuilt
    /// from the rough-path block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub driver_input: Option<String>,
    /// `wongzakai`: coarsest smoothing level `j` (mesh `2^{-j}·T`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wz_j_lo: Option<u32>,
    /// `wongzakai`: finest smoothing level `j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wz_j_hi: Option<u32>,
    /// `cocycle`: restart nodes (each must split the grid so that the tail
    /// keeps a power-of-two interval count).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<Vec<usize>>,
    /// `rates`: `(κ, ι)` settings for the remainder-rate table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_settings: Option<Vec<[f64; 2]>>,
    /// `rates`: base norm index `β` of the remainder measurement
    /// (default: the frame's natural index `α − σ`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_beta: Option<f64>,
}

impl ExperimentConfig {
    /// Parse one TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("configuration parse error: {e}")))
    }

    /// Read and parse a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    /// Spatial period of the torus.
    pub fn period(&self) -> f64 {
        self.model.period.unwrap_or(2.0)
    }

    /// The exponent frame, with its admissibility window enforced.
    pub fn crp_params(&self) -> Result<CrpParams> {
        CrpParams::new(
            self.roughpath.gamma0,
            self.solver.gamma,
            self.solver.gamma_p,
            self.solver.sigma,
            self.solver.alpha,
        )
    }

    /// The dyadic time grid.
    pub fn grid(&self) -> Result<TimeGrid> {
        let m = self.discretization.steps;
        if m < 2 || !m.is_power_of_two() {
            return Err(Error::invalid(format!(
                "need steps = 2^m with m >= 1, got steps = {m}"
            )));
        }
        TimeGrid::dyadic(self.discretization.horizon, m.trailing_zeros())
    }

    /// The Brownian enhancement kind.
    pub fn lift_kind(&self) -> Result<LiftKind> {
        match self.roughpath.kind.as_str() {
            "ito" => Ok(LiftKind::Ito),
            "stratonovich" => Ok(LiftKind::Stratonovich),
            other => Err(Error::invalid(format!(
                "unknown rough-path kind `{other}` (expected `ito` or `stratonovich`)"
            ))),
        }
    }

    /// Solver options with the configured overrides applied.
    pub fn solve_options(&self) -> SolveOptions {
        let mut o = SolveOptions::default();
        o.substeps = self.discretization.substeps.unwrap_or(1);
        if let Some(t) = self.solver.picard_tol {
            o.picard_tol = t;
        }
        if let Some(n) = self.solver.picard_max {
            o.picard_max = n;
        }
        o
    }

    /// Check every parameter inequality without touching the filesystem or
    /// doing numerical work.  Errors quote the violated inequality.
    pub fn validate(&self) -> Result<()> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(Error::invalid(format!(
                "unknown command `{}` (expected one of {})",
                self.command,
                COMMANDS.join(", ")
            )));
        }
        if !MODELS.contains(&self.model.name.as_str()) {
            return Err(Error::invalid(format!(
                "unknown model `{}` (expected one of {})",
                self.model.name,
                MODELS.join(", ")
            )));
        }
        self.check_model_keys()?;
        let d = &self.discretization;
        if d.n_modes == 0 {
            return Err(Error::invalid("need n_modes >= 1, got n_modes = 0"));
        }
        if !(d.horizon.is_finite() && d.horizon > 0.0) {
            return Err(Error::invalid(format!(
                "need horizon > 0, got horizon = {}",
                d.horizon
            )));
        }
        if d.substeps == Some(0) {
            return Err(Error::invalid("need substeps >= 1, got substeps = 0"));
        }
        let grid = self.grid()?;
        if !(self.period().is_finite() && self.period() > 0.0) {
            return Err(Error::invalid(format!(
                "need period > 0, got period = {}",
                self.period()
            )));
        }
        self.lift_kind()?;
        if self.roughpath.seed >= 1 << 63 {
            return Err(Error::invalid(format!(
                "need seed < 2^63 so the resolved configuration re-parses, got {}",
                self.roughpath.seed
            )));
        }
        self.crp_params()?;
        if !(self.solver.r_max > 0.0) {
            return Err(Error::invalid(format!(
                "need r_max > 0, got r_max = {}",
                self.solver.r_max
            )));
        }
        if let Some(t) = self.solver.picard_tol {
            if !(t > 0.0) {
                return Err(Error::invalid(format!(
                    "need picard_tol > 0, got picard_tol = {t}"
                )));
            }
        }
        if self.solver.picard_max == Some(0) {
            return Err(Error::invalid("need picard_max >= 1, got picard_max = 0"));
        }
        // Model construction re-checks model-specific admissibility
        // (cross-diffusion inequality, damping flag, positivity) and the
        // built-in datum construction checks its own bounds; both are pure
        // closure assembly, no numerical work.
        let model = self.build_model()?;
        if self.model.initial.is_none() {
            self.builtin_initial(&model)?;
        }
        let s = &self.study;
        match self.command.as_str() {
            "norms" => {
                if s.input.is_none() {
                    return Err(Error::invalid(
                        "the norms command needs study.input = <trajectory file>",
                    ));
                }
            }
            "wongzakai" => {
                let (lo, hi) = self.wz_range();
                if lo == 0 || lo > hi {
                    return Err(Error::invalid(format!(
                        "need 1 <= wz_j_lo <= wz_j_hi, got wz_j_lo = {lo}, wz_j_hi = {hi}"
                    )));
                }
                // Smoothings sample the 16x-refined driver path.
                let nf = 16 * grid.intervals();
                if (1usize << hi) > nf {
                    return Err(Error::invalid(format!(
                        "need 2^wz_j_hi <= 16·steps (the smoothing mesh cannot refine the \
                         sampled path), got 2^{hi} > {nf}"
                    )));
                }
            }
            "cocycle" => {
                for &s_idx in self.cocycle_splits(&grid).iter() {
                    let m = grid.intervals();
                    if s_idx == 0 || s_idx >= m {
                        return Err(Error::invalid(format!(
                            "need 0 < split < steps, got split = {s_idx}, steps = {m}"
                        )));
                    }
                    if !(m - s_idx).is_power_of_two() {
                        return Err(Error::invalid(format!(
                            "need steps - split to be a power of two (the restarted leg \
                             keeps a dyadic grid), got steps - split = {}",
                            m - s_idx
                        )));
                    }
                }
            }
            "rates" => {
                let p = self.crp_params()?;
                let beta = self.rate_beta(&p);
                for &[kappa, iota] in self.rate_settings().iter() {
                    if !(0.0..=2.0 * p.eps + 1e-12).contains(&iota) {
                        return Err(Error::invalid(format!(
                            "need iota in [0, 2 eps] = [0, {}], got iota = {iota}",
                            2.0 * p.eps
                        )));
                    }
                    let span = kappa + iota;
                    if !(span >= -p.sigma && span < p.gamma0 + p.gamma - p.sigma) {
                        return Err(Error::invalid(format!(
                            "need kappa + iota in [-sigma, gamma0 + gamma - sigma) = \
                             [{}, {}), got kappa + iota = {span}",
                            -p.sigma,
                            p.gamma0 + p.gamma - p.sigma
                        )));
                    }
                    if !(0.0..=1.0).contains(&(beta + kappa)) {
                        return Err(Error::invalid(format!(
                            "need beta + kappa in [0, 1], got beta + kappa = {}",
                            beta + kappa
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Reject parameters that the named model does not consume.
    fn check_model_keys(&self) -> Result<()> {
        let m = &self.model;
        let name = m.name.as_str();
        let offending: &[(&str, bool)] = match name {
            "heat" => &[
                ("noise_level", m.noise_level.is_some()),
                ("damping", m.damping.is_some()),
                ("tilt", m.tilt.is_some()),
                ("skt", m.skt.is_some()),
            ],
            "llg" => &[
                ("diffusion", m.diffusion.is_some()),
                ("initial_mode_amplitude", m.initial_mode_amplitude.is_some()),
                ("skt", m.skt.is_some()),
            ],
            "skt" => &[
                ("diffusion", m.diffusion.is_some()),
                ("noise_level", m.noise_level.is_some()),
                ("damping", m.damping.is_some()),
                ("tilt", m.tilt.is_some()),
            ],
            _ => &[],
        };
        for (key, set) in offending {
            if *set {
                return Err(Error::invalid(format!(
                    "parameter `{key}` does not apply to model `{name}`"
                )));
            }
        }
        if let Some(c) = &m.initial_constant {
            let want = match name {
                "heat" => 1,
                "llg" => 3,
                _ => 2,
            };
            if c.len() != want {
                return Err(Error::invalid(format!(
                    "initial_constant for model `{name}` needs {want} components, got {}",
                    c.len()
                )));
            }
        }
        Ok(())
    }

    /// Instantiate the configured model.
    pub fn build_model(&self) -> Result<QuasilinearModel> {
        let crp = self.crp_params()?;
        let n = self.discretization.n_modes;
        let p = self.period();
        let r_max = self.solver.r_max;
        match self.model.name.as_str() {
            "heat" => {
                let a = self.model.diffusion.unwrap_or(1.0);
                if !(a > 0.0) {
                    return Err(Error::invalid(format!(
                        "need diffusion > 0, got diffusion = {a}"
                    )));
                }
                // Symbol of aΔ − 1; for a = 1 this is exactly −λ_k.
                let symbol: Vec<Complex64> = (-(n as i64)..=n as i64)
                    .map(|k| Complex64::new(-(1.0 + a * (lambda_k(k, p) - 1.0)), 0.0))
                    .collect();
                let zero_field = SpectralField::zeros(1, n, p);
                let zf_drift = zero_field.clone();
                let zf_rough = zero_field.clone();
                let zf_diff = zero_field;
                Ok(QuasilinearModel {
                    name: "heat".into(),
                    d: 1,
                    n1: 1,
                    n_modes: n,
                    period: p,
                    params: crp,
                    lof: Arc::new(move |_, _| Ok(GeneratorSnapshot::DiagScalar(symbol.clone()))),
                    n_drift: Arc::new(move |_, _| Ok(zf_drift.clone())),
                    f_rough: Arc::new(move |_| Ok(vec![zf_rough.clone()])),
                    df_rough: Arc::new(move |_, _| Ok(vec![zf_diff.clone()])),
                    v_guard: None,
                    eta: crp.alpha,
                    r_max,
                })
            }
            "llg" => {
                let level = self.model.noise_level.unwrap_or(1.0);
                if !level.is_finite() {
                    return Err(Error::invalid("noise_level must be finite"));
                }
                let phi = SpectralField::constant(&[level], n, p);
                llg_model(&phi, self.model.damping.unwrap_or(0), crp, r_max)
            }
            "skt" => {
                let block = self.model.skt.clone().unwrap_or_else(SktBlock::desk_defaults);
                skt_model(&block.to_coeffs(), n, p, crp, r_max)
            }
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }

    /// The initial datum: a saved field when `model.initial` is set (embedded
    /// or projected onto the model's mode cap), the built-in datum otherwise.
    pub fn initial_field(&self, model: &QuasilinearModel) -> Result<SpectralField> {
        if let Some(path) = &self.model.initial {
            let f = crate::io::load_field(path)?;
            if f.n1() != model.n1 {
                return Err(Error::invalid(format!(
                    "initial datum has {} components, model `{}` needs {}",
                    f.n1(),
                    model.name,
                    model.n1
                )));
            }
            if f.period() != model.period {
                return Err(Error::invalid(format!(
                    "initial datum period {} differs from the model period {}",
                    f.period(),
                    model.period
                )));
            }
            return Ok(f.with_modes(model.n_modes));
        }
        self.builtin_initial(model)
    }

    fn builtin_initial(&self, model: &QuasilinearModel) -> Result<SpectralField> {
        let n = model.n_modes;
        let p = model.period;
        match self.model.name.as_str() {
            "heat" => {
                let c = self
                    .model
                    .initial_constant
                    .clone()
                    .unwrap_or_else(|| vec![0.0]);
                let amp = self.model.initial_mode_amplitude.unwrap_or(1.0);
                let mut f = SpectralField::constant(&c, n, p);
                let half = Complex64::new(0.5 * amp, 0.0);
                f.set_coeff(0, 1, f.coeff(0, 1) + half);
                f.set_coeff(0, -1, f.coeff(0, -1) + half);
                Ok(f)
            }
            "llg" => {
                let dir = self
                    .model
                    .initial_constant
                    .clone()
                    .unwrap_or_else(|| vec![0.6, 0.8, 0.0]);
                let norm = (dir.iter().map(|v| v * v).sum::<f64>()).sqrt();
                if norm < 1e-12 {
                    return Err(Error::invalid(
                        "initial_constant for model `llg` must be a nonzero direction",
                    ));
                }
                let dir = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
                let tilt = self.model.tilt.unwrap_or(0.2);
                // In-plane tangent; fall back to e_x when the direction is
                // (anti)parallel to e_z.
                let mut t_hat = [-dir[1], dir[0], 0.0];
                let tn = (t_hat[0] * t_hat[0] + t_hat[1] * t_hat[1]).sqrt();
                if tn < 1e-12 {
                    t_hat = [1.0, 0.0, 0.0];
                } else {
                    t_hat = [t_hat[0] / tn, t_hat[1] / tn, 0.0];
                }
                let q = 4 * (2 * n + 1);
                let mut samples = Array2::zeros((3, q));
                let two_pi = 2.0 * std::f64::consts::PI;
                for j in 0..q {
                    let x = j as f64 * p / q as f64;
                    let s = tilt * (two_pi * x / p).sin();
                    let mut v = [
                        dir[0] + s * t_hat[0],
                        dir[1] + s * t_hat[1],
                        dir[2] + s * t_hat[2],
                    ];
                    let vn = (v.iter().map(|w| w * w).sum::<f64>()).sqrt();
                    for (a, w) in v.iter_mut().enumerate() {
                        *w /= vn;
                        samples[(a, j)] = *w;
                    }
                }
                SpectralField::from_real_samples(&samples, n, p)
            }
            "skt" => {
                let c = self
                    .model
                    .initial_constant
                    .clone()
                    .unwrap_or_else(|| vec![0.5, 0.7]);
                let amp = self.model.initial_mode_amplitude.unwrap_or(0.05);
                for (a, &v) in c.iter().enumerate() {
                    if v <= amp.abs() {
                        return Err(Error::invalid(format!(
                            "need initial_constant[{a}] > |initial_mode_amplitude| so the \
                             datum stays positive, got {v} <= {}",
                            amp.abs()
                        )));
                    }
                }
                let mut f = SpectralField::constant(&c, n, p);
                let half = Complex64::new(0.5 * amp, 0.0);
                for a in 0..2 {
                    f.set_coeff(a, 1, f.coeff(a, 1) + half);
                    f.set_coeff(a, -1, f.coeff(a, -1) + half);
                }
                Ok(f)
            }
            other => Err(Error::invalid(format!("unknown model `{other}`"))),
        }
    }

    /// Wong–Zakai smoothing-level range (defaults 4..8, clipped nowhere).
    pub fn wz_range(&self) -> (u32, u32) {
        (
            self.study.wz_j_lo.unwrap_or(4),
            self.study.wz_j_hi.unwrap_or(8),
        )
    }

    /// Cocycle restart nodes (default: the midpoint).
    pub fn cocycle_splits(&self, grid: &TimeGrid) -> Vec<usize> {
        self.study
            .splits
            .clone()
            .unwrap_or_else(|| vec![grid.intervals() / 2])
    }

    /// Base norm index of the remainder-rate measurement.
    pub fn rate_beta(&self, p: &CrpParams) -> f64 {
        self.study.rate_beta.unwrap_or(p.alpha - p.sigma)
    }

    /// Remainder-rate `(κ, ι)` settings (default: four corners of the
    /// admissible window at the desk frame).
    pub fn rate_settings(&self) -> Vec<[f64; 2]> {
        self.study
            .rate_settings
            .clone()
            .unwrap_or_else(|| vec![[0.0, 0.0], [0.15, 0.0], [0.0, 0.25], [0.15, 0.25]])
    }

    /// A copy with every defaulted parameter the named command and model
    /// consume filled in explicitly.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.model.period = Some(self.period());
        match c.model.name.as_str() {
            "heat" => {
                c.model.diffusion = Some(self.model.diffusion.unwrap_or(1.0));
                if c.model.initial.is_none() {
                    c.model.initial_constant =
                        Some(self.model.initial_constant.clone().unwrap_or_else(|| vec![0.0]));
                    c.model.initial_mode_amplitude =
                        Some(self.model.initial_mode_amplitude.unwrap_or(1.0));
                }
            }
            "llg" => {
                c.model.noise_level = Some(self.model.noise_level.unwrap_or(1.0));
                c.model.damping = Some(self.model.damping.unwrap_or(0));
                if c.model.initial.is_none() {
                    c.model.initial_constant = Some(
                        self.model
                            .initial_constant
                            .clone()
                            .unwrap_or_else(|| vec![0.6, 0.8, 0.0]),
                    );
                    c.model.tilt = Some(self.model.tilt.unwrap_or(0.2));
                }
            }
            "skt" => {
                c.model.skt = Some(self.model.skt.clone().unwrap_or_else(SktBlock::desk_defaults));
                if c.model.initial.is_none() {
                    c.model.initial_constant =
                        Some(self.model.initial_constant.clone().unwrap_or_else(|| vec![0.5, 0.7]));
                    c.model.initial_mode_amplitude =
                        Some(self.model.initial_mode_amplitude.unwrap_or(0.05));
                }
            }
            _ => {}
        }
        c.discretization.substeps = Some(self.discretization.substeps.unwrap_or(1));
        let o = SolveOptions::default();
        c.solver.picard_tol = Some(self.solver.picard_tol.unwrap_or(o.picard_tol));
        c.solver.picard_max = Some(self.solver.picard_max.unwrap_or(o.picard_max));
        c.output.dir = Some(self.output.dir.clone().unwrap_or_else(|| "out".into()));
        c.output.prefix = Some(
            self.output
                .prefix
                .clone()
                .unwrap_or_else(|| self.command.clone()),
        );
        match c.command.as_str() {
            "wongzakai" => {
                let (lo, hi) = self.wz_range();
                c.study.wz_j_lo = Some(lo);
                c.study.wz_j_hi = Some(hi);
            }
            "cocycle" => {
                if let Ok(grid) = self.grid() {
                    c.study.splits = Some(self.cocycle_splits(&grid));
                }
            }
            "rates" => {
                c.study.rate_settings = Some(self.rate_settings());
                if let Ok(p) = self.crp_params() {
                    c.study.rate_beta = Some(self.rate_beta(&p));
                }
            }
            _ => {}
        }
        c
    }

    /// The resolved configuration as a TOML document.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(&self.resolved())
            .expect("a validated configuration always serializes")
    }

    /// The resolved configuration as a `#`-comment block for CSV headers.
    pub fn comment_header(&self) -> String {
        let mut out = String::new();
        for line in self.resolved_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}
