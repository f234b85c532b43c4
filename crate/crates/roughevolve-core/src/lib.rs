//! Numerical rough-path calculus for quasilinear parabolic evolution equations
//! on the 1-D torus.
//!
//! The library is organized bottom-up:
//!
//! * [`grid`] — dyadic time grids;
//! * [`rng`] — seeded, counter-based random streams (ChaCha8);
//! * [`scale`] — the spectral Banach scale `B_beta` (Fourier-weighted Sobolev
//!   spaces), fields, multipliers, and dealiased pointwise nonlinearities;
//! * [`roughpath`] — level-1/level-2 rough paths with Chen-exact
//!   reconstruction, Itô/Stratonovich Brownian enhancements, smooth lifts;
//! * [`linalg`] / [`expm`] — dense complex LU and Padé scaling-and-squaring
//!   matrix exponentials with φ₁/φ₂ actions;
//! * [`controlled`] — controlled paths `(y, y′)` with origin-weighted Hölder
//!   seminorms and the full controlled-path norm;
//! * [`propagator`] — non-autonomous evolution families built from
//!   midpoint-frozen exponential steps, smoothing/anti-smoothing measurements,
//!   and two-family perturbation bounds;
//! * [`sewing`] — the dyadic sewing engine and the rough convolution
//!   `∫ S_{t,r} ζ_r · dX_r` with remainder-rate and perturbation studies;
//! * [`solver`] — the quasilinear mild-solution fixed point with windowed
//!   Picard iteration, localization, and blow-up detection;
//! * [`models`] — Landau–Lifshitz–Gilbert, Shigesada–Kawasaki–Teramoto, and a
//!   polynomial reaction–diffusion template;
//! * [`dynamics`] — driver shifts, cocycle checks, Wong–Zakai studies;
//! * [`config`] / [`io`] — experiment configuration, binary and CSV
//!   persistence.

pub mod config;
pub mod controlled;
pub mod dynamics;
pub mod expm;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod models;
pub mod propagator;
pub mod rng;
pub mod roughpath;
pub mod scale;
pub mod sewing;
pub mod solver;

/// Crate-wide error type. Variants separate input validation, numerical
/// failure, and I/O so callers can map them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on arguments or configuration was violated.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Two objects that must share a grid (or scale) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    /// A scale index fell strictly below zero.
    #[error("negative scale index {0}: the scale is restricted to [0, 1]")]
    NegativeIndex(f64),
    /// The dyadic sewing ladder failed to contract.
    #[error("sewing divergence: level increments not decaying ({0})")]
    SewingDivergence(String),
    /// The Picard iteration failed even at the minimal window size.
    #[error("solve failure: {0}")]
    SolveFailure(String),
    /// Generator rejected as non-parabolic.
    #[error("non-parabolic generator: {0}")]
    NonParabolic(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed binary or CSV artifact.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for validation failures.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
