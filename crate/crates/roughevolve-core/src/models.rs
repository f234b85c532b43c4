//! Concrete quasilinear model instances on the periodic spectral scale: the
//! Landau–Lifshitz–Gilbert magnetization system (three field components,
//! three driver channels), the Shigesada–Kawasaki–Teramoto cross-diffusion
//! population system (two components, two channels), and a scalar polynomial
//! reaction–diffusion template.
//!
//! Every instance packages its frozen linearization, drift, rough
//! nonlinearity, and analytic derivative into a [`QuasilinearModel`].  The
//! generators keep the spectrum shifted so that zero stays in the resolvent
//! set (`Δ−1` plus a compensating `+u` in the drift for LLG; the strictly
//! positive decay matrix `Γ` for SKT), and nonlinear terms are evaluated by
//! dealiased collocation.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::controlled::{holder_slope, CrpParams};
use crate::grid::strided_anchors;
use crate::linalg::CMat;
use crate::propagator::GeneratorSnapshot;
use crate::roughpath::RoughPath;
use crate::scale::{lambda_k, pointwise_map, SpectralField};
use crate::sewing::RateCheck;
use crate::solver::{QuasilinearModel, Solution, SolveStatus};
use crate::{Error, Result};

/// Cross product of two 3-vectors (slices of length ≥ 3).
fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Is the field spatially constant (all oscillating modes negligible)?
fn spatially_constant(w: &SpectralField) -> bool {
    let mut base: f64 = 1.0;
    for a in 0..w.n1() {
        base = base.max(w.coeff(a, 0).norm());
    }
    let n = w.n_modes() as i64;
    for a in 0..w.n1() {
        for k in 1..=n {
            if w.coeff(a, k).norm() > 1e-12 * base || w.coeff(a, -k).norm() > 1e-12 * base {
                return false;
            }
        }
    }
    true
}

/// Mean (mode-zero) component values of a field.
fn constant_values(w: &SpectralField) -> Vec<f64> {
    (0..w.n1()).map(|a| w.coeff(a, 0).re).collect()
}

/// Split a stacked field with `n1 = parts·chunk` components into `parts`
/// fields of `chunk` components each (used to unpack multi-column
/// collocation evaluations).
fn split_components(f: &SpectralField, parts: usize, chunk: usize) -> Vec<SpectralField> {
    assert_eq!(f.n1(), parts * chunk);
    let cols = 2 * f.n_modes() + 1;
    let mut out = Vec::with_capacity(parts);
    for p in 0..parts {
        let mut coeffs = Array2::zeros((chunk, cols));
        for a in 0..chunk {
            for j in 0..cols {
                coeffs[(a, j)] = f.coeffs()[(p * chunk + a, j)];
            }
        }
        out.push(SpectralField::from_coeffs(coeffs, f.period()).expect("valid split"));
    }
    out
}

/// Embed one component of `w` as component `comp` of an otherwise-zero field.
fn component_embed(w: &SpectralField, comp: usize) -> SpectralField {
    let mut out = SpectralField::zeros(w.n1(), w.n_modes(), w.period());
    let n = w.n_modes() as i64;
    for k in -n..=n {
        out.set_coeff(comp, k, w.coeff(comp, k));
    }
    out
}

// ---------------------------------------------------------------------------
// Landau–Lifshitz–Gilbert
// ---------------------------------------------------------------------------

/// Frozen LLG linearization `L(w)v = (Δ−1)v + w×(Δ−1)v` as a dense
/// mode-coupling matrix.  Entry `[(a,k),(c,j)] = −λ_j(δ_{ac}δ_{kj} +
/// Cross(w)_{ac}(k−j))` with the cross-product matrix taken in Fourier
/// coefficients.
fn llg_dense_snapshot(w: &SpectralField) -> GeneratorSnapshot {
    let n = w.n_modes() as i64;
    let ncols = (2 * n + 1) as usize;
    let period = w.period();
    let hat = |a: usize, m: i64| -> Complex64 {
        if m.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            w.coeff(a, m)
        }
    };
    // Cross(w)_{ac}(m): matrix of z ↦ w×z in coefficient space.
    let cross_hat = |a: usize, c: usize, m: i64| -> Complex64 {
        match (a, c) {
            (0, 1) => -hat(2, m),
            (0, 2) => hat(1, m),
            (1, 0) => hat(2, m),
            (1, 2) => -hat(0, m),
            (2, 0) => -hat(1, m),
            (2, 1) => hat(0, m),
            _ => Complex64::new(0.0, 0.0),
        }
    };
    let dim = 3 * ncols;
    let mut mat: CMat = Array2::zeros((dim, dim));
    for a in 0..3usize {
        for k in -n..=n {
            let row = a * ncols + (k + n) as usize;
            for c in 0..3usize {
                for j in -n..=n {
                    let col = c * ncols + (j + n) as usize;
                    let mut entry = cross_hat(a, c, k - j);
                    if a == c && k == j {
                        entry += Complex64::new(1.0, 0.0);
                    }
                    mat[(row, col)] = entry * (-lambda_k(j, period));
                }
            }
        }
    }
    GeneratorSnapshot::Dense(mat)
}

/// Frozen LLG linearization, using the per-mode block form
/// `−λ_k(I₃ + Cross(w₀))` when the state is spatially constant.
fn llg_snapshot(w: &SpectralField) -> GeneratorSnapshot {
    if !spatially_constant(w) {
        return llg_dense_snapshot(w);
    }
    let u = constant_values(w);
    let cross = [
        [0.0, -u[2], u[1]],
        [u[2], 0.0, -u[0]],
        [-u[1], u[0], 0.0],
    ];
    let n = w.n_modes() as i64;
    let mut blocks: Vec<CMat> = Vec::with_capacity((2 * n + 1) as usize);
    for k in -n..=n {
        let lam = lambda_k(k, w.period());
        let mut b: CMat = Array2::zeros((3, 3));
        for a in 0..3 {
            for c in 0..3 {
                let mut v = cross[a][c];
                if a == c {
                    v += 1.0;
                }
                b[(a, c)] = Complex64::new(-lam * v, 0.0);
            }
        }
        blocks.push(b);
    }
    GeneratorSnapshot::Block(blocks)
}

/// Entry `[a][i]` of the damping matrix `|y|²I − diag` pattern:
/// on the diagonal the sum of the two other squared components, off the
/// diagonal the product `y_a·y_i`.
fn damping_entry(y: &[f64], a: usize, i: usize) -> f64 {
    if a == i {
        let total = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        total - y[a] * y[a]
    } else {
        y[a] * y[i]
    }
}

/// Directional derivative of [`damping_entry`] in direction `h`.
fn damping_entry_deriv(y: &[f64], h: &[f64], a: usize, i: usize) -> f64 {
    if a == i {
        let dot = y[0] * h[0] + y[1] * h[1] + y[2] * h[2];
        2.0 * (dot - y[a] * h[a])
    } else {
        h[a] * y[i] + y[a] * h[i]
    }
}

/// Magnetization model: three-component state `u`, quasilinear term
/// `Δu + u×Δu`, cubic exchange drift `u|∂_x u|²`, and noise columns
/// `F^i(u) = φ·(u×e_i)` plus, when damping is enabled, the quadratic
/// damping matrix columns.  The driver has three channels.
///
/// `phi` is a scalar (one-component) band-limited modulation weight and
/// fixes the mode count and period of the model.
pub fn llg_model(
    phi: &SpectralField,
    eps_damping: u8,
    crp: CrpParams,
    r_max: f64,
) -> Result<QuasilinearModel> {
    if phi.n1() != 1 {
        return Err(Error::invalid("the modulation weight must be scalar"));
    }
    if eps_damping > 1 {
        return Err(Error::invalid("the damping flag must be 0 or 1"));
    }
    let n_modes = phi.n_modes();
    let period = phi.period();
    let eps = eps_damping as f64;
    let phi_f = phi.clone();
    let phi_df = phi.clone();

    let model = QuasilinearModel {
        name: "llg".into(),
        d: 3,
        n1: 3,
        n_modes,
        period,
        params: crp,
        lof: Arc::new(move |_t, w| Ok(llg_snapshot(w))),
        n_drift: Arc::new(move |_t, w| {
            let dw = w.derivative();
            // u|∂x u|² plus the +u compensation for the Δ−1 spectral shift.
            pointwise_map(&[w, &dw], 3, 4, |v, out| {
                let (u, du) = v.split_at(3);
                let g = du[0] * du[0] + du[1] * du[1] + du[2] * du[2];
                for a in 0..3 {
                    out[a] = u[a] * g + u[a];
                }
            })
        }),
        f_rough: Arc::new(move |w| {
            let stacked = pointwise_map(&[&phi_f, w], 9, 4, |v, out| {
                let p = v[0];
                let y = &v[1..4];
                for i in 0..3 {
                    let e = [(i == 0) as u8 as f64, (i == 1) as u8 as f64, (i == 2) as u8 as f64];
                    let sk = cross3(y, &e);
                    for a in 0..3 {
                        out[3 * i + a] = p * (sk[a] + eps * p * damping_entry(y, a, i));
                    }
                }
            })?;
            Ok(split_components(&stacked, 3, 3))
        }),
        df_rough: Arc::new(move |w, h| {
            let stacked = pointwise_map(&[&phi_df, w, h], 9, 4, |v, out| {
                let p = v[0];
                let y = &v[1..4];
                let hh = &v[4..7];
                for i in 0..3 {
                    let e = [(i == 0) as u8 as f64, (i == 1) as u8 as f64, (i == 2) as u8 as f64];
                    let sk = cross3(hh, &e);
                    for a in 0..3 {
                        out[3 * i + a] =
                            p * (sk[a] + eps * p * damping_entry_deriv(y, hh, a, i));
                    }
                }
            })?;
            Ok(split_components(&stacked, 3, 3))
        }),
        v_guard: None,
        eta: 1.0,
        r_max,
    };
    model.validate()?;
    Ok(model)
}

/// One-step increment pair of the Davie-type expansion for the LLG noise:
/// `Gu = φ·(u×δX)` and `𝔾u = φ²·Σ_{ij} 𝕏^{ij} (u×e_i)×e_j`, evaluated
/// pointwise on the state at the left endpoint.
fn llg_davie_pair(
    phi: &SpectralField,
    u: &SpectralField,
    dx: &[f64],
    xx: &Array2<f64>,
) -> Result<SpectralField> {
    let dx = [dx[0], dx[1], dx[2]];
    let xx = xx.clone();
    pointwise_map(&[phi, u], 3, 4, move |v, out| {
        let p = v[0];
        let y = &v[1..4];
        let g = cross3(y, &dx);
        for a in 0..3 {
            out[a] = p * g[a];
        }
        for i in 0..3 {
            let e_i = [(i == 0) as u8 as f64, (i == 1) as u8 as f64, (i == 2) as u8 as f64];
            let yei = cross3(y, &e_i);
            for j in 0..3 {
                let e_j = [(j == 0) as u8 as f64, (j == 1) as u8 as f64, (j == 2) as u8 as f64];
                let gg = cross3(&yei, &e_j);
                for a in 0..3 {
                    out[a] += p * p * xx[(i, j)] * gg[a];
                }
            }
        }
    })
}

/// Third-order remainder of the undamped magnetization solution: the defect
/// of `δu_{s,t} = ∫_s^t (Δu + u×Δu + u|∂_x u|²) dr + G_{s,t}u_s + 𝔾_{s,t}u_s
/// + remainder`, with `(G, 𝔾)` the first- and second-order driver
/// contractions of the noise map.  The drift integral uses the one-point
/// product rule `(t−s)·drift(u_s)` anchored at the left endpoint — the same
/// Taylor structure the expansion itself truncates at, so the measured
/// defect scales like the genuine third-order remainder instead of being
/// swamped by composite-quadrature noise.  Fits the L² Hölder slope over
/// dyadic lags; the contract floor is `3γ − 0.15`.
pub fn llg_davie_check(
    phi: &SpectralField,
    eps_damping: u8,
    sol: &Solution,
    rp: &RoughPath,
    max_anchors: usize,
) -> Result<RateCheck> {
    if eps_damping != 0 {
        return Err(Error::invalid(
            "the remainder expansion requires the damping term disabled",
        ));
    }
    if sol.status != SolveStatus::Completed {
        return Err(Error::invalid("the remainder check needs a completed solve"));
    }
    if rp.d() != 3 || sol.u.first().map(|f| f.n1()) != Some(3) {
        return Err(Error::invalid("expected a three-channel driver and state"));
    }
    if !sol.grid.same_as(rp.grid()) {
        return Err(Error::GridMismatch(
            "solution and driver live on different grids".into(),
        ));
    }
    let grid = &sol.grid;
    let m = grid.intervals();
    let period = sol.u[0].period();
    let two_pi = 2.0 * std::f64::consts::PI;

    // Unshifted drift integrand Δu + u×Δu + u|∂x u|² at every node.
    let mut integrand = Vec::with_capacity(m + 1);
    for u in &sol.u {
        let lap = u.apply_multiplier(|k| {
            let q = two_pi * k as f64 / period;
            Complex64::new(-q * q, 0.0)
        });
        let du = u.derivative();
        integrand.push(pointwise_map(&[u, &lap, &du], 3, 4, |v, out| {
            let (uu, rest) = v.split_at(3);
            let (ll, dd) = rest.split_at(3);
            let g = dd[0] * dd[0] + dd[1] * dd[1] + dd[2] * dd[2];
            let cr = cross3(uu, ll);
            for a in 0..3 {
                out[a] = ll[a] + cr[a] + uu[a] * g;
            }
        })?);
    }
    let h = grid.mesh();

    let anchors = strided_anchors(m, 0, max_anchors);
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut lag = 1usize;
    while lag <= m / 2 {
        let mut sup = 0.0f64;
        let mut any = false;
        for &s in &anchors {
            let t = s + lag;
            if t > m {
                continue;
            }
            any = true;
            let mut defect = sol.u[t].sub(&sol.u[s]);
            defect.axpy(Complex64::new(-(lag as f64) * h, 0.0), &integrand[s]);
            let dx = rp.delta_x(s, t);
            let xx = rp.xx_node(s, t);
            let pair = llg_davie_pair(phi, &sol.u[s], dx.as_slice().unwrap(), &xx)?;
            defect.axpy(Complex64::new(-1.0, 0.0), &pair);
            sup = sup.max(defect.norm_beta(0.0)?);
        }
        if any && sup > 1e-300 {
            points.push((lag as f64 * h, sup));
        }
        lag *= 2;
    }
    let fit = holder_slope(&points)?;
    Ok(RateCheck {
        fit,
        floor: 3.0 * sol.params.gamma - 0.15,
        points,
    })
}

// ---------------------------------------------------------------------------
// Shigesada–Kawasaki–Teramoto
// ---------------------------------------------------------------------------

/// Parameters of the cross-diffusion population model.
#[derive(Debug, Clone)]
pub struct SktCoeffs {
    /// Linear diffusion rates (strictly positive).
    pub diffusion: [f64; 2],
    /// Self-diffusion rates (nonnegative).
    pub self_diffusion: [f64; 2],
    /// Cross-diffusion rates (nonnegative).
    pub cross_diffusion: [f64; 2],
    /// Intrinsic growth rates (strictly positive).
    pub growth: [f64; 2],
    /// Competition rates `[i][j]`: pressure of species `j` on species `i`
    /// (strictly positive).
    pub competition: [[f64; 2]; 2],
}

impl SktCoeffs {
    /// Admissible desk parameters with comfortable positive-definiteness
    /// margin (the cross-diffusion inequality holds with factor 4 instead
    /// of 8).
    pub fn desk_defaults() -> Self {
        SktCoeffs {
            diffusion: [0.6, 0.5],
            self_diffusion: [0.2, 0.25],
            cross_diffusion: [0.4, 0.3],
            growth: [1.0, 0.8],
            competition: [[1.0, 0.5], [0.4, 0.9]],
        }
    }

    fn validate(&self) -> Result<()> {
        for i in 0..2 {
            if self.diffusion[i] <= 0.0 {
                return Err(Error::invalid(format!(
                    "diffusion rate {} must be strictly positive",
                    i + 1
                )));
            }
            if self.growth[i] <= 0.0 {
                return Err(Error::invalid(format!(
                    "growth rate {} must be strictly positive",
                    i + 1
                )));
            }
            if self.self_diffusion[i] < 0.0 || self.cross_diffusion[i] < 0.0 {
                return Err(Error::invalid("diffusion rates must be nonnegative"));
            }
            for j in 0..2 {
                if self.competition[i][j] <= 0.0 {
                    return Err(Error::invalid("competition rates must be strictly positive"));
                }
            }
            let g = self.cross_diffusion[i];
            if g > 0.0 && g * g >= 8.0 * self.diffusion[i] * self.self_diffusion[i] {
                return Err(Error::invalid(format!(
                    "cross-diffusion admissibility fails for species {}: need gamma_{i}^2 < 8·alpha_{i}·beta_{i} (got {} ≥ {})",
                    i + 1,
                    g * g,
                    8.0 * self.diffusion[i] * self.self_diffusion[i],
                    i = i + 1,
                )));
            }
        }
        Ok(())
    }

    /// Pointwise diffusion matrix `B(u)` at state values `(u₁, u₂)`.
    pub fn b_matrix(&self, u1: f64, u2: f64) -> [[f64; 2]; 2] {
        [
            [
                self.diffusion[0] + 2.0 * self.self_diffusion[0] * u1 + self.cross_diffusion[0] * u2,
                self.cross_diffusion[0] * u1,
            ],
            [
                self.cross_diffusion[1] * u2,
                self.diffusion[1] + 2.0 * self.self_diffusion[1] * u2 + self.cross_diffusion[1] * u1,
            ],
        ]
    }
}

/// Frozen SKT linearization `L(w)v = ∂_x(B(w)∂_x v) − Γv` in coefficient
/// space: `[(a,k),(b,j)] = −(4π²kj/P²)·B̂_{ab}(k−j) − Γ_a δ_{ab} δ_{kj}`.
fn skt_dense_snapshot(c: &SktCoeffs, w: &SpectralField) -> GeneratorSnapshot {
    let n = w.n_modes() as i64;
    let ncols = (2 * n + 1) as usize;
    let period = w.period();
    let two_pi = 2.0 * std::f64::consts::PI;
    let hat = |a: usize, m: i64| -> Complex64 {
        if m.abs() > n {
            Complex64::new(0.0, 0.0)
        } else {
            w.coeff(a, m)
        }
    };
    let delta0 = |m: i64| -> Complex64 {
        Complex64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0)
    };
    // B̂_{ab}(m): Fourier coefficients of the (affine in w) diffusion matrix.
    let b_hat = |a: usize, b: usize, m: i64| -> Complex64 {
        match (a, b) {
            (0, 0) => {
                delta0(m) * c.diffusion[0]
                    + hat(0, m) * (2.0 * c.self_diffusion[0])
                    + hat(1, m) * c.cross_diffusion[0]
            }
            (0, 1) => hat(0, m) * c.cross_diffusion[0],
            (1, 0) => hat(1, m) * c.cross_diffusion[1],
            _ => {
                delta0(m) * c.diffusion[1]
                    + hat(1, m) * (2.0 * c.self_diffusion[1])
                    + hat(0, m) * c.cross_diffusion[1]
            }
        }
    };
    let dim = 2 * ncols;
    let mut mat: CMat = Array2::zeros((dim, dim));
    for a in 0..2usize {
        for k in -n..=n {
            let row = a * ncols + (k + n) as usize;
            let qk = two_pi * k as f64 / period;
            for b in 0..2usize {
                for j in -n..=n {
                    let col = b * ncols + (j + n) as usize;
                    let qj = two_pi * j as f64 / period;
                    let mut entry = b_hat(a, b, k - j) * (-qk * qj);
                    if a == b && k == j {
                        entry -= Complex64::new(c.growth[a], 0.0);
                    }
                    mat[(row, col)] = entry;
                }
            }
        }
    }
    GeneratorSnapshot::Dense(mat)
}

/// Frozen SKT linearization, block-diagonal per mode when the state is
/// spatially constant.
fn skt_snapshot(c: &SktCoeffs, w: &SpectralField) -> GeneratorSnapshot {
    if !spatially_constant(w) {
        return skt_dense_snapshot(c, w);
    }
    let u = constant_values(w);
    let bm = c.b_matrix(u[0], u[1]);
    let n = w.n_modes() as i64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut blocks: Vec<CMat> = Vec::with_capacity((2 * n + 1) as usize);
    for k in -n..=n {
        let q = two_pi * k as f64 / w.period();
        let mut b: CMat = Array2::zeros((2, 2));
        for a in 0..2 {
            for c2 in 0..2 {
                let mut v = -q * q * bm[a][c2];
                if a == c2 {
                    v -= c.growth[a];
                }
                b[(a, c2)] = Complex64::new(v, 0.0);
            }
        }
        blocks.push(b);
    }
    GeneratorSnapshot::Block(blocks)
}

/// Cross-diffusion population model: two-component state, divergence-form
/// quasilinear term `∂_x(B(u)∂_x u) − Γu`, Lotka–Volterra drift (with the
/// `+Γu` compensation folded in as the doubled growth term), and linear
/// multiplicative noise `F^i(u) = u_i·e_i` on a two-channel driver.  The
/// state-space guard requires componentwise positivity up to a relative
/// margin of `10⁻⁶` at twice-oversampled collocation points.
pub fn skt_model(
    coeffs: &SktCoeffs,
    n_modes: usize,
    period: f64,
    crp: CrpParams,
    r_max: f64,
) -> Result<QuasilinearModel> {
    coeffs.validate()?;
    let c_lof = coeffs.clone();
    let c_drift = coeffs.clone();
    let guard_modes = n_modes;

    let model = QuasilinearModel {
        name: "skt".into(),
        d: 2,
        n1: 2,
        n_modes,
        period,
        params: crp,
        lof: Arc::new(move |_t, w| Ok(skt_snapshot(&c_lof, w))),
        n_drift: Arc::new(move |_t, w| {
            let c = &c_drift;
            pointwise_map(&[w], 2, 2, |v, out| {
                let (u1, u2) = (v[0], v[1]);
                out[0] = 2.0 * c.growth[0] * u1
                    - c.competition[0][0] * u1 * u1
                    - c.competition[0][1] * u1 * u2;
                out[1] = 2.0 * c.growth[1] * u2
                    - c.competition[1][0] * u1 * u2
                    - c.competition[1][1] * u2 * u2;
            })
        }),
        f_rough: Arc::new(move |w| Ok(vec![component_embed(w, 0), component_embed(w, 1)])),
        df_rough: Arc::new(move |_w, h| Ok(vec![component_embed(h, 0), component_embed(h, 1)])),
        v_guard: Some(Arc::new(move |w| {
            let q = 2 * (2 * guard_modes + 1);
            let samples = w.eval_real(q);
            let scale = samples.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            samples.iter().all(|v| *v > -1e-6 * scale)
        })),
        eta: 0.55,
        r_max,
    };
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Polynomial reaction–diffusion template
// ---------------------------------------------------------------------------

/// One drift monomial `coeff(x)·u^{u_pow}·(∂_x u)^{du_pow}`.
#[derive(Debug, Clone)]
pub struct DriftTerm {
    pub coeff: SpectralField,
    pub u_pow: u32,
    pub du_pow: u32,
}

/// One noise channel `coeff(x)·u^{u_pow}`.
#[derive(Debug, Clone)]
pub struct NoiseTerm {
    pub coeff: SpectralField,
    pub u_pow: u32,
}

/// Scalar polynomial reaction–diffusion specification: fixed diffusion
/// `a·∂_xx`, drift `Σ coeff·u^μ(∂_x u)^ν`, and one noise channel per
/// [`NoiseTerm`].
#[derive(Debug, Clone)]
pub struct PolynomialSpec {
    /// Diffusion rate `a > 0` of the linear part `a·∂_xx − 1` (the spectral
    /// shift is compensated by a `+u` in the drift).
    pub diffusion: f64,
    pub drift_terms: Vec<DriftTerm>,
    pub noise_terms: Vec<NoiseTerm>,
}

/// Largest dealiasing factor the collocation evaluation supports.
const MAX_POLY_OVERSAMPLE: usize = 12;

/// Build a scalar polynomial reaction–diffusion model.  Rejected when the
/// total polynomial degree would exceed the supported dealiasing margin.
pub fn polynomial_model(
    spec: &PolynomialSpec,
    n_modes: usize,
    period: f64,
    crp: CrpParams,
    r_max: f64,
) -> Result<QuasilinearModel> {
    if spec.diffusion <= 0.0 {
        return Err(Error::invalid("the diffusion rate must be strictly positive"));
    }
    if spec.noise_terms.is_empty() {
        return Err(Error::invalid("at least one noise channel is required"));
    }
    let mut max_degree = 2usize; // the +u compensation and linear terms
    for t in &spec.drift_terms {
        if t.coeff.n1() != 1 || t.coeff.n_modes() != n_modes || t.coeff.period() != period {
            return Err(Error::GridMismatch(
                "drift coefficient fields must be scalar on the model scale".into(),
            ));
        }
        max_degree = max_degree.max(1 + (t.u_pow + t.du_pow) as usize);
    }
    for t in &spec.noise_terms {
        if t.coeff.n1() != 1 || t.coeff.n_modes() != n_modes || t.coeff.period() != period {
            return Err(Error::GridMismatch(
                "noise coefficient fields must be scalar on the model scale".into(),
            ));
        }
        max_degree = max_degree.max(1 + t.u_pow as usize);
    }
    let oversample = (max_degree + 1).max(2);
    if oversample > MAX_POLY_OVERSAMPLE {
        return Err(Error::invalid(format!(
            "dealiasing margin insufficient for total polynomial degree {max_degree}"
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let a = spec.diffusion;
    let symbol: Vec<Complex64> = (-(n_modes as i64)..=(n_modes as i64))
        .map(|k| {
            let q = two_pi * k as f64 / period;
            Complex64::new(-a * q * q - 1.0, 0.0)
        })
        .collect();
    let drift_terms = spec.drift_terms.clone();
    let noise_terms = spec.noise_terms.clone();
    let noise_terms_df = spec.noise_terms.clone();
    let d = spec.noise_terms.len();

    let model = QuasilinearModel {
        name: "polynomial".into(),
        d,
        n1: 1,
        n_modes,
        period,
        params: crp,
        lof: Arc::new(move |_t, _w| Ok(GeneratorSnapshot::DiagScalar(symbol.clone()))),
        n_drift: Arc::new(move |_t, w| {
            let dw = w.derivative();
            let mut fields: Vec<&SpectralField> = vec![w, &dw];
            for t in &drift_terms {
                fields.push(&t.coeff);
            }
            let terms = &drift_terms;
            pointwise_map(&fields, 1, oversample, |v, out| {
                let u = v[0];
                let du = v[1];
                let mut acc = u; // +u spectral-shift compensation
                for (i, t) in terms.iter().enumerate() {
                    acc += v[2 + i] * u.powi(t.u_pow as i32) * du.powi(t.du_pow as i32);
                }
                out[0] = acc;
            })
        }),
        f_rough: Arc::new(move |w| {
            noise_terms
                .iter()
                .map(|t| {
                    let pow = t.u_pow as i32;
                    pointwise_map(&[&t.coeff, w], 1, oversample, move |v, out| {
                        out[0] = v[0] * v[1].powi(pow);
                    })
                })
                .collect()
        }),
        df_rough: Arc::new(move |w, h| {
            noise_terms_df
                .iter()
                .map(|t| {
                    if t.u_pow == 0 {
                        return Ok(SpectralField::zeros(1, w.n_modes(), w.period()));
                    }
                    let pow = t.u_pow as i32;
                    pointwise_map(&[&t.coeff, w, h], 1, oversample, move |v, out| {
                        out[0] = v[0] * pow as f64 * v[1].powi(pow - 1) * v[2];
                    })
                })
                .collect()
        }),
        v_guard: None,
        eta: crp.alpha,
        r_max,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::roughpath::{LiftKind, RoughPath};
    use crate::scale::random_field;
    use crate::solver::{solve, SolveOptions};
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use std::sync::Arc as StdArc;

    const PERIOD: f64 = 2.0;

    fn phi_one(n_modes: usize) -> SpectralField {
        SpectralField::constant(&[1.0], n_modes, PERIOD)
    }

    fn l2_inner(f: &SpectralField, g: &SpectralField) -> f64 {
        let n = f.n_modes() as i64;
        let mut acc = 0.0;
        for a in 0..f.n1() {
            for k in -n..=n {
                acc += (f.coeff(a, k).conj() * g.coeff(a, k)).re;
            }
        }
        acc * f.period()
    }

    /// Rotation `exp(−Cross(w))` via the axis–angle closed form.
    fn rodrigues(w: [f64; 3]) -> [[f64; 3]; 3] {
        let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let k = [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ];
        let (c1, c2) = if theta < 1e-8 {
            (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
        } else {
            ((theta.sin()) / theta, (1.0 - theta.cos()) / (theta * theta))
        };
        let mut out = [[0.0f64; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut k2 = 0.0;
                for c in 0..3 {
                    k2 += k[a][c] * k[c][b];
                }
                out[a][b] = (a == b) as u8 as f64 - c1 * k[a][b] + c2 * k2;
            }
        }
        out
    }

    fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    #[test]
    fn llg_noise_columns_match_the_north_pole_pattern() {
        let p = CrpParams::desk_defaults();
        let north = SpectralField::constant(&[0.0, 0.0, 1.0], 3, PERIOD);

        let model = llg_model(&phi_one(3), 0, p, 10.0).unwrap();
        let cols = (model.f_rough)(&north).unwrap();
        let want_skew = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for a in 0..3 {
                assert_abs_diff_eq!(cols[i].coeff(a, 0).re, want_skew[i][a], epsilon = 1e-12);
                assert_abs_diff_eq!(cols[i].coeff(a, 1).norm(), 0.0, epsilon = 1e-12);
            }
        }

        let damped = llg_model(&phi_one(3), 1, p, 10.0).unwrap();
        let cols = (damped.f_rough)(&north).unwrap();
        let want = [[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        for i in 0..3 {
            for a in 0..3 {
                assert_abs_diff_eq!(cols[i].coeff(a, 0).re, want[i][a], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn llg_noise_stays_tangent_to_the_state() {
        let p = CrpParams::desk_defaults();
        let mut rng = crate::rng::stream(41, 0);
        let mut phi = random_field(&mut rng, 1, 6, PERIOD, 0.5, 2.0);
        phi.set_coeff(0, 0, Complex64::new(1.0, 0.0));
        let u = random_field(&mut rng, 3, 6, PERIOD, 0.7, 1.5);
        let model = llg_model(&phi, 0, p, 100.0).unwrap();
        let cols = (model.f_rough)(&u).unwrap();
        for col in &cols {
            let inner = l2_inner(col, &u);
            assert!(
                inner.abs() <= 1e-12,
                "noise column not tangent: ⟨F,u⟩ = {inner}"
            );
        }
    }

    #[test]
    fn llg_quasilinear_term_is_energy_neutral() {
        let mut rng = crate::rng::stream(42, 0);
        let u = random_field(&mut rng, 3, 8, PERIOD, 0.8, 1.5);
        let lap1 = u.apply_multiplier(|k| Complex64::new(-lambda_k(k, PERIOD), 0.0));
        let skew = pointwise_map(&[&u, &lap1], 3, 2, |v, out| {
            let (uu, ll) = v.split_at(3);
            let cr = cross3(uu, ll);
            out[..3].copy_from_slice(&cr);
        })
        .unwrap();
        let inner = l2_inner(&skew, &u);
        let scale = u.norm_beta(1.0).unwrap().powi(3).max(1.0);
        assert!(
            inner.abs() <= 1e-11 * scale,
            "skew part leaks energy: {inner:.3e}"
        );
    }

    #[test]
    fn llg_block_fast_path_matches_the_dense_assembly() {
        let w = SpectralField::constant(&[0.2, -0.4, 0.9], 4, PERIOD);
        let block = llg_snapshot(&w);
        let dense = llg_dense_snapshot(&w);
        assert!(matches!(block, GeneratorSnapshot::Block(_)));
        let mut rng = crate::rng::stream(43, 0);
        let probe = random_field(&mut rng, 3, 4, PERIOD, 1.0, 1.0);
        let a = block.apply(&probe);
        let b = dense.apply(&probe);
        let gap = a.sub(&b).norm_beta(0.0).unwrap();
        assert!(gap <= 1e-11, "fast path deviates from dense: {gap:.3e}");
    }

    #[test]
    fn llg_dense_generator_matches_the_collocation_product() {
        let mut rng = crate::rng::stream(44, 0);
        let w = random_field(&mut rng, 3, 6, PERIOD, 0.6, 1.5);
        let v = random_field(&mut rng, 3, 6, PERIOD, 0.9, 1.2);
        let dense = llg_dense_snapshot(&w);
        let got = dense.apply(&v);
        let lap1v = v.apply_multiplier(|k| Complex64::new(-lambda_k(k, PERIOD), 0.0));
        let want = pointwise_map(&[&w, &lap1v], 3, 2, |vals, out| {
            let (ww, ll) = vals.split_at(3);
            let cr = cross3(ww, ll);
            for a in 0..3 {
                out[a] = ll[a] + cr[a];
            }
        })
        .unwrap();
        let gap = got.sub(&want).norm_beta(0.0).unwrap();
        assert!(gap <= 1e-10, "dense generator vs collocation: {gap:.3e}");
    }

    #[test]
    fn skt_coefficient_matrix_on_constants_matches_the_pattern() {
        let c = SktCoeffs::desk_defaults();
        let (c1, c2) = (0.7, 0.4);
        let w = SpectralField::constant(&[c1, c2], 4, PERIOD);
        let snap = skt_snapshot(&c, &w);
        let GeneratorSnapshot::Block(blocks) = snap else {
            panic!("constant state must take the block fast path");
        };
        // At mode k: entry = −(2πk/P)²·B_ab − Γ_a δ_ab.
        let q = 2.0 * std::f64::consts::PI / PERIOD; // k = 1
        let idx = |k: i64| (k + 4) as usize;
        let want = c.b_matrix(c1, c2);
        assert_abs_diff_eq!(want[0][0], 0.6 + 2.0 * 0.2 * c1 + 0.4 * c2, epsilon = 1e-15);
        assert_abs_diff_eq!(want[0][1], 0.4 * c1, epsilon = 1e-15);
        assert_abs_diff_eq!(want[1][0], 0.3 * c2, epsilon = 1e-15);
        assert_abs_diff_eq!(want[1][1], 0.5 + 2.0 * 0.25 * c2 + 0.3 * c1, epsilon = 1e-15);
        for a in 0..2 {
            for b in 0..2 {
                let gamma = if a == b { c.growth[a] } else { 0.0 };
                let got = blocks[idx(1)][(a, b)].re;
                assert_abs_diff_eq!(got, -q * q * want[a][b] - gamma, epsilon = 1e-12);
                let got0 = blocks[idx(0)][(a, b)].re;
                assert_abs_diff_eq!(got0, -gamma, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn skt_block_fast_path_matches_the_dense_assembly() {
        let c = SktCoeffs::desk_defaults();
        let w = SpectralField::constant(&[0.8, 0.5], 5, PERIOD);
        let block = skt_snapshot(&c, &w);
        let dense = skt_dense_snapshot(&c, &w);
        let mut rng = crate::rng::stream(45, 0);
        let probe = random_field(&mut rng, 2, 5, PERIOD, 1.0, 1.0);
        let gap = block.apply(&probe).sub(&dense.apply(&probe)).norm_beta(0.0).unwrap();
        assert!(gap <= 1e-11, "fast path deviates from dense: {gap:.3e}");
    }

    #[test]
    fn skt_inadmissible_cross_diffusion_is_rejected() {
        let mut c = SktCoeffs::desk_defaults();
        c.cross_diffusion[0] = 2.0; // 4 ≥ 8·0.6·0.2 = 0.96
        let err = skt_model(&c, 4, PERIOD, CrpParams::desk_defaults(), 10.0).unwrap_err();
        let msg = format!("{err}");
        assert!(
            msg.contains("admissibility"),
            "error should name the failed inequality: {msg}"
        );
    }

    #[test]
    fn skt_diffusion_matrix_keeps_a_positive_eigenvalue_floor() {
        // Margin-2 parameters: γ² < 4αβ.
        let c = SktCoeffs {
            diffusion: [0.6, 0.5],
            self_diffusion: [0.2, 0.25],
            cross_diffusion: [0.3, 0.3],
            growth: [1.0, 0.8],
            competition: [[1.0, 0.5], [0.4, 0.9]],
        };
        c.validate().unwrap();
        let mut rng = crate::rng::stream(46, 0);
        let mut w = random_field(&mut rng, 2, 8, PERIOD, 0.05, 2.0);
        w.set_coeff(0, 0, Complex64::new(0.8, 0.0));
        w.set_coeff(1, 0, Complex64::new(0.9, 0.0));
        let q = 4 * (2 * 8 + 1);
        let samples = w.eval_real(q);
        let mut floor = f64::INFINITY;
        for j in 0..q {
            let (u1, u2) = (samples[(0, j)], samples[(1, j)]);
            assert!(u1 > 0.0 && u2 > 0.0, "probe field must stay positive");
            let b = c.b_matrix(u1, u2);
            // Symmetric part eigenvalues via the 2×2 closed form.
            let s01 = 0.5 * (b[0][1] + b[1][0]);
            let tr = b[0][0] + b[1][1];
            let det = b[0][0] * b[1][1] - s01 * s01;
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            floor = floor.min(0.5 * (tr - disc));
        }
        assert!(
            floor > 0.0,
            "symmetric part lost positivity: min eigenvalue {floor:.3e}"
        );
    }

    fn zero_driver(grid: &TimeGrid, d: usize) -> RoughPath {
        let fine = grid.refine(16).unwrap();
        let x = ndarray::Array2::zeros((fine.intervals() + 1, d));
        RoughPath::lift_smooth(&x, &fine, grid, 0.45).unwrap()
    }

    #[test]
    fn skt_zero_noise_constant_state_follows_lotka_volterra() {
        let c = SktCoeffs::desk_defaults();
        let p = CrpParams::desk_defaults();
        let model = skt_model(&c, 4, PERIOD, p, 50.0).unwrap();
        let grid = TimeGrid::dyadic(0.5, 10).unwrap();
        let rp = zero_driver(&grid, 2);
        let x0 = SpectralField::constant(&[0.5, 0.3], 4, PERIOD);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);

        // Classical two-species competition ODE, fourth-order Runge–Kutta.
        let rhs = |u: [f64; 2]| -> [f64; 2] {
            [
                u[0] * (c.growth[0] - c.competition[0][0] * u[0] - c.competition[0][1] * u[1]),
                u[1] * (c.growth[1] - c.competition[1][0] * u[0] - c.competition[1][1] * u[1]),
            ]
        };
        let mut u = [0.5, 0.3];
        let dt = 1e-5_f64;
        let steps = (0.5 / dt).round() as usize;
        for _ in 0..steps {
            let k1 = rhs(u);
            let k2 = rhs([u[0] + 0.5 * dt * k1[0], u[1] + 0.5 * dt * k1[1]]);
            let k3 = rhs([u[0] + 0.5 * dt * k2[0], u[1] + 0.5 * dt * k2[1]]);
            let k4 = rhs([u[0] + dt * k3[0], u[1] + dt * k3[1]]);
            u[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            u[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        }
        let m = grid.intervals();
        for a in 0..2 {
            assert_abs_diff_eq!(sol.u[m].coeff(a, 0).re, u[a], epsilon = 1e-6);
            // The state never leaves the constant sector.
            assert!(sol.u[m].coeff(a, 1).norm() <= 1e-12);
        }
    }

    #[test]
    fn skt_guard_rejects_negative_initial_data() {
        let c = SktCoeffs::desk_defaults();
        let model = skt_model(&c, 4, PERIOD, CrpParams::desk_defaults(), 50.0).unwrap();
        let grid = TimeGrid::dyadic(0.5, 6).unwrap();
        let rp = zero_driver(&grid, 2);
        let x0 = SpectralField::constant(&[0.5, -0.2], 4, PERIOD);
        let err = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap_err();
        assert!(format!("{err}").contains("guard"));
    }

    fn smooth_driver3(grid: &TimeGrid) -> (RoughPath, TimeGrid, ndarray::Array2<f64>) {
        let fine = grid.refine(32).unwrap();
        let mf = fine.intervals();
        let mut x = ndarray::Array2::zeros((mf + 1, 3));
        for j in 0..=mf {
            let t = fine.node(j);
            x[(j, 0)] = 0.9 * t + 0.25 * (2.3 * t).sin();
            x[(j, 1)] = -0.6 * t + 0.35 * (1.7 * t + 0.4).cos() - 0.35 * (0.4f64).cos();
            x[(j, 2)] = 0.4 * t + 0.2 * (3.1 * t).sin();
        }
        let rp = RoughPath::lift_smooth(&x, &fine, grid, 0.45).unwrap();
        (rp, fine, x)
    }

    #[test]
    fn llg_constant_reduction_matches_the_rotation_oracle() {
        let p = CrpParams::desk_defaults();
        let model = llg_model(&phi_one(2), 0, p, 5.0).unwrap();
        let grid = TimeGrid::dyadic(0.5, 12).unwrap();
        let (rp, fine, x) = smooth_driver3(&grid);
        let x0 = SpectralField::constant(&[0.0, 0.0, 1.0], 2, PERIOD);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);

        // Fold the exact per-segment rotations of the fine driver.
        let mut u = [0.0, 0.0, 1.0];
        for j in 0..fine.intervals() {
            let dw = [
                x[(j + 1, 0)] - x[(j, 0)],
                x[(j + 1, 1)] - x[(j, 1)],
                x[(j + 1, 2)] - x[(j, 2)],
            ];
            u = mat_vec(&rodrigues(dw), u);
        }
        let m = grid.intervals();
        for a in 0..3 {
            assert_abs_diff_eq!(sol.u[m].coeff(a, 0).re, u[a], epsilon = 1e-6);
        }
        // The numerical magnetization stays on the unit sphere.
        for j in 0..=m {
            let norm: f64 = (0..3)
                .map(|a| sol.u[j].coeff(a, 0).re.powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(
                (norm - 1.0).abs() <= 1e-8,
                "node {j}: |u| drifted to {norm}"
            );
            for a in 0..3 {
                assert!(sol.u[j].coeff(a, 1).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn llg_davie_remainder_decays_at_the_cubic_rate() {
        let p = CrpParams::desk_defaults();
        let phi = phi_one(2);
        let model = llg_model(&phi, 0, p, 5.0).unwrap();
        let grid = TimeGrid::dyadic(1.0, 9).unwrap();
        let rp = RoughPath::brownian_lift(7, 3, &grid, LiftKind::Stratonovich, 0.45).unwrap();
        let x0 = SpectralField::constant(&[0.0, 0.0, 1.0], 2, PERIOD);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let check = llg_davie_check(&phi, 0, &sol, &rp, 24).unwrap();
        assert!(
            check.fit.slope >= check.floor,
            "remainder slope {:.3} below the floor {:.3}",
            check.fit.slope,
            check.floor
        );

        let damped = llg_davie_check(&phi, 1, &sol, &rp, 24);
        assert!(damped.is_err(), "damping must be rejected");
    }

    #[test]
    fn llg_davie_remainder_with_zero_noise_is_quadrature_error() {
        let p = CrpParams::desk_defaults();
        let phi = phi_one(8);
        let model = llg_model(&phi, 0, p, 50.0).unwrap();
        let grid = TimeGrid::dyadic(0.25, 7).unwrap();
        let rp = zero_driver(&grid, 3);
        // Band-limited unit-sphere datum.
        let theta = |x: f64| 0.3 * (2.0 * std::f64::consts::PI * x / PERIOD).sin();
        let q = 4 * (2 * 8 + 1);
        let mut samples = ndarray::Array2::zeros((3, q));
        for j in 0..q {
            let x = PERIOD * j as f64 / q as f64;
            samples[(0, j)] = theta(x).cos();
            samples[(1, j)] = theta(x).sin();
            samples[(2, j)] = 0.0;
        }
        let x0 = SpectralField::from_real_samples(&samples, 8, PERIOD).unwrap();
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let check = llg_davie_check(&phi, 0, &sol, &rp, 16).unwrap();
        assert!(
            check.fit.slope >= 1.5,
            "smooth-case remainder slope {:.3} below 1.5",
            check.fit.slope
        );
    }

    #[test]
    fn llg_sphere_norm_drift_stays_small_on_a_desk_run() {
        let p = CrpParams::desk_defaults();
        let phi = phi_one(16);
        let model = llg_model(&phi, 0, p, 50.0).unwrap();
        let grid = TimeGrid::dyadic(0.25, 8).unwrap();
        let (rp, _, _) = smooth_driver3(&grid);
        let theta = |x: f64| 0.4 * (2.0 * std::f64::consts::PI * x / PERIOD).sin();
        let q = 4 * (2 * 16 + 1);
        let mut samples = ndarray::Array2::zeros((3, q));
        for j in 0..q {
            let x = PERIOD * j as f64 / q as f64;
            samples[(0, j)] = theta(x).cos();
            samples[(1, j)] = theta(x).sin();
            samples[(2, j)] = 0.0;
        }
        let x0 = SpectralField::from_real_samples(&samples, 16, PERIOD).unwrap();
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let m = grid.intervals();
        let qq = 4 * (2 * 16 + 1);
        let vals = sol.u[m].eval_real(qq);
        let mut worst = 0.0f64;
        for j in 0..qq {
            let norm = (0..3).map(|a| vals[(a, j)].powi(2)).sum::<f64>().sqrt();
            worst = worst.max((norm - 1.0).abs());
        }
        assert!(
            worst <= 1e-4,
            "pointwise sphere drift {worst:.3e} exceeds the budget"
        );
    }

    #[test]
    fn polynomial_identity_and_additive_channels() {
        let p = CrpParams::desk_defaults();
        let one = SpectralField::constant(&[1.0], 6, PERIOD);
        let spec = PolynomialSpec {
            diffusion: 0.8,
            drift_terms: vec![],
            noise_terms: vec![
                NoiseTerm { coeff: one.clone(), u_pow: 1 },
                NoiseTerm { coeff: one.clone(), u_pow: 0 },
            ],
        };
        let model = polynomial_model(&spec, 6, PERIOD, p, 100.0).unwrap();
        let mut rng = crate::rng::stream(47, 0);
        let u = random_field(&mut rng, 1, 6, PERIOD, 0.8, 1.5);
        let cols = (model.f_rough)(&u).unwrap();
        assert!(cols[0].sub(&u).norm_beta(0.0).unwrap() <= 1e-13);
        assert!(cols[1].sub(&one).norm_beta(0.0).unwrap() <= 1e-13);
        let h = random_field(&mut rng, 1, 6, PERIOD, 0.5, 1.5);
        let dcols = (model.df_rough)(&u, &h).unwrap();
        assert!(dcols[0].sub(&h).norm_beta(0.0).unwrap() <= 1e-13);
        assert!(dcols[1].norm_beta(0.0).unwrap() <= 1e-15);
    }

    #[test]
    fn polynomial_cubic_drift_matches_the_symbolic_expansion() {
        // g(u, ∂x u) = u·(∂x u)² at u = sin(2πx/P):
        // u(∂x u)² = (2π/P)²(sin θ + sin 3θ)/4.
        let p = CrpParams::desk_defaults();
        let one = SpectralField::constant(&[1.0], 8, PERIOD);
        let spec = PolynomialSpec {
            diffusion: 1.0,
            drift_terms: vec![DriftTerm { coeff: one.clone(), u_pow: 1, du_pow: 2 }],
            noise_terms: vec![NoiseTerm { coeff: one, u_pow: 1 }],
        };
        let model = polynomial_model(&spec, 8, PERIOD, p, 100.0).unwrap();
        let mut u = SpectralField::zeros(1, 8, PERIOD);
        u.set_coeff(0, 1, Complex64::new(0.0, -0.5));
        u.set_coeff(0, -1, Complex64::new(0.0, 0.5));
        let drift = (model.n_drift)(0.0, &u).unwrap();
        // Strip the +u compensation to isolate the monomial.
        let g = drift.sub(&u);
        let scale = (2.0 * std::f64::consts::PI / PERIOD).powi(2) / 4.0;
        for k in [1i64, 3] {
            let want = Complex64::new(0.0, -0.5 * scale);
            let got = g.coeff(0, k);
            assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-12);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-12);
        }
        assert!(g.coeff(0, 2).norm() <= 1e-13);
        assert!(g.coeff(0, 5).norm() <= 1e-13);
    }

    #[test]
    fn polynomial_degree_overflow_is_rejected() {
        let one = SpectralField::constant(&[1.0], 4, PERIOD);
        let spec = PolynomialSpec {
            diffusion: 1.0,
            drift_terms: vec![DriftTerm { coeff: one.clone(), u_pow: 9, du_pow: 9 }],
            noise_terms: vec![NoiseTerm { coeff: one, u_pow: 1 }],
        };
        let err = polynomial_model(&spec, 4, PERIOD, CrpParams::desk_defaults(), 10.0).unwrap_err();
        assert!(format!("{err}").contains("dealiasing"));
    }

    #[test]
    fn model_closures_are_shareable_across_threads() {
        // The solver clones these Arcs into families built on worker threads.
        let model = llg_model(&phi_one(2), 0, CrpParams::desk_defaults(), 5.0).unwrap();
        let lof = StdArc::clone(&model.lof);
        let w = SpectralField::constant(&[0.0, 0.0, 1.0], 2, PERIOD);
        let handle = std::thread::spawn(move || lof(0.0, &w).map(|_| ()));
        handle.join().unwrap().unwrap();
        let _ = Array1::<f64>::zeros(1);
    }
}
