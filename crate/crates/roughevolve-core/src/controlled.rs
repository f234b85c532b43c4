//! Controlled rough paths over the spectral scale.
//!
//! A controlled path is a pair `(y, y′)` on the driver's time grid: `y_t`
//! lives at scale index `α`, its Gubinelli derivative `y′_t` (one field per
//! driver component) at `α−σ`, and the remainder
//!
//! ```text
//!     R^y_{t,s} = δy_{t,s} − y′_t · δX_{t,s}
//! ```
//!
//! uses the derivative at the RIGHT endpoint `t`.  All two-parameter
//! quantities carry origin weights
//!
//! ```text
//!     [R]^{(ε)}_{γ,β} = sup_{0<s<t} s^ε |R_{t,s}|_β / (t−s)^γ
//! ```
//!
//! (the node `t_0 = 0` is excluded from every two-parameter sup, while
//! one-parameter sups include it with the convention `0^0 = 1`).  The full
//! norm is the five-summand sum
//!
//! ```text
//!     ‖y,y′‖ = |y|_{0,α} + [δy]^{(ε)}_{γ,α−σ} + |y′|^{(ε)}_{0,α−σ}
//!            + [δy′]^{(2ε)}_{γ′,α−σ−γ′} + [R^y]^{(2ε)}_{γ+γ′,α−σ−γ′}
//! ```
//!
//! with the natural weight `ε = (γ−σ)₊`.  Tuples `y′ = (y′^1,…,y′^d)` are
//! measured in ℓ² over components.

use std::sync::Arc;

use crate::grid::{pair_set, TimeGrid};
use crate::roughpath::RoughPath;
use crate::scale::SpectralField;
use crate::{Error, Result};

/// Pair sups are exact brute force up to this many grid intervals and use
/// dyadic-lag strides beyond (the strided sup is a documented lower bound).
pub const FULL_PAIR_THRESHOLD: usize = 1 << 10;

/// Hölder/weight exponents of a controlled-path space.
///
/// The admissible window (checked on construction) is
/// `γ₀ ∈ (1/3, 1/2)`, `γ ∈ (1/3, γ₀]`, `σ ∈ [0, γ]`, `γ′ ∈ (1−γ₀−γ, γ]`,
/// `α ∈ (1−γ−γ₀+2σ, 1−γ+σ]`, and the weight defaults to `ε = (γ−σ)₊`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrpParams {
    pub gamma0: f64,
    pub gamma: f64,
    pub gamma_p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl CrpParams {
    /// Build a parameter set with the natural weight `ε = (γ−σ)₊` and check
    /// the admissibility window.
    pub fn new(gamma0: f64, gamma: f64, gamma_p: f64, sigma: f64, alpha: f64) -> Result<Self> {
        let p = CrpParams {
            gamma0,
            gamma,
            gamma_p,
            sigma,
            alpha,
            eps: (gamma - sigma).max(0.0),
        };
        p.validate()?;
        Ok(p)
    }

    /// Desk-scale defaults used throughout the experiment suite.
    pub fn desk_defaults() -> Self {
        CrpParams::new(0.45, 0.40, 0.35, 0.0, 0.55).expect("desk defaults are admissible")
    }

    /// Check every window inequality, echoing the violated one verbatim.
    pub fn validate(&self) -> Result<()> {
        let CrpParams {
            gamma0,
            gamma,
            gamma_p,
            sigma,
            alpha,
            eps,
        } = *self;
        if !(gamma0 > 1.0 / 3.0 && gamma0 < 0.5) {
            return Err(Error::invalid(format!(
                "need 1/3 < gamma0 < 1/2, got gamma0 = {gamma0}"
            )));
        }
        if !(gamma > 1.0 / 3.0 && gamma <= gamma0) {
            return Err(Error::invalid(format!(
                "need 1/3 < gamma <= gamma0, got gamma = {gamma}, gamma0 = {gamma0}"
            )));
        }
        if !(0.0..=gamma).contains(&sigma) {
            return Err(Error::invalid(format!(
                "need 0 <= sigma <= gamma, got sigma = {sigma}, gamma = {gamma}"
            )));
        }
        if !(gamma_p > 1.0 - gamma0 - gamma && gamma_p <= gamma) {
            return Err(Error::invalid(format!(
                "need 1 - gamma0 - gamma < gamma_p <= gamma, got gamma_p = {gamma_p}, \
                 1 - gamma0 - gamma = {}",
                1.0 - gamma0 - gamma
            )));
        }
        let lo = 1.0 - gamma - gamma0 + 2.0 * sigma;
        let hi = 1.0 - gamma + sigma;
        if !(alpha > lo && alpha <= hi) {
            return Err(Error::invalid(format!(
                "need 1 - gamma - gamma0 + 2 sigma < alpha <= 1 - gamma + sigma, \
                 got alpha = {alpha}, window = ({lo}, {hi}]"
            )));
        }
        if eps < 0.0 {
            return Err(Error::invalid(format!("need eps >= 0, got eps = {eps}")));
        }
        Ok(())
    }
}

/// Weighted two-parameter sup `sup_{0<s<t} s^ε |value(s,t)|_β / (t−s)^γexp`
/// over the standard pair set of the grid; `value` must return the field of
/// the increment for node pair `(i, j)`, `i < j`.
pub fn weighted_seminorm<F>(
    grid: &TimeGrid,
    beta: f64,
    gamma_exp: f64,
    eps: f64,
    full_threshold: usize,
    value: F,
) -> Result<f64>
where
    F: Fn(usize, usize) -> SpectralField,
{
    let mut sup: f64 = 0.0;
    for (i, j) in pair_set(grid.intervals(), full_threshold) {
        if i == 0 {
            continue; // the origin is excluded from weighted two-parameter sups
        }
        let s = grid.node(i);
        let dt = grid.node(j) - s;
        let n = value(i, j).norm_beta(beta)?;
        sup = sup.max(s.powf(eps) * n / dt.powf(gamma_exp));
    }
    Ok(sup)
}

/// Five-summand breakdown of the controlled-path norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrpNorm {
    /// `|y|_{0,α}` — plain sup of the path itself.
    pub y_sup: f64,
    /// `[δy]^{(ε)}_{γ,α−σ}` — weighted Hölder seminorm of the increments.
    pub dy_seminorm: f64,
    /// `|y′|^{(ε)}_{0,α−σ}` — weighted sup of the derivative tuple.
    pub yprime_sup: f64,
    /// `[δy′]^{(2ε)}_{γ′,α−σ−γ′}` — weighted seminorm of derivative increments.
    pub dyprime_seminorm: f64,
    /// `[R^y]^{(2ε)}_{γ+γ′,α−σ−γ′}` — weighted seminorm of the remainder.
    pub remainder_seminorm: f64,
}

impl CrpNorm {
    pub fn total(&self) -> f64 {
        self.y_sup
            + self.dy_seminorm
            + self.yprime_sup
            + self.dyprime_seminorm
            + self.remainder_seminorm
    }
}

/// Report of the interpolation estimates at parameter `θ ∈ [0,1]`: the three
/// interpolated seminorms, each divided by `(1 ∨ ρ_γ(X)) · ‖y,y′‖`.
#[derive(Debug, Clone, Copy)]
pub struct InterpolationReport {
    pub theta: f64,
    /// `[δy]^{(θε)}_{θγ, α−θσ}`
    pub dy_lhs: f64,
    /// `[R^y]^{(ε(1+θ))}_{γ+θγ′, α−(1+θ)σ−γ′}`
    pub remainder_lhs: f64,
    /// `[δy′]^{(ε(1+θ))}_{θγ′, α−(1+θ)σ−γ′}`
    pub dyprime_lhs: f64,
    /// `(1 ∨ ρ_γ(X)) · ‖y,y′‖`
    pub denominator: f64,
    /// The three left-hand sides divided by `denominator`.
    pub ratios: [f64; 3],
}

/// A path controlled by a rough driver: values `y` on the grid nodes, a
/// `d`-tuple Gubinelli derivative `y′` per node, and shared exponents.
pub struct ControlledPath {
    params: CrpParams,
    driver: Arc<RoughPath>,
    y: Vec<SpectralField>,
    yprime: Vec<Vec<SpectralField>>,
}

impl ControlledPath {
    pub fn new(
        params: CrpParams,
        driver: Arc<RoughPath>,
        y: Vec<SpectralField>,
        yprime: Vec<Vec<SpectralField>>,
    ) -> Result<Self> {
        params.validate()?;
        let nodes = driver.grid().nodes();
        if y.len() != nodes || yprime.len() != nodes {
            return Err(Error::GridMismatch(format!(
                "controlled path needs one value per node: got {} y / {} y' for {} nodes",
                y.len(),
                yprime.len(),
                nodes
            )));
        }
        for yp in &yprime {
            if yp.len() != driver.d() {
                return Err(Error::GridMismatch(format!(
                    "y' must have one component per driver dimension {} (got {})",
                    driver.d(),
                    yp.len()
                )));
            }
        }
        let probe = &y[0];
        let all_compatible = y.iter().all(|f| f.compatible(probe))
            && yprime.iter().flatten().all(|f| f.compatible(probe));
        if !all_compatible {
            return Err(Error::invalid(
                "all fields of a controlled path must share (n1, n_modes, period)",
            ));
        }
        Ok(ControlledPath {
            params,
            driver,
            y,
            yprime,
        })
    }

    /// Build nodes from closures `t ↦ y_t` and `t ↦ (y′^1_t, …, y′^d_t)`.
    pub fn from_fn(
        params: CrpParams,
        driver: Arc<RoughPath>,
        y_at: impl Fn(f64) -> SpectralField,
        yprime_at: impl Fn(f64) -> Vec<SpectralField>,
    ) -> Result<Self> {
        let times = driver.grid().node_times();
        let y = times.iter().map(|&t| y_at(t)).collect();
        let yprime = times.iter().map(|&t| yprime_at(t)).collect();
        ControlledPath::new(params, driver, y, yprime)
    }

    pub fn params(&self) -> &CrpParams {
        &self.params
    }

    pub fn driver(&self) -> &Arc<RoughPath> {
        &self.driver
    }

    pub fn grid(&self) -> &TimeGrid {
        self.driver.grid()
    }

    pub fn y(&self, i: usize) -> &SpectralField {
        &self.y[i]
    }

    pub fn yprime(&self, i: usize) -> &[SpectralField] {
        &self.yprime[i]
    }

    /// `δy_{t,s}` for node indices `s = i`, `t = j`.
    pub fn delta_y(&self, i: usize, j: usize) -> SpectralField {
        self.y[j].sub(&self.y[i])
    }

    /// Remainder `R^y_{t,s} = δy_{t,s} − y′_t · δX_{t,s}` (derivative at the
    /// right endpoint `t = j`).
    pub fn remainder(&self, i: usize, j: usize) -> SpectralField {
        let dx = self.driver.delta_x(i, j);
        let mut r = self.delta_y(i, j);
        for (c, yp) in self.yprime[j].iter().enumerate() {
            r.axpy((-dx[c]).into(), yp);
        }
        r
    }

    /// ℓ²-over-components norm of the derivative tuple at node `i`.
    fn yprime_norm(&self, i: usize, beta: f64) -> Result<f64> {
        let mut sq = 0.0;
        for yp in &self.yprime[i] {
            sq += yp.norm_beta(beta)?.powi(2);
        }
        Ok(sq.sqrt())
    }

    /// ℓ² norm of the tuple increment `δy′_{t,s}`.
    fn dyprime_norm(&self, i: usize, j: usize, beta: f64) -> Result<f64> {
        let mut sq = 0.0;
        for c in 0..self.driver.d() {
            sq += self.yprime[j][c].sub(&self.yprime[i][c]).norm_beta(beta)?.powi(2);
        }
        Ok(sq.sqrt())
    }

    /// One-parameter weighted sup `sup_t t^ε · n(t)` (includes `t = 0`; IEEE
    /// `0^0 = 1` realizes the convention for unweighted sups).
    fn weighted_sup_1p(&self, eps: f64, node_norm: impl Fn(usize) -> Result<f64>) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for i in 0..self.grid().nodes() {
            let w = self.grid().node(i).powf(eps);
            sup = sup.max(w * node_norm(i)?);
        }
        Ok(sup)
    }

    /// Weighted two-parameter sup over the standard pair set (origin excluded).
    fn weighted_sup_2p(
        &self,
        gamma_exp: f64,
        eps: f64,
        pair_norm: impl Fn(usize, usize) -> Result<f64>,
    ) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for (i, j) in pair_set(self.grid().intervals(), FULL_PAIR_THRESHOLD) {
            if i == 0 {
                continue;
            }
            let s = self.grid().node(i);
            let dt = self.grid().node(j) - s;
            sup = sup.max(s.powf(eps) * pair_norm(i, j)? / dt.powf(gamma_exp));
        }
        Ok(sup)
    }

    /// The five-summand controlled-path norm.  The lowest scale index used is
    /// `α−σ−γ′`, so parameters must satisfy `α ≥ σ + γ′`.
    pub fn crp_norm(&self) -> Result<CrpNorm> {
        let p = self.params;
        let low = p.alpha - p.sigma - p.gamma_p;
        if low < -1e-12 {
            return Err(Error::invalid(format!(
                "controlled-path norm needs alpha - sigma - gamma_p >= 0, got {low}"
            )));
        }
        let y_sup = self.weighted_sup_1p(0.0, |i| self.y[i].norm_beta(p.alpha))?;
        let dy_seminorm = self.weighted_sup_2p(p.gamma, p.eps, |i, j| {
            self.delta_y(i, j).norm_beta(p.alpha - p.sigma)
        })?;
        let yprime_sup =
            self.weighted_sup_1p(p.eps, |i| self.yprime_norm(i, p.alpha - p.sigma))?;
        let dyprime_seminorm = self.weighted_sup_2p(p.gamma_p, 2.0 * p.eps, |i, j| {
            self.dyprime_norm(i, j, low.max(0.0))
        })?;
        let remainder_seminorm = self.weighted_sup_2p(p.gamma + p.gamma_p, 2.0 * p.eps, |i, j| {
            self.remainder(i, j).norm_beta(low.max(0.0))
        })?;
        Ok(CrpNorm {
            y_sup,
            dy_seminorm,
            yprime_sup,
            dyprime_seminorm,
            remainder_seminorm,
        })
    }

    /// Interpolated seminorm triple at `θ ∈ [0,1]`, each divided by
    /// `(1 ∨ ρ_γ(X)) · ‖y,y′‖`; the ratios are bounded by a constant
    /// independent of the path (recorded empirically, not asserted here).
    pub fn interpolation_estimates_check(&self, theta: f64) -> Result<InterpolationReport> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid(format!(
                "need theta in [0,1], got {theta}"
            )));
        }
        let p = self.params;
        let mid_index = p.alpha - (1.0 + theta) * p.sigma - p.gamma_p;
        if mid_index < -1e-12 {
            return Err(Error::invalid(format!(
                "interpolation check needs alpha - (1+theta) sigma - gamma_p >= 0, got {mid_index}"
            )));
        }
        let dy_lhs = self.weighted_sup_2p(theta * p.gamma, theta * p.eps, |i, j| {
            self.delta_y(i, j).norm_beta(p.alpha - theta * p.sigma)
        })?;
        let w2 = p.eps * (1.0 + theta);
        let remainder_lhs =
            self.weighted_sup_2p(p.gamma + theta * p.gamma_p, w2, |i, j| {
                self.remainder(i, j).norm_beta(mid_index.max(0.0))
            })?;
        let dyprime_lhs = self.weighted_sup_2p(theta * p.gamma_p, w2, |i, j| {
            self.dyprime_norm(i, j, mid_index.max(0.0))
        })?;
        let rho = self.driver.rho(p.gamma);
        let denominator = rho.max(1.0) * self.crp_norm()?.total();
        let ratios = if denominator > 0.0 {
            [
                dy_lhs / denominator,
                remainder_lhs / denominator,
                dyprime_lhs / denominator,
            ]
        } else {
            [0.0; 3]
        };
        Ok(InterpolationReport {
            theta,
            dy_lhs,
            remainder_lhs,
            dyprime_lhs,
            denominator,
            ratios,
        })
    }

    /// Norm-equivalence variant for the boundary choice `γ′ = γ = σ`: the
    /// total with `[δy]^{(ε)}_{γ,α−γ}` replaced by `[R^y]^{(ε)}_{γ,α−γ}`.
    /// Returns `(standard breakdown, variant total)`.
    pub fn norm_with_remainder_variant(&self) -> Result<(CrpNorm, f64)> {
        let p = self.params;
        if (p.gamma_p - p.gamma).abs() > 1e-12 || (p.sigma - p.gamma).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "remainder variant needs gamma_p = gamma = sigma, got gamma = {}, \
                 gamma_p = {}, sigma = {}",
                p.gamma, p.gamma_p, p.sigma
            )));
        }
        let standard = self.crp_norm()?;
        let r_low = self.weighted_sup_2p(p.gamma, p.eps, |i, j| {
            self.remainder(i, j).norm_beta(p.alpha - p.gamma)
        })?;
        let variant = standard.y_sup
            + r_low
            + standard.yprime_sup
            + standard.dyprime_seminorm
            + standard.remainder_seminorm;
        Ok((standard, variant))
    }
}

/// Least-squares fit of `log(sup)` against `log(lag)`.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Number of (lag, sup) points actually used.
    pub points: usize,
}

/// Empirical Hölder exponent: regress `ln(sup)` on `ln(Δt)` across the given
/// `(Δt, sup)` pairs.  Pairs with a nonpositive sup are dropped; at least 4
/// surviving points are required (degenerate data is flagged as an error).
pub fn holder_slope(lag_sups: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = lag_sups
        .iter()
        .filter(|&&(dt, v)| dt > 0.0 && v > 0.0)
        .map(|&(dt, v)| (dt.ln(), v.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::invalid(format!(
            "Hölder slope needs >= 4 nonzero (lag, sup) points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid(
            "Hölder slope needs at least two distinct lags",
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss_res / n).sqrt(),
        points: pts.len(),
    })
}

/// Per-lag sups `sup_i value(i, i+lag)` as `(Δt, sup)` points ready for
/// [`holder_slope`]; `value(i, j)` is the norm of the two-parameter quantity
/// on the node pair.  The anchor `i = 0` is included (no origin weight here).
pub fn lag_sups<F>(grid: &TimeGrid, lags: &[usize], value: F) -> Vec<(f64, f64)>
where
    F: Fn(usize, usize) -> f64,
{
    let m = grid.intervals();
    lags.iter()
        .filter(|&&lag| lag >= 1 && lag <= m)
        .map(|&lag| {
            let mut sup: f64 = 0.0;
            let mut i = 0;
            while i + lag <= m {
                sup = sup.max(value(i, i + lag));
                i += 1;
            }
            (lag as f64 * grid.mesh(), sup)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::random_field;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    const PERIOD: f64 = 2.0;

    fn smooth_driver(m: u32) -> Arc<RoughPath> {
        let grid = TimeGrid::dyadic(1.0, m).unwrap();
        let fine = grid.refine(16).unwrap();
        let mut x = Array2::zeros((fine.nodes(), 2));
        for (i, t) in fine.node_times().iter().enumerate() {
            x[(i, 0)] = t.sin();
            x[(i, 1)] = 0.5 * t * t;
        }
        Arc::new(RoughPath::lift_smooth(&x, &fine, &grid, 0.45).unwrap())
    }

    fn constant_field(c: f64) -> SpectralField {
        SpectralField::constant(&[c], 8, PERIOD)
    }

    #[test]
    fn window_is_enforced_with_verbatim_messages() {
        assert!(CrpParams::desk_defaults().validate().is_ok());
        let bad = CrpParams::new(0.6, 0.4, 0.35, 0.0, 0.55);
        assert!(format!("{}", bad.unwrap_err()).contains("1/3 < gamma0 < 1/2"));
        let bad = CrpParams::new(0.45, 0.4, 0.35, 0.0, 0.9);
        assert!(format!("{}", bad.unwrap_err()).contains("alpha"));
        let bad = CrpParams::new(0.45, 0.4, 0.1, 0.0, 0.55);
        assert!(format!("{}", bad.unwrap_err()).contains("gamma_p"));
    }

    #[test]
    fn constant_path_norm_is_its_alpha_norm() {
        let driver = smooth_driver(4);
        let params = CrpParams::desk_defaults();
        let c = 1.75;
        let cp = ControlledPath::from_fn(
            params,
            driver,
            |_| constant_field(c),
            |_| vec![constant_field(0.0), constant_field(0.0)],
        )
        .unwrap();
        let n = cp.crp_norm().unwrap();
        assert_abs_diff_eq!(n.y_sup, c, epsilon = 1e-12);
        assert_eq!(n.dy_seminorm, 0.0);
        assert_eq!(n.yprime_sup, 0.0);
        assert_eq!(n.dyprime_seminorm, 0.0);
        assert_eq!(n.remainder_seminorm, 0.0);
        assert_abs_diff_eq!(n.total(), c, epsilon = 1e-12);
    }

    #[test]
    fn path_riding_on_first_component_has_zero_remainder() {
        // y_t = X¹_t · e_0 with constant derivative (e_0, 0): the remainder
        // vanishes identically and [δy] matches the driver seminorm exactly.
        let driver = smooth_driver(4);
        let params = CrpParams::desk_defaults();
        let x1: Vec<f64> = (0..driver.grid().nodes())
            .map(|i| driver.x_matrix()[(i, 0)])
            .collect();
        let grid = driver.grid().clone();
        let cp = ControlledPath::from_fn(
            params,
            driver.clone(),
            |t| constant_field(x1[grid.index_of(t).unwrap()]),
            |_| vec![constant_field(1.0), constant_field(0.0)],
        )
        .unwrap();
        let n = cp.crp_norm().unwrap();
        assert!(n.remainder_seminorm <= 1e-12);
        assert_eq!(n.dyprime_seminorm, 0.0);
        // Independent oracle: unroll the weighted seminorm of δX¹ directly.
        let mut want: f64 = 0.0;
        let m = grid.intervals();
        for i in 1..m {
            for j in (i + 1)..=m {
                let s = grid.node(i);
                let dt = grid.node(j) - s;
                let dx = (x1[j] - x1[i]).abs();
                want = want.max(s.powf(params.eps) * dx / dt.powf(params.gamma));
            }
        }
        assert_abs_diff_eq!(n.dy_seminorm, want, epsilon = 1e-12 * want.max(1.0));
    }

    #[test]
    fn remainder_uses_right_endpoint_derivative() {
        let driver = smooth_driver(3);
        let params = CrpParams::desk_defaults();
        let mut rng = crate::rng::stream(11, crate::rng::streams::TEST_FIELDS);
        let fields: Vec<SpectralField> = (0..driver.grid().nodes() * 3)
            .map(|_| random_field(&mut rng, 1, 8, PERIOD, 1.0, 1.5))
            .collect();
        let nodes = driver.grid().nodes();
        let y: Vec<_> = fields[0..nodes].to_vec();
        let yprime: Vec<Vec<_>> = (0..nodes)
            .map(|i| vec![fields[nodes + i].clone(), fields[2 * nodes + i].clone()])
            .collect();
        let cp = ControlledPath::new(params, driver.clone(), y.clone(), yprime.clone()).unwrap();
        for i in 0..nodes - 1 {
            for j in (i + 1)..nodes {
                let dx = driver.delta_x(i, j);
                // R + y′_t·δX − δy must vanish identically (right endpoint j).
                let mut lhs = cp.remainder(i, j);
                for c in 0..2 {
                    lhs.axpy(dx[c].into(), &yprime[j][c]);
                }
                lhs = lhs.sub(&y[j].sub(&y[i]));
                assert!(lhs.norm_beta(0.0).unwrap() <= 1e-14);
            }
        }
    }

    #[test]
    fn weighted_seminorm_matches_closed_forms() {
        let grid = TimeGrid::dyadic(1.0, 5).unwrap();
        // R ≡ 0 → 0.
        let zero = weighted_seminorm(&grid, 0.3, 0.4, 0.1, usize::MAX, |_, _| {
            SpectralField::zeros(1, 4, PERIOD)
        })
        .unwrap();
        assert_eq!(zero, 0.0);
        // R_{t,s} = (t−s)^γ · e_0 with ε = 0 → exactly 1.
        let one = weighted_seminorm(&grid, 0.0, 0.4, 0.0, usize::MAX, |i, j| {
            constant_field((grid.node(j) - grid.node(i)).powf(0.4))
        })
        .unwrap();
        assert_abs_diff_eq!(one, 1.0, epsilon = 1e-12);
        // y_t = t·e_0, R = δy, γ = 1/2, ε = 0, T = 1 → sup (t−s)^{1/2} = 1,
        // attained at (s,t) = (t_1, 1) up to the excluded-origin gap.
        let sqrt_sup = weighted_seminorm(&grid, 0.0, 0.5, 0.0, usize::MAX, |i, j| {
            constant_field(grid.node(j) - grid.node(i))
        })
        .unwrap();
        let expect = (1.0 - grid.mesh()).sqrt();
        assert_abs_diff_eq!(sqrt_sup, expect, epsilon = 1e-12);
        // ε = 0 coincides with the unweighted seminorm (any ε with weight 1).
        let weighted = weighted_seminorm(&grid, 0.0, 0.4, 0.0, usize::MAX, |i, j| {
            constant_field((grid.node(j) - grid.node(i)).powf(0.4) * 2.0)
        })
        .unwrap();
        assert_abs_diff_eq!(weighted, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn holder_slope_recovers_known_exponents() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let lags: Vec<usize> = (0..=5).map(|p| 1usize << p).collect();
        // y_t = t: increments scale linearly.
        let pts = lag_sups(&grid, &lags, |i, j| grid.node(j) - grid.node(i));
        let fit = holder_slope(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, 1.0, epsilon = 0.01);
        // y_t = √t: sup attained at the origin, slope 1/2.
        let pts = lag_sups(&grid, &lags, |i, j| {
            grid.node(j).sqrt() - grid.node(i).sqrt()
        });
        let fit = holder_slope(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.5, epsilon = 0.05);
        // Degenerate data is flagged.
        assert!(holder_slope(&[(0.5, 0.0), (0.25, 0.0), (0.125, 0.0), (0.0625, 0.0)]).is_err());
    }

    fn random_cp(params: CrpParams, driver: Arc<RoughPath>, seed: u64) -> ControlledPath {
        let mut rng = crate::rng::stream(seed, crate::rng::streams::TEST_FIELDS);
        let d = driver.d();
        // Smooth-in-time random fields: base + t·increment keeps seminorms finite.
        let base = random_field(&mut rng, 1, 8, PERIOD, 1.0, 1.8);
        let drift = random_field(&mut rng, 1, 8, PERIOD, 0.5, 1.8);
        let pbase: Vec<_> = (0..d)
            .map(|_| random_field(&mut rng, 1, 8, PERIOD, 1.0, 1.8))
            .collect();
        let pdrift: Vec<_> = (0..d)
            .map(|_| random_field(&mut rng, 1, 8, PERIOD, 0.5, 1.8))
            .collect();
        let times = driver.grid().node_times();
        let y = times
            .iter()
            .map(|&t| {
                let mut f = base.clone();
                f.axpy(t.into(), &drift);
                f
            })
            .collect();
        let yprime = times
            .iter()
            .map(|&t| {
                (0..d)
                    .map(|c| {
                        let mut f = pbase[c].clone();
                        f.axpy(t.into(), &pdrift[c]);
                        f
                    })
                    .collect()
            })
            .collect();
        ControlledPath::new(params, driver, y, yprime).unwrap()
    }

    #[test]
    fn interpolation_ratios_are_tame() {
        let driver = smooth_driver(5);
        let params = CrpParams::desk_defaults();
        let cp = random_cp(params, driver, 23);
        // θ = 0 reduces to tautologies (≤ 2 from |δy| ≤ 2 sup|y|, plus the
        // T^{γ₀}-sized slack from the remainder's driver term).
        let rep0 = cp.interpolation_estimates_check(0.0).unwrap();
        for r in rep0.ratios {
            assert!(r.is_finite() && r <= 3.0, "theta=0 ratio {r}");
        }
        for theta in [0.5, 1.0] {
            let rep = cp.interpolation_estimates_check(theta).unwrap();
            for r in rep.ratios {
                assert!(r.is_finite() && r <= 10.0, "theta={theta} ratio {r}");
            }
        }
        assert!(cp.interpolation_estimates_check(1.5).is_err());
    }

    #[test]
    fn remainder_variant_is_equivalent_at_boundary_exponents() {
        // γ′ = γ = σ forces α ∈ (0.95, 1]; ε = 0 so all weights are 1.
        let params = CrpParams::new(0.45, 0.4, 0.4, 0.4, 1.0).unwrap();
        let driver = smooth_driver(5);
        let cp = random_cp(params, driver, 29);
        let (standard, variant) = cp.norm_with_remainder_variant().unwrap();
        let s = standard.total();
        assert!(s > 0.0 && variant > 0.0);
        let ratio = variant / s;
        assert!(
            (0.1..=10.0).contains(&ratio),
            "equivalence ratio out of range: {ratio}"
        );
        // Mismatched exponents are rejected.
        let cp2 = random_cp(CrpParams::desk_defaults(), smooth_driver(4), 31);
        assert!(cp2.norm_with_remainder_variant().is_err());
    }
}
