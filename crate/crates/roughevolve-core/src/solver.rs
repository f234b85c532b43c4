//! Quasilinear mild-solution solver.
//!
//! The state `u` solves the fixed-point equation
//!
//! ```text
//!     u_t = S^u_{t,0} x  +  ∫₀ᵗ S^u_{t,s} N(s, u_s) ds  +  ∫₀ᵗ S^u_{t,s} F(u_s)·d𝐗_s ,
//! ```
//!
//! where `S^u` is the evolution family of the state-frozen generator
//! `L(t, u)`.  The solver marches adaptive windows: within a window it
//! iterates the mild map (rebuilding the frozen family from the current
//! iterate every pass, with the generator evaluated at per-interval midpoint
//! states), halves the window when the iteration stops contracting, and
//! doubles it again after a run of easy windows.  The drift integral uses
//! exponential-integrator product integration (`φ₁/φ₂` weights are exact for
//! piecewise-linear drift against the frozen step generator); the rough
//! integral uses the compensated right-endpoint germ of the sewing module.
//! A smooth cutoff `χ(|u|_η / R)` tapers the nonlinearities far from the
//! data scale so the fixed-point map stays globally defined.

use std::fmt;
use std::sync::Arc;

use crate::controlled::CrpParams;
use crate::grid::TimeGrid;
use crate::propagator::{make_family_on, EvolutionFamily, GeneratorFamily, GeneratorSnapshot};
use crate::roughpath::RoughPath;
use crate::scale::SpectralField;
use crate::sewing::{compensator_term, rough_increment_term};
use crate::{Error, Result};

/// Smooth cutoff profile: `≡ 1` on `[0, 1]`, `≡ 0` on `[2, ∞)`, strictly
/// decreasing in between (a standard exponential bump partition).
pub fn cutoff_chi(r: f64) -> f64 {
    fn bump(s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (-1.0 / s).exp()
        }
    }
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let up = bump(2.0 - r);
    up / (up + bump(r - 1.0))
}

/// Valid exponents for composing the outer nonlinearity with a controlled
/// path: `θ ∈ ((1−γ₀−γ)/γ′, (α−2σ)/γ′)`.  The parameter frame guarantees the
/// window is nonempty.
pub fn theta_window(p: &CrpParams) -> (f64, f64) {
    (
        (1.0 - p.gamma0 - p.gamma) / p.gamma_p,
        (p.alpha - 2.0 * p.sigma) / p.gamma_p,
    )
}

/// A quasilinear model: frozen generator, drift, rough nonlinearity and its
/// derivative, a state-space guard, and the cutoff/blow-up scale.
pub struct QuasilinearModel {
    pub name: String,
    /// Driver dimension (number of rough components).
    pub d: usize,
    /// State components per field.
    pub n1: usize,
    pub n_modes: usize,
    pub period: f64,
    /// Exponent frame the model is solved in.
    pub params: CrpParams,
    /// Frozen generator `L(t, y)` of the linearized evolution (shared so
    /// window families can capture it).
    pub lof: Arc<dyn Fn(f64, &SpectralField) -> Result<GeneratorSnapshot> + Send + Sync>,
    /// Drift `N(t, y)`.
    pub n_drift: Arc<dyn Fn(f64, &SpectralField) -> Result<SpectralField> + Send + Sync>,
    /// Rough nonlinearity `F(y)`: one field per driver component.
    pub f_rough: Arc<dyn Fn(&SpectralField) -> Result<Vec<SpectralField>> + Send + Sync>,
    /// Directional derivative `DF(y)[h]`: one field per driver component.
    pub df_rough:
        Arc<dyn Fn(&SpectralField, &SpectralField) -> Result<Vec<SpectralField>> + Send + Sync>,
    /// State-space guard; `None` means the whole space is admissible.
    pub v_guard: Option<Arc<dyn Fn(&SpectralField) -> bool + Send + Sync>>,
    /// Reporting/guard index (e.g. the positivity-guard space); the cutoff
    /// and blow-up norms use `params.alpha` instead.
    pub eta: f64,
    /// Cutoff and blow-up radius `R_max`: nonlinearities taper on
    /// `|y|_α ∈ [R_max, 2 R_max]`, and a committed node with
    /// `|u|_α ≥ R_max` terminates the solve as a blow-up.
    pub r_max: f64,
}

impl fmt::Debug for QuasilinearModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasilinearModel")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("n1", &self.n1)
            .field("n_modes", &self.n_modes)
            .field("eta", &self.eta)
            .field("r_max", &self.r_max)
            .finish()
    }
}

impl QuasilinearModel {
    /// Validate the exponent frame and the composition window.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let (lo, hi) = theta_window(&self.params);
        if lo >= hi {
            return Err(Error::invalid(format!(
                "composition window ((1-gamma0-gamma)/gamma_p, (alpha-2 sigma)/gamma_p) \
                 = ({lo}, {hi}) is empty"
            )));
        }
        if self.r_max <= 0.0 {
            return Err(Error::invalid("blow-up radius R_max must be positive"));
        }
        crate::scale::check_index(self.eta)?;
        Ok(())
    }

    fn chi(&self, y: &SpectralField, apply: bool) -> Result<f64> {
        if !apply {
            return Ok(1.0);
        }
        Ok(cutoff_chi(y.norm_beta(self.params.alpha)? / self.r_max))
    }
}

/// Windowing and iteration policy.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Initial window length = `intervals / window_init_div`.
    pub window_init_div: usize,
    /// Doubling cap = `intervals / window_cap_div`.
    pub window_cap_div: usize,
    /// Relative fixed-point tolerance.
    pub picard_tol: f64,
    /// Iteration budget per window attempt.
    pub picard_max: usize,
    /// A window counts as easy when it converges within this many passes.
    pub easy_iters: usize,
    /// Consecutive easy windows before the length doubles.
    pub easy_run: usize,
    /// Windows shorter than `h_min_factor · horizon` abort the solve.
    pub h_min_factor: f64,
    /// Propagator substeps per interval.
    pub substeps: usize,
    /// Apply the localization cutoff (disabling it is only safe well below
    /// `R_max`; the inertness invariant compares both settings).
    pub apply_cutoff: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            window_init_div: 8,
            window_cap_div: 4,
            picard_tol: 1e-9,
            picard_max: 50,
            easy_iters: 8,
            easy_run: 3,
            h_min_factor: 1e-6,
            substeps: 1,
            apply_cutoff: true,
        }
    }
}

/// Terminal state of a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Completed,
    /// The state norm `|u|_α` reached the blow-up threshold `R_max`.
    Blowup { t: f64, norm: f64 },
    /// The state-space guard rejected a committed node.
    BoundaryExit { t: f64 },
    /// The fixed-point iteration failed even at the minimum window length.
    PicardFailure { t: f64, window_intervals: usize },
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Completed => write!(f, "completed"),
            SolveStatus::Blowup { t, norm } => {
                write!(f, "blowup at t = {t:.6e} (|u|_alpha = {norm:.6e})")
            }
            SolveStatus::BoundaryExit { t } => write!(f, "boundary_exit at t = {t:.6e}"),
            SolveStatus::PicardFailure {
                t,
                window_intervals,
            } => write!(
                f,
                "picard_failure at t = {t:.6e} (window of {window_intervals} intervals)"
            ),
        }
    }
}

/// Per-window iteration diagnostics.
#[derive(Debug, Clone)]
pub struct WindowDiag {
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    pub final_distance: f64,
    /// Last observed per-pass contraction ratio (`NaN` when < 2 passes).
    pub contraction: f64,
}

/// Solver output: node states `u`, their rough derivatives `u′ = χ·F(u)`,
/// the terminal status, and the window log.  `u` and `uprime` hold
/// `completed_through + 1` nodes.
#[derive(Debug)]
pub struct Solution {
    pub grid: TimeGrid,
    pub params: CrpParams,
    pub u: Vec<SpectralField>,
    pub uprime: Vec<Vec<SpectralField>>,
    pub status: SolveStatus,
    pub windows: Vec<WindowDiag>,
    pub completed_through: usize,
}

impl Solution {
    /// Sup of `|u|_β` over the completed nodes.
    pub fn sup_norm(&self, beta: f64) -> Result<f64> {
        let mut s: f64 = 0.0;
        for f in &self.u {
            s = s.max(f.norm_beta(beta)?);
        }
        Ok(s)
    }
}

/// Nonlinearity data for one window: cutoff-tapered `ζ = χF(y)`,
/// `ζ′[i][c] = χ·DF^i(y)[y′^c]`, and drift `χN(t, y)` at each window node.
struct WindowData {
    zeta: Vec<Vec<SpectralField>>,
    zeta_prime: Vec<Vec<Vec<SpectralField>>>,
    drift: Vec<SpectralField>,
}

fn window_data(
    model: &QuasilinearModel,
    grid: &TimeGrid,
    lo: usize,
    y: &[SpectralField],
    yprime: &[Vec<SpectralField>],
    apply_cutoff: bool,
) -> Result<WindowData> {
    let n = y.len();
    let mut zeta = Vec::with_capacity(n);
    let mut zeta_prime = Vec::with_capacity(n);
    let mut drift = Vec::with_capacity(n);
    for j in 0..n {
        let chi = model.chi(&y[j], apply_cutoff)?;
        let f = (model.f_rough)(&y[j])?;
        if f.len() != model.d {
            return Err(Error::invalid(format!(
                "rough nonlinearity returned {} components, driver has {}",
                f.len(),
                model.d
            )));
        }
        zeta.push(f.into_iter().map(|z| z.scaled(chi)).collect::<Vec<_>>());
        let mut rows: Vec<Vec<SpectralField>> = vec![Vec::with_capacity(model.d); model.d];
        for c in 0..model.d {
            let dfc = (model.df_rough)(&y[j], &yprime[j][c])?;
            if dfc.len() != model.d {
                return Err(Error::invalid(
                    "derivative of the rough nonlinearity has the wrong width",
                ));
            }
            for (i, g) in dfc.into_iter().enumerate() {
                rows[i].push(g.scaled(chi));
            }
        }
        zeta_prime.push(rows);
        let t = grid.node(lo + j);
        drift.push((model.n_drift)(t, &y[j])?.scaled(chi));
    }
    Ok(WindowData {
        zeta,
        zeta_prime,
        drift,
    })
}

/// Freeze the generator along the current iterate: the family builder
/// evaluates at interval midpoints, where the state is taken as the average
/// of the two surrounding nodes.
fn frozen_family(
    model: &QuasilinearModel,
    grid: &TimeGrid,
    lo: usize,
    hi: usize,
    y: &[SpectralField],
    substeps: usize,
) -> Result<EvolutionFamily> {
    let nodes: Vec<SpectralField> = y.to_vec();
    let grid_c = grid.clone();
    let (n1, n_modes, period) = (model.n1, model.n_modes, model.period);
    let lof = Arc::clone(&model.lof);
    // Snapshot construction happens inside the family builder, which cannot
    // carry a Result through its closure; record the first failure instead
    // and surface it after the build.
    let failure: Arc<std::sync::Mutex<Option<Error>>> = Arc::new(std::sync::Mutex::new(None));
    let failure_c = Arc::clone(&failure);
    let eval = move |t: f64| -> GeneratorSnapshot {
        let mesh = grid_c.mesh();
        let i = (((t / mesh).floor() as isize).max(lo as isize) as usize).min(hi - 1);
        let mid = nodes[i - lo].add(&nodes[i + 1 - lo]).scaled(0.5);
        match lof(t, &mid) {
            Ok(snap) => snap,
            Err(e) => {
                *failure_c.lock().expect("snapshot failure mutex") = Some(e);
                GeneratorSnapshot::DiagScalar(vec![
                    num_complex::Complex64::new(0.0, 0.0);
                    2 * n_modes + 1
                ])
            }
        }
    };
    let gen = GeneratorFamily::new(eval, n1, n_modes, period, 1.0, 0.0, f64::INFINITY);
    let fam = make_family_on(&gen, grid, substeps, lo, hi)?;
    if let Some(e) = failure.lock().expect("snapshot failure mutex").take() {
        return Err(e);
    }
    Ok(fam)
}

/// One pass of the mild map on a window: returns the new `(y, y′)`.
fn mild_pass(
    model: &QuasilinearModel,
    rp: &RoughPath,
    grid: &TimeGrid,
    lo: usize,
    hi: usize,
    u_lo: &SpectralField,
    y: &[SpectralField],
    yprime: &[Vec<SpectralField>],
    substeps: usize,
    apply_cutoff: bool,
) -> Result<(Vec<SpectralField>, Vec<Vec<SpectralField>>)> {
    let fam = frozen_family(model, grid, lo, hi, y, substeps)?;
    let data = window_data(model, grid, lo, y, yprime, apply_cutoff)?;
    let h = grid.mesh();
    let zero = SpectralField::zeros(model.n1, model.n_modes, model.period);
    let mut seed = u_lo.clone();
    let mut rough = zero.clone();
    let mut drift_acc = zero.clone();
    let mut y_new = Vec::with_capacity(hi - lo + 1);
    y_new.push(u_lo.clone());
    for j in lo..hi {
        let step = fam.step(j);
        // Endpoint-averaged rough increment: half of ζ·δX rides through the
        // step and half is appended at the right endpoint, cancelling the
        // O(h²) kernel-freezing defect of a one-endpoint germ; the
        // compensated level-two term is one order smaller and rides whole.
        let w = rough_increment_term(&data.zeta[j + 1 - lo], rp, j, j + 1);
        let mut inside =
            rough.add(&compensator_term(&data.zeta_prime[j + 1 - lo], rp, j, j + 1));
        inside.axpy(0.5.into(), &w);
        rough = step.apply(&inside);
        rough.axpy(0.5.into(), &w);
        let n0 = &data.drift[j - lo];
        let dn = data.drift[j + 1 - lo].sub(n0);
        drift_acc = step
            .apply(&drift_acc)
            .add(&step.phi1_apply(n0)?.scaled(h))
            .add(&step.phi2_apply(&dn)?.scaled(h));
        seed = step.apply(&seed);
        y_new.push(seed.add(&drift_acc).add(&rough));
    }
    // New derivative: the (tapered) nonlinearity along the previous iterate.
    let yprime_new = data.zeta;
    Ok((y_new, yprime_new))
}

fn iterate_distance(
    p: &CrpParams,
    a_y: &[SpectralField],
    a_p: &[Vec<SpectralField>],
    b_y: &[SpectralField],
    b_p: &[Vec<SpectralField>],
) -> Result<f64> {
    let mut dy: f64 = 0.0;
    let mut dp: f64 = 0.0;
    for j in 0..a_y.len() {
        dy = dy.max(a_y[j].sub(&b_y[j]).norm_beta(p.alpha)?);
        let mut sq = 0.0;
        for c in 0..a_p[j].len() {
            sq += a_p[j][c].sub(&b_p[j][c]).norm_beta(p.alpha - p.sigma)?.powi(2);
        }
        dp = dp.max(sq.sqrt());
    }
    Ok(dy + dp)
}

enum WindowOutcome {
    Converged {
        y: Vec<SpectralField>,
        yprime: Vec<Vec<SpectralField>>,
        diag: WindowDiag,
    },
    NotContracting,
}

fn attempt_window(
    model: &QuasilinearModel,
    rp: &RoughPath,
    grid: &TimeGrid,
    lo: usize,
    hi: usize,
    u_lo: &SpectralField,
    opts: &SolveOptions,
) -> Result<WindowOutcome> {
    // Seed: propagate the window datum under the family frozen at it, with
    // zero derivative part.
    let n = hi - lo + 1;
    let seed_state = vec![u_lo.clone(); n];
    let seed_fam = match frozen_family(model, grid, lo, hi, &seed_state, opts.substeps) {
        Ok(f) => f,
        Err(Error::NonParabolic(_)) => return Ok(WindowOutcome::NotContracting),
        Err(e) => return Err(e),
    };
    let zero = SpectralField::zeros(model.n1, model.n_modes, model.period);
    let mut y: Vec<SpectralField> = Vec::with_capacity(n);
    let mut cur = u_lo.clone();
    y.push(cur.clone());
    for j in lo..hi {
        cur = seed_fam.step(j).apply(&cur);
        y.push(cur.clone());
    }
    let mut yprime: Vec<Vec<SpectralField>> = vec![vec![zero; model.d]; n];

    let scale = u_lo.norm_beta(model.params.alpha)?.max(1.0);
    let mut last_dist = f64::INFINITY;
    let mut contraction = f64::NAN;
    for it in 1..=opts.picard_max {
        let (y_new, yp_new) =
            match mild_pass(model, rp, grid, lo, hi, u_lo, &y, &yprime, opts.substeps, opts.apply_cutoff) {
                Ok(v) => v,
                Err(Error::NonParabolic(_)) => return Ok(WindowOutcome::NotContracting),
                Err(e) => return Err(e),
            };
        let dist = iterate_distance(&model.params, &y_new, &yp_new, &y, &yprime)?;
        y = y_new;
        yprime = yp_new;
        if !dist.is_finite() {
            return Ok(WindowOutcome::NotContracting);
        }
        if dist <= opts.picard_tol * scale {
            return Ok(WindowOutcome::Converged {
                y,
                yprime,
                diag: WindowDiag {
                    start: lo,
                    end: hi,
                    iterations: it,
                    final_distance: dist,
                    contraction,
                },
            });
        }
        if it >= 3 {
            contraction = dist / last_dist;
            if dist >= last_dist {
                return Ok(WindowOutcome::NotContracting);
            }
        }
        last_dist = dist;
    }
    Ok(WindowOutcome::NotContracting)
}

/// Solve the quasilinear evolution driven by `rp` from the datum `x0`.
pub fn solve(
    model: &QuasilinearModel,
    rp: &RoughPath,
    x0: &SpectralField,
    opts: &SolveOptions,
) -> Result<Solution> {
    model.validate()?;
    if rp.d() != model.d {
        return Err(Error::GridMismatch(format!(
            "driver has {} components, model expects {}",
            rp.d(),
            model.d
        )));
    }
    if x0.n1() != model.n1 || x0.n_modes() != model.n_modes {
        return Err(Error::GridMismatch(
            "datum shape does not match the model".into(),
        ));
    }
    if let Some(guard) = &model.v_guard {
        if !guard(x0) {
            return Err(Error::invalid(
                "datum violates the model's state-space guard",
            ));
        }
    }
    if x0.norm_beta(model.params.alpha)? >= model.r_max {
        return Err(Error::invalid(format!(
            "datum norm {} must stay below R_max = {}",
            x0.norm_beta(model.params.alpha)?,
            model.r_max
        )));
    }
    let grid = rp.grid().clone();
    let m = grid.intervals();
    let mut u = Vec::with_capacity(grid.nodes());
    let mut uprime = Vec::with_capacity(grid.nodes());
    u.push(x0.clone());
    let chi0 = model.chi(x0, opts.apply_cutoff)?;
    uprime.push(
        (model.f_rough)(x0)?
            .into_iter()
            .map(|f| f.scaled(chi0))
            .collect::<Vec<_>>(),
    );

    let mut windows = Vec::new();
    let mut win = (m / opts.window_init_div).max(1);
    let cap = (m / opts.window_cap_div).max(1);
    let mut k = 0usize;
    let mut easy = 0usize;
    let mut status = SolveStatus::Completed;

    'outer: while k < m {
        let hi = (k + win).min(m);
        match attempt_window(model, rp, &grid, k, hi, &u[k], opts)? {
            WindowOutcome::Converged { y, yprime, diag } => {
                let easy_window = diag.iterations <= opts.easy_iters;
                windows.push(diag);
                for j in k + 1..=hi {
                    let field = y[j - k].clone();
                    let norm_alpha = field.norm_beta(model.params.alpha)?;
                    if norm_alpha >= model.r_max {
                        status = SolveStatus::Blowup {
                            t: grid.node(j),
                            norm: norm_alpha,
                        };
                        u.push(field);
                        uprime.push(yprime[j - k].clone());
                        break 'outer;
                    }
                    if let Some(guard) = &model.v_guard {
                        if !guard(&field) {
                            status = SolveStatus::BoundaryExit { t: grid.node(j) };
                            u.push(field);
                            uprime.push(yprime[j - k].clone());
                            break 'outer;
                        }
                    }
                    u.push(field);
                    uprime.push(yprime[j - k].clone());
                }
                k = hi;
                if easy_window {
                    easy += 1;
                    if easy >= opts.easy_run {
                        win = (win * 2).min(cap);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }
            }
            WindowOutcome::NotContracting => {
                easy = 0;
                if win == 1 || (win as f64) * grid.mesh() / 2.0
                    < opts.h_min_factor * grid.horizon()
                {
                    status = SolveStatus::PicardFailure {
                        t: grid.node(k),
                        window_intervals: win,
                    };
                    break 'outer;
                }
                win /= 2;
            }
        }
    }

    let completed_through = u.len() - 1;
    Ok(Solution {
        grid,
        params: model.params,
        u,
        uprime,
        status,
        windows,
        completed_through,
    })
}

/// Mild-residual report: the fixed-point defect of a solution under a
/// freshly rebuilt propagator, drift quadrature, and rough convolution.
#[derive(Debug, Clone, Copy)]
pub struct MildResidual {
    /// `sup_t |ψ(u)_t − u_t|_{α−σ}` over the completed nodes.
    pub sup_gap: f64,
    /// `sup_t |u_t|_α` (the size reference for relative comparisons).
    pub scale: f64,
}

/// Recompute the mild map once from the stored solution and measure the
/// defect.  Everything — family, drift weights, germ sums — is rebuilt from
/// `sol.u`, so the report also detects corrupted or inconsistent data.
pub fn mild_residual(
    model: &QuasilinearModel,
    rp: &RoughPath,
    sol: &Solution,
    opts: &SolveOptions,
) -> Result<MildResidual> {
    let grid = &sol.grid;
    if !grid.same_as(rp.grid()) {
        return Err(Error::GridMismatch(
            "solution and driver grids differ".into(),
        ));
    }
    let hi = sol.completed_through;
    if hi == 0 {
        return Err(Error::invalid("solution has no completed intervals"));
    }
    let (psi, _) = mild_pass(
        model,
        rp,
        grid,
        0,
        hi,
        &sol.u[0],
        &sol.u,
        &sol.uprime,
        opts.substeps,
        opts.apply_cutoff,
    )?;
    let p = &model.params;
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..=hi {
        gap = gap.max(psi[j].sub(&sol.u[j]).norm_beta(p.alpha - p.sigma)?);
        scale = scale.max(sol.u[j].norm_beta(p.alpha)?);
    }
    Ok(MildResidual {
        sup_gap: gap,
        scale: scale.max(1e-300),
    })
}

/// Sup distance `sup_t |a_t − b_t|_β` over the common completed nodes of two
/// solutions.  Grids may differ dyadically (values are compared at shared
/// times) and mode caps may differ (the coarser field is zero-padded — the
/// exact embedding of the scale — before subtracting).
pub fn solution_distance(a: &Solution, b: &Solution, beta: f64) -> Result<f64> {
    let (coarse, fine) = if a.grid.intervals() <= b.grid.intervals() {
        (a, b)
    } else {
        (b, a)
    };
    let mut sup: f64 = 0.0;
    for j in 0..=coarse.completed_through {
        let t = coarse.grid.node(j);
        let Ok(i) = fine.grid.index_of(t) else {
            continue;
        };
        if i > fine.completed_through {
            break;
        }
        let (fa, fb) = (&coarse.u[j], &fine.u[i]);
        let da = if fa.n_modes() == fb.n_modes() {
            fa.sub(fb).norm_beta(beta)?
        } else {
            let n = fa.n_modes().max(fb.n_modes());
            fa.with_modes(n).sub(&fb.with_modes(n)).norm_beta(beta)?
        };
        sup = sup.max(da);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlled::CrpParams;
    use crate::propagator::{make_family, propagated_seed};
    use crate::roughpath::LiftKind;
    use crate::scale::lambda_k;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use num_complex::Complex64;

    const PERIOD: f64 = 2.0;

    fn heat_snapshot(n_modes: usize) -> GeneratorSnapshot {
        let symbol: Vec<Complex64> = (-(n_modes as i64)..=n_modes as i64)
            .map(|k| Complex64::new(-lambda_k(k, PERIOD), 0.0))
            .collect();
        GeneratorSnapshot::DiagScalar(symbol)
    }

    /// Scalar linear test model: `L = Δ − 1`, `N = a·u`, `F(u) = c·u` with a
    /// one-component driver.
    fn linear_model(a: f64, c: f64, n_modes: usize, r_max: f64) -> QuasilinearModel {
        QuasilinearModel {
            name: "linear-scalar".into(),
            d: 1,
            n1: 1,
            n_modes,
            period: PERIOD,
            params: CrpParams::desk_defaults(),
            lof: Arc::new(move |_, _| Ok(heat_snapshot(n_modes))),
            n_drift: Arc::new(move |_, y| Ok(y.scaled(a))),
            f_rough: Arc::new(move |y| Ok(vec![y.scaled(c)])),
            df_rough: Arc::new(move |_, h| Ok(vec![h.scaled(c)])),
            v_guard: None,
            eta: 0.55,
            r_max,
        }
    }

    fn smooth_driver(grid: &TimeGrid) -> RoughPath {
        let fine = grid.refine(32).unwrap();
        let mut x = Array2::zeros((fine.nodes(), 1));
        for (i, t) in fine.node_times().iter().enumerate() {
            x[(i, 0)] = 0.8 * t + 0.3 * (2.0 * t).sin();
        }
        RoughPath::lift_smooth(&x, &fine, grid, 0.45).unwrap()
    }

    fn datum(n_modes: usize) -> SpectralField {
        let mut f = SpectralField::constant(&[0.6], n_modes, PERIOD);
        f.set_coeff(0, 1, Complex64::new(0.08, 0.02));
        f.set_coeff(0, -1, Complex64::new(0.08, -0.02));
        f
    }

    #[test]
    fn cutoff_profile_is_a_smooth_plateau() {
        assert_eq!(cutoff_chi(0.0), 1.0);
        assert_eq!(cutoff_chi(1.0), 1.0);
        assert_eq!(cutoff_chi(2.0), 0.0);
        assert_eq!(cutoff_chi(5.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let r = 1.0 + (i as f64) / 100.0;
            let v = cutoff_chi(r);
            assert!(v <= prev + 1e-15, "cutoff must be nonincreasing");
            prev = v;
        }
        assert!(cutoff_chi(1.5) > 0.0 && cutoff_chi(1.5) < 1.0);
    }

    #[test]
    fn zero_nonlinearity_reduces_to_the_semigroup() {
        let grid = TimeGrid::dyadic(1.0, 7).unwrap();
        let rp = RoughPath::brownian_lift(5, 1, &grid, LiftKind::Ito, 0.45).unwrap();
        let model = linear_model(0.0, 0.0, 4, 1e6);
        let x0 = datum(4);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let gen = GeneratorFamily::heat(1, 4, PERIOD);
        let fam = make_family(&gen, &grid, 1).unwrap();
        for j in 0..=grid.intervals() {
            let want = fam.apply(0, j, &x0).unwrap();
            let gap = sol.u[j].sub(&want).norm_beta(0.0).unwrap();
            assert!(gap <= 1e-10, "node {j}: semigroup gap {gap}");
        }
    }

    #[test]
    fn linear_model_matches_the_commuting_closed_form() {
        // L = Δ−1 and F = c·u commute, so with a smooth scalar driver the
        // solution is u(t) = e^{c X_t} · S_{t,0} x per mode.
        let grid = TimeGrid::dyadic(0.5, 10).unwrap();
        let rp = smooth_driver(&grid);
        let c = 0.7;
        let model = linear_model(0.0, c, 4, 1e6);
        let x0 = datum(4);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let m = grid.intervals();
        let xt = rp.x_matrix()[(m, 0)];
        let t = grid.horizon();
        for k in [-1i64, 0, 1] {
            let want = x0.coeff(0, k) * ((c * xt - lambda_k(k, PERIOD) * t).exp());
            let got = sol.u[m].coeff(0, k);
            assert_abs_diff_eq!(got.re, want.re, epsilon = 2e-4);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 2e-4);
        }
        // The derivative part equals the nonlinearity at convergence.
        for j in [0usize, m / 2, m] {
            let gap = sol.uprime[j][0]
                .sub(&sol.u[j].scaled(c))
                .norm_beta(0.0)
                .unwrap();
            assert!(gap <= 1e-9, "u' = F(u) must hold at convergence: {gap}");
        }
        // Drift-growth closed form: N = a·u multiplies the solution by e^{at}.
        let a = 0.9;
        let model2 = linear_model(a, c, 4, 1e6);
        let sol2 = solve(&model2, &rp, &x0, &SolveOptions::default()).unwrap();
        for k in [-1i64, 0, 1] {
            let want = sol.u[m].coeff(0, k) * (a * t).exp();
            let got = sol2.u[m].coeff(0, k);
            assert_abs_diff_eq!(got.re, want.re, epsilon = 5e-4);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 5e-4);
        }
    }

    #[test]
    fn propagated_seed_tuple_norm_stays_near_the_datum_norm() {
        // Weighted seed bound: ‖(S_{·,0}x, 0)‖ / |x|_α stays ≤ 1.1 for the
        // contraction semigroup.
        let grid = TimeGrid::dyadic(1.0, 7).unwrap();
        let rp = Arc::new(RoughPath::brownian_lift(3, 1, &grid, LiftKind::Ito, 0.45).unwrap());
        let gen = GeneratorFamily::heat(1, 4, PERIOD);
        let fam = make_family(&gen, &grid, 1).unwrap();
        let p = CrpParams::desk_defaults();
        let x0 = datum(4);
        let cp = propagated_seed(&fam, p, rp, &x0).unwrap();
        // Heat-family constants: K = K̃ = 1, so the bound is 3·|x|_α.
        let bound = 3.0 * x0.norm_beta(p.alpha).unwrap();
        let ratio = cp.crp_norm().unwrap().total() / bound;
        assert!(
            ratio <= 1.1,
            "seed tuple norm ratio {ratio} exceeds the bound by more than 10%"
        );
    }

    #[test]
    fn cutoff_is_inert_well_below_the_blowup_radius() {
        // With R_max ten times the running sup norm the taper never engages:
        // enabling or disabling it moves the trajectory at most by the
        // Picard tolerance.
        let grid = TimeGrid::dyadic(1.0, 7).unwrap();
        let rp = smooth_driver(&grid);
        let x0 = datum(3);
        let pilot = solve(
            &linear_model(0.4, 0.5, 3, 1e6),
            &rp,
            &x0,
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(pilot.status, SolveStatus::Completed);
        let r_max = 10.0 * pilot.sup_norm(pilot.params.alpha).unwrap();
        let model = linear_model(0.4, 0.5, 3, r_max);
        let opts_on = SolveOptions::default();
        let mut opts_off = SolveOptions::default();
        opts_off.apply_cutoff = false;
        let sol_on = solve(&model, &rp, &x0, &opts_on).unwrap();
        let sol_off = solve(&model, &rp, &x0, &opts_off).unwrap();
        assert_eq!(sol_on.status, SolveStatus::Completed);
        assert_eq!(sol_off.status, SolveStatus::Completed);
        let dist = solution_distance(&sol_on, &sol_off, sol_on.params.alpha).unwrap();
        let scale = sol_on.sup_norm(sol_on.params.alpha).unwrap().max(1.0);
        assert!(
            dist <= 10.0 * opts_on.picard_tol * scale,
            "cutoff toggle moved the trajectory by {dist}"
        );
    }

    #[test]
    fn runaway_noise_reports_picard_failure() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let rp = RoughPath::brownian_lift(17, 1, &grid, LiftKind::Ito, 0.45).unwrap();
        let model = linear_model(0.0, 600.0, 2, 1e12);
        let x0 = datum(2);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert!(
            matches!(sol.status, SolveStatus::PicardFailure { .. }),
            "status: {}",
            sol.status
        );
        assert!(sol.completed_through < grid.intervals());
    }

    #[test]
    fn drift_growth_past_the_cutoff_flags_blowup() {
        let grid = TimeGrid::dyadic(2.0, 7).unwrap();
        let rp = RoughPath::brownian_lift(19, 1, &grid, LiftKind::Ito, 0.45).unwrap();
        // Strong linear growth with a small blow-up radius: |u|_α crosses
        // R_max inside the horizon.
        let model = linear_model(6.0, 0.0, 2, 1.2);
        let x0 = datum(2);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        match &sol.status {
            SolveStatus::Blowup { t, norm } => {
                assert!(*t > 0.0 && *t < 2.0);
                assert!(*norm >= 1.2);
            }
            other => panic!("expected blow-up, got {other}"),
        }
        assert!(sol.completed_through < grid.intervals());
    }

    #[test]
    fn guard_violation_reports_boundary_exit() {
        let grid = TimeGrid::dyadic(1.0, 6).unwrap();
        let rp = RoughPath::brownian_lift(23, 1, &grid, LiftKind::Ito, 0.45).unwrap();
        let mut model = linear_model(2.0, 0.0, 2, 1e6);
        // Guard: mean stays below 1.2 (the drift e^{2t}·0.6 crosses it).
        model.v_guard = Some(Arc::new(|y: &SpectralField| y.coeff(0, 0).re < 1.2));
        let x0 = datum(2);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert!(
            matches!(sol.status, SolveStatus::BoundaryExit { .. }),
            "status: {}",
            sol.status
        );
    }

    #[test]
    fn mild_residual_vanishes_at_the_fixed_point_and_sees_corruption() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let rp = RoughPath::brownian_lift(29, 1, &grid, LiftKind::Stratonovich, 0.45).unwrap();
        let model = linear_model(0.4, 0.5, 4, 1e6);
        let x0 = datum(4);
        let opts = SolveOptions::default();
        let mut sol = solve(&model, &rp, &x0, &opts).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        let res = mild_residual(&model, &rp, &sol, &opts).unwrap();
        assert!(
            res.sup_gap <= 1e-5 * res.scale,
            "converged residual {} vs scale {}",
            res.sup_gap,
            res.scale
        );
        // Corrupting the stored trajectory must be detected.
        let mid = sol.completed_through / 2;
        for j in mid..=sol.completed_through {
            let bump = sol.u[j].coeff(0, 0) + Complex64::new(1e-3, 0.0);
            sol.u[j].set_coeff(0, 0, bump);
        }
        let res2 = mild_residual(&model, &rp, &sol, &opts).unwrap();
        assert!(
            res2.sup_gap >= 5e-4,
            "corruption must raise the residual: {}",
            res2.sup_gap
        );
    }

    #[test]
    fn composition_window_and_frame_are_enforced() {
        let model = linear_model(0.0, 1.0, 2, 1e6);
        let (lo, hi) = theta_window(&model.params);
        assert!(lo < hi, "desk frame must give a nonempty window");
        model.validate().unwrap();
        let mut bad = linear_model(0.0, 1.0, 2, 1e6);
        bad.r_max = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn window_log_records_adaptive_behaviour() {
        let grid = TimeGrid::dyadic(1.0, 8).unwrap();
        let rp = RoughPath::brownian_lift(31, 1, &grid, LiftKind::Ito, 0.45).unwrap();
        let model = linear_model(0.2, 0.8, 4, 1e6);
        let x0 = datum(4);
        let sol = solve(&model, &rp, &x0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Completed);
        assert!(!sol.windows.is_empty());
        // Windows tile the horizon without gaps.
        let mut cursor = 0usize;
        for w in &sol.windows {
            assert_eq!(w.start, cursor);
            assert!(w.end > w.start);
            cursor = w.end;
        }
        assert_eq!(cursor, grid.intervals());
    }
}
