//! Flow-map probes over shifted and smoothed drivers.
//!
//! The mild solver realizes a flow map `φ(t, X, x₀)`.  This module measures
//! the properties that make that map a random dynamical system: the cocycle
//! identity `φ(t+s, X, x₀) = φ(t, θ_s X, φ(s, X, x₀))` over the time-shifted
//! driver `θ_s X`, the exactness of the shift on the enhancement itself, the
//! convergence of solutions driven by piecewise-linear smoothings of a
//! Brownian path toward the geometric-lift solution (Wong–Zakai ladder), the
//! gap between the Itô- and Stratonovich-driven solutions of one realization,
//! and the continuity of the solution map in the initial datum.
//!
//! All probes are diagnostic: a leg that blows up or fails to converge makes
//! the affected entry *undefined* (reported, never asserted away), and a
//! smoothing ladder is truncated at the first failing rung.

use ndarray::Array2;
use num_complex::Complex64;

use crate::grid::TimeGrid;
use crate::roughpath::{LiftKind, RoughPath};
use crate::scale::SpectralField;
use crate::solver::{
    solution_distance, solve, QuasilinearModel, Solution, SolveOptions, SolveStatus,
};
use crate::{Error, Result};

/// One split point of a cocycle probe.
#[derive(Debug, Clone)]
pub struct CocycleSplit {
    /// Split node index `s` on the driver's grid.
    pub split_index: usize,
    pub split_time: f64,
    /// `sup_t |φ(s+t, X, x₀) − φ(t, θ_s X, φ(s, X, x₀))|_α` over the
    /// remaining nodes; `None` when either leg failed to complete.
    pub residual: Option<f64>,
    /// Status note: "ok", or why the residual is undefined.
    pub note: String,
}

/// Report of [`cocycle_residual`].
#[derive(Debug)]
pub struct CocycleReport {
    /// Terminal status of the one-shot solve.
    pub full_status: SolveStatus,
    /// `sup_t |u|_α` of the one-shot solution — the residual scale.
    pub sup_alpha: f64,
    pub splits: Vec<CocycleSplit>,
}

/// Measures the cocycle defect of the solver's flow map at the given split
/// nodes: the equation is solved once over the whole horizon, then restarted
/// at each split from the mid-run state with the shifted driver, and the two
/// trajectories are compared in `|·|_α` over the remaining nodes.
///
/// Every split must leave a power-of-two number of intervals (the shifted
/// driver is re-anchored on a dyadic grid).  A blow-up or fixed-point failure
/// on either leg leaves that split's residual undefined rather than failing
/// the probe.
pub fn cocycle_residual(
    model: &QuasilinearModel,
    rp: &RoughPath,
    x0: &SpectralField,
    splits: &[usize],
    opts: &SolveOptions,
) -> Result<CocycleReport> {
    let m = rp.grid().intervals();
    for &s in splits {
        if s == 0 || s >= m {
            return Err(Error::invalid(format!(
                "split {s} must lie strictly between 0 and {m}"
            )));
        }
        if !(m - s).is_power_of_two() {
            return Err(Error::invalid(format!(
                "split {s} leaves {} intervals; the restarted leg needs a power of two",
                m - s
            )));
        }
    }
    let alpha = model.params.alpha;
    let full = solve(model, rp, x0, opts)?;
    let sup_alpha = full.sup_norm(alpha)?;
    let mut out = Vec::with_capacity(splits.len());
    for &s in splits {
        let split_time = rp.grid().node(s);
        if full.status != SolveStatus::Completed {
            out.push(CocycleSplit {
                split_index: s,
                split_time,
                residual: None,
                note: format!("one-shot solve: {}", full.status),
            });
            continue;
        }
        let shifted = rp.shift_view(s)?.materialize()?;
        match solve(model, &shifted, &full.u[s], opts) {
            Err(e) => out.push(CocycleSplit {
                split_index: s,
                split_time,
                residual: None,
                note: format!("restarted leg failed: {e}"),
            }),
            Ok(leg) if leg.status != SolveStatus::Completed => out.push(CocycleSplit {
                split_index: s,
                split_time,
                residual: None,
                note: format!("restarted leg: {}", leg.status),
            }),
            Ok(leg) => {
                let mut r: f64 = 0.0;
                for t in 0..=(m - s) {
                    r = r.max(full.u[s + t].sub(&leg.u[t]).norm_beta(alpha)?);
                }
                out.push(CocycleSplit {
                    split_index: s,
                    split_time,
                    residual: Some(r),
                    note: "ok".into(),
                });
            }
        }
    }
    Ok(CocycleReport {
        full_status: full.status,
        sup_alpha,
        splits: out,
    })
}

/// Largest entrywise defect between the materialized shift of `rp` at node
/// `s_idx` and the direct restriction of `rp`: level-one increments and
/// level-two blocks are compared on every atomic interval and on every
/// sub-interval anchored at the shift origin.  Both sides run the same
/// accumulation over copied data, so an exact shift has zero defect to the
/// last bit.
pub fn shift_identity_defect(rp: &RoughPath, s_idx: usize) -> Result<f64> {
    let shifted = rp.shift_view(s_idx)?.materialize()?;
    let m = shifted.grid().intervals();
    let mut worst: f64 = 0.0;
    let record = |a: &Array2<f64>, b: &Array2<f64>| {
        let mut w: f64 = 0.0;
        for (x, y) in a.iter().zip(b.iter()) {
            w = w.max((x - y).abs());
        }
        w
    };
    for v in 1..=m {
        let da = shifted.delta_x(0, v);
        let db = rp.delta_x(s_idx, s_idx + v);
        for (x, y) in da.iter().zip(db.iter()) {
            worst = worst.max((x - y).abs());
        }
        worst = worst.max(record(
            &shifted.xx_node(v - 1, v),
            &rp.xx_node(s_idx + v - 1, s_idx + v),
        ));
        worst = worst.max(record(&shifted.xx_node(0, v), &rp.xx_node(s_idx, s_idx + v)));
    }
    Ok(worst)
}

/// One rung of a smoothing ladder.
#[derive(Debug, Clone)]
pub struct WongZakaiRow {
    /// Smoothing level: the driver is interpolated linearly between `2^j`
    /// uniform breakpoints.
    pub j: u32,
    /// Rough-path distance from the lifted smoothing to the geometric
    /// enhancement of the same realization.
    pub driver_distance: f64,
    /// `sup_t |u^{(j)} − u^∘|_{α−σ}` against the geometric-lift solution;
    /// `None` when the rung's solve did not complete.
    pub solution_distance: Option<f64>,
    /// Terminal status of the rung's solve.
    pub status: SolveStatus,
}

/// Report of [`wong_zakai`]: the ladder is truncated after the first rung
/// whose solve fails to complete.
#[derive(Debug)]
pub struct WongZakaiTable {
    /// Terminal status of the geometric-lift (target) solve.
    pub target_status: SolveStatus,
    /// `sup_t |u^∘|_{α−σ}` of the target solution — the distance scale.
    pub target_sup: f64,
    pub rows: Vec<WongZakaiRow>,
}

/// Smoothing ladder against a caller-supplied fine sample path and target
/// enhancement.  For each `j` in `j_lo..=j_hi` the samples are interpolated
/// linearly between `2^j` uniform breakpoints, canonically lifted, and solved;
/// each row records the rough-path distance of the smoothed driver to
/// `target` and the solution distance to the target solution.  Rows stop
/// after the first rung whose solve does not complete; an incomplete target
/// solve yields an empty table (its status tells why).
pub fn wong_zakai_from_fine(
    model: &QuasilinearModel,
    grid: &TimeGrid,
    x0: &SpectralField,
    fine_grid: &TimeGrid,
    fine_x: &Array2<f64>,
    target: &RoughPath,
    j_lo: u32,
    j_hi: u32,
    opts: &SolveOptions,
) -> Result<WongZakaiTable> {
    let nf = fine_grid.intervals();
    if j_lo > j_hi {
        return Err(Error::invalid(format!(
            "smoothing range is empty (j_lo {j_lo} > j_hi {j_hi})"
        )));
    }
    if j_hi >= usize::BITS || (1usize << j_hi) > nf {
        return Err(Error::invalid(format!(
            "2^{j_hi} breakpoints exceed the {nf} fine intervals"
        )));
    }
    let gamma0 = model.params.gamma0;
    let beta = model.params.alpha - model.params.sigma;
    let target_sol = solve(model, target, x0, opts)?;
    let target_sup = target_sol.sup_norm(beta)?;
    let mut rows = Vec::new();
    if target_sol.status != SolveStatus::Completed {
        return Ok(WongZakaiTable {
            target_status: target_sol.status,
            target_sup,
            rows,
        });
    }
    for j in j_lo..=j_hi {
        let w = piecewise_linear_smoothing(fine_x, nf, j);
        let rung = RoughPath::lift_smooth(&w, fine_grid, grid, gamma0)?;
        let driver_distance = RoughPath::rough_metric(&rung, target, gamma0)?;
        let rung_sol = solve(model, &rung, x0, opts)?;
        let completed = rung_sol.status == SolveStatus::Completed;
        let sd = if completed {
            Some(solution_distance(&rung_sol, &target_sol, beta)?)
        } else {
            None
        };
        rows.push(WongZakaiRow {
            j,
            driver_distance,
            solution_distance: sd,
            status: rung_sol.status,
        });
        if !completed {
            break;
        }
    }
    Ok(WongZakaiTable {
        target_status: target_sol.status,
        target_sup,
        rows,
    })
}

/// Smoothing ladder for a seeded Brownian driver: one fine realization is
/// drawn, its geometric (Stratonovich) enhancement on `grid` is the target,
/// and rungs `j_lo..=j_hi` interpolate the same realization linearly between
/// `2^j` uniform breakpoints.  Both distance columns should shrink as `j`
/// grows; see [`wong_zakai_from_fine`] for the row semantics.
pub fn wong_zakai(
    model: &QuasilinearModel,
    grid: &TimeGrid,
    x0: &SpectralField,
    seed: u64,
    j_lo: u32,
    j_hi: u32,
    opts: &SolveOptions,
) -> Result<WongZakaiTable> {
    let (fine_grid, fine_x) = RoughPath::brownian_fine_path(seed, model.d, grid)?;
    let target = RoughPath::brownian_lift_from_samples(
        &fine_x,
        &fine_grid,
        grid,
        LiftKind::Stratonovich,
        model.params.gamma0,
    )?;
    wong_zakai_from_fine(
        model, grid, x0, &fine_grid, &fine_x, &target, j_lo, j_hi, opts,
    )
}

/// Linear interpolation of the sample rows between `2^j` uniform
/// breakpoints, evaluated back on the sample grid (breakpoint rows are
/// reproduced exactly).
fn piecewise_linear_smoothing(fine_x: &Array2<f64>, fine_intervals: usize, j: u32) -> Array2<f64> {
    let seg = fine_intervals >> j;
    let segments = 1usize << j;
    let d = fine_x.ncols();
    let mut w = Array2::zeros(fine_x.raw_dim());
    for i in 0..=fine_intervals {
        let k = (i / seg).min(segments - 1);
        let lo = k * seg;
        let hi = lo + seg;
        let frac = (i - lo) as f64 / seg as f64;
        for c in 0..d {
            w[(i, c)] = fine_x[(lo, c)] + frac * (fine_x[(hi, c)] - fine_x[(lo, c)]);
        }
    }
    w
}

/// Solutions of one Brownian realization under its two enhancements.
#[derive(Debug)]
pub struct ItoStratComparison {
    /// Endpoint gap `|u^{Itô}_T − u^{Strat}_T|_{α−σ}`.
    pub gap: f64,
    pub ito: Solution,
    pub strat: Solution,
}

/// Solves the model twice from one seeded Brownian realization — once with
/// the left-point (Itô) enhancement, once with the geometric (Stratonovich)
/// one — and returns both solutions with their endpoint gap.  Errors if
/// either solve fails to complete (the gap would be meaningless).
pub fn ito_strat_gap(
    model: &QuasilinearModel,
    grid: &TimeGrid,
    x0: &SpectralField,
    seed: u64,
    opts: &SolveOptions,
) -> Result<ItoStratComparison> {
    let gamma0 = model.params.gamma0;
    let (fine_grid, fine_x) = RoughPath::brownian_fine_path(seed, model.d, grid)?;
    let rp_ito =
        RoughPath::brownian_lift_from_samples(&fine_x, &fine_grid, grid, LiftKind::Ito, gamma0)?;
    let rp_strat = RoughPath::brownian_lift_from_samples(
        &fine_x,
        &fine_grid,
        grid,
        LiftKind::Stratonovich,
        gamma0,
    )?;
    let ito = solve(model, &rp_ito, x0, opts)?;
    let strat = solve(model, &rp_strat, x0, opts)?;
    for (name, sol) in [("left-point", &ito), ("geometric", &strat)] {
        if sol.status != SolveStatus::Completed {
            return Err(Error::invalid(format!(
                "the {name} solve did not complete: {}",
                sol.status
            )));
        }
    }
    let m = grid.intervals();
    let beta = model.params.alpha - model.params.sigma;
    let gap = ito.u[m].sub(&strat.u[m]).norm_beta(beta)?;
    Ok(ItoStratComparison { gap, ito, strat })
}

/// Sup distances `sup_t |u^{(ε)} − u|_{α−σ}` for the ladder of perturbed
/// initial data `x₀ + ε·direction`, one entry per scale; `None` marks scales
/// whose solve did not complete (the unperturbed reference must).
pub fn initial_data_ladder(
    model: &QuasilinearModel,
    rp: &RoughPath,
    x0: &SpectralField,
    direction: &SpectralField,
    scales: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<Option<f64>>> {
    let reference = solve(model, rp, x0, opts)?;
    if reference.status != SolveStatus::Completed {
        return Err(Error::invalid(format!(
            "the reference solve did not complete: {}",
            reference.status
        )));
    }
    let beta = model.params.alpha - model.params.sigma;
    let mut out = Vec::with_capacity(scales.len());
    for &eps in scales {
        let mut xe = x0.clone();
        xe.axpy(Complex64::new(eps, 0.0), direction);
        match solve(model, rp, &xe, opts) {
            Ok(sol) if sol.status == SolveStatus::Completed => {
                out.push(Some(solution_distance(&sol, &reference, beta)?));
            }
            _ => out.push(None),
        }
    }
    Ok(out)
}
