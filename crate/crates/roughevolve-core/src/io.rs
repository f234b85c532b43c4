//! Binary and CSV persistence for rough paths, spectral fields, and solver
//! trajectories.
//!
//! All binary formats are little-endian and open with a four-byte magic tag
//! plus a `u32` version:
//!
//! * **Rough-path file** (`RGHP`) — header `{magic, version, d: u64,
//!   steps: u64, gamma0: f64, horizon: f64}`, then the level-1 node values
//!   row-major (`(steps+1)·d` doubles), then the per-consecutive-interval
//!   level-2 blocks row-major (`steps·d·d` doubles).  The dyadic Chen levels
//!   are rebuilt on load from the stored interval data, so a save/load
//!   round-trip is bit-exact on every stored number.
//! * **Field file** (`SPEC`) — header `{magic, version, n1: u64, n_modes: u64,
//!   period: f64}`, then the Fourier coefficients row-major over components
//!   and wavenumbers `k = -N..N`, each complex number as `re, im` doubles.
//! * **Trajectory file** (`TRAJ`) — header `{magic, version}`, a parameter
//!   block (driver dimension, field shape, grid, exponent frame, terminal
//!   status, committed range), then per committed node the state field
//!   followed by its `d` rough-derivative fields, coefficients encoded as in
//!   the field format.  Window diagnostics are run-time logs, not state, and
//!   are not persisted; a loaded trajectory carries an empty window log.
//!
//! CSV emitters produce comma-separated tables with a single header row,
//! RFC-4180 field conventions (no field here ever needs quoting), `'.'` as
//! the decimal separator, Unix line endings, and every floating-point value
//! printed in scientific notation with 17 significant digits — enough for the
//! printed text to parse back to the identical IEEE-754 double.  Callers that
//! want self-describing artifacts prepend `#`-comment lines before the table.
//!
//! Loaders validate magic, version, shape bounds, and exact file length, and
//! report malformed artifacts as [`Error::Format`] so the failure maps to an
//! I/O exit code rather than a validation or solver one.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::controlled::CrpParams;
use crate::grid::TimeGrid;
use crate::roughpath::RoughPath;
use crate::scale::SpectralField;
use crate::solver::{Solution, SolveStatus};
use crate::{Error, Result};

const RGHP_MAGIC: &[u8; 4] = b"RGHP";
const SPEC_MAGIC: &[u8; 4] = b"SPEC";
const TRAJ_MAGIC: &[u8; 4] = b"TRAJ";
const FORMAT_VERSION: u32 = 1;

/// Largest driver dimension a stored artifact may declare.
const MAX_DIM: u64 = 16_384;
/// Largest interval count a stored artifact may declare.
const MAX_STEPS: u64 = 1 << 26;
/// Largest component count a stored field may declare.
const MAX_COMPONENTS: u64 = 4_096;
/// Largest mode cap a stored field may declare.
const MAX_MODES: u64 = 1 << 20;

// ---------------------------------------------------------------------------
// Little-endian primitives
// ---------------------------------------------------------------------------

fn w_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn w_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn r_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn r_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn check_magic(r: &mut impl Read, expected: &[u8; 4], what: &str) -> Result<()> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    if &b != expected {
        return Err(Error::Format(format!(
            "{what}: bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(expected)
        )));
    }
    let version = r_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{what}: unsupported format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Fail when any bytes remain: every loader owns the whole file.
fn check_eof(r: &mut impl Read, what: &str) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format(format!("{what}: trailing bytes after the payload"))),
    }
}

fn checked_usize(v: u64, limit: u64, what: &str) -> Result<usize> {
    if v > limit {
        return Err(Error::Format(format!("{what} = {v} exceeds the supported limit {limit}")));
    }
    Ok(v as usize)
}

/// Format one double with 17 significant digits; the printed text parses back
/// to the identical bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// Rough-path files
// ---------------------------------------------------------------------------

/// Save a rough path (level-1 node values and per-interval level-2 blocks).
pub fn save_roughpath(rp: &RoughPath, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let m = rp.grid().intervals();
    w.write_all(RGHP_MAGIC)?;
    w_u32(&mut w, FORMAT_VERSION)?;
    w_u64(&mut w, rp.d() as u64)?;
    w_u64(&mut w, m as u64)?;
    w_f64(&mut w, rp.gamma0())?;
    w_f64(&mut w, rp.grid().horizon())?;
    for row in rp.x_matrix().rows() {
        for &v in row {
            w_f64(&mut w, v)?;
        }
    }
    for i in 0..m {
        for &v in rp.interval_xx(i) {
            w_f64(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a rough path saved by [`save_roughpath`]; the dyadic Chen levels are
/// rebuilt from the stored interval data.
pub fn load_roughpath(path: impl AsRef<Path>) -> Result<RoughPath> {
    let what = "rough-path file";
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, RGHP_MAGIC, what)?;
    let d = checked_usize(r_u64(&mut r)?, MAX_DIM, "driver dimension")?;
    let steps = checked_usize(r_u64(&mut r)?, MAX_STEPS, "interval count")?;
    let gamma0 = r_f64(&mut r)?;
    let horizon = r_f64(&mut r)?;
    if d == 0 {
        return Err(Error::Format(format!("{what}: driver dimension must be positive")));
    }
    if steps == 0 || !steps.is_power_of_two() {
        return Err(Error::Format(format!(
            "{what}: interval count {steps} is not a positive power of two"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Format(format!("{what}: horizon {horizon} is not positive and finite")));
    }
    let grid = TimeGrid::dyadic(horizon, steps.trailing_zeros())
        .map_err(|e| Error::Format(format!("{what}: {e}")))?;
    let mut x = Array2::zeros((steps + 1, d));
    for i in 0..=steps {
        for c in 0..d {
            x[(i, c)] = r_f64(&mut r)?;
        }
    }
    let mut xx = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut block = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                block[(i, j)] = r_f64(&mut r)?;
            }
        }
        xx.push(block);
    }
    check_eof(&mut r, what)?;
    RoughPath::from_parts(grid, x, xx, gamma0).map_err(|e| Error::Format(format!("{what}: {e}")))
}

/// CSV table of the level-1 path: one row `(t, x1..xd)` per grid node.
pub fn roughpath_csv(rp: &RoughPath) -> String {
    let d = rp.d();
    let mut out = String::from("t");
    for c in 1..=d {
        out.push_str(&format!(",x{c}"));
    }
    out.push('\n');
    let x = rp.x_matrix();
    for (i, t) in rp.grid().node_times().iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for c in 0..d {
            out.push(',');
            out.push_str(&fmt_f64(x[(i, c)]));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Field files
// ---------------------------------------------------------------------------

fn write_field_payload(w: &mut impl Write, f: &SpectralField) -> Result<()> {
    for &c in f.coeffs() {
        w_f64(w, c.re)?;
        w_f64(w, c.im)?;
    }
    Ok(())
}

fn read_field_payload(
    r: &mut impl Read,
    n1: usize,
    n_modes: usize,
    period: f64,
) -> Result<SpectralField> {
    let cols = 2 * n_modes + 1;
    let mut coeffs = Array2::zeros((n1, cols));
    for a in 0..n1 {
        for j in 0..cols {
            let re = r_f64(r)?;
            let im = r_f64(r)?;
            coeffs[(a, j)] = Complex64::new(re, im);
        }
    }
    SpectralField::from_coeffs(coeffs, period)
        .map_err(|e| Error::Format(format!("field payload: {e}")))
}

fn check_field_header(n1: u64, n_modes: u64, period: f64, what: &str) -> Result<(usize, usize)> {
    let n1 = checked_usize(n1, MAX_COMPONENTS, "component count")?;
    let n_modes = checked_usize(n_modes, MAX_MODES, "mode cap")?;
    if n1 == 0 {
        return Err(Error::Format(format!("{what}: component count must be positive")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Format(format!("{what}: period {period} is not positive and finite")));
    }
    Ok((n1, n_modes))
}

/// Save one spectral field (truncated Fourier coefficients).
pub fn save_field(f: &SpectralField, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SPEC_MAGIC)?;
    w_u32(&mut w, FORMAT_VERSION)?;
    w_u64(&mut w, f.n1() as u64)?;
    w_u64(&mut w, f.n_modes() as u64)?;
    w_f64(&mut w, f.period())?;
    write_field_payload(&mut w, f)?;
    w.flush()?;
    Ok(())
}

/// Load a spectral field saved by [`save_field`].
pub fn load_field(path: impl AsRef<Path>) -> Result<SpectralField> {
    let what = "field file";
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, SPEC_MAGIC, what)?;
    let n1 = r_u64(&mut r)?;
    let n_modes = r_u64(&mut r)?;
    let period = r_f64(&mut r)?;
    let (n1, n_modes) = check_field_header(n1, n_modes, period, what)?;
    let f = read_field_payload(&mut r, n1, n_modes, period)?;
    check_eof(&mut r, what)?;
    Ok(f)
}

/// CSV dump of a field on the uniform collocation grid `x_j = jP/Q`: one row
/// `(x, u1..u_n1)` per sample point (real parts; the imaginary parts vanish
/// for reality-symmetric fields).
pub fn field_csv(f: &SpectralField, q: usize) -> String {
    let vals = f.eval_real(q);
    let mut out = String::from("x");
    for a in 1..=f.n1() {
        out.push_str(&format!(",u{a}"));
    }
    out.push('\n');
    for j in 0..q {
        let x = j as f64 * f.period() / q as f64;
        out.push_str(&fmt_f64(x));
        for a in 0..f.n1() {
            out.push(',');
            out.push_str(&fmt_f64(vals[(a, j)]));
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Trajectory files
// ---------------------------------------------------------------------------

fn status_code(status: &SolveStatus) -> (u32, f64, f64, u64) {
    match status {
        SolveStatus::Completed => (0, 0.0, 0.0, 0),
        SolveStatus::Blowup { t, norm } => (1, *t, *norm, 0),
        SolveStatus::BoundaryExit { t } => (2, *t, 0.0, 0),
        SolveStatus::PicardFailure { t, window_intervals } => (3, *t, 0.0, *window_intervals as u64),
    }
}

fn status_from_code(code: u32, a: f64, b: f64, c: u64) -> Result<SolveStatus> {
    Ok(match code {
        0 => SolveStatus::Completed,
        1 => SolveStatus::Blowup { t: a, norm: b },
        2 => SolveStatus::BoundaryExit { t: a },
        3 => SolveStatus::PicardFailure { t: a, window_intervals: c as usize },
        _ => return Err(Error::Format(format!("trajectory file: unknown status code {code}"))),
    })
}

/// Short machine-readable slug for the terminal status (used in CSV tables).
pub fn status_slug(status: &SolveStatus) -> &'static str {
    match status {
        SolveStatus::Completed => "completed",
        SolveStatus::Blowup { .. } => "blowup",
        SolveStatus::BoundaryExit { .. } => "boundary_exit",
        SolveStatus::PicardFailure { .. } => "picard_failure",
    }
}

/// Save a solver trajectory: exponent frame, grid, terminal status, and per
/// committed node the state and its rough-derivative fields.
pub fn save_trajectory(sol: &Solution, path: impl AsRef<Path>) -> Result<()> {
    if sol.u.is_empty() {
        return Err(Error::invalid("cannot save an empty trajectory"));
    }
    if sol.uprime.len() != sol.u.len() {
        return Err(Error::invalid("trajectory state and derivative logs differ in length"));
    }
    if sol.u.len() != sol.completed_through + 1 {
        return Err(Error::invalid("trajectory node count disagrees with its committed range"));
    }
    let d = sol.uprime[0].len();
    let shape = (sol.u[0].n1(), sol.u[0].n_modes(), sol.u[0].period());
    let consistent = sol
        .u
        .iter()
        .all(|f| (f.n1(), f.n_modes(), f.period()) == shape)
        && sol.uprime.iter().all(|fs| {
            fs.len() == d && fs.iter().all(|f| (f.n1(), f.n_modes(), f.period()) == shape)
        });
    if !consistent {
        return Err(Error::invalid("trajectory fields do not share one scale"));
    }

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRAJ_MAGIC)?;
    w_u32(&mut w, FORMAT_VERSION)?;
    w_u64(&mut w, d as u64)?;
    w_u64(&mut w, shape.0 as u64)?;
    w_u64(&mut w, shape.1 as u64)?;
    w_u64(&mut w, sol.grid.intervals() as u64)?;
    w_f64(&mut w, shape.2)?;
    w_f64(&mut w, sol.grid.horizon())?;
    let p = &sol.params;
    for v in [p.gamma0, p.gamma, p.gamma_p, p.sigma, p.alpha, p.eps] {
        w_f64(&mut w, v)?;
    }
    let (code, a, b, c) = status_code(&sol.status);
    w_u32(&mut w, code)?;
    w_f64(&mut w, a)?;
    w_f64(&mut w, b)?;
    w_u64(&mut w, c)?;
    w_u64(&mut w, sol.completed_through as u64)?;
    w_u64(&mut w, sol.u.len() as u64)?;
    for (u, up) in sol.u.iter().zip(&sol.uprime) {
        write_field_payload(&mut w, u)?;
        for f in up {
            write_field_payload(&mut w, f)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a trajectory saved by [`save_trajectory`].  The window log is not
/// part of the format and comes back empty.
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Solution> {
    let what = "trajectory file";
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, TRAJ_MAGIC, what)?;
    let d = checked_usize(r_u64(&mut r)?, MAX_DIM, "driver dimension")?;
    let n1 = r_u64(&mut r)?;
    let n_modes = r_u64(&mut r)?;
    let steps = checked_usize(r_u64(&mut r)?, MAX_STEPS, "interval count")?;
    let period = r_f64(&mut r)?;
    let horizon = r_f64(&mut r)?;
    let (n1, n_modes) = check_field_header(n1, n_modes, period, what)?;
    if steps == 0 || !steps.is_power_of_two() {
        return Err(Error::Format(format!(
            "{what}: interval count {steps} is not a positive power of two"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Format(format!("{what}: horizon {horizon} is not positive and finite")));
    }
    let grid = TimeGrid::dyadic(horizon, steps.trailing_zeros())
        .map_err(|e| Error::Format(format!("{what}: {e}")))?;
    let mut pv = [0.0; 6];
    for v in pv.iter_mut() {
        *v = r_f64(&mut r)?;
    }
    let params = CrpParams {
        gamma0: pv[0],
        gamma: pv[1],
        gamma_p: pv[2],
        sigma: pv[3],
        alpha: pv[4],
        eps: pv[5],
    };
    params.validate().map_err(|e| Error::Format(format!("{what}: {e}")))?;
    let code = r_u32(&mut r)?;
    let a = r_f64(&mut r)?;
    let b = r_f64(&mut r)?;
    let c = r_u64(&mut r)?;
    let status = status_from_code(code, a, b, c)?;
    let completed_through = checked_usize(r_u64(&mut r)?, MAX_STEPS, "committed range")?;
    let node_count = checked_usize(r_u64(&mut r)?, MAX_STEPS + 1, "node count")?;
    if node_count != completed_through + 1 {
        return Err(Error::Format(format!(
            "{what}: node count {node_count} disagrees with committed range {completed_through}"
        )));
    }
    if completed_through > steps {
        return Err(Error::Format(format!(
            "{what}: committed range {completed_through} exceeds the grid ({steps} intervals)"
        )));
    }
    let mut u = Vec::with_capacity(node_count);
    let mut uprime = Vec::with_capacity(node_count);
    for _ in 0..node_count {
        u.push(read_field_payload(&mut r, n1, n_modes, period)?);
        let mut fs = Vec::with_capacity(d);
        for _ in 0..d {
            fs.push(read_field_payload(&mut r, n1, n_modes, period)?);
        }
        uprime.push(fs);
    }
    check_eof(&mut r, what)?;
    Ok(Solution {
        grid,
        params,
        u,
        uprime,
        status,
        windows: Vec::new(),
        completed_through,
    })
}

/// CSV table of a trajectory: one row `(t, norm_alpha, norm_eta, status)` per
/// committed node.  Interior nodes are flagged `ok`; the last committed node
/// carries the terminal status slug, so a completed run ends `completed` and
/// an interrupted one names its failure mode on the node where it stopped.
pub fn trajectory_csv(sol: &Solution, eta: f64) -> Result<String> {
    let mut out = String::from("t,norm_alpha,norm_eta,status\n");
    for (i, f) in sol.u.iter().enumerate() {
        let t = sol.grid.node(i);
        let na = f.norm_beta(sol.params.alpha)?;
        let ne = f.norm_beta(eta)?;
        let flag = if i == sol.completed_through { status_slug(&sol.status) } else { "ok" };
        out.push_str(&format!("{},{},{},{flag}\n", fmt_f64(t), fmt_f64(na), fmt_f64(ne)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::LiftKind;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("roughevolve-io-tests");
        std::fs::create_dir_all(&dir).expect("create temp dir");
        dir.join(name)
    }

    fn sample_lift() -> RoughPath {
        let grid = TimeGrid::dyadic(1.0, 5).unwrap();
        RoughPath::brownian_lift(7, 2, &grid, LiftKind::Ito, 0.45).unwrap()
    }

    fn sample_field() -> SpectralField {
        let mut f = SpectralField::constant(&[0.3, -1.25], 4, 2.0);
        f.set_coeff(0, 1, Complex64::new(0.125, -0.5));
        f.set_coeff(0, -1, Complex64::new(0.125, 0.5));
        f.set_coeff(1, 3, Complex64::new(-0.75, 0.0626220703125));
        f.set_coeff(1, -3, Complex64::new(-0.75, -0.0626220703125));
        f
    }

    fn sample_trajectory() -> Solution {
        let grid = TimeGrid::dyadic(0.5, 2).unwrap();
        let params = CrpParams::desk_defaults();
        let base = sample_field();
        let u: Vec<SpectralField> = (0..3).map(|i| base.scaled(1.0 + i as f64 * 0.5)).collect();
        let uprime: Vec<Vec<SpectralField>> = (0..3)
            .map(|i| vec![base.scaled(0.1 * i as f64), base.derivative()])
            .collect();
        Solution {
            grid,
            params,
            u,
            uprime,
            status: SolveStatus::Blowup { t: 0.25, norm: 3.0625 },
            windows: Vec::new(),
            completed_through: 2,
        }
    }

    #[test]
    fn roughpath_roundtrip_is_bit_exact() {
        let rp = sample_lift();
        let path = tmp("rp_roundtrip.rghp");
        save_roughpath(&rp, &path).unwrap();
        let back = load_roughpath(&path).unwrap();
        assert_eq!(back.d(), rp.d());
        assert_eq!(back.gamma0(), rp.gamma0());
        assert!(back.grid().same_as(rp.grid()));
        assert_eq!(back.x_matrix(), rp.x_matrix());
        for i in 0..rp.grid().intervals() {
            assert_eq!(back.interval_xx(i), rp.interval_xx(i));
        }
        // The rebuilt Chen levels reconstruct arbitrary blocks identically.
        assert_eq!(back.xx_node(3, 29), rp.xx_node(3, 29));
    }

    #[test]
    fn repeated_saves_are_byte_identical() {
        let rp = sample_lift();
        let p1 = tmp("rp_bytes_1.rghp");
        let p2 = tmp("rp_bytes_2.rghp");
        save_roughpath(&rp, &p1).unwrap();
        save_roughpath(&rp, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert!(!b1.is_empty());
        assert_eq!(b1, b2);
        // Save → load → save is also a fixed point of the byte stream.
        let p3 = tmp("rp_bytes_3.rghp");
        save_roughpath(&load_roughpath(&p1).unwrap(), &p3).unwrap();
        assert_eq!(b1, std::fs::read(&p3).unwrap());
    }

    #[test]
    fn field_roundtrip_preserves_every_coefficient() {
        let f = sample_field();
        let path = tmp("field_roundtrip.spec");
        save_field(&f, &path).unwrap();
        let back = load_field(&path).unwrap();
        assert_eq!(back.n1(), f.n1());
        assert_eq!(back.n_modes(), f.n_modes());
        assert_eq!(back.period(), f.period());
        assert_eq!(back.coeffs(), f.coeffs());
    }

    #[test]
    fn trajectory_roundtrip_restores_states_and_status() {
        let sol = sample_trajectory();
        let path = tmp("traj_roundtrip.traj");
        save_trajectory(&sol, &path).unwrap();
        let back = load_trajectory(&path).unwrap();
        assert!(back.grid.same_as(&sol.grid));
        assert_eq!(back.completed_through, sol.completed_through);
        assert_eq!(back.params, sol.params);
        match back.status {
            SolveStatus::Blowup { t, norm } => {
                assert_eq!(t, 0.25);
                assert_eq!(norm, 3.0625);
            }
            other => panic!("status not preserved: {other}"),
        }
        assert_eq!(back.u.len(), sol.u.len());
        for (a, b) in back.u.iter().zip(&sol.u) {
            assert_eq!(a.coeffs(), b.coeffs());
        }
        for (a, b) in back.uprime.iter().zip(&sol.uprime) {
            assert_eq!(a.len(), b.len());
            for (fa, fb) in a.iter().zip(b) {
                assert_eq!(fa.coeffs(), fb.coeffs());
            }
        }
        assert!(back.windows.is_empty());
    }

    #[test]
    fn csv_values_parse_back_to_identical_floats() {
        let rp = sample_lift();
        let csv = roughpath_csv(&rp);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2"));
        let x = rp.x_matrix();
        for (i, line) in lines.enumerate() {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cells.len(), 3);
            assert_eq!(cells[0].to_bits(), rp.grid().node(i).to_bits());
            assert_eq!(cells[1].to_bits(), x[(i, 0)].to_bits());
            assert_eq!(cells[2].to_bits(), x[(i, 1)].to_bits());
        }
    }

    #[test]
    fn field_csv_matches_the_closed_form_mode() {
        // 0.5·e^{2πix/P} + c.c. = cos(2πx/P) in component 1 of 1.
        let mut f = SpectralField::zeros(1, 3, 2.0);
        f.set_coeff(0, 1, Complex64::new(0.5, 0.0));
        f.set_coeff(0, -1, Complex64::new(0.5, 0.0));
        let q = 16;
        let csv = field_csv(&f, q);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,u1"));
        for (j, line) in lines.enumerate() {
            let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            let x = j as f64 * 2.0 / q as f64;
            assert_eq!(cells[0].to_bits(), x.to_bits());
            let expect = (std::f64::consts::PI * x).cos();
            assert!((cells[1] - expect).abs() < 1e-12, "sample {j}: {} vs {expect}", cells[1]);
        }
    }

    #[test]
    fn trajectory_csv_flags_the_terminal_node() {
        let sol = sample_trajectory();
        let csv = trajectory_csv(&sol, 0.55).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,norm_alpha,norm_eta,status");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(",ok"));
        assert!(lines[2].ends_with(",ok"));
        assert!(lines[3].ends_with(",blowup"));
        let alpha = sol.params.alpha;
        let cells: Vec<&str> = lines[2].split(',').collect();
        let na: f64 = cells[1].parse().unwrap();
        assert_eq!(na.to_bits(), sol.u[1].norm_beta(alpha).unwrap().to_bits());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let rp = sample_lift();
        let good = tmp("rp_good.rghp");
        save_roughpath(&rp, &good).unwrap();
        let bytes = std::fs::read(&good).unwrap();

        // Wrong magic.
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        let p = tmp("rp_bad_magic.rghp");
        std::fs::write(&p, &corrupt).unwrap();
        assert!(matches!(load_roughpath(&p), Err(Error::Format(_))));

        // Unsupported version.
        let mut corrupt = bytes.clone();
        corrupt[4] = 99;
        let p = tmp("rp_bad_version.rghp");
        std::fs::write(&p, &corrupt).unwrap();
        assert!(matches!(load_roughpath(&p), Err(Error::Format(_))));

        // Truncated payload.
        let p = tmp("rp_truncated.rghp");
        std::fs::write(&p, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_roughpath(&p), Err(Error::Io(_))));

        // Trailing garbage.
        let mut padded = bytes.clone();
        padded.push(0);
        let p = tmp("rp_trailing.rghp");
        std::fs::write(&p, &padded).unwrap();
        assert!(matches!(load_roughpath(&p), Err(Error::Format(_))));

        // Interval count not a power of two (bytes 16..24 hold the count).
        let mut corrupt = bytes.clone();
        corrupt[16..24].copy_from_slice(&33u64.to_le_bytes());
        let p = tmp("rp_bad_steps.rghp");
        std::fs::write(&p, &corrupt).unwrap();
        assert!(matches!(load_roughpath(&p), Err(Error::Format(_))));

        // A field loader refuses a rough-path file outright.
        assert!(matches!(load_field(&good), Err(Error::Format(_))));
    }
}
