//! Matrix exponentials and the first two φ functions.
//!
//! Dense exponentials use scaling-and-squaring with a degree-13 Padé
//! approximant and squaring threshold `‖A‖₁ ≤ 5.4` (the standard constant for
//! double precision, fixed here for reproducibility). φ functions
//!
//! ```text
//!   φ₁(z) = (e^z − 1)/z,      φ₂(z) = (e^z − 1 − z)/z²
//! ```
//!
//! back the exponential product-integration drift quadrature; scalar versions
//! switch to truncated series near `z = 0` to avoid cancellation.

use num_complex::Complex64;

use crate::linalg::{identity, one_norm, CMat, Lu};

/// Degree-13 Padé numerator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Squaring threshold for the degree-13 approximant.
pub const PADE13_THETA: f64 = 5.4;

/// Dense matrix exponential.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "expm needs a square matrix");
    let norm = one_norm(a);
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.mapv(|c| c / 2f64.powi(s as i32));
    let mut e = pade13(&scaled);
    for _ in 0..s {
        e = e.dot(&e);
    }
    e
}

fn pade13(a: &CMat) -> CMat {
    let n = a.nrows();
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let b = &PADE13;
    let u_inner = a6.mapv(|c| c * b[13]) + a4.mapv(|c| c * b[11]) + a2.mapv(|c| c * b[9]);
    let u_poly = a6.dot(&u_inner)
        + a6.mapv(|c| c * b[7])
        + a4.mapv(|c| c * b[5])
        + a2.mapv(|c| c * b[3])
        + id.mapv(|c| c * b[1]);
    let u = a.dot(&u_poly);
    let v_inner = a6.mapv(|c| c * b[12]) + a4.mapv(|c| c * b[10]) + a2.mapv(|c| c * b[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|c| c * b[6])
        + a4.mapv(|c| c * b[4])
        + a2.mapv(|c| c * b[2])
        + id.mapv(|c| c * b[0]);
    let vm_u = &v - &u;
    let vp_u = &v + &u;
    let lu = Lu::factor(&vm_u).expect("Padé denominator is nonsingular inside the threshold");
    lu.solve_mat(&vp_u)
}

/// φ₁ for scalars, series-guarded near zero.
pub fn phi1_scalar(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        // Σ z^k/(k+1)!  — truncation error below 1e-18 at |z| ≤ 1e-2.
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..=8 {
            acc += term;
            term = term * z / (k as f64 + 1.0);
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// φ₂ for scalars, series-guarded near zero.
pub fn phi2_scalar(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        // Σ z^k/(k+2)!
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(0.5, 0.0);
        for k in 1..=8 {
            acc += term;
            term = term * z / (k as f64 + 2.0);
        }
        acc
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}
