//! Minimal dense complex linear algebra: partial-pivot LU factorization and
//! solves for the moderate matrix sizes (`n ≲ 200`) arising from spectral
//! Galerkin truncations. Deliberately self-contained — no native LAPACK link.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

/// Identity matrix.
pub fn identity(n: usize) -> CMat {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[(i, i)] = Complex64::new(1.0, 0.0);
    }
    m
}

/// Matrix 1-norm (max absolute column sum).
pub fn one_norm(a: &CMat) -> f64 {
    let (n, m) = a.dim();
    let mut worst = 0.0f64;
    for j in 0..m {
        let mut s = 0.0;
        for i in 0..n {
            s += a[(i, j)].norm();
        }
        worst = worst.max(s);
    }
    worst
}

/// Frobenius norm.
pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// LU factorization with partial pivoting.
pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &CMat) -> Result<Lu> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("LU needs a square matrix"));
        }
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            // pivot
            let mut best = col;
            let mut best_mag = lu[(col, col)].norm();
            for r in (col + 1)..n {
                let mag = lu[(r, col)].norm();
                if mag > best_mag {
                    best = r;
                    best_mag = mag;
                }
            }
            if best_mag == 0.0 {
                return Err(Error::invalid("singular matrix in LU factorization"));
            }
            if best != col {
                piv.swap(col, best);
                for j in 0..n {
                    let tmp = lu[(col, j)];
                    lu[(col, j)] = lu[(best, j)];
                    lu[(best, j)] = tmp;
                }
            }
            let inv = Complex64::new(1.0, 0.0) / lu[(col, col)];
            for r in (col + 1)..n {
                let factor = lu[(r, col)] * inv;
                lu[(r, col)] = factor;
                if factor.norm_sqr() != 0.0 {
                    for j in (col + 1)..n {
                        let sub = factor * lu[(col, j)];
                        lu[(r, j)] -= sub;
                    }
                }
            }
        }
        Ok(Lu { lu, piv })
    }

    /// Solve `A x = b`.
    pub fn solve_vec(&self, b: &CVec) -> CVec {
        let n = self.lu.nrows();
        debug_assert_eq!(b.len(), n);
        let mut x: CVec = Array1::zeros(n);
        for i in 0..n {
            x[i] = b[self.piv[i]];
        }
        // forward substitution (unit lower triangle)
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        // back substitution
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Solve `A X = B` column by column.
    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let n = self.lu.nrows();
        let m = b.ncols();
        let mut out = Array2::zeros((n, m));
        for j in 0..m {
            let col = b.column(j).to_owned();
            let x = self.solve_vec(&col);
            out.column_mut(j).assign(&x);
        }
        out
    }
}
