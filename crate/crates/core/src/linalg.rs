//! Rank-revealing SVD by one-sided Jacobi rotations.
//!
//! Used for every generalized inverse and projector in the crate. The
//! matrices involved are small indicator-based blocks (at most a few hundred
//! rows), where Jacobi is both fast enough and accurate to working
//! precision even when some columns are numerically dependent.

use crate::matrices::Matrix;

const MAX_SWEEPS: usize = 80;

/// Thin SVD pieces: `u` has one unit column per singular value, columns
/// belonging to zero singular values are left as zero vectors.
#[derive(Debug, Clone)]
pub struct JacobiSvd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
}

pub fn jacobi_svd(x: &Matrix) -> JacobiSvd {
    let mut w = x.clone();
    let n = w.ncols();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = w.column(i).norm_squared();
                let beta = w.column(j).norm_squared();
                let gamma = w.column(i).dot(&w.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..w.nrows() {
                    let (a, b) = (w[(r, i)], w[(r, j)]);
                    w[(r, i)] = c * a - s * b;
                    w[(r, j)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let singular_values: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    for (k, &s) in singular_values.iter().enumerate() {
        if s > 0.0 {
            w.column_mut(k).unscale_mut(s);
        }
    }
    JacobiSvd {
        u: w,
        singular_values,
    }
}

/// Orthonormal basis of the column space, dropping singular values at or
/// below `rtol` times the largest.
pub fn column_basis(x: &Matrix, rtol: f64) -> Matrix {
    let svd = jacobi_svd(x);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    basis_above(svd, rtol * largest)
}

/// Orthonormal basis keeping singular values above `rtol · scale`.
///
/// For matrices that are themselves the residual of a projection, the
/// cutoff must come from the scale of the unprojected input: a residual
/// that is pure roundoff would otherwise look full rank.
pub fn column_basis_scaled(x: &Matrix, rtol: f64, scale: f64) -> Matrix {
    basis_above(jacobi_svd(x), rtol * scale)
}

fn basis_above(svd: JacobiSvd, cutoff: f64) -> Matrix {
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > cutoff && svd.singular_values[k] > 0.0)
        .collect();
    svd.u.select_columns(&keep)
}
