//! Small dense helpers shared by the reference (slow) paths.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;

use crate::fft::ComplexMatrix;
use crate::{Error, Result};

pub fn to_nalgebra(m: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Singular values in descending order.
pub fn singular_values(m: ArrayView2<f64>) -> Vec<f64> {
    svd(m).1
}

/// Thin SVD `M = U Σ Vᵀ` by one-sided Jacobi rotations, singular values
/// sorted descending.
///
/// For an `m × n` input with `k = min(m, n)`, `U` is `m × k` and `V` is
/// `n × k`. Columns of `U` paired with a zero singular value are zero.
pub fn svd(m: ArrayView2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    if m.nrows() < m.ncols() {
        let (u, s, v) = svd(m.t());
        return (v, s, u);
    }
    let (rows, cols) = m.dim();
    // Column-major working copy; columns are orthogonalised in place.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let eps = f64::EPSILON;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta, gamma) = a[p].iter().zip(&a[q]).fold((0.0, 0.0, 0.0), |acc, (x, y)| {
                    (acc.0 + x * x, acc.1 + y * y, acc.2 + x * y)
                });
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = a.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Array2::from_shape_fn((rows, cols), |(i, k)| {
        let j = order[k];
        if norms[j] > 0.0 {
            a[j][i] / norms[j]
        } else {
            0.0
        }
    });
    let v = Array2::from_shape_fn((cols, cols), |(i, k)| v[order[k]][i]);
    (u, sigma, v)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

pub fn inverse(m: ArrayView2<f64>) -> Result<Array2<f64>> {
    to_nalgebra(m)
        .try_inverse()
        .map(|inv| from_nalgebra(&inv))
        .ok_or_else(|| Error::InvalidArgument("matrix is singular".into()))
}

pub fn frobenius(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(m: ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `‖a − b‖_F / ‖b‖_F`, or the absolute difference when `b` is zero.
pub fn rel_error(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let diff = (&a - &b).iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = frobenius(b);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// `n × n` anti-identity J (reverses a vector).
pub fn reversal(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if i + j + 1 == n { 1.0 } else { 0.0 })
}

/// Lifts a real `n × b` matrix to a complex column-major matrix, scaling row
/// `i` by `row_scale[i]` when given.
pub fn complexify(x: ArrayView2<f64>, row_scale: Option<&[Complex64]>) -> ComplexMatrix {
    match row_scale {
        Some(s) => ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| s[i] * x[[i, j]]),
        None => ComplexMatrix::from_fn(x.nrows(), x.ncols(), |i, j| Complex64::new(x[[i, j]], 0.0)),
    }
}

/// Real part of a column-major complex matrix, rejecting imaginary residue
/// above `tolerance`.
pub fn real_part_checked(m: &ComplexMatrix, tolerance: f64) -> Result<Array2<f64>> {
    let residue = m.as_slice().iter().fold(0.0_f64, |acc, z| acc.max(z.im.abs()));
    if !(residue <= tolerance) {
        return Err(Error::ImaginaryResidueExceeded { residue, tolerance });
    }
    let re: Vec<f64> = m.as_slice().iter().map(|z| z.re).collect();
    Ok(Array2::from_shape_vec((m.rows(), m.cols()).f(), re).expect("shape matches entry count"))
}

pub fn check_rows(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: expected {expected} rows, got {got}")))
    }
}
