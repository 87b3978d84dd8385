//! f-unit-circulant shifts, f-circulant matrices `Z_f(v)` and FFT matvecs.
//!
//! `Z_f(v)` is the Krylov matrix `[v, Z_f v, …, Z_f^{n-1} v]`, where `Z_f`
//! shifts a vector down one slot and wraps the last entry to the top scaled by
//! `f`. For `f = 1` (circulant) the DFT diagonalises it directly; for `f = -1`
//! (skew-circulant) the DFT does after scaling by powers of
//! `η = exp(iπ/n)`:
//!
//! ```text
//! Z₁(v) x   = ifft(fft(v) ∘ fft(x))
//! Z₁(v)ᵀ x  = ifft(conj(fft(v)) ∘ fft(x))
//! Z₋₁(v) x  = conj(η) ∘ ifft(fft(η∘v) ∘ fft(η∘x))
//! Z₋₁(v)ᵀ x = conj(η) ∘ ifft(conj(fft(η∘v)) ∘ fft(η∘x))
//! ```
//!
//! Each kernel costs one parameter FFT plus one forward and one inverse FFT
//! per column. A precomputed [`Spectrum`] skips the parameter FFT.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::fft::{self, eta_vector, ComplexMatrix, Direction};
use crate::linalg::{check_rows, complexify, real_part_checked};
use crate::{Error, Result};

/// Relative scale of the imaginary-residue guard on kernel outputs.
pub const RESIDUE_TOLERANCE: f64 = 1e-10;

/// `Z_f x = [f·x_{n-1}, x_0, …, x_{n-2}]`.
pub fn shift_scale(f: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 1, "shift of an empty vector");
    let mut out = Vec::with_capacity(n);
    out.push(f * x[n - 1]);
    out.extend_from_slice(&x[..n - 1]);
    out
}

/// Dense `n × n` matrix `Z_f` itself.
pub fn unit_circulant(f: f64, n: usize) -> Array2<f64> {
    let mut z = Array2::zeros((n, n));
    for i in 1..n {
        z[[i, i - 1]] = 1.0;
    }
    z[[0, n - 1]] += f;
    z
}

/// Dense `Z_f(v)`, built column by column with repeated shifts.
pub fn dense_f_circulant(f: f64, v: &[f64]) -> Array2<f64> {
    let n = v.len();
    assert!(n >= 1, "f-circulant of an empty vector");
    let mut m = Array2::zeros((n, n));
    let mut col = v.to_vec();
    for k in 0..n {
        for (i, &c) in col.iter().enumerate() {
            m[[i, k]] = c;
        }
        if k + 1 < n {
            col = shift_scale(f, &col);
        }
    }
    m
}

/// The f-circulant `Z_f(v)` given by its first column.
#[derive(Clone, Debug, PartialEq)]
pub struct FCirculant {
    pub f: f64,
    pub v: Vec<f64>,
}

impl FCirculant {
    pub fn new(f: f64, v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidArgument("f-circulant needs n >= 1".into()));
        }
        Ok(FCirculant { f, v })
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn dense(&self) -> Array2<f64> {
        dense_f_circulant(self.f, &self.v)
    }

    /// `Z_f(v) X`. FFT path for `f = ±1`, direct lower-triangular convolution
    /// for `f = 0`; other values of `f` are rejected.
    pub fn matvec(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.f == 1.0 {
            circ_matvec(&self.v, x)
        } else if self.f == -1.0 {
            skew_matvec(&self.v, x)
        } else if self.f == 0.0 {
            check_rows("Z_0(v) x", self.n(), x.nrows())?;
            Ok(dense_f_circulant(0.0, &self.v).dot(&x))
        } else {
            Err(Error::InvalidArgument(format!(
                "fast f-circulant products support f in {{1, -1, 0}}, got {}",
                self.f
            )))
        }
    }

    pub fn transpose_matvec(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.f == 1.0 {
            circ_transpose_matvec(&self.v, x)
        } else if self.f == -1.0 {
            skew_transpose_matvec(&self.v, x)
        } else if self.f == 0.0 {
            check_rows("Z_0(v)ᵀ x", self.n(), x.nrows())?;
            Ok(dense_f_circulant(0.0, &self.v).t().dot(&x))
        } else {
            Err(Error::InvalidArgument(format!(
                "fast f-circulant products support f in {{1, -1, 0}}, got {}",
                self.f
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrap {
    /// `f = 1`
    Circulant,
    /// `f = -1`
    Skew,
}

/// Eigenvalue spectrum of `Z₁(v)` (`fft(v)`) or `Z₋₁(v)` (`fft(η∘v)`).
#[derive(Clone, Debug)]
pub struct Spectrum {
    wrap: Wrap,
    values: Vec<Complex64>,
    v_l1: f64,
}

impl Spectrum {
    /// One FFT.
    pub fn circulant(v: &[f64]) -> Self {
        let mut values: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft::fft_in_place(&mut values);
        Spectrum {
            wrap: Wrap::Circulant,
            values,
            v_l1: l1(v),
        }
    }

    /// One FFT.
    pub fn skew(v: &[f64]) -> Self {
        let eta = eta_vector(v.len());
        let mut values: Vec<Complex64> = v.iter().zip(eta.values()).map(|(&x, &e)| e * x).collect();
        fft::fft_in_place(&mut values);
        Spectrum {
            wrap: Wrap::Skew,
            values,
            v_l1: l1(v),
        }
    }

    pub fn wrap(&self) -> Wrap {
        self.wrap
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `Z_f(v) X` using the stored spectrum: `2b` FFTs.
    pub fn matvec(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.apply(x, false)
    }

    /// `Z_f(v)ᵀ X` using the stored spectrum: `2b` FFTs.
    pub fn transpose_matvec(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.apply(x, true)
    }

    fn apply(&self, x: ArrayView2<f64>, transpose: bool) -> Result<Array2<f64>> {
        let n = self.n();
        check_rows("f-circulant product", n, x.nrows())?;
        let eta = match self.wrap {
            Wrap::Circulant => None,
            Wrap::Skew => Some(eta_vector(n)),
        };
        let mut work = complexify(x, eta.as_ref().map(|e| e.values()));
        work.transform(Direction::Forward);
        for col in work.columns_mut() {
            for (z, &lambda) in col.iter_mut().zip(&self.values) {
                *z *= if transpose { lambda.conj() } else { lambda };
            }
        }
        work.transform(Direction::Inverse);
        if let Some(eta) = &eta {
            for col in work.columns_mut() {
                for (z, e) in col.iter_mut().zip(eta.values()) {
                    *z *= e.conj();
                }
            }
        }
        let tol = RESIDUE_TOLERANCE * (linf(x) * self.v_l1).max(1.0);
        real_part_checked(&work, tol)
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn linf(x: ArrayView2<f64>) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn check_param(v: &[f64], x: ArrayView2<f64>) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty parameter vector".into()));
    }
    check_rows("f-circulant product", v.len(), x.nrows())
}

/// `Z₁(v) X`.
pub fn circ_matvec(v: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_param(v, x)?;
    Spectrum::circulant(v).matvec(x)
}

/// `Z₁(v)ᵀ X`.
pub fn circ_transpose_matvec(v: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_param(v, x)?;
    Spectrum::circulant(v).transpose_matvec(x)
}

/// `Z₋₁(v) X`.
pub fn skew_matvec(v: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_param(v, x)?;
    Spectrum::skew(v).matvec(x)
}

/// `Z₋₁(v)ᵀ X`.
pub fn skew_transpose_matvec(v: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_param(v, x)?;
    Spectrum::skew(v).transpose_matvec(x)
}

/// Minibatch gradient of `⟨Z, Z₁(v) X⟩` with respect to `v`.
///
/// The Jacobian of `v ↦ Z₁(v) x` is `Z₁(x)`, so the gradient is
/// `Σᵢ Z₁(xᵢ)ᵀ zᵢ = ifft(Σᵢ conj(fft xᵢ) ∘ fft zᵢ)`: `2b + 1` FFTs.
pub fn circulant_gradient(x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.dim() != z.dim() {
        return Err(Error::DimensionMismatch(format!(
            "forward inputs {:?} vs backward inputs {:?}",
            x.dim(),
            z.dim()
        )));
    }
    let n = x.nrows();
    let mut xt = complexify(x, None);
    let mut zt = complexify(z, None);
    xt.transform(Direction::Forward);
    zt.transform(Direction::Forward);
    let mut acc = vec![Complex64::default(); n];
    for (xc, zc) in xt.columns().zip(zt.columns()) {
        for ((a, xv), zv) in acc.iter_mut().zip(xc).zip(zc) {
            *a += xv.conj() * zv;
        }
    }
    fft::ifft_in_place(&mut acc);
    let grad = ComplexMatrix::from_column_major(n, 1, acc);
    let tol = RESIDUE_TOLERANCE * (linf(x) * linf(z) * (n * x.ncols()) as f64).max(1.0);
    Ok(real_part_checked(&grad, tol)?.column(0).to_vec())
}
