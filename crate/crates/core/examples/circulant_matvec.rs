//! Circulant and skew-circulant products through the FFT, checked against
//! the dense matrices.
//!
//! ```text
//! cargo run --example circulant_matvec
//! ```

use ldr::circulant::{circ_matvec, dense_f_circulant, skew_matvec};
use ldr::fft::FftAudit;
use ldr::linalg::rel_error;
use ndarray::Array2;

fn main() -> ldr::Result<()> {
    let n = 8;
    let v: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let x = Array2::from_shape_fn((n, 2), |(i, j)| (i as f64 - 3.0) * (j as f64 + 1.0));

    let audit = FftAudit::begin();
    let y = circ_matvec(&v, x.view())?;
    println!("Z1(v) x via {} FFTs", audit.count());
    println!("{y:.4}");
    let err = rel_error(y.view(), dense_f_circulant(1.0, &v).dot(&x).view());
    println!("relative error vs dense circulant: {err:.1e}");

    let y = skew_matvec(&v, x.view())?;
    let err = rel_error(y.view(), dense_f_circulant(-1.0, &v).dot(&x).view());
    println!("relative error vs dense skew-circulant: {err:.1e}");
    Ok(())
}
