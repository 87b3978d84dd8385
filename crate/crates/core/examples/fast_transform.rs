//! A random Toeplitz-like transform applied to a minibatch: fast product
//! vs the dense matrix, FFT counts with and without cached spectra, and
//! the parameter saving.
//!
//! ```text
//! cargo run --release --example fast_transform
//! ```

use ldr::fft::FftAudit;
use ldr::linalg::rel_error;
use ldr::toeplitz_like::ToeplitzLike;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldr::Result<()> {
    let (n, r, b) = (512, 4, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut t = ToeplitzLike::random(n, r, 1.0, &mut rng)?;
    let x = Array2::from_shape_fn((n, b), |_| rng.random_range(-1.0..1.0));

    let audit = FftAudit::begin();
    let y = t.fast_multiply(x.view())?;
    println!("n={n} r={r} b={b}: {} FFTs (2(rb+b+r) = {})", audit.count(), 2 * (r * b + b + r));

    t.cache_spectra();
    let audit = FftAudit::begin();
    t.fast_multiply(x.view())?;
    println!("with cached spectra: {} FFTs", audit.count());

    let err = rel_error(y.view(), t.to_dense().dot(&x).view());
    println!("relative error vs dense: {err:.1e}");
    println!("parameters: {} vs {} dense", t.parameter_count(), n * n);
    Ok(())
}
