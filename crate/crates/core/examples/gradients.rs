//! Generator gradients of `⟨Z, M(G, H) X⟩` from the FFT formulas, compared
//! with central finite differences.
//!
//! ```text
//! cargo run --example gradients
//! ```

use ldr::fft::FftAudit;
use ldr::toeplitz_like::ToeplitzLike;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldr::Result<()> {
    let (n, r, b) = (12, 2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rand = |rows, cols| Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let t = ToeplitzLike::new(rand(n, r), rand(n, r))?;
    let (x, z) = (rand(n, b), rand(n, b));

    let audit = FftAudit::begin();
    let grad = t.fast_gradients(x.view(), z.view())?;
    println!("gradients via {} FFTs (4br+4r+2b = {})", audit.count(), 4 * b * r + 4 * r + 2 * b);

    let objective = |p: &ToeplitzLike| -> ldr::Result<f64> { Ok((p.fast_multiply(x.view())? * &z).sum()) };
    let step = 1e-6;
    let mut worst = 0.0_f64;
    for k in 0..n {
        for j in 0..r {
            let mut plus = t.clone();
            plus.generators_mut().1[[k, j]] += step;
            let mut minus = t.clone();
            minus.generators_mut().1[[k, j]] -= step;
            let fd = (objective(&plus)? - objective(&minus)?) / (2.0 * step);
            worst = worst.max((fd - grad.dh[[k, j]]).abs());
        }
    }
    println!("max |dH - finite difference| = {worst:.1e}");
    println!("dG[.., 0] = {:.4}", grad.dg.column(0));
    Ok(())
}
