//! Recovers displacement generators from dense matrices: a Toeplitz
//! matrix (rank 2), a product of two Toeplitz matrices (rank ≤ 4) and a
//! random matrix (full rank), each rebuilt from its generators.
//!
//! ```text
//! cargo run --example reconstruct
//! ```

use ldr::displacement::{extract_generators, toeplitz_like_reconstruct, DEFAULT_RANK_TOL};
use ldr::linalg::rel_error;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldr::Result<()> {
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut toeplitz = || {
        let t: Vec<f64> = (0..2 * n - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
        Array2::from_shape_fn((n, n), |(i, j)| t[n - 1 + i - j])
    };
    let a = toeplitz();
    let product = a.dot(&toeplitz());
    let dense = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));

    for (name, m) in [("Toeplitz", a), ("Toeplitz product", product), ("dense", dense)] {
        let gen = extract_generators(m.view(), DEFAULT_RANK_TOL)?;
        let back = toeplitz_like_reconstruct(&gen);
        println!(
            "{name:<17} displacement rank {:>2}, reconstruction error {:.1e}",
            gen.rank(),
            rel_error(back.view(), m.view())
        );
    }
    Ok(())
}
