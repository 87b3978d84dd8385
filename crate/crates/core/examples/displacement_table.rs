//! Measures the displacement rank of the classical structured families
//! (Toeplitz, Hankel, Vandermonde, Cauchy, their inverses and T+H) under
//! their natural operator pairs.
//!
//! ```text
//! cargo run --release --example displacement_table -- 32
//! ```

use ldr::verify::rank_table;

fn main() -> ldr::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(16);
    println!("{:<28} {:<20} {:>5} {:>5}", "matrix", "operators (A, B)", "bound", "rank");
    for row in rank_table(&[n], 10, 0)? {
        println!("{:<28} {:<20} {:>5} {:>5}", row.family, row.operators, row.bound, row.max_rank);
    }
    Ok(())
}
