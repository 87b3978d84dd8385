//! Per-instance inference time of dense vs circulant vs Toeplitz-like
//! transforms as n grows, with fitted log-log slopes.
//!
//! ```text
//! cargo run --release --example scaling_sweep -- 1024 2048 4096 8192 16384
//! ```
//!
//! The dense matrix at n = 16384 takes 2 GiB. Writes `scaling.csv` and
//! `scaling.csv.meta.json` to the working directory.

use ldr::bench::{fit_loglog_slope, scaling_sweep, write_csv, BenchMetadata, BenchOptions, Kind, Scenario, SweepConfig};

fn main() -> ldr::Result<()> {
    let mut ns: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if ns.is_empty() {
        ns = vec![1024, 2048, 4096];
    }
    let config = SweepConfig {
        scenarios: vec![Scenario::Inference],
        kinds: Kind::ALL.to_vec(),
        ns,
        rs: vec![1, 2],
        bs: vec![1],
        options: BenchOptions::default(),
    };
    let records = scaling_sweep(&config, |r| {
        println!("{:>13} n={:<6} r={} median {:>12.0} ns", r.kind.name(), r.n, r.r, r.median_ns);
    })?;
    for (kind, r) in [(Kind::Dense, 0), (Kind::Circulant, 0), (Kind::ToeplitzLike, 1), (Kind::ToeplitzLike, 2)] {
        let points: Vec<(f64, f64)> = records
            .iter()
            .filter(|x| x.kind == kind && x.r == r)
            .map(|x| (x.n as f64, x.median_ns))
            .collect();
        println!("{kind} r={r}: log-log slope {:.2}", fit_loglog_slope(&points)?);
    }
    for rec in records.iter().filter(|x| x.kind != Kind::Dense) {
        println!("{} n={} r={}: {:.1}x faster than dense", rec.kind, rec.n, rec.r, rec.speedup_vs_dense.unwrap_or(f64::NAN));
    }
    write_csv("scaling.csv", &records, &BenchMetadata::collect(&config.options))
}
