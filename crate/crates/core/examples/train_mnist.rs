//! Trains a one-hidden-layer MNIST classifier with a structured hidden layer.
//!
//! ```text
//! cargo run --release --example train_mnist -- --hidden toeplitz --rank 3 --epochs 10
//! cargo run --release --example train_mnist -- --hidden low-rank --rank 3
//! ```
//!
//! Expects the four uncompressed MNIST IDX files in `--data` (default
//! `data/mnist`; `scripts/fetch_mnist.sh` downloads them).

use clap::{Parser, ValueEnum};
use ldr::data::load_mnist;
use ldr::nn::{train_with, ActivationKind, LayerSpec, Network, TrainConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Hidden {
    Toeplitz,
    LowRank,
    Circulant,
    Dense,
}

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data/mnist")]
    data: std::path::PathBuf,
    #[arg(long, value_enum, default_value = "toeplitz")]
    hidden: Hidden,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    batch: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.02)]
    structured_lr: f64,
    #[arg(long, default_value_t = 0.7)]
    decay: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ldr::Result<()> {
    let args = Args::parse();
    let (train, test) = load_mnist(&args.data)?;
    let d = train.dim();
    let hidden = match args.hidden {
        Hidden::Toeplitz => LayerSpec::ToeplitzLike { m: d, n: d, r: args.rank },
        Hidden::LowRank => LayerSpec::LowRank { out_dim: d, rank: args.rank },
        Hidden::Circulant => LayerSpec::Circulant { n: d },
        Hidden::Dense => LayerSpec::Dense { out_dim: d },
    };
    let specs = vec![
        hidden,
        LayerSpec::Activation { kind: ActivationKind::Rectifier },
        LayerSpec::Dense { out_dim: 10 },
    ];
    let mut net = Network::new(d, 10, specs, args.seed)?;
    let config = TrainConfig {
        global_learning_rate: args.lr,
        structured_learning_rate: args.structured_lr,
        decay_factor: args.decay,
        decay_interval: None,
        batch_size: args.batch,
        max_steps: args.epochs * train.len().div_ceil(args.batch),
        seed: args.seed,
    };
    println!("{:?}: {} parameters", args.hidden, net.parameter_count());
    let start = std::time::Instant::now();
    train_with(&mut net, &train, Some(&test), &config, |row| {
        println!(
            "step {:6}  loss {:.4}  test error {:.2}%  ({:.0}s)",
            row.step,
            row.train_loss,
            100.0 * row.eval_error,
            start.elapsed().as_secs_f64()
        );
    })?;
    Ok(())
}
