//! Trains a Toeplitz-like hidden layer on separable Gaussian blobs and
//! writes a checkpoint that is then reloaded.
//!
//! ```text
//! cargo run --release --example train_synthetic
//! ```

use ldr::data::synthetic_separable;
use ldr::nn::{load_checkpoint, save_checkpoint, train_with, ActivationKind, LayerSpec, Network, TrainConfig};

fn main() -> ldr::Result<()> {
    let (d, classes) = (32, 6);
    let train = synthetic_separable(d, 3000, classes, 1)?;
    let test = synthetic_separable(d, 1000, classes, 2)?;
    let specs = vec![
        LayerSpec::ToeplitzLike { m: 2 * d, n: d, r: 2 },
        LayerSpec::Activation {
            kind: ActivationKind::Rectifier,
        },
        LayerSpec::Dense { out_dim: classes },
    ];
    let mut net = Network::new(d, classes, specs, 3)?;
    let config = TrainConfig {
        global_learning_rate: 0.1,
        structured_learning_rate: 0.02,
        decay_factor: 0.7,
        max_steps: 600,
        ..TrainConfig::default()
    };
    println!("{} parameters", net.parameter_count());
    train_with(&mut net, &train, Some(&test), &config, |row| {
        println!("step {:>4}  loss {:.4}  test error {:.3}", row.step, row.train_loss, row.eval_error);
    })?;

    let path = std::env::temp_dir().join("ldr_train_synthetic.ldr");
    save_checkpoint(&path, &net, &config, config.max_steps)?;
    let (back, _, step) = load_checkpoint(&path)?;
    println!("reloaded checkpoint at step {step}: test error {:.3}", back.evaluate(&test)?);
    Ok(())
}
