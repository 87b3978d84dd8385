//! The `ldr` command-line driver: `verify`, `bench`, `train` and
//! `reconstruct`.
//!
//! [`run`] does all the work and returns the process exit code, so the
//! binary is a one-liner and tests can drive the CLI in-process. Every run
//! first prints its fully resolved configuration as one JSON line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;

use crate::bench::{self, BenchMetadata, BenchOptions, DenseMode, Kind, Scenario, SweepConfig};
use crate::data::{self, Dataset};
use crate::displacement::{extract_generators, DEFAULT_RANK_TOL};
use crate::linalg::frobenius;
use crate::nn::{self, ActivationKind, LayerSpec, Network, TrainConfig};
use crate::toeplitz_like::ToeplitzLike;
use crate::verify::{self, Fault, VerifyOptions};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ldr", version, about = "Learnable low-displacement-rank structured transforms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Run the displacement-rank table and reconstruction property suites.
    Verify(VerifyArgs),
    /// Time dense, circulant and Toeplitz-like products and write a CSV.
    Bench(BenchArgs),
    /// Train a one-hidden-layer classifier and write a checkpoint and history.
    Train(TrainArgs),
    /// Extract displacement generators from a dense matrix file.
    Reconstruct(ReconstructArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    /// Relative tolerance for residual checks.
    #[arg(long, default_value_t = verify::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Random draws per fixture.
    #[arg(long, default_value_t = 20)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test hook: deliberately break the reconstruction formula.
    #[arg(long, value_enum)]
    pub inject_fault: Option<FaultArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultArg {
    /// Drop the ½ factor of the Toeplitz-like reconstruction.
    DropHalf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    /// Comma-separated scenarios: inference, forward_minibatch, gradient_minibatch.
    #[arg(long, value_delimiter = ',', default_value = "inference")]
    pub scenarios: Vec<Scenario>,
    /// Comma-separated kinds: dense, circulant, toeplitz_like.
    #[arg(long, value_delimiter = ',', default_value = "dense,circulant,toeplitz_like")]
    pub kinds: Vec<Kind>,
    /// Comma-separated, strictly ascending sizes.
    #[arg(long = "n", value_delimiter = ',', default_value = "1024")]
    pub ns: Vec<usize>,
    /// Comma-separated displacement ranks (Toeplitz-like rows only).
    #[arg(long = "rank", value_delimiter = ',', default_value = "2")]
    pub ranks: Vec<usize>,
    /// Comma-separated batch sizes.
    #[arg(long = "batch", value_delimiter = ',', default_value = "1")]
    pub batches: Vec<usize>,
    /// Timed trials per configuration (at least 5).
    #[arg(long, default_value_t = 15)]
    pub trials: usize,
    /// Untimed warmup runs per configuration.
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split the dense baseline across threads (capped by LDR_THREADS).
    #[arg(long)]
    pub dense_threads: bool,
    /// CSV output path; metadata goes to <out>.meta.json.
    #[arg(long, default_value = "out/bench.csv")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetArg {
    /// Gaussian blobs, one per class.
    Synthetic,
    /// IDX files (MNIST layout).
    Idx,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenArg {
    Toeplitz,
    LowRank,
    Circulant,
    Dense,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value_t = DatasetArg::Synthetic)]
    pub dataset: DatasetArg,
    /// Directory holding the four standard MNIST IDX files.
    #[arg(long, default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    /// Override the training image file.
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    /// Override the training label file.
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    /// Override the test image file.
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    /// Override the test label file.
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Synthetic input dimension.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Synthetic training examples (the test set has half as many).
    #[arg(long, default_value_t = 2000)]
    pub examples: usize,
    /// Synthetic class count.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Hidden layer structure.
    #[arg(long, value_enum, default_value_t = HiddenArg::Toeplitz)]
    pub hidden: HiddenArg,
    /// Displacement rank (toeplitz) or factor rank (low-rank).
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    /// Hidden width; defaults to the input dimension.
    #[arg(long)]
    pub width: Option<usize>,
    /// Learning rate for dense parameters and biases.
    #[arg(long, default_value_t = 0.002)]
    pub lr: f64,
    /// Learning rate for circulant and Toeplitz-like weights.
    #[arg(long, default_value_t = 0.0005)]
    pub structured_lr: f64,
    /// Multiplicative learning-rate decay.
    #[arg(long, default_value_t = 0.1)]
    pub decay: f64,
    /// Steps between decays; defaults to one epoch.
    #[arg(long)]
    pub decay_interval: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub batch: usize,
    /// SGD steps; 0 saves the initial network.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out/checkpoint.ldr")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "out/history.csv")]
    pub history: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReconstructArgs {
    /// Text file: a line "n n" followed by n rows of n numbers.
    pub input: PathBuf,
    /// Singular values below rel_tol·σ₁ count as zero.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    pub rel_tol: f64,
    /// Generator JSON output; defaults to <input>.generators.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::IncompatibleDimensions { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

/// Runs an already parsed command.
pub fn execute(command: &Command, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "config: {}", serde_json::to_string(command)?).map_err(stdout_err)?;
    match command {
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Reconstruct(a) => cmd_reconstruct(a, out),
    }
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    if !(args.tolerance > 0.0) || args.draws == 0 {
        return Err(Error::InvalidArgument("tolerance and draws must be positive".into()));
    }
    let opts = VerifyOptions {
        tolerance: args.tolerance,
        seed: args.seed,
        draws: args.draws,
        fault: args.inject_fault.map(|FaultArg::DropHalf| Fault::DropHalf),
    };
    let report = verify::run(&opts)?;
    write!(out, "{}", report.render()).map_err(stdout_err)?;
    if report.passed() {
        writeln!(out, "all properties passed").map_err(stdout_err)?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "failed: {}", report.failures().join(", ")).map_err(stdout_err)?;
        Ok(EXIT_FAILURE)
    }
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let options = BenchOptions {
        trials: args.trials,
        warmup: args.warmup,
        seed: args.seed,
        dense_mode: if args.dense_threads {
            DenseMode::multi_threaded_from_env()
        } else {
            DenseMode::SingleThreaded
        },
    };
    let config = SweepConfig {
        scenarios: args.scenarios.clone(),
        kinds: args.kinds.clone(),
        ns: args.ns.clone(),
        rs: args.ranks.clone(),
        bs: args.batches.clone(),
        options,
    };
    let mut io_result = Ok(());
    let records = bench::scaling_sweep(&config, |rec| {
        if io_result.is_ok() {
            io_result = writeln!(out, "{}", rec.csv_row());
        }
    })?;
    io_result.map_err(stdout_err)?;
    create_parent(&args.out)?;
    bench::write_csv(&args.out, &records, &BenchMetadata::collect(&config.options))?;
    writeln!(out, "wrote {} rows to {}", records.len(), args.out.display()).map_err(stdout_err)?;
    Ok(EXIT_OK)
}

fn load_datasets(args: &TrainArgs) -> Result<(Dataset, Dataset)> {
    match args.dataset {
        DatasetArg::Synthetic => Ok((
            data::synthetic_separable(args.dim, args.examples, args.classes, args.seed)?,
            data::synthetic_separable(args.dim, (args.examples / 2).max(1), args.classes, args.seed.wrapping_add(1))?,
        )),
        DatasetArg::Idx => {
            let pick = |over: &Option<PathBuf>, name: &str| over.clone().unwrap_or_else(|| args.mnist_dir.join(name));
            let train = data::load_idx_dataset(
                pick(&args.train_images, data::MNIST_TRAIN_IMAGES),
                pick(&args.train_labels, data::MNIST_TRAIN_LABELS),
                10,
            )?;
            let test = data::load_idx_dataset(
                pick(&args.test_images, data::MNIST_TEST_IMAGES),
                pick(&args.test_labels, data::MNIST_TEST_LABELS),
                10,
            )?;
            Ok((train, test))
        }
    }
}

/// Hidden layer, rectifier, dense classifier.
pub fn classifier_specs(hidden: HiddenArg, input_dim: usize, width: usize, rank: usize, classes: usize) -> Vec<LayerSpec> {
    let hidden = match hidden {
        HiddenArg::Toeplitz => LayerSpec::ToeplitzLike {
            m: width,
            n: input_dim,
            r: rank,
        },
        HiddenArg::LowRank => LayerSpec::LowRank { out_dim: width, rank },
        HiddenArg::Circulant => LayerSpec::Circulant { n: input_dim },
        HiddenArg::Dense => LayerSpec::Dense { out_dim: width },
    };
    vec![
        hidden,
        LayerSpec::Activation {
            kind: ActivationKind::Rectifier,
        },
        LayerSpec::Dense { out_dim: classes },
    ]
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let config = TrainConfig {
        global_learning_rate: args.lr,
        structured_learning_rate: args.structured_lr,
        decay_factor: args.decay,
        decay_interval: args.decay_interval,
        batch_size: args.batch,
        max_steps: args.steps,
        seed: args.seed,
    };
    config.validate()?;
    let (train, test) = load_datasets(args)?;
    let width = args.width.unwrap_or(train.dim());
    let specs = classifier_specs(args.hidden, train.dim(), width, args.rank, train.class_count());
    let mut net = Network::new(train.dim(), train.class_count(), specs, args.seed)?;
    let resolved = config.resolved(train.len());
    writeln!(out, "train config: {}", serde_json::to_string(&resolved)?).map_err(stdout_err)?;
    writeln!(out, "parameter_count: {}", net.parameter_count()).map_err(stdout_err)?;

    let mut io_result = Ok(());
    let history = nn::train_with(&mut net, &train, Some(&test), &resolved, |row| {
        if io_result.is_ok() {
            io_result = writeln!(
                out,
                "step {:>7}  train loss {:.6}  test error {:.4}",
                row.step, row.train_loss, row.eval_error
            );
        }
    })?;
    io_result.map_err(stdout_err)?;

    let final_error = match history.last() {
        Some(row) => row.eval_error,
        None => net.evaluate(&test)?,
    };
    create_parent(&args.checkpoint)?;
    nn::save_checkpoint(&args.checkpoint, &net, &resolved, args.steps)?;
    create_parent(&args.history)?;
    fs::write(&args.history, nn::history_csv(&history)).map_err(|e| Error::io(&args.history, e))?;
    writeln!(out, "final test error: {final_error}").map_err(stdout_err)?;
    writeln!(out, "parameter_count: {}", net.parameter_count()).map_err(stdout_err)?;
    Ok(EXIT_OK)
}

/// Parses the reconstruct input format: a line `n n`, then `n` rows of `n`
/// whitespace-separated numbers.
pub fn parse_dense_matrix(text: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let n = match dims[..] {
        [rows, cols] if rows == cols && rows > 0 => rows,
        _ => return Err(Error::Parse(format!("header must be \"n n\" with n > 0, got {header:?}"))),
    };
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {n} rows, found {i}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number {t:?} in row {}", i + 1))))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(Error::Parse(format!("row {} has {} entries, expected {n}", i + 1, row.len())));
        }
        for (j, v) in row.into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("more than {n} rows")));
    }
    Ok(m)
}

/// Inverse of [`parse_dense_matrix`], with round-trip float formatting.
pub fn format_dense_matrix(m: &Array2<f64>) -> String {
    let (rows, cols) = m.dim();
    let mut s = format!("{rows} {cols}\n");
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

pub fn cmd_reconstruct(args: &ReconstructArgs, out: &mut dyn Write) -> Result<i32> {
    if !(args.rel_tol > 0.0 && args.rel_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("rel_tol must lie in (0, 1), got {}", args.rel_tol)));
    }
    let text = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let m = parse_dense_matrix(&text)?;
    let gen = extract_generators(m.view(), args.rel_tol)?;
    let transform = ToeplitzLike::from_generator_pair(&gen)?;
    let back = transform.to_dense();
    let scale = frobenius(m.view());
    let diff = frobenius((&back - &m).view());
    let residual = if scale > 0.0 { diff / scale } else { diff };

    let path = args.out.clone().unwrap_or_else(|| {
        let mut p = args.input.clone().into_os_string();
        p.push(".generators.json");
        PathBuf::from(p)
    });
    create_parent(&path)?;
    fs::write(&path, serde_json::to_string_pretty(&transform.to_record())?).map_err(|e| Error::io(&path, e))?;

    writeln!(out, "n: {}", m.nrows()).map_err(stdout_err)?;
    writeln!(out, "displacement rank: {}", gen.rank()).map_err(stdout_err)?;
    writeln!(out, "generators: {} (r = {})", path.display(), transform.r()).map_err(stdout_err)?;
    writeln!(out, "relative residual: {residual:.3e}").map_err(stdout_err)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn matrix_text_round_trips() {
        let m = Array2::from_shape_fn((3, 3), |(i, j)| (i as f64 - 0.3 * j as f64) / 7.0);
        assert_eq!(parse_dense_matrix(&format_dense_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn malformed_matrix_files_are_rejected() {
        for bad in ["", "2 3\n1 2 3\n4 5 6\n", "2 2\n1 2\n", "2 2\n1 2\n3\n", "2 2\n1 x\n3 4\n", "1 1\n1\n2\n"] {
            assert!(matches!(parse_dense_matrix(bad), Err(Error::Parse(_))), "{bad:?}");
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["ldr", "bench", "--bogus"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["ldr", "bench", "--kinds", "square"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["ldr"], &mut out, &mut err), EXIT_USAGE);
    }

    #[test]
    fn config_is_logged_first() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(["ldr", "verify", "--draws", "2"], &mut out, &mut err);
        assert_eq!(code, EXIT_OK);
        let text = String::from_utf8(out).unwrap();
        let first = text.lines().next().unwrap();
        let json: serde_json::Value = serde_json::from_str(first.strip_prefix("config: ").unwrap()).unwrap();
        assert_eq!(json["subcommand"], "verify");
        assert_eq!(json["draws"], 2);
    }
}
