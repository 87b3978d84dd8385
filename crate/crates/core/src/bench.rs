//! Timing harness: dense vs circulant vs Toeplitz-like products and
//! gradients across dimension, displacement rank and batch size.
//!
//! Three scenarios are timed:
//!
//! * `inference`: `b` single-vector products, reported per instance;
//! * `forward_minibatch`: one product with an `n × b` batch;
//! * `gradient_minibatch`: parameter gradients for an `n × b` batch.
//!
//! Structured kinds recompute their parameter spectra on every call, so the
//! recorded FFT counts are the uncached budgets. Timings are medians over
//! `trials` runs after `warmup` runs on the monotonic clock.

use std::fmt;
use std::hint::black_box;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circulant::{circ_matvec, circulant_gradient};
use crate::fft::FftAudit;
use crate::toeplitz_like::ToeplitzLike;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "scenario,kind,n,r,b,median_ns,p10_ns,p90_ns,fft_count,speedup_vs_dense";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Inference,
    ForwardMinibatch,
    GradientMinibatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Dense,
    Circulant,
    ToeplitzLike,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Inference, Scenario::ForwardMinibatch, Scenario::GradientMinibatch];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Inference => "inference",
            Scenario::ForwardMinibatch => "forward_minibatch",
            Scenario::GradientMinibatch => "gradient_minibatch",
        }
    }
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Dense, Kind::Circulant, Kind::ToeplitzLike];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Dense => "dense",
            Kind::Circulant => "circulant",
            Kind::ToeplitzLike => "toeplitz_like",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {s:?}")))
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown kind {s:?}")))
    }
}

/// One timed configuration. Dense and circulant rows carry `r = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub scenario: Scenario,
    pub kind: Kind,
    pub n: usize,
    pub r: usize,
    pub b: usize,
    pub median_ns: f64,
    pub p10_ns: f64,
    pub p90_ns: f64,
    pub fft_count: u64,
    pub speedup_vs_dense: Option<f64>,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        let speedup = self.speedup_vs_dense.map(|s| format!("{s:.4}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.0},{:.0},{:.0},{},{}",
            self.scenario, self.kind, self.n, self.r, self.b, self.median_ns, self.p10_ns, self.p90_ns, self.fft_count, speedup
        )
    }
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// How the dense baseline multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenseMode {
    SingleThreaded,
    /// Row blocks split across this many threads.
    MultiThreaded(usize),
}

impl DenseMode {
    /// Multi-threaded mode with the thread count capped by `LDR_THREADS`.
    pub fn multi_threaded_from_env() -> DenseMode {
        let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let cap = std::env::var("LDR_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(available);
        DenseMode::MultiThreaded(cap.min(available).max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
    pub dense_mode: DenseMode,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            trials: 15,
            warmup: 3,
            seed: 0,
            dense_mode: DenseMode::SingleThreaded,
        }
    }
}

impl BenchOptions {
    fn validate(&self) -> Result<()> {
        if self.trials < 5 || self.warmup < 1 {
            return Err(Error::InvalidArgument(format!(
                "need at least 5 trials and 1 warmup run, got {} and {}",
                self.trials, self.warmup
            )));
        }
        Ok(())
    }
}

/// Machine description written next to benchmark CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub cpu_model: String,
    pub available_threads: usize,
    pub dense_mode: DenseMode,
    pub trials: usize,
    pub warmup: usize,
    pub seed: u64,
    pub dense_kernel: String,
}

impl BenchMetadata {
    pub fn collect(opts: &BenchOptions) -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split_once(':'))
                    .map(|(_, v)| v.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        BenchMetadata {
            cpu_model,
            available_threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            dense_mode: opts.dense_mode,
            trials: opts.trials,
            warmup: opts.warmup,
            seed: opts.seed,
            dense_kernel: "ndarray/matrixmultiply blocked GEMM, f64".into(),
        }
    }
}

/// Writes `records` as CSV to `path` and the metadata as JSON to
/// `path` with `.meta.json` appended.
pub fn write_csv(path: impl AsRef<Path>, records: &[BenchRecord], meta: &BenchMetadata) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_csv(records)).map_err(|e| Error::io(path, e))?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    let meta_path = std::path::PathBuf::from(meta_path);
    std::fs::write(&meta_path, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&meta_path, e))
}

/// Parameters of one benchmarked operator.
enum Operand {
    Dense(Array2<f64>),
    Circulant(Vec<f64>),
    ToeplitzLike(ToeplitzLike),
}

impl Operand {
    fn random(kind: Kind, n: usize, r: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(match kind {
            Kind::Dense => Operand::Dense(random_matrix(rng, n, n)),
            Kind::Circulant => Operand::Circulant((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()),
            Kind::ToeplitzLike => Operand::ToeplitzLike(ToeplitzLike::random(n, r, 1.0, rng)?),
        })
    }

    fn forward(&self, x: ArrayView2<f64>, mode: DenseMode) -> Result<Array2<f64>> {
        match self {
            Operand::Dense(w) => Ok(dense_product(w.view(), x, mode)),
            Operand::Circulant(v) => circ_matvec(v, x),
            Operand::ToeplitzLike(t) => t.fast_multiply(x),
        }
    }

    /// Gradient of `⟨Z, M X⟩` with respect to the parameters.
    fn gradient(&self, x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<usize> {
        Ok(match self {
            Operand::Dense(_) => black_box(z.dot(&x.t())).len(),
            Operand::Circulant(_) => black_box(circulant_gradient(x, z)?).len(),
            Operand::ToeplitzLike(t) => black_box(t.fast_gradients(x, z)?).dg.len(),
        })
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// `W X`, optionally with row blocks on scoped threads.
pub fn dense_product(w: ArrayView2<f64>, x: ArrayView2<f64>, mode: DenseMode) -> Array2<f64> {
    match mode {
        DenseMode::SingleThreaded | DenseMode::MultiThreaded(0 | 1) => w.dot(&x),
        DenseMode::MultiThreaded(threads) => {
            let mut out = Array2::zeros((w.nrows(), x.ncols()));
            let rows = w.nrows().div_ceil(threads).max(1);
            std::thread::scope(|s| {
                for (wc, mut oc) in w.axis_chunks_iter(Axis(0), rows).zip(out.axis_chunks_iter_mut(Axis(0), rows)) {
                    s.spawn(move || oc.assign(&wc.dot(&x)));
                }
            });
            out
        }
    }
}

/// Sorted samples → `(p10, median, p90)` by nearest rank.
fn percentiles(mut samples: Vec<f64>) -> (f64, f64, f64) {
    samples.sort_by(f64::total_cmp);
    let at = |p: f64| samples[((samples.len() - 1) as f64 * p).round() as usize];
    (at(0.1), at(0.5), at(0.9))
}

fn time_prepared(
    op: &Operand,
    scenario: Scenario,
    kind: Kind,
    n: usize,
    r: usize,
    b: usize,
    opts: &BenchOptions,
) -> Result<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_0f_1a7e);
    let x = random_matrix(&mut rng, n, b);
    let z = random_matrix(&mut rng, n, b);
    let columns: Vec<Array2<f64>> = match scenario {
        Scenario::Inference => (0..b).map(|j| x.slice(ndarray::s![.., j..j + 1]).to_owned()).collect(),
        _ => Vec::new(),
    };
    let run = || -> Result<()> {
        match scenario {
            Scenario::Inference => {
                for c in &columns {
                    black_box(op.forward(c.view(), opts.dense_mode)?);
                }
            }
            Scenario::ForwardMinibatch => {
                black_box(op.forward(x.view(), opts.dense_mode)?);
            }
            Scenario::GradientMinibatch => {
                black_box(op.gradient(x.view(), z.view())?);
            }
        }
        Ok(())
    };
    let per_call = if scenario == Scenario::Inference { b as f64 } else { 1.0 };

    let audit = FftAudit::begin();
    run()?;
    let fft_count = audit.count() / per_call as u64;
    for _ in 1..opts.warmup {
        run()?;
    }
    let mut samples = Vec::with_capacity(opts.trials);
    for _ in 0..opts.trials {
        let start = Instant::now();
        run()?;
        samples.push(start.elapsed().as_nanos() as f64 / per_call);
    }
    let (p10_ns, median_ns, p90_ns) = percentiles(samples);
    Ok(BenchRecord {
        scenario,
        kind,
        n,
        r: if kind == Kind::ToeplitzLike { r } else { 0 },
        b,
        median_ns,
        p10_ns,
        p90_ns,
        fft_count,
        speedup_vs_dense: None,
    })
}

/// Times one configuration with inputs drawn from `opts.seed`.
pub fn time_scenario(scenario: Scenario, kind: Kind, n: usize, r: usize, b: usize, opts: &BenchOptions) -> Result<BenchRecord> {
    opts.validate()?;
    check_shape(kind, n, r, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let op = Operand::random(kind, n, r, &mut rng)?;
    time_prepared(&op, scenario, kind, n, r, b, opts)
}

fn check_shape(kind: Kind, n: usize, r: usize, b: usize) -> Result<()> {
    if n == 0 || b == 0 {
        return Err(Error::InvalidArgument("n and b must be positive".into()));
    }
    if kind == Kind::ToeplitzLike && (r == 0 || r > n) {
        return Err(Error::InvalidArgument(format!("rank {r} must lie in 1..={n}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenarios: Vec<Scenario>,
    pub kinds: Vec<Kind>,
    pub ns: Vec<usize>,
    /// Displacement ranks; only Toeplitz-like rows vary over these.
    pub rs: Vec<usize>,
    pub bs: Vec<usize>,
    pub options: BenchOptions,
}

impl SweepConfig {
    /// Number of records [`scaling_sweep`] produces.
    pub fn record_count(&self) -> usize {
        let per_kind: usize = self
            .kinds
            .iter()
            .map(|&k| if k == Kind::ToeplitzLike { self.rs.len() } else { 1 })
            .sum();
        self.scenarios.len() * self.ns.len() * self.bs.len() * per_kind
    }
}

/// Times every scenario × kind × n × r × b combination. Dense operands are
/// built once per `n` and dropped before the next size.
///
/// `progress` sees each record as it is produced (speedups are filled in
/// afterwards).
pub fn scaling_sweep(config: &SweepConfig, mut progress: impl FnMut(&BenchRecord)) -> Result<Vec<BenchRecord>> {
    config.options.validate()?;
    if config.ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n values must be strictly ascending".into()));
    }
    let mut records = Vec::with_capacity(config.record_count());
    for &n in &config.ns {
        for &kind in &config.kinds {
            let ranks: Vec<usize> = if kind == Kind::ToeplitzLike { config.rs.clone() } else { vec![0] };
            for r in ranks {
                check_shape(kind, n, r, 1)?;
                let mut rng = ChaCha8Rng::seed_from_u64(config.options.seed);
                let op = Operand::random(kind, n, r, &mut rng)?;
                for &scenario in &config.scenarios {
                    for &b in &config.bs {
                        check_shape(kind, n, r, b)?;
                        let rec = time_prepared(&op, scenario, kind, n, r, b, &config.options)?;
                        progress(&rec);
                        records.push(rec);
                    }
                }
            }
        }
    }
    fill_speedups(&mut records);
    Ok(records)
}

/// Sets `speedup_vs_dense = dense median / median` from the dense record of
/// the same scenario, n and b.
pub fn fill_speedups(records: &mut [BenchRecord]) {
    let dense: Vec<(Scenario, usize, usize, f64)> = records
        .iter()
        .filter(|r| r.kind == Kind::Dense)
        .map(|r| (r.scenario, r.n, r.b, r.median_ns))
        .collect();
    for rec in records.iter_mut() {
        rec.speedup_vs_dense = dense
            .iter()
            .find(|d| (d.0, d.1, d.2) == (rec.scenario, rec.n, rec.b))
            .map(|d| d.3 / rec.median_ns);
    }
}

/// Least-squares slope of `log t` against `log n`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(n, t)| !(n > 0.0 && t > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive points".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all n values are equal".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FftBudgetAudit {
    pub n: usize,
    pub r: usize,
    pub b: usize,
    pub forward_count: u64,
    pub gradient_count: u64,
    pub cached_forward_count: u64,
    pub expected_forward: u64,
    pub expected_gradient: u64,
    pub expected_cached_forward: u64,
    pub pass: bool,
}

/// Counts FFTs of one forward multiply and one gradient evaluation with
/// fresh spectra, plus one forward multiply with cached spectra.
pub fn fft_budget_audit(n: usize, r: usize, b: usize, seed: u64) -> Result<FftBudgetAudit> {
    check_shape(Kind::ToeplitzLike, n, r, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = ToeplitzLike::random(n, r, 1.0, &mut rng)?;
    let x = random_matrix(&mut rng, n, b);
    let z = random_matrix(&mut rng, n, b);

    let audit = FftAudit::begin();
    t.fast_multiply(x.view())?;
    let forward_count = audit.count();
    let audit = FftAudit::begin();
    t.fast_gradients(x.view(), z.view())?;
    let gradient_count = audit.count();
    t.cache_spectra();
    let audit = FftAudit::begin();
    t.fast_multiply(x.view())?;
    let cached_forward_count = audit.count();

    let (r64, b64) = (r as u64, b as u64);
    let expected_forward = 2 * (r64 * b64 + b64 + r64);
    let expected_gradient = 4 * b64 * r64 + 4 * r64 + 2 * b64;
    let expected_cached_forward = 2 * (r64 * b64 + b64);
    Ok(FftBudgetAudit {
        n,
        r,
        b,
        forward_count,
        gradient_count,
        cached_forward_count,
        expected_forward,
        expected_gradient,
        expected_cached_forward,
        pass: forward_count == expected_forward
            && gradient_count == expected_gradient
            && cached_forward_count == expected_cached_forward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> BenchOptions {
        BenchOptions {
            trials: 5,
            warmup: 1,
            ..BenchOptions::default()
        }
    }

    #[test]
    fn dense_record_has_no_ffts() {
        let rec = time_scenario(Scenario::Inference, Kind::Dense, 64, 0, 1, &quick()).unwrap();
        assert_eq!(rec.fft_count, 0);
        assert_eq!(rec.r, 0);
        assert!(rec.p10_ns <= rec.median_ns && rec.median_ns <= rec.p90_ns);
    }

    #[test]
    fn toeplitz_inference_fft_count() {
        let rec = time_scenario(Scenario::Inference, Kind::ToeplitzLike, 64, 2, 1, &quick()).unwrap();
        assert_eq!(rec.fft_count, 10);
        let again = time_scenario(Scenario::Inference, Kind::ToeplitzLike, 64, 2, 1, &quick()).unwrap();
        assert_eq!(again.fft_count, rec.fft_count);
        let per_instance = time_scenario(Scenario::Inference, Kind::ToeplitzLike, 64, 2, 4, &quick()).unwrap();
        assert_eq!(per_instance.fft_count, 10);
        let grad = time_scenario(Scenario::GradientMinibatch, Kind::ToeplitzLike, 64, 2, 4, &quick()).unwrap();
        assert_eq!(grad.fft_count, 4 * 4 * 2 + 4 * 2 + 2 * 4);
    }

    #[test]
    fn circulant_rows_are_labelled_rank_zero() {
        let rec = time_scenario(Scenario::ForwardMinibatch, Kind::Circulant, 64, 3, 2, &quick()).unwrap();
        assert_eq!(rec.r, 0);
        assert_eq!(rec.fft_count, 1 + 2 * 2);
    }

    #[test]
    fn rejects_too_few_trials() {
        let opts = BenchOptions {
            trials: 4,
            ..BenchOptions::default()
        };
        assert!(time_scenario(Scenario::Inference, Kind::Dense, 8, 0, 1, &opts).is_err());
    }

    #[test]
    fn single_point_sweep() {
        let config = SweepConfig {
            scenarios: Scenario::ALL.to_vec(),
            kinds: Kind::ALL.to_vec(),
            ns: vec![64],
            rs: vec![2],
            bs: vec![1],
            options: quick(),
        };
        let mut seen = 0;
        let recs = scaling_sweep(&config, |_| seen += 1).unwrap();
        assert_eq!(recs.len(), 9);
        assert_eq!(seen, 9);
        assert_eq!(config.record_count(), 9);
        for r in &recs {
            let s = r.speedup_vs_dense.unwrap();
            if r.kind == Kind::Dense {
                assert_eq!(s, 1.0);
            }
        }
        let csv = to_csv(&recs);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.lines().all(|l| l.split(',').count() == 10));
    }

    #[test]
    fn sweep_record_count_matches_cross_product() {
        let config = SweepConfig {
            scenarios: vec![Scenario::Inference, Scenario::GradientMinibatch],
            kinds: Kind::ALL.to_vec(),
            ns: vec![64, 128],
            rs: vec![1, 2, 4],
            bs: vec![1, 3],
            options: quick(),
        };
        assert_eq!(scaling_sweep(&config, |_| {}).unwrap().len(), config.record_count());
        assert_eq!(config.record_count(), 2 * 2 * 2 * (1 + 1 + 3));
    }

    #[test]
    fn multi_threaded_dense_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_matrix(&mut rng, 37, 20);
        let x = random_matrix(&mut rng, 20, 3);
        let single = dense_product(w.view(), x.view(), DenseMode::SingleThreaded);
        let multi = dense_product(w.view(), x.view(), DenseMode::MultiThreaded(4));
        assert!(crate::linalg::max_abs((single - multi).view()) < 1e-12);
    }

    #[test]
    fn slope_of_power_laws() {
        let quad: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0].iter().map(|&n| (n, 3.0 * n * n)).collect();
        assert!((fit_loglog_slope(&quad).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<(f64, f64)> = [10.0, 100.0].iter().map(|&n| (n, n)).collect();
        assert!((fit_loglog_slope(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn budget_audit_examples() {
        let a = fft_budget_audit(16, 1, 1, 0).unwrap();
        assert_eq!((a.forward_count, a.gradient_count), (6, 10));
        assert!(a.pass);
        let a = fft_budget_audit(32, 3, 8, 0).unwrap();
        assert_eq!((a.expected_forward, a.expected_gradient), (70, 124));
        assert_eq!(a.cached_forward_count, 2 * (24 + 8));
        assert!(a.pass);
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        for k in Kind::ALL {
            assert_eq!(k.name().parse::<Kind>().unwrap(), k);
        }
        assert!("sparse".parse::<Kind>().is_err());
    }

    #[test]
    fn metadata_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        let opts = quick();
        write_csv(&path, &[], &BenchMetadata::collect(&opts)).unwrap();
        let meta: BenchMetadata =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.csv.meta.json")).unwrap()).unwrap();
        assert_eq!(meta.trials, 5);
        assert_eq!(std::fs::read_to_string(&path).unwrap().trim(), CSV_HEADER);
    }
}
