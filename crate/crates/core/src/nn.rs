//! A small feedforward classifier with dense, low-rank, circulant and
//! Toeplitz-like layers, trained by minibatch SGD on softmax cross-entropy.
//!
//! Inputs are `d × b` matrices with one example per column. Every layer
//! except activations carries a bias. Structured layers (circulant and
//! Toeplitz-like) get their own learning rate; everything else, including
//! their biases, uses the global one.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circulant::{circulant_gradient, Spectrum};
use crate::data::{minibatches, Dataset};
use crate::toeplitz_like::{GradientPair, RectangularTransform};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Rectifier,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { out_dim: usize },
    /// `W = G Hᵀ` with `rank` columns in each factor.
    LowRank { out_dim: usize, rank: usize },
    /// Square circulant `Z₁(v)`.
    Circulant { n: usize },
    /// `m × n` Toeplitz-like map with displacement rank `r` per block.
    ToeplitzLike { m: usize, n: usize, r: usize },
    Activation { kind: ActivationKind },
}

impl LayerSpec {
    fn is_structured(&self) -> bool {
        matches!(self, LayerSpec::Circulant { .. } | LayerSpec::ToeplitzLike { .. })
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Dense { w: Array2<f64>, b: Array1<f64> },
    LowRank { g: Array2<f64>, h: Array2<f64>, b: Array1<f64> },
    Circulant { v: Vec<f64>, b: Array1<f64> },
    ToeplitzLike { t: RectangularTransform, b: Array1<f64> },
    Activation(ActivationKind),
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerGradient {
    Dense { dw: Array2<f64>, db: Array1<f64> },
    LowRank { dg: Array2<f64>, dh: Array2<f64>, db: Array1<f64> },
    Circulant { dv: Vec<f64>, db: Array1<f64> },
    ToeplitzLike { blocks: Vec<GradientPair>, db: Array1<f64> },
    None,
}

impl LayerGradient {
    fn push_flat(&self, out: &mut Vec<f64>) {
        match self {
            LayerGradient::Dense { dw, db } => {
                out.extend(dw.iter());
                out.extend(db.iter());
            }
            LayerGradient::LowRank { dg, dh, db } => {
                out.extend(dg.iter());
                out.extend(dh.iter());
                out.extend(db.iter());
            }
            LayerGradient::Circulant { dv, db } => {
                out.extend(dv.iter());
                out.extend(db.iter());
            }
            LayerGradient::ToeplitzLike { blocks, db } => {
                for p in blocks {
                    out.extend(p.dg.iter());
                    out.extend(p.dh.iter());
                }
                out.extend(db.iter());
            }
            LayerGradient::None => {}
        }
    }
}

/// Per-layer gradients, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    /// All gradient entries in the same order as [`Network::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            g.push_flat(&mut out);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub global_learning_rate: f64,
    pub structured_learning_rate: f64,
    pub decay_factor: f64,
    /// Steps between decays; `None` means one epoch.
    pub decay_interval: Option<usize>,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            global_learning_rate: 0.002,
            structured_learning_rate: 0.0005,
            decay_factor: 0.1,
            decay_interval: None,
            batch_size: 50,
            max_steps: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.into()));
        if !(self.global_learning_rate > 0.0 && self.structured_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay factor must lie in (0, 1]");
        }
        if self.decay_interval == Some(0) {
            return bad("decay interval must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    /// Fills in the default decay interval (one epoch of `examples`).
    pub fn resolved(&self, examples: usize) -> TrainConfig {
        let mut out = self.clone();
        out.decay_interval = Some(self.decay_interval.unwrap_or_else(|| examples.div_ceil(self.batch_size).max(1)));
        out
    }

    /// Learning rate at `step` for a structured or ordinary parameter.
    pub fn learning_rate(&self, structured: bool, step: usize) -> f64 {
        let base = if structured {
            self.structured_learning_rate
        } else {
            self.global_learning_rate
        };
        let interval = self.decay_interval.unwrap_or(usize::MAX).max(1);
        base * self.decay_factor.powi((step / interval) as i32)
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    input_dim: usize,
    class_count: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
}

/// Checks layer dimensions and returns each layer's `(in, out)`.
fn layer_dims(input_dim: usize, class_count: usize, specs: &[LayerSpec]) -> Result<Vec<(usize, usize)>> {
    if input_dim == 0 || class_count == 0 {
        return Err(Error::InvalidArgument("input dimension and class count must be positive".into()));
    }
    let mut cur = input_dim;
    let mut dims = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let mismatch = |want: usize| {
            Err(Error::DimensionMismatch(format!(
                "layer {k} ({spec:?}) expects input {want}, previous output is {cur}"
            )))
        };
        let out = match *spec {
            LayerSpec::Dense { out_dim } => out_dim,
            LayerSpec::LowRank { out_dim, rank } => {
                if rank == 0 || rank > cur.min(out_dim) {
                    return Err(Error::InvalidArgument(format!(
                        "layer {k}: low-rank rank {rank} must lie in 1..={}",
                        cur.min(out_dim)
                    )));
                }
                out_dim
            }
            LayerSpec::Circulant { n } => {
                if n != cur {
                    return mismatch(n);
                }
                n
            }
            LayerSpec::ToeplitzLike { m, n, r } => {
                if n != cur {
                    return mismatch(n);
                }
                RectangularTransform::block_count(m, n)?;
                if r == 0 || r > n {
                    return Err(Error::InvalidArgument(format!("layer {k}: rank {r} must lie in 1..={n}")));
                }
                m
            }
            LayerSpec::Activation { .. } => cur,
        };
        if out == 0 {
            return Err(Error::InvalidArgument(format!("layer {k} has zero output dimension")));
        }
        dims.push((cur, out));
        cur = out;
    }
    if cur != class_count {
        return Err(Error::DimensionMismatch(format!(
            "network output dimension {cur} does not match {class_count} classes"
        )));
    }
    Ok(dims)
}

fn normal_matrix(rng: &mut ChaCha8Rng, shape: (usize, usize), std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("standard deviation is finite and positive");
    Array2::from_shape_simple_fn(shape, || dist.sample(rng))
}

impl Network {
    /// Randomly initialised network. Weights feeding a rectifier use gain
    /// `√2`, others gain 1, scaled so pre-activations have variance
    /// `gain² · E[x²]`; biases start at zero.
    pub fn new(input_dim: usize, class_count: usize, specs: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let dims = layer_dims(input_dim, class_count, &specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        for (k, (spec, &(din, dout))) in specs.iter().zip(&dims).enumerate() {
            let gain = match specs.get(k + 1) {
                Some(LayerSpec::Activation { kind: ActivationKind::Rectifier }) => 2f64.sqrt(),
                _ => 1.0,
            };
            let bias = Array1::zeros(dout);
            let layer = match *spec {
                LayerSpec::Dense { .. } => Layer::Dense {
                    w: normal_matrix(&mut rng, (dout, din), gain / (din as f64).sqrt()),
                    b: bias,
                },
                LayerSpec::LowRank { rank, .. } => {
                    // W_ij sums `rank` products of two factor entries.
                    let std = (gain * gain / (din * rank) as f64).powf(0.25);
                    Layer::LowRank {
                        g: normal_matrix(&mut rng, (dout, rank), std),
                        h: normal_matrix(&mut rng, (din, rank), std),
                        b: bias,
                    }
                }
                LayerSpec::Circulant { n } => Layer::Circulant {
                    v: normal_matrix(&mut rng, (n, 1), gain / (n as f64).sqrt()).into_raw_vec_and_offset().0,
                    b: bias,
                },
                LayerSpec::ToeplitzLike { m, n, r } => Layer::ToeplitzLike {
                    t: RectangularTransform::random(m, n, r, gain, &mut rng)?,
                    b: bias,
                },
                LayerSpec::Activation { kind } => Layer::Activation(kind),
            };
            layers.push(layer);
        }
        Ok(Network {
            input_dim,
            class_count,
            specs,
            layers,
        })
    }

    /// Same architecture with every parameter set to zero.
    pub fn zeroed(input_dim: usize, class_count: usize, specs: Vec<LayerSpec>) -> Result<Self> {
        let mut net = Network::new(input_dim, class_count, specs, 0)?;
        let zeros = vec![0.0; net.parameter_count()];
        net.set_parameters(&zeros)?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense { w, b } => w.len() + b.len(),
                Layer::LowRank { g, h, b } => g.len() + h.len() + b.len(),
                Layer::Circulant { v, b } => v.len() + b.len(),
                Layer::ToeplitzLike { t, b } => t.parameter_count() + b.len(),
                Layer::Activation(_) => 0,
            })
            .sum()
    }

    /// All parameters, layer by layer; matrices row-major, generator blocks
    /// as `G` then `H`, biases last within a layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            match layer {
                Layer::Dense { w, b } => {
                    out.extend(w.iter());
                    out.extend(b.iter());
                }
                Layer::LowRank { g, h, b } => {
                    out.extend(g.iter());
                    out.extend(h.iter());
                    out.extend(b.iter());
                }
                Layer::Circulant { v, b } => {
                    out.extend(v.iter());
                    out.extend(b.iter());
                }
                Layer::ToeplitzLike { t, b } => {
                    for blk in t.inner() {
                        out.extend(blk.g().iter());
                        out.extend(blk.h().iter());
                    }
                    out.extend(b.iter());
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    /// Inverse of [`Network::parameters`].
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut src = values.iter().copied();
        let mut fill = |dst: &mut dyn Iterator<Item = &mut f64>| {
            for d in dst {
                *d = src.next().expect("length checked above");
            }
        };
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { w, b } => {
                    fill(&mut w.iter_mut());
                    fill(&mut b.iter_mut());
                }
                Layer::LowRank { g, h, b } => {
                    fill(&mut g.iter_mut());
                    fill(&mut h.iter_mut());
                    fill(&mut b.iter_mut());
                }
                Layer::Circulant { v, b } => {
                    fill(&mut v.iter_mut());
                    fill(&mut b.iter_mut());
                }
                Layer::ToeplitzLike { t, b } => {
                    for blk in t.inner_mut() {
                        let (g, h) = blk.generators_mut();
                        fill(&mut g.iter_mut());
                        fill(&mut h.iter_mut());
                    }
                    fill(&mut b.iter_mut());
                }
                Layer::Activation(_) => {}
            }
        }
        Ok(())
    }

    /// Precomputes generator spectra of Toeplitz-like layers so a forward
    /// and backward pass over one minibatch share them.
    pub fn cache_spectra(&mut self) {
        for layer in &mut self.layers {
            if let Layer::ToeplitzLike { t, .. } = layer {
                t.cache_spectra();
            }
        }
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.nrows() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "network input dimension is {}, got {} rows",
                self.input_dim,
                x.nrows()
            )));
        }
        Ok(())
    }

    /// Inputs to every layer followed by the logits.
    fn trace(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(x)?;
        let mut acts = vec![x.to_owned()];
        for layer in &self.layers {
            let input = acts.last().expect("trace starts with the input").view();
            let out = match layer {
                Layer::Dense { w, b } => w.dot(&input) + b.view().insert_axis(Axis(1)),
                Layer::LowRank { g, h, b } => g.dot(&h.t().dot(&input)) + b.view().insert_axis(Axis(1)),
                Layer::Circulant { v, b } => Spectrum::circulant(v).matvec(input)? + b.view().insert_axis(Axis(1)),
                Layer::ToeplitzLike { t, b } => t.forward(input)? + b.view().insert_axis(Axis(1)),
                Layer::Activation(ActivationKind::Rectifier) => input.mapv(|v| v.max(0.0)),
                Layer::Activation(ActivationKind::Identity) => input.to_owned(),
            };
            acts.push(out);
        }
        Ok(acts)
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.trace(x)?.pop().expect("trace is never empty"))
    }

    /// Class probabilities, one column per example.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(softmax(self.logits(x)?.view()))
    }

    /// Mean cross-entropy over the batch and its gradient for every layer.
    pub fn loss_and_gradients(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.check_labels(x, labels)?;
        let acts = self.trace(x)?;
        let logits = acts.last().expect("trace is never empty");
        let loss = cross_entropy(logits.view(), labels);
        let b = labels.len() as f64;
        let mut delta = softmax(logits.view());
        for (mut col, &l) in delta.columns_mut().into_iter().zip(labels) {
            col[l - 1] -= 1.0;
        }
        delta /= b;

        let mut grads = vec![LayerGradient::None; self.layers.len()];
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = acts[k].view();
            let need_input_grad = k > 0;
            let db = || delta.sum_axis(Axis(1));
            let (grad, next) = match layer {
                Layer::Dense { w, .. } => {
                    let g = LayerGradient::Dense {
                        dw: delta.dot(&input.t()),
                        db: db(),
                    };
                    (g, need_input_grad.then(|| w.t().dot(&delta)))
                }
                Layer::LowRank { g, h, .. } => {
                    let u = h.t().dot(&input);
                    let du = g.t().dot(&delta);
                    let lg = LayerGradient::LowRank {
                        dg: delta.dot(&u.t()),
                        dh: input.dot(&du.t()),
                        db: db(),
                    };
                    (lg, need_input_grad.then(|| h.dot(&du)))
                }
                Layer::Circulant { v, .. } => {
                    let g = LayerGradient::Circulant {
                        dv: circulant_gradient(input, delta.view())?,
                        db: db(),
                    };
                    let next = if need_input_grad {
                        Some(Spectrum::circulant(v).transpose_matvec(delta.view())?)
                    } else {
                        None
                    };
                    (g, next)
                }
                Layer::ToeplitzLike { t, .. } => {
                    let g = LayerGradient::ToeplitzLike {
                        blocks: t.gradients(input, delta.view())?,
                        db: db(),
                    };
                    let next = if need_input_grad {
                        Some(t.transpose(delta.view())?)
                    } else {
                        None
                    };
                    (g, next)
                }
                Layer::Activation(ActivationKind::Rectifier) => {
                    let mut d = delta.clone();
                    d.zip_mut_with(&input, |dv, &xv| {
                        if xv <= 0.0 {
                            *dv = 0.0;
                        }
                    });
                    (LayerGradient::None, Some(d))
                }
                Layer::Activation(ActivationKind::Identity) => (LayerGradient::None, Some(delta.clone())),
            };
            grads[k] = grad;
            match next {
                Some(d) => delta = d,
                None => break,
            }
        }
        Ok((loss, Gradients { layers: grads }))
    }

    fn check_labels(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        if x.ncols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} examples but {} labels",
                x.ncols(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > self.class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 1..={}",
                self.class_count
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        self.check_labels(x, labels)?;
        Ok(cross_entropy(self.logits(x)?.view(), labels))
    }

    /// One SGD update at `step`. Drops cached spectra of updated layers.
    pub fn sgd_step(&mut self, grads: &Gradients, config: &TrainConfig, step: usize) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch("gradient list does not match layers".into()));
        }
        let global = config.learning_rate(false, step);
        for ((layer, grad), spec) in self.layers.iter_mut().zip(&grads.layers).zip(&self.specs) {
            let lr = config.learning_rate(spec.is_structured(), step);
            let shape_err = || Error::DimensionMismatch("gradient shape does not match layer".into());
            match (layer, grad) {
                (Layer::Dense { w, b }, LayerGradient::Dense { dw, db }) => {
                    check_same(w.dim(), dw.dim()).ok_or_else(shape_err)?;
                    w.scaled_add(-lr, dw);
                    descend_bias(b, db, global)?;
                }
                (Layer::LowRank { g, h, b }, LayerGradient::LowRank { dg, dh, db }) => {
                    check_same(g.dim(), dg.dim()).ok_or_else(shape_err)?;
                    check_same(h.dim(), dh.dim()).ok_or_else(shape_err)?;
                    g.scaled_add(-lr, dg);
                    h.scaled_add(-lr, dh);
                    descend_bias(b, db, global)?;
                }
                (Layer::Circulant { v, b }, LayerGradient::Circulant { dv, db }) => {
                    check_same((v.len(), 1), (dv.len(), 1)).ok_or_else(shape_err)?;
                    v.iter_mut().zip(dv).for_each(|(p, d)| *p -= lr * d);
                    descend_bias(b, db, global)?;
                }
                (Layer::ToeplitzLike { t, b }, LayerGradient::ToeplitzLike { blocks, db }) => {
                    if blocks.len() != t.inner().len() {
                        return Err(shape_err());
                    }
                    for (blk, gp) in t.inner_mut().iter_mut().zip(blocks) {
                        blk.descend(gp, lr)?;
                    }
                    descend_bias(b, db, global)?;
                }
                (Layer::Activation(_), LayerGradient::None) => {}
                _ => return Err(shape_err()),
            }
        }
        Ok(())
    }

    /// Predicted class (1-based) per column; ties go to the lowest class.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok(logits.columns().into_iter().map(|c| argmax(c.iter().copied()) + 1).collect())
    }

    /// Fraction of misclassified examples.
    pub fn evaluate(&self, ds: &Dataset) -> Result<f64> {
        const CHUNK: usize = 1000;
        let mut wrong = 0usize;
        for start in (0..ds.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(ds.len());
            let x = ds.inputs().slice_move(ndarray::s![.., start..end]);
            let pred = self.predict(x)?;
            wrong += pred.iter().zip(&ds.labels()[start..end]).filter(|(p, l)| p != l).count();
        }
        Ok(wrong as f64 / ds.len() as f64)
    }
}

fn check_same(a: (usize, usize), b: (usize, usize)) -> Option<()> {
    (a == b).then_some(())
}

fn descend_bias(b: &mut Array1<f64>, db: &Array1<f64>, lr: f64) -> Result<()> {
    if b.len() != db.len() {
        return Err(Error::DimensionMismatch("bias gradient length mismatch".into()));
    }
    b.scaled_add(-lr, db);
    Ok(())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Column-wise softmax, shifted by the column maximum.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut col in out.columns_mut() {
        let max = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        col.mapv_inplace(|v| (v - max).exp());
        let sum = col.sum();
        col /= sum;
    }
    out
}

/// Mean of `logsumexp(z) − z_label` over columns.
pub fn cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = logits
        .columns()
        .into_iter()
        .zip(labels)
        .map(|(col, &l)| {
            let max = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - col[l - 1]
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    pub train_loss: f64,
    pub eval_error: f64,
}

/// `step,train_loss,eval_error` with a header line.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("step,train_loss,eval_error\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.step, r.train_loss, r.eval_error));
    }
    out
}

/// Runs SGD for `config.max_steps` steps over reshuffled epochs of `train`.
///
/// After each epoch (and after the final, possibly partial one) a history
/// row is recorded with the mean minibatch loss of that epoch and the error
/// on `eval` (or on `train` when `eval` is `None`). `on_epoch` sees each row
/// as it is produced.
pub fn train_with(
    net: &mut Network,
    train: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&HistoryRow),
) -> Result<Vec<HistoryRow>> {
    config.validate()?;
    if train.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "dataset dimension {} vs network input {}",
            train.dim(),
            net.input_dim()
        )));
    }
    let config = config.resolved(train.len());
    let mut history = Vec::new();
    let mut step = 0;
    let mut epoch = 0u64;
    while step < config.max_steps {
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for batch in minibatches(train, config.batch_size, config.seed, epoch) {
            if step == config.max_steps {
                break;
            }
            net.cache_spectra();
            let (loss, grads) = net.loss_and_gradients(batch.inputs.view(), &batch.labels)?;
            net.sgd_step(&grads, &config, step)?;
            loss_sum += loss;
            batches += 1;
            step += 1;
        }
        let row = HistoryRow {
            step,
            train_loss: loss_sum / batches as f64,
            eval_error: net.evaluate(eval.unwrap_or(train))?,
        };
        on_epoch(&row);
        history.push(row);
        epoch += 1;
    }
    Ok(history)
}

pub fn train(net: &mut Network, train: &Dataset, eval: Option<&Dataset>, config: &TrainConfig) -> Result<Vec<HistoryRow>> {
    train_with(net, train, eval, config, |_| {})
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    input_dim: usize,
    class_count: usize,
    layers: Vec<LayerSpec>,
    config: TrainConfig,
    step: usize,
    parameter_count: usize,
}

/// Writes `u64 LE header length`, a JSON header (layer specs, config,
/// step), then every parameter as a little-endian `f64`.
pub fn save_checkpoint(path: impl AsRef<Path>, net: &Network, config: &TrainConfig, step: usize) -> Result<()> {
    let path = path.as_ref();
    let header = serde_json::to_vec(&CheckpointHeader {
        input_dim: net.input_dim,
        class_count: net.class_count,
        layers: net.specs.clone(),
        config: config.clone(),
        step,
        parameter_count: net.parameter_count(),
    })?;
    let mut bytes = Vec::with_capacity(8 + header.len() + 8 * net.parameter_count());
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header);
    for p in net.parameters() {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, TrainConfig, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let truncated = |needed: usize| Error::TruncatedFile {
        needed,
        available: bytes.len(),
    };
    let len_bytes: [u8; 8] = bytes.get(..8).ok_or_else(|| truncated(8))?.try_into().expect("eight bytes");
    let header_len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| Error::DimensionOverflow)?;
    let header_end = 8usize.checked_add(header_len).ok_or(Error::DimensionOverflow)?;
    let header: CheckpointHeader = serde_json::from_slice(bytes.get(8..header_end).ok_or_else(|| truncated(header_end))?)?;
    let mut net = Network::new(header.input_dim, header.class_count, header.layers, 0)?;
    if net.parameter_count() != header.parameter_count {
        return Err(Error::Parse("parameter count in header does not match architecture".into()));
    }
    let blob = &bytes[header_end..];
    if blob.len() != 8 * header.parameter_count {
        return Err(Error::Parse(format!(
            "parameter blob has {} bytes, expected {}",
            blob.len(),
            8 * header.parameter_count
        )));
    }
    let params: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight")))
        .collect();
    net.set_parameters(&params)?;
    Ok((net, header.config, header.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_separable;
    use crate::toeplitz_like::ToeplitzLike;
    use ndarray::array;
    use rand::Rng;

    fn relu() -> LayerSpec {
        LayerSpec::Activation {
            kind: ActivationKind::Rectifier,
        }
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn finite_difference_check(net: &Network, x: &Array2<f64>, labels: &[usize], tol: f64) {
        let (_, grads) = net.loss_and_gradients(x.view(), labels).unwrap();
        let analytic = grads.flatten();
        let params = net.parameters();
        assert_eq!(analytic.len(), params.len());
        let step = 1e-6;
        for i in 0..params.len() {
            let eval = |delta: f64| {
                let mut p = params.clone();
                p[i] += delta;
                let mut n = net.clone();
                n.set_parameters(&p).unwrap();
                n.loss(x.view(), labels).unwrap()
            };
            let fd = (eval(step) - eval(-step)) / (2.0 * step);
            let an = analytic[i];
            assert!(
                (fd - an).abs() <= tol * an.abs().max(1e-3),
                "parameter {i}: finite difference {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::zeroed(5, 4, vec![LayerSpec::Dense { out_dim: 6 }, relu(), LayerSpec::Dense { out_dim: 4 }]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = net.forward(rand_mat(&mut rng, 5, 3).view()).unwrap();
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn identity_dense_softmax() {
        let mut net = Network::new(2, 2, vec![LayerSpec::Dense { out_dim: 2 }], 0).unwrap();
        if let Layer::Dense { w, b } = &mut net.layers_mut()[0] {
            w.assign(&Array2::eye(2));
            b.fill(0.0);
        }
        let p = net.forward(array![[0.0], [0.0]].view()).unwrap();
        assert_eq!(p, array![[0.5], [0.5]]);
    }

    #[test]
    fn forward_matches_dense_oracle() {
        let specs = vec![
            LayerSpec::ToeplitzLike { m: 8, n: 4, r: 2 },
            relu(),
            LayerSpec::Circulant { n: 8 },
            LayerSpec::Activation { kind: ActivationKind::Identity },
            LayerSpec::LowRank { out_dim: 5, rank: 2 },
            relu(),
            LayerSpec::Dense { out_dim: 3 },
        ];
        let mut net = Network::new(4, 3, specs, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params: Vec<f64> = (0..net.parameter_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_parameters(&params).unwrap();
        let x = rand_mat(&mut rng, 4, 6);

        let mut h = x.clone();
        for layer in net.layers() {
            h = match layer {
                Layer::Dense { w, b } => w.dot(&h) + b.view().insert_axis(Axis(1)),
                Layer::LowRank { g, h: hh, b } => g.dot(&hh.t()).dot(&h) + b.view().insert_axis(Axis(1)),
                Layer::Circulant { v, b } => crate::circulant::dense_f_circulant(1.0, v).dot(&h) + b.view().insert_axis(Axis(1)),
                Layer::ToeplitzLike { t, b } => t.to_dense().dot(&h) + b.view().insert_axis(Axis(1)),
                Layer::Activation(ActivationKind::Rectifier) => h.mapv(|v| v.max(0.0)),
                Layer::Activation(ActivationKind::Identity) => h,
            };
        }
        let want = softmax(h.view());
        let got = net.forward(x.view()).unwrap();
        assert!(crate::linalg::rel_error(got.view(), want.view()) < 1e-10);
    }

    #[test]
    fn softmax_is_stable_and_normalised() {
        let logits = array![[1000.0, -1000.0, 0.0], [999.0, -1001.0, 0.0], [-1000.0, 1000.0, 0.0]];
        let p = softmax(logits.view());
        assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        for col in p.columns() {
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_limits() {
        let uniform = Array2::zeros((7, 4));
        assert!((cross_entropy(uniform.view(), &[1, 2, 3, 7]) - 7f64.ln()).abs() < 1e-14);
        let confident = array![[40.0, -40.0], [-40.0, 40.0]];
        assert!(cross_entropy(confident.view(), &[1, 2]) < 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences_all_layer_kinds() {
        let specs = vec![
            LayerSpec::ToeplitzLike { m: 12, n: 6, r: 2 },
            relu(),
            LayerSpec::Circulant { n: 12 },
            relu(),
            LayerSpec::LowRank { out_dim: 4, rank: 2 },
            LayerSpec::Activation { kind: ActivationKind::Identity },
            LayerSpec::ToeplitzLike { m: 2, n: 4, r: 1 },
            LayerSpec::Dense { out_dim: 3 },
        ];
        let net = Network::new(6, 3, specs, 3).unwrap();
        assert!(net.parameter_count() <= 200);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = rand_mat(&mut rng, 6, 5);
        finite_difference_check(&net, &x, &[1, 2, 3, 3, 1], 1e-4);
    }

    #[test]
    fn gradients_toeplitz_hidden_layer() {
        let specs = vec![LayerSpec::ToeplitzLike { m: 12, n: 12, r: 2 }, relu(), LayerSpec::Dense { out_dim: 3 }];
        let net = Network::new(12, 3, specs, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_mat(&mut rng, 12, 4);
        finite_difference_check(&net, &x, &[3, 1, 2, 1], 1e-4);
    }

    #[test]
    fn small_step_decreases_loss() {
        let specs = vec![LayerSpec::ToeplitzLike { m: 12, n: 12, r: 2 }, relu(), LayerSpec::Dense { out_dim: 3 }];
        let config = TrainConfig {
            global_learning_rate: 1e-4,
            structured_learning_rate: 1e-4,
            ..TrainConfig::default()
        };
        for seed in 0..20 {
            let mut net = Network::new(12, 3, specs.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = rand_mat(&mut rng, 12, 8);
            let labels: Vec<usize> = (0..8).map(|_| rng.random_range(1..=3)).collect();
            let (before, grads) = net.loss_and_gradients(x.view(), &labels).unwrap();
            net.sgd_step(&grads, &config, 0).unwrap();
            let after = net.loss(x.view(), &labels).unwrap();
            assert!(after < before, "seed {seed}: {after} >= {before}");
        }
    }

    #[test]
    fn learning_rate_schedule() {
        let config = TrainConfig {
            decay_interval: Some(100),
            ..TrainConfig::default()
        };
        assert_eq!(config.learning_rate(false, 0), 0.002);
        assert_eq!(config.learning_rate(true, 99), 0.0005);
        assert!((config.learning_rate(false, 100) - 0.0002).abs() < 1e-18);
        assert!((config.learning_rate(true, 250) - 0.000005).abs() < 1e-18);
        assert_eq!(TrainConfig::default().resolved(1001).decay_interval, Some(21));
    }

    #[test]
    fn sgd_step_uses_per_layer_rates() {
        let specs = vec![LayerSpec::Circulant { n: 3 }, LayerSpec::Dense { out_dim: 2 }];
        let mut net = Network::zeroed(3, 2, specs).unwrap();
        let before = net.parameters();
        let (_, grads) = net.loss_and_gradients(array![[1.0], [2.0], [3.0]].view(), &[1]).unwrap();
        let zero = Gradients {
            layers: grads
                .layers
                .iter()
                .map(|g| match g {
                    LayerGradient::Circulant { dv, db } => LayerGradient::Circulant {
                        dv: vec![0.0; dv.len()],
                        db: Array1::zeros(db.len()),
                    },
                    LayerGradient::Dense { dw, db } => LayerGradient::Dense {
                        dw: Array2::zeros(dw.dim()),
                        db: Array1::zeros(db.len()),
                    },
                    other => other.clone(),
                })
                .collect(),
        };
        net.sgd_step(&zero, &TrainConfig::default(), 0).unwrap();
        assert_eq!(net.parameters(), before);

        let ones = Gradients {
            layers: vec![
                LayerGradient::Circulant {
                    dv: vec![1.0; 3],
                    db: Array1::ones(3),
                },
                LayerGradient::Dense {
                    dw: Array2::ones((2, 3)),
                    db: Array1::ones(2),
                },
            ],
        };
        net.sgd_step(&ones, &TrainConfig::default(), 0).unwrap();
        let after = net.parameters();
        assert_eq!(&after[..3], &[-0.0005; 3]);
        assert_eq!(&after[3..6], &[-0.002; 3]);
        assert!(after[6..].iter().all(|&v| v == -0.002));
    }

    #[test]
    fn sgd_step_invalidates_spectra() {
        let specs = vec![LayerSpec::ToeplitzLike { m: 4, n: 4, r: 1 }, LayerSpec::Dense { out_dim: 2 }];
        let mut net = Network::new(4, 2, specs, 0).unwrap();
        net.cache_spectra();
        let x = array![[1.0], [0.0], [0.5], [0.2]];
        let (_, grads) = net.loss_and_gradients(x.view(), &[2]).unwrap();
        net.sgd_step(&grads, &TrainConfig::default(), 0).unwrap();
        if let Layer::ToeplitzLike { t, .. } = &net.layers()[0] {
            assert!(t.inner()[0].cached_spectra().is_none());
        }
    }

    #[test]
    fn parameter_counts() {
        let net = Network::new(7, 3, vec![LayerSpec::Dense { out_dim: 3 }], 0).unwrap();
        assert_eq!(net.parameter_count(), 7 * 3 + 3);
        let net = Network::new(784, 1000, vec![LayerSpec::LowRank { out_dim: 1000, rank: 16 }], 0).unwrap();
        assert_eq!(net.parameter_count(), 28544 + 1000);
        let net = Network::new(8, 8, vec![LayerSpec::ToeplitzLike { m: 8, n: 8, r: 3 }], 0).unwrap();
        assert_eq!(net.parameter_count(), 2 * 8 * 3 + 8);
        let net = Network::new(8, 16, vec![LayerSpec::ToeplitzLike { m: 16, n: 8, r: 3 }], 0).unwrap();
        assert_eq!(net.parameter_count(), 2 * 2 * 8 * 3 + 16);
    }

    #[test]
    fn architecture_validation() {
        assert!(Network::new(4, 3, vec![LayerSpec::Dense { out_dim: 2 }], 0).is_err());
        assert!(Network::new(4, 4, vec![LayerSpec::Circulant { n: 5 }], 0).is_err());
        assert!(Network::new(4, 6, vec![LayerSpec::ToeplitzLike { m: 6, n: 4, r: 1 }], 0).is_err());
        assert!(Network::new(4, 3, vec![LayerSpec::LowRank { out_dim: 3, rank: 4 }], 0).is_err());
        assert!(Network::new(4, 2, vec![LayerSpec::ToeplitzLike { m: 2, n: 4, r: 5 }], 0).is_err());
    }

    #[test]
    fn evaluate_fixtures() {
        // Identity map on 3 classes: prediction = argmax of input.
        let mut net = Network::zeroed(3, 3, vec![LayerSpec::Dense { out_dim: 3 }]).unwrap();
        if let Layer::Dense { w, .. } = &mut net.layers_mut()[0] {
            w.assign(&Array2::eye(3));
        }
        let hot = |k: usize| (0..3).map(move |i| if i == k { 1.0 } else { 0.0 });
        let predicted = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        let truth = [1, 2, 3, 2, 2, 3, 1, 1, 1, 1];
        let inputs: Vec<f64> = predicted.iter().flat_map(|&k| hot(k)).collect();
        let x = Array2::from_shape_vec((10, 3), inputs).unwrap().reversed_axes();
        let ds = Dataset::new(x, truth.to_vec(), 3).unwrap();
        assert!((net.evaluate(&ds).unwrap() - 0.3).abs() < 1e-15);

        // Uniform predictions always pick class 1.
        let zero = Network::zeroed(3, 4, vec![LayerSpec::Dense { out_dim: 4 }]).unwrap();
        let ds = Dataset::new(Array2::ones((3, 8)), vec![1, 2, 3, 4, 1, 2, 3, 4], 4).unwrap();
        assert_eq!(zero.evaluate(&ds).unwrap(), 0.75);
        let ds = Dataset::new(Array2::ones((3, 5)), vec![1; 5], 4).unwrap();
        assert_eq!(zero.evaluate(&ds).unwrap(), 0.0);
    }

    #[test]
    fn training_separates_two_blobs() {
        let ds = synthetic_separable(16, 400, 2, 11).unwrap();
        let specs = vec![LayerSpec::ToeplitzLike { m: 16, n: 16, r: 2 }, relu(), LayerSpec::Dense { out_dim: 2 }];
        let mut net = Network::new(16, 2, specs, 1).unwrap();
        let config = TrainConfig {
            global_learning_rate: 0.05,
            structured_learning_rate: 0.05,
            decay_factor: 1.0,
            batch_size: 20,
            max_steps: 200,
            seed: 2,
            ..TrainConfig::default()
        };
        let history = train(&mut net, &ds, None, &config).unwrap();
        assert_eq!(history.last().unwrap().step, 200);
        assert!(net.evaluate(&ds).unwrap() < 0.05);
    }

    #[test]
    fn zero_steps_leaves_network_unchanged() {
        let ds = synthetic_separable(4, 20, 2, 0).unwrap();
        let mut net = Network::new(4, 2, vec![LayerSpec::Dense { out_dim: 2 }], 3).unwrap();
        let before = net.parameters();
        let config = TrainConfig {
            max_steps: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, &ds, None, &config).unwrap().is_empty());
        assert_eq!(net.parameters(), before);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = synthetic_separable(8, 90, 3, 1).unwrap();
        let specs = vec![LayerSpec::ToeplitzLike { m: 8, n: 8, r: 2 }, relu(), LayerSpec::Dense { out_dim: 3 }];
        let config = TrainConfig {
            global_learning_rate: 0.05,
            structured_learning_rate: 0.02,
            batch_size: 16,
            max_steps: 25,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = Network::new(8, 3, specs.clone(), 4).unwrap();
            let h = train(&mut net, &ds, None, &config).unwrap();
            (history_csv(&h), net.parameters())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.lines().count(), 1 + 5);
    }

    #[test]
    fn checkpoint_round_trip() {
        let specs = vec![
            LayerSpec::ToeplitzLike { m: 8, n: 4, r: 2 },
            relu(),
            LayerSpec::LowRank { out_dim: 3, rank: 1 },
        ];
        let net = Network::new(4, 3, specs, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let config = TrainConfig::default();
        save_checkpoint(&path, &net, &config, 17).unwrap();
        let (back, cfg, step) = load_checkpoint(&path).unwrap();
        assert_eq!(back.parameters(), net.parameters());
        assert_eq!(back.specs(), net.specs());
        assert_eq!((cfg, step), (config, 17));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn toeplitz_layer_matches_transform() {
        let specs = vec![LayerSpec::ToeplitzLike { m: 6, n: 6, r: 1 }];
        let mut net = Network::zeroed(6, 6, specs).unwrap();
        let t = ToeplitzLike::from_circulant(&[1.0, 2.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        if let Layer::ToeplitzLike { t: rect, .. } = &mut net.layers_mut()[0] {
            *rect = RectangularTransform::new(6, vec![t.clone()]).unwrap();
        }
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + 3 * j) as f64);
        assert!(crate::linalg::max_abs((net.logits(x.view()).unwrap() - t.to_dense().dot(&x)).view()) < 1e-12);
    }
}
