//! Classification datasets: IDX (MNIST) files, synthetic Gaussian blobs and
//! seeded minibatch iteration.
//!
//! Inputs are stored one example per column. Labels are 1-based; IDX files
//! store 0-based labels and are shifted on load.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.ncols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input columns but {} labels",
                inputs.ncols(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 1..={class_count}"
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite input value".into()));
        }
        Ok(Dataset {
            inputs,
            labels,
            class_count,
        })
    }

    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// The examples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(1), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// The first `count` examples (all of them if `count` exceeds the size).
    pub fn head(&self, count: usize) -> Dataset {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        let b = self.select(&idx);
        Dataset {
            inputs: b.inputs,
            labels: b.labels,
            class_count: self.class_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedFile {
            needed: offset + 4,
            available: bytes.len(),
        })
}

/// Checks the magic number and dimension header, returning the dimensions
/// and the payload.
fn parse_header(bytes: &[u8], magic: u32) -> Result<(Vec<usize>, &[u8])> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::BadMagic { expected: magic, found });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|k| read_u32(bytes, 4 + 4 * k).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndims;
    let size = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::DimensionOverflow)?;
    let needed = header.checked_add(size).ok_or(Error::DimensionOverflow)?;
    if dims[0] == 0 {
        return Err(Error::EmptyDataset);
    }
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Parse(format!(
            "{} trailing bytes after IDX payload",
            bytes.len() - needed
        )));
    }
    Ok((dims, &bytes[header..]))
}

/// Parses an IDX3 image file into a `(rows·cols) × N` matrix scaled to
/// `[0, 1]`. Each image is flattened row-major.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Array2<f64>> {
    let (dims, payload) = parse_header(bytes, IMAGE_MAGIC)?;
    let (count, d) = (dims[0], dims[1] * dims[2]);
    let values: Vec<f64> = payload.iter().map(|&p| f64::from(p) / 255.0).collect();
    let by_row = Array2::from_shape_vec((count, d), values).expect("payload length checked against header");
    Ok(by_row.reversed_axes().as_standard_layout().into_owned())
}

/// Parses an IDX1 label file, shifting labels to start at 1.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, payload) = parse_header(bytes, LABEL_MAGIC)?;
    Ok(payload.iter().map(|&l| usize::from(l) + 1).collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    parse_idx_images(&read(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_idx_labels(&read(path.as_ref())?)
}

/// Loads an image file and its label file as one dataset.
pub fn load_idx_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>, class_count: usize) -> Result<Dataset> {
    Dataset::new(load_idx_images(images)?, load_idx_labels(labels)?, class_count)
}

/// `(train, test)` from a directory holding the four uncompressed MNIST files.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let train = load_idx_dataset(dir.join(MNIST_TRAIN_IMAGES), dir.join(MNIST_TRAIN_LABELS), 10)?;
    let test = load_idx_dataset(dir.join(MNIST_TEST_IMAGES), dir.join(MNIST_TEST_LABELS), 10)?;
    Ok((train, test))
}

/// Encodes a `(rows·cols) × N` matrix of `[0, 1]` values as IDX3, rounding
/// to the nearest byte.
pub fn encode_idx_images(inputs: ArrayView2<f64>, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != inputs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{rows} x {cols} images need {} rows, got {}",
            rows * cols,
            inputs.nrows()
        )));
    }
    let mut out = header(IMAGE_MAGIC, &[inputs.ncols(), rows, cols])?;
    for image in inputs.columns() {
        out.extend(image.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

/// Encodes 1-based labels as IDX1 (stored 0-based).
pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = header(LABEL_MAGIC, &[labels.len()])?;
    for &l in labels {
        let byte = l
            .checked_sub(1)
            .and_then(|v| u8::try_from(v).ok())
            .ok_or_else(|| Error::InvalidArgument(format!("label {l} not representable in IDX")))?;
        out.push(byte);
    }
    Ok(out)
}

fn header(magic: u32, dims: &[usize]) -> Result<Vec<u8>> {
    let mut out = magic.to_be_bytes().to_vec();
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::DimensionOverflow)?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    Ok(out)
}

/// Writes a dataset of `rows × cols` images as an IDX image/label file pair.
pub fn export_idx(ds: &Dataset, rows: usize, cols: usize, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
    let (images, labels) = (images.as_ref(), labels.as_ref());
    fs::write(images, encode_idx_images(ds.inputs(), rows, cols)?).map_err(|e| Error::io(images, e))?;
    fs::write(labels, encode_idx_labels(ds.labels())?).map_err(|e| Error::io(labels, e))?;
    Ok(())
}

/// Gaussian blobs with unit variance, one per class.
///
/// Class `k` (0-based) is centred at `6·(1 + k / d)` along axis `k mod d`, so
/// any two centres are at least 6 standard deviations apart. Examples are
/// assigned to classes round-robin, then shuffled.
pub fn synthetic_separable(d: usize, count: usize, classes: usize, seed: u64) -> Result<Dataset> {
    if d == 0 || count == 0 || classes == 0 {
        return Err(Error::InvalidArgument("d, N and c must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..count).map(|i| i % classes + 1).collect();
    labels.shuffle(&mut rng);
    let centres = blob_centres(d, classes);
    let mut inputs = Array2::zeros((d, count));
    for (mut col, &label) in inputs.columns_mut().into_iter().zip(&labels) {
        for (v, c) in col.iter_mut().zip(centres.column(label - 1)) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *v = c + noise;
        }
    }
    Dataset::new(inputs, labels, classes)
}

/// Centres used by [`synthetic_separable`], one column per class.
pub fn blob_centres(d: usize, classes: usize) -> Array2<f64> {
    let mut centres = Array2::zeros((d, classes));
    for k in 0..classes {
        centres[[k % d, k]] = 6.0 * (1 + k / d) as f64;
    }
    centres
}

/// A fresh permutation of the dataset for `(seed, epoch)`, cut into batches
/// of `batch_size` (the last batch may be smaller).
pub fn minibatches(ds: &Dataset, batch_size: usize, seed: u64, epoch: u64) -> Minibatches<'_> {
    assert!(batch_size >= 1, "batch size must be positive");
    Minibatches {
        ds,
        order: epoch_order(ds.len(), seed, epoch),
        batch_size,
        pos: 0,
    }
}

/// The example order used by [`minibatches`].
pub fn epoch_order(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order
}

pub struct Minibatches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Minibatches<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.ds.select(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.order.len() - self.pos).div_ceil(self.batch_size);
        (left, Some(left))
    }
}

impl ExactSizeIterator for Minibatches<'_> {}
