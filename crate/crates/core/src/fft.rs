//! Length-n complex FFTs with a transform counter.
//!
//! Conventions: `fft` computes `Ωx` with `ω = exp(-2πi/n)` and no scaling;
//! `ifft` computes `Ω⁻¹y` and carries the `1/n`. Any `n ≥ 1` is supported
//! (rustfft picks mixed-radix or Bluestein plans for awkward lengths).
//!
//! Every length-n transform of one vector bumps a per-thread counter by one,
//! so a batched transform over `b` columns bumps it by `b`. Tests read the
//! counter through [`FftAudit`] to pin the exact FFT budgets of the fast
//! products and gradients.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static FFT_COUNT: Cell<u64> = const { Cell::new(0) };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Snapshot of the calling thread's transform counter.
///
/// The counter is thread-local: concurrently running tests cannot disturb
/// each other's counts, and a single-threaded sequence of calls observes
/// exact totals.
#[derive(Clone, Copy, Debug)]
pub struct FftAudit {
    start: u64,
}

impl FftAudit {
    pub fn begin() -> Self {
        FftAudit {
            start: audit_total(),
        }
    }

    /// Number of length-n transforms executed on this thread since `begin`.
    pub fn count(&self) -> u64 {
        audit_total() - self.start
    }
}

/// Total transforms executed on this thread since the last [`audit_reset`].
pub fn audit_total() -> u64 {
    FFT_COUNT.with(|c| c.get())
}

pub fn audit_reset() {
    FFT_COUNT.with(|c| c.set(0));
}

fn bump(k: usize) {
    FFT_COUNT.with(|c| c.set(c.get() + k as u64));
}

fn plan(n: usize, direction: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match direction {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Transforms consecutive length-`n` chunks of `buf` in place.
///
/// `buf.len()` must be a multiple of `n`. The inverse direction is scaled by
/// `1/n`. Counts one transform per chunk.
pub fn transform_chunks(buf: &mut [Complex64], n: usize, direction: Direction) {
    assert!(n >= 1, "transform length must be positive");
    assert_eq!(buf.len() % n, 0, "buffer is not a whole number of columns");
    if buf.is_empty() {
        return;
    }
    let chunks = buf.len() / n;
    if n > 1 {
        let fft = plan(n, direction);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        if direction == Direction::Inverse {
            let scale = 1.0 / n as f64;
            buf.iter_mut().for_each(|z| *z *= scale);
        }
    }
    bump(chunks);
}

pub fn fft_in_place(x: &mut [Complex64]) {
    let n = x.len();
    transform_chunks(x, n, Direction::Forward);
}

pub fn ifft_in_place(y: &mut [Complex64]) {
    let n = y.len();
    transform_chunks(y, n, Direction::Inverse);
}

pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    fft_in_place(&mut out);
    out
}

pub fn ifft(y: &[Complex64]) -> Vec<Complex64> {
    let mut out = y.to_vec();
    ifft_in_place(&mut out);
    out
}

/// Dense complex matrix stored column-major, so each column is one
/// contiguous FFT input.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::default(); rows * cols],
        }
    }

    /// Builds from column-major entries; `entries.len()` must equal `rows * cols`.
    pub fn from_column_major(rows: usize, cols: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count must equal rows * cols");
        ComplexMatrix {
            rows,
            cols,
            data: entries,
        }
    }

    /// Column `j` of the result is `f(i, j)` evaluated down the rows.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.data.chunks_exact(self.rows)
    }

    pub fn columns_mut(&mut self) -> std::slice::ChunksExactMut<'_, Complex64> {
        self.data.chunks_exact_mut(self.rows)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.rows + i]
    }

    /// In-place column-wise transform; counts `cols` transforms.
    pub fn transform(&mut self, direction: Direction) {
        transform_chunks(&mut self.data, self.rows, direction);
    }
}

/// Column-wise (i)FFT of an `n × b` matrix. Counts exactly `b` transforms.
pub fn batched_fft(x: &ComplexMatrix, direction: Direction) -> ComplexMatrix {
    let mut out = x.clone();
    out.transform(direction);
    out
}

/// Powers of the primitive 2n-th root of unity, `values[k] = exp(iπk/n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaVector {
    values: Vec<Complex64>,
}

impl EtaVector {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> Complex64 {
        self.values[k]
    }
}

pub fn eta_vector(n: usize) -> EtaVector {
    assert!(n >= 1, "eta vector length must be positive");
    let step = std::f64::consts::PI / n as f64;
    let values = (0..n)
        .map(|k| Complex64::from_polar(1.0, step * k as f64))
        .collect();
    EtaVector { values }
}
