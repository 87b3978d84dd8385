//! Learnable Toeplitz-like transforms `M(G, H) = Σᵢ Z₁(gᵢ) Z₋₁(hᵢ)`.
//!
//! Any `n × n` matrix with displacement rank `r` under `∇_{Z₁,Z₋₁}` can be
//! written this way with `r` generator columns, so `r` trades parameter count
//! (`2nr`) against expressiveness. Products with an `n × b` batch cost
//! `O(r b n log n)` through FFTs instead of `O(b n²)`.
//!
//! The forward multiply runs in the frequency domain throughout:
//!
//! ```text
//! X̃ = fft(η∘X),  G̃ = fft(G),  H̃ = fft(η∘H)
//! Y = ifft( Σᵢ g̃ᵢ ∘ fft(η̄ ∘ ifft(h̃ᵢ ∘ X̃)) )
//! ```
//!
//! which takes `2(rb + b + r)` FFTs, or `2(rb + b)` once the generator
//! spectra are cached with [`ToeplitzLike::cache_spectra`].

use ndarray::{s, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circulant::{dense_f_circulant, RESIDUE_TOLERANCE};
use crate::displacement::{extract_generators, GeneratorPair, DEFAULT_RANK_TOL};
use crate::fft::{self, eta_vector, ComplexMatrix, Direction, EtaVector};
use crate::linalg::{check_rows, complexify, real_part_checked};
use crate::{Error, Result};

/// Frequency-domain generators `G̃ = fft(G)` and `H̃ = fft(diag(η) H)`.
#[derive(Clone, Debug)]
pub struct Spectra {
    g: ComplexMatrix,
    h: ComplexMatrix,
}

impl Spectra {
    /// `2r` FFTs.
    fn compute(g: ArrayView2<f64>, h: ArrayView2<f64>, eta: &EtaVector) -> Self {
        let mut gt = complexify(g, None);
        let mut ht = complexify(h, Some(eta.values()));
        gt.transform(Direction::Forward);
        ht.transform(Direction::Forward);
        Spectra { g: gt, h: ht }
    }

    pub fn g(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }
}

/// Gradients of a scalar loss with respect to `G` and `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPair {
    pub dg: Array2<f64>,
    pub dh: Array2<f64>,
}

impl GradientPair {
    pub fn zeros(n: usize, r: usize) -> Self {
        GradientPair {
            dg: Array2::zeros((n, r)),
            dh: Array2::zeros((n, r)),
        }
    }
}

/// Flat record `{n, r, g, h}` with `g` and `h` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub n: usize,
    pub r: usize,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ToeplitzLike {
    g: Array2<f64>,
    h: Array2<f64>,
    spectra: Option<Spectra>,
}

impl ToeplitzLike {
    pub fn new(g: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if g.dim() != h.dim() {
            return Err(Error::DimensionMismatch(format!(
                "generators G {:?} and H {:?} differ in shape",
                g.dim(),
                h.dim()
            )));
        }
        let (n, r) = g.dim();
        if n == 0 || r == 0 || r > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r <= n, got n = {n}, r = {r}"
            )));
        }
        Ok(ToeplitzLike { g, h, spectra: None })
    }

    /// Gaussian generators with standard deviation `√gain · (r n²)^{-1/4}`.
    ///
    /// Each entry of `M(G, H)` is a sum of `n r` products of two generator
    /// entries, so its variance is `n r σ⁴ = gain² / n`, the usual fan-in
    /// scaling (`gain = √2` ahead of a rectifier).
    pub fn random<R: Rng + ?Sized>(n: usize, r: usize, gain: f64, rng: &mut R) -> Result<Self> {
        if n == 0 || r == 0 || r > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= r <= n, got n = {n}, r = {r}"
            )));
        }
        let sigma = init_std(n, r, gain);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let g = Array2::from_shape_simple_fn((n, r), || normal.sample(rng));
        let h = Array2::from_shape_simple_fn((n, r), || normal.sample(rng));
        ToeplitzLike::new(g, h)
    }

    /// `Z₁(v)` as a rank-1 transform (`g₁ = v`, `h₁ = e₁`).
    pub fn from_circulant(v: &[f64]) -> Result<Self> {
        let n = v.len();
        let g = Array2::from_shape_vec((n, 1), v.to_vec()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut h = Array2::zeros((n, 1));
        if n > 0 {
            h[[0, 0]] = 1.0;
        }
        ToeplitzLike::new(g, h)
    }

    /// The Toeplitz matrix with first column `col` and first row `row`,
    /// using at most two generator columns.
    pub fn from_toeplitz(col: &[f64], row: &[f64]) -> Result<Self> {
        let dense = crate::displacement::densify_family(&crate::displacement::StructuredFamily::Toeplitz {
            col: col.to_vec(),
            row: row.to_vec(),
        })?;
        ToeplitzLike::from_dense(dense.view(), DEFAULT_RANK_TOL)
    }

    /// Generators of an arbitrary square matrix, extracted from its
    /// displacement and folded into the learnable form (`h ← ½ J h`).
    ///
    /// A matrix with zero displacement (only the zero matrix) gets a single
    /// zero generator column.
    pub fn from_dense(m: ArrayView2<f64>, rel_tol: f64) -> Result<Self> {
        let gen = extract_generators(m, rel_tol)?;
        ToeplitzLike::from_generator_pair(&gen)
    }

    /// Converts `M = ½ Σ Z₁(gⱼ) Z₋₁(J hⱼ)` generators into the learnable form.
    pub fn from_generator_pair(gen: &GeneratorPair) -> Result<Self> {
        let n = gen.n();
        if gen.rank() == 0 {
            return ToeplitzLike::new(Array2::zeros((n, 1)), Array2::zeros((n, 1)));
        }
        let h = gen.h();
        let folded = Array2::from_shape_fn(h.dim(), |(i, j)| 0.5 * h[[n - 1 - i, j]]);
        ToeplitzLike::new(gen.g().to_owned(), folded)
    }

    /// Zero-pads the generators with extra columns; the matrix is unchanged.
    pub fn with_rank(self, r: usize) -> Result<Self> {
        let (n, cur) = self.g.dim();
        if r < cur {
            return Err(Error::InvalidArgument(format!("cannot shrink rank {cur} to {r}")));
        }
        let mut g = Array2::zeros((n, r));
        let mut h = Array2::zeros((n, r));
        g.slice_mut(s![.., ..cur]).assign(&self.g);
        h.slice_mut(s![.., ..cur]).assign(&self.h);
        ToeplitzLike::new(g, h)
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn r(&self) -> usize {
        self.g.ncols()
    }

    pub fn g(&self) -> ArrayView2<'_, f64> {
        self.g.view()
    }

    pub fn h(&self) -> ArrayView2<'_, f64> {
        self.h.view()
    }

    pub fn parameter_count(&self) -> usize {
        2 * self.n() * self.r()
    }

    /// Mutable access to `(G, H)`. Drops any cached spectra.
    pub fn generators_mut(&mut self) -> (&mut Array2<f64>, &mut Array2<f64>) {
        self.spectra = None;
        (&mut self.g, &mut self.h)
    }

    /// `G ← G − lr·dG`, `H ← H − lr·dH`.
    pub fn descend(&mut self, grad: &GradientPair, lr: f64) -> Result<()> {
        if grad.dg.dim() != self.g.dim() || grad.dh.dim() != self.h.dim() {
            return Err(Error::DimensionMismatch("gradient shape does not match generators".into()));
        }
        let (g, h) = self.generators_mut();
        g.scaled_add(-lr, &grad.dg);
        h.scaled_add(-lr, &grad.dh);
        Ok(())
    }

    /// Precomputes the generator spectra (`2r` FFTs) so later products skip
    /// them.
    pub fn cache_spectra(&mut self) {
        if self.spectra.is_none() {
            let eta = eta_vector(self.n());
            self.spectra = Some(Spectra::compute(self.g.view(), self.h.view(), &eta));
        }
    }

    pub fn invalidate_spectra(&mut self) {
        self.spectra = None;
    }

    pub fn cached_spectra(&self) -> Option<&Spectra> {
        self.spectra.as_ref()
    }

    fn with_spectra<T>(&self, eta: &EtaVector, f: impl FnOnce(&Spectra) -> T) -> T {
        match &self.spectra {
            Some(sp) => f(sp),
            None => f(&Spectra::compute(self.g.view(), self.h.view(), eta)),
        }
    }

    /// `Σᵢ Z₁(gᵢ) Z₋₁(hᵢ)` by dense products.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut m = Array2::zeros((n, n));
        for (g, h) in self.g.columns().into_iter().zip(self.h.columns()) {
            let zg = dense_f_circulant(1.0, &g.to_vec());
            let zh = dense_f_circulant(-1.0, &h.to_vec());
            m += &zg.dot(&zh);
        }
        m
    }

    fn scale(&self) -> f64 {
        self.g
            .columns()
            .into_iter()
            .zip(self.h.columns())
            .map(|(g, h)| l1(g.iter()) * l1(h.iter()))
            .sum()
    }

    /// `M(G, H) X`.
    pub fn fast_multiply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.n();
        check_rows("Toeplitz-like multiply", n, x.nrows())?;
        let b = x.ncols();
        let eta = eta_vector(n);
        let mut xt = complexify(x, Some(eta.values()));
        xt.transform(Direction::Forward);
        let mut acc = ComplexMatrix::zeros(n, b);
        let mut work = ComplexMatrix::zeros(n, b);
        self.with_spectra(&eta, |sp| {
            for i in 0..self.r() {
                let (gs, hs) = (sp.g.col(i), sp.h.col(i));
                for (wc, xc) in work.columns_mut().zip(xt.columns()) {
                    mul_into(wc, hs, xc);
                }
                work.transform(Direction::Inverse);
                scale_rows(&mut work, eta.values(), true);
                work.transform(Direction::Forward);
                for (ac, wc) in acc.columns_mut().zip(work.columns()) {
                    for ((a, &w), &gv) in ac.iter_mut().zip(wc).zip(gs) {
                        *a += gv * w;
                    }
                }
            }
        });
        acc.transform(Direction::Inverse);
        real_part_checked(&acc, RESIDUE_TOLERANCE * (linf(x) * self.scale()).max(1.0))
    }

    /// `M(G, H)ᵀ Δ = Σᵢ Z₋₁(hᵢ)ᵀ Z₁(gᵢ)ᵀ Δ`, same FFT cost as the forward
    /// multiply.
    pub fn transpose_multiply(&self, delta: ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.n();
        check_rows("Toeplitz-like transpose multiply", n, delta.nrows())?;
        let b = delta.ncols();
        let eta = eta_vector(n);
        let mut dt = complexify(delta, None);
        dt.transform(Direction::Forward);
        let mut acc = ComplexMatrix::zeros(n, b);
        let mut work = ComplexMatrix::zeros(n, b);
        self.with_spectra(&eta, |sp| {
            for i in 0..self.r() {
                let (gs, hs) = (sp.g.col(i), sp.h.col(i));
                for (wc, dc) in work.columns_mut().zip(dt.columns()) {
                    for ((w, &d), &gv) in wc.iter_mut().zip(dc).zip(gs) {
                        *w = gv.conj() * d;
                    }
                }
                work.transform(Direction::Inverse);
                scale_rows(&mut work, eta.values(), false);
                work.transform(Direction::Forward);
                for (ac, wc) in acc.columns_mut().zip(work.columns()) {
                    for ((a, &w), &hv) in ac.iter_mut().zip(wc).zip(hs) {
                        *a += hv.conj() * w;
                    }
                }
            }
        });
        acc.transform(Direction::Inverse);
        scale_rows(&mut acc, eta.values(), true);
        real_part_checked(&acc, RESIDUE_TOLERANCE * (linf(delta) * self.scale()).max(1.0))
    }

    /// Minibatch gradients of `⟨Z, M(G, H) X⟩` with respect to `G` and `H`.
    ///
    /// Costs `4br + 4r + 2b` FFTs with fresh spectra, `2r` fewer when cached.
    pub fn fast_gradients(&self, x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<GradientPair> {
        let n = self.n();
        check_rows("Toeplitz-like gradient", n, x.nrows())?;
        if x.dim() != z.dim() {
            return Err(Error::DimensionMismatch(format!(
                "forward inputs {:?} vs backward inputs {:?}",
                x.dim(),
                z.dim()
            )));
        }
        let (r, b) = (self.r(), x.ncols());
        let eta = eta_vector(n);
        let mut xt = complexify(x, Some(eta.values()));
        let mut zt = complexify(z, None);
        xt.transform(Direction::Forward);
        zt.transform(Direction::Forward);
        let mut dg = ComplexMatrix::zeros(n, r);
        let mut dh = ComplexMatrix::zeros(n, r);
        let mut work = ComplexMatrix::zeros(n, b);
        self.with_spectra(&eta, |sp| {
            for j in 0..r {
                let (gs, hs) = (sp.g.col(j), sp.h.col(j));

                // fft(Z₋₁(hⱼ) xᵢ) for every column, then Σᵢ Z₁(·)ᵀ zᵢ.
                for (wc, xc) in work.columns_mut().zip(xt.columns()) {
                    mul_into(wc, hs, xc);
                }
                work.transform(Direction::Inverse);
                scale_rows(&mut work, eta.values(), true);
                work.transform(Direction::Forward);
                let out = dg.col_mut(j);
                for (wc, zc) in work.columns().zip(zt.columns()) {
                    for ((o, w), &zv) in out.iter_mut().zip(wc).zip(zc) {
                        *o += w.conj() * zv;
                    }
                }
                fft::ifft_in_place(out);

                // Z₁(gⱼ)ᵀ zᵢ, then Σᵢ Z₋₁(xᵢ)ᵀ(·).
                for (wc, zc) in work.columns_mut().zip(zt.columns()) {
                    for ((w, &zv), &gv) in wc.iter_mut().zip(zc).zip(gs) {
                        *w = gv.conj() * zv;
                    }
                }
                work.transform(Direction::Inverse);
                scale_rows(&mut work, eta.values(), false);
                work.transform(Direction::Forward);
                let out = dh.col_mut(j);
                for (wc, xc) in work.columns().zip(xt.columns()) {
                    for ((o, &w), xv) in out.iter_mut().zip(wc).zip(xc) {
                        *o += xv.conj() * w;
                    }
                }
                fft::ifft_in_place(out);
                for (o, e) in out.iter_mut().zip(eta.values()) {
                    *o *= e.conj();
                }
            }
        });
        let params = self
            .g
            .columns()
            .into_iter()
            .zip(self.h.columns())
            .map(|(g, h)| l1(g.iter()) + l1(h.iter()))
            .fold(0.0, f64::max);
        let tol = RESIDUE_TOLERANCE * (linf(x) * linf(z) * (b * n) as f64 * params).max(1.0);
        Ok(GradientPair {
            dg: real_part_checked(&dg, tol)?.as_standard_layout().into_owned(),
            dh: real_part_checked(&dh, tol)?.as_standard_layout().into_owned(),
        })
    }

    /// Dense Jacobian of `x ↦ M(G, H) x` with respect to `gⱼ` (0-based
    /// column index): `Z₁(Z₋₁(hⱼ) x)`.
    pub fn jacobian_g(&self, x: &[f64], j: usize) -> Result<Array2<f64>> {
        self.check_jacobian_args(x, j)?;
        let zh = dense_f_circulant(-1.0, &self.h.column(j).to_vec());
        let u = zh.dot(&ndarray::ArrayView1::from(x));
        Ok(dense_f_circulant(1.0, &u.to_vec()))
    }

    /// Dense Jacobian with respect to `hⱼ` (0-based): `Z₁(gⱼ) Z₋₁(x)`.
    pub fn jacobian_h(&self, x: &[f64], j: usize) -> Result<Array2<f64>> {
        self.check_jacobian_args(x, j)?;
        let zg = dense_f_circulant(1.0, &self.g.column(j).to_vec());
        Ok(zg.dot(&dense_f_circulant(-1.0, x)))
    }

    fn check_jacobian_args(&self, x: &[f64], j: usize) -> Result<()> {
        check_rows("Jacobian input", self.n(), x.len())?;
        if j >= self.r() {
            return Err(Error::InvalidArgument(format!(
                "generator index {j} out of range for rank {}",
                self.r()
            )));
        }
        Ok(())
    }

    pub fn to_record(&self) -> TransformRecord {
        TransformRecord {
            n: self.n(),
            r: self.r(),
            g: self.g.as_standard_layout().iter().copied().collect(),
            h: self.h.as_standard_layout().iter().copied().collect(),
        }
    }

    pub fn from_record(rec: &TransformRecord) -> Result<Self> {
        let shape = (rec.n, rec.r);
        let g = Array2::from_shape_vec(shape, rec.g.clone())
            .map_err(|e| Error::Parse(format!("generator G: {e}")))?;
        let h = Array2::from_shape_vec(shape, rec.h.clone())
            .map_err(|e| Error::Parse(format!("generator H: {e}")))?;
        ToeplitzLike::new(g, h)
    }
}

/// Standard deviation used by [`ToeplitzLike::random`].
pub fn init_std(n: usize, r: usize, gain: f64) -> f64 {
    gain.sqrt() * ((r * n * n) as f64).powf(-0.25)
}

fn mul_into(out: &mut [Complex64], a: &[Complex64], b: &[Complex64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * y;
    }
}

/// Multiplies row `k` of every column by `η_k` (or `η̄_k` when `conj`).
fn scale_rows(m: &mut ComplexMatrix, eta: &[Complex64], conj: bool) {
    for col in m.columns_mut() {
        for (z, e) in col.iter_mut().zip(eta) {
            *z *= if conj { e.conj() } else { *e };
        }
    }
}

fn l1<'a>(v: impl Iterator<Item = &'a f64>) -> f64 {
    v.map(|x| x.abs()).sum()
}

fn linf(x: ArrayView2<f64>) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// An `m × n` map built from square Toeplitz-like blocks: for `m < n` the
/// first `m` outputs of one block, for `m > n` the stacked outputs of `m / n`
/// blocks.
#[derive(Clone, Debug)]
pub struct RectangularTransform {
    m: usize,
    n: usize,
    inner: Vec<ToeplitzLike>,
}

impl RectangularTransform {
    /// Number of square blocks needed for an `m × n` map.
    pub fn block_count(m: usize, n: usize) -> Result<usize> {
        if m == 0 || n == 0 {
            return Err(Error::IncompatibleDimensions { m, n });
        }
        if m <= n {
            Ok(1)
        } else if m.is_multiple_of(n) {
            Ok(m / n)
        } else {
            Err(Error::IncompatibleDimensions { m, n })
        }
    }

    pub fn new(m: usize, inner: Vec<ToeplitzLike>) -> Result<Self> {
        let n = inner.first().map(|t| t.n()).unwrap_or(0);
        let blocks = Self::block_count(m, n)?;
        if inner.len() != blocks || inner.iter().any(|t| t.n() != n) {
            return Err(Error::DimensionMismatch(format!(
                "an {m} x {n} transform needs {blocks} blocks of size {n}"
            )));
        }
        Ok(RectangularTransform { m, n, inner })
    }

    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, r: usize, gain: f64, rng: &mut R) -> Result<Self> {
        let blocks = Self::block_count(m, n)?;
        let inner = (0..blocks)
            .map(|_| ToeplitzLike::random(n, r, gain, rng))
            .collect::<Result<Vec<_>>>()?;
        RectangularTransform::new(m, inner)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn inner(&self) -> &[ToeplitzLike] {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut [ToeplitzLike] {
        &mut self.inner
    }

    pub fn parameter_count(&self) -> usize {
        self.inner.iter().map(|t| t.parameter_count()).sum()
    }

    pub fn cache_spectra(&mut self) {
        self.inner.iter_mut().for_each(ToeplitzLike::cache_spectra);
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let blocks: Vec<Array2<f64>> = self.inner.iter().map(|t| t.to_dense()).collect();
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let stacked = ndarray::concatenate(Axis(0), &views).expect("blocks share a column count");
        stacked.slice(s![..self.m, ..]).to_owned()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_rows("rectangular transform input", self.n, x.nrows())?;
        if self.m <= self.n {
            let y = self.inner[0].fast_multiply(x)?;
            return Ok(y.slice(s![..self.m, ..]).to_owned());
        }
        let mut out = Array2::zeros((self.m, x.ncols()));
        for (k, t) in self.inner.iter().enumerate() {
            let y = t.fast_multiply(x)?;
            out.slice_mut(s![k * self.n..(k + 1) * self.n, ..]).assign(&y);
        }
        Ok(out)
    }

    /// `Rᵀ Δ` for an `m × b` upstream gradient.
    pub fn transpose(&self, delta: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_rows("rectangular transform gradient", self.m, delta.nrows())?;
        if self.m <= self.n {
            return self.inner[0].transpose_multiply(self.pad(delta).view());
        }
        let mut out = Array2::zeros((self.n, delta.ncols()));
        for (k, t) in self.inner.iter().enumerate() {
            out += &t.transpose_multiply(delta.slice(s![k * self.n..(k + 1) * self.n, ..]))?;
        }
        Ok(out)
    }

    /// Per-block gradients of `⟨Δ, R X⟩`.
    pub fn gradients(&self, x: ArrayView2<f64>, delta: ArrayView2<f64>) -> Result<Vec<GradientPair>> {
        check_rows("rectangular transform input", self.n, x.nrows())?;
        check_rows("rectangular transform gradient", self.m, delta.nrows())?;
        if self.m <= self.n {
            return Ok(vec![self.inner[0].fast_gradients(x, self.pad(delta).view())?]);
        }
        self.inner
            .iter()
            .enumerate()
            .map(|(k, t)| t.fast_gradients(x, delta.slice(s![k * self.n..(k + 1) * self.n, ..])))
            .collect()
    }

    fn pad(&self, delta: ArrayView2<f64>) -> Array2<f64> {
        let mut padded = Array2::zeros((self.n, delta.ncols()));
        padded.slice_mut(s![..self.m, ..]).assign(&delta);
        padded
    }
}
