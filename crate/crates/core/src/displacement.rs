//! Sylvester and Stein displacement operators on dense matrices.
//!
//! Everything here works on explicit `n × n` matrices with O(n³) products.
//! It is the reference that the fast transforms are checked against, not a
//! fast path.
//!
//! * Sylvester: `∇_{A,B}[M] = AM − MB`
//! * Stein: `△_{A,B}[M] = M − AMB`
//!
//! A matrix has displacement rank `r` under an operator when the displaced
//! matrix has rank `r`; the rank-`r` factors `G, H` of `L[M] = GHᵀ` are its
//! generators. For the Toeplitz operator `∇_{Z₁,Z₋₁}` the matrix is recovered
//! from its generators as `M = ½ Σⱼ Z₁(gⱼ) Z₋₁(J hⱼ)`.

use ndarray::{s, Array2, ArrayView2};

use crate::circulant::{dense_f_circulant, shift_scale, unit_circulant};
use crate::linalg::{self, reversal};
use crate::{Error, Result};

/// Default relative threshold for [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Operator matrices `A`, `B` used by displacement operators.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorMatrix {
    /// `Z_f`: shift down, wrap the last entry to the top scaled by `f`.
    UnitCirculant(f64),
    /// `Z_fᵀ`: shift up, wrap the first entry to the bottom scaled by `f`.
    UnitCirculantTranspose(f64),
    Diagonal(Vec<f64>),
    /// `Z₀ + Z₀ᵀ`.
    SymmetrizedShift,
}

impl OperatorMatrix {
    fn check_dim(&self, n: usize) -> Result<()> {
        match self {
            OperatorMatrix::Diagonal(d) if d.len() != n => Err(Error::DimensionMismatch(format!(
                "diagonal operator has length {}, matrix is {n} x {n}",
                d.len()
            ))),
            _ if n == 0 => Err(Error::DimensionMismatch("empty operator".into())),
            _ => Ok(()),
        }
    }

    pub fn dense(&self, n: usize) -> Result<Array2<f64>> {
        self.check_dim(n)?;
        Ok(match self {
            OperatorMatrix::UnitCirculant(f) => unit_circulant(*f, n),
            OperatorMatrix::UnitCirculantTranspose(f) => unit_circulant(*f, n).reversed_axes(),
            OperatorMatrix::Diagonal(d) => Array2::from_diag(&ndarray::arr1(d)),
            OperatorMatrix::SymmetrizedShift => {
                let z = unit_circulant(0.0, n);
                &z + &z.t()
            }
        })
    }

    /// `A v` without forming `A`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let n = v.len();
        self.check_dim(n)?;
        Ok(match self {
            OperatorMatrix::UnitCirculant(f) => shift_scale(*f, v),
            OperatorMatrix::UnitCirculantTranspose(f) => {
                let mut out = v[1..].to_vec();
                out.push(f * v[0]);
                out
            }
            OperatorMatrix::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            OperatorMatrix::SymmetrizedShift => (0..n)
                .map(|i| {
                    let up = if i + 1 < n { v[i + 1] } else { 0.0 };
                    let down = if i > 0 { v[i - 1] } else { 0.0 };
                    up + down
                })
                .collect(),
        })
    }

    pub fn transpose(&self) -> OperatorMatrix {
        match self {
            OperatorMatrix::UnitCirculant(f) => OperatorMatrix::UnitCirculantTranspose(*f),
            OperatorMatrix::UnitCirculantTranspose(f) => OperatorMatrix::UnitCirculant(*f),
            other => other.clone(),
        }
    }
}

fn square_dim(m: ArrayView2<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "expected a non-empty square matrix, got {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// `AM − MB`.
pub fn apply_sylvester(a: &OperatorMatrix, b: &OperatorMatrix, m: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = square_dim(m)?;
    let (a, b) = (a.dense(n)?, b.dense(n)?);
    Ok(a.dot(&m) - m.dot(&b))
}

/// `M − AMB`.
pub fn apply_stein(a: &OperatorMatrix, b: &OperatorMatrix, m: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = square_dim(m)?;
    let (a, b) = (a.dense(n)?, b.dense(n)?);
    Ok(&m - &a.dot(&m).dot(&b))
}

/// Number of singular values above `rel_tol · σ₁`; zero for the zero matrix.
pub fn numeric_rank(m: ArrayView2<f64>, rel_tol: f64) -> usize {
    assert!(rel_tol > 0.0, "rank tolerance must be positive");
    let s = linalg::singular_values(m);
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&x| x > rel_tol * s1).count(),
        _ => 0,
    }
}

/// `[v, Av, A²v, …, A^{n−1}v]` by repeated application.
pub fn krylov_matrix(a: &OperatorMatrix, v: &[f64]) -> Result<Array2<f64>> {
    let n = v.len();
    a.check_dim(n)?;
    let mut k = Array2::zeros((n, n));
    let mut col = v.to_vec();
    for j in 0..n {
        k.column_mut(j).assign(&ndarray::ArrayView1::from(&col));
        if j + 1 < n {
            col = a.apply(&col)?;
        }
    }
    Ok(k)
}

/// Low-displacement generators `G, H ∈ ℝ^{n×r}` with `L[M] = GHᵀ`.
///
/// `r = 0` is allowed and stands for the zero displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorPair {
    g: Array2<f64>,
    h: Array2<f64>,
}

impl GeneratorPair {
    pub fn new(g: Array2<f64>, h: Array2<f64>) -> Result<Self> {
        if g.dim() != h.dim() {
            return Err(Error::DimensionMismatch(format!(
                "generators differ in shape: G is {:?}, H is {:?}",
                g.dim(),
                h.dim()
            )));
        }
        if g.nrows() == 0 || g.ncols() > g.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "generator shape {:?} needs n >= 1 and r <= n",
                g.dim()
            )));
        }
        Ok(GeneratorPair { g, h })
    }

    pub fn zeros(n: usize, r: usize) -> Self {
        GeneratorPair {
            g: Array2::zeros((n, r)),
            h: Array2::zeros((n, r)),
        }
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    pub fn g(&self) -> ArrayView2<'_, f64> {
        self.g.view()
    }

    pub fn h(&self) -> ArrayView2<'_, f64> {
        self.h.view()
    }

    /// `GHᵀ`.
    pub fn outer(&self) -> Array2<f64> {
        self.g.dot(&self.h.t())
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.g, self.h)
    }
}

fn operator_power_matches(op: &OperatorMatrix, n: usize, scalar: f64) -> Result<bool> {
    let tol = 1e-9 * scalar.abs().max(1.0);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let mut v = e;
        for _ in 0..n {
            v = op.apply(&v)?;
        }
        for (k, x) in v.iter().enumerate() {
            let want = if k == i { scalar } else { 0.0 };
            if (x - want).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest dimension at which the `Aⁿ = aI`, `Bⁿ = bI` hypotheses are checked.
pub const POWER_CHECK_MAX_N: usize = 32;

/// Solves `M − AMB = GHᵀ` through the Krylov decomposition
/// `M = 1/(1−ab) Σⱼ krylov(A, gⱼ) krylov(Bᵀ, hⱼ)ᵀ`, valid when `Aⁿ = aI` and
/// `Bⁿ = bI`.
pub fn stein_reconstruct(
    a_op: &OperatorMatrix,
    a: f64,
    b_op: &OperatorMatrix,
    b: f64,
    gen: &GeneratorPair,
) -> Result<Array2<f64>> {
    let n = gen.n();
    let denom = 1.0 - a * b;
    if denom.abs() < 1e-12 {
        return Err(Error::SingularDisplacement(denom.abs()));
    }
    if n <= POWER_CHECK_MAX_N {
        if !operator_power_matches(a_op, n, a)? {
            return Err(Error::InvalidOperatorPowers(format!("A^{n} != {a} I")));
        }
        if !operator_power_matches(b_op, n, b)? {
            return Err(Error::InvalidOperatorPowers(format!("B^{n} != {b} I")));
        }
    }
    let bt = b_op.transpose();
    let mut m = Array2::zeros((n, n));
    for j in 0..gen.rank() {
        let kg = krylov_matrix(a_op, &gen.g.column(j).to_vec())?;
        let kh = krylov_matrix(&bt, &gen.h.column(j).to_vec())?;
        m += &kg.dot(&kh.t());
    }
    Ok(m / denom)
}

/// `M = ½ Σⱼ Z₁(gⱼ) Z₋₁(J hⱼ)`, the unique `M` with `∇_{Z₁,Z₋₁}[M] = GHᵀ`.
pub fn toeplitz_like_reconstruct(gen: &GeneratorPair) -> Array2<f64> {
    toeplitz_like_reconstruct_scaled(gen, 0.5)
}

/// [`toeplitz_like_reconstruct`] with the leading `½` replaced by `scale`.
/// Only useful for fault-injection checks of the verification suite.
#[doc(hidden)]
pub fn toeplitz_like_reconstruct_scaled(gen: &GeneratorPair, scale: f64) -> Array2<f64> {
    let n = gen.n();
    let j = reversal(n);
    let mut m = Array2::zeros((n, n));
    for k in 0..gen.rank() {
        let g = gen.g.column(k).to_vec();
        let jh = j.dot(&gen.h.column(k)).to_vec();
        m += &dense_f_circulant(1.0, &g).dot(&dense_f_circulant(-1.0, &jh));
    }
    m * scale
}

/// Re-expresses `∇_{Z₁,Z₋₁}[M] = GHᵀ` as a Stein equation.
///
/// Right-multiplying by `Z₋₁⁻¹ = Z₋₁ᵀ` gives `M − Z₁ M Z₋₁ᵀ = (−G)(Z₋₁H)ᵀ`,
/// so the returned pair feeds [`stein_reconstruct`] with
/// `A = Z₁ (a = 1)`, `B = Z₋₁ᵀ (b = −1)`.
pub fn sylvester_to_stein(gen: &GeneratorPair) -> GeneratorPair {
    let z = unit_circulant(-1.0, gen.n());
    GeneratorPair {
        g: -&gen.g,
        h: z.dot(&gen.h),
    }
}

/// Operator pair matching [`sylvester_to_stein`]: `(A, a, B, b)`.
pub fn toeplitz_stein_operators() -> (OperatorMatrix, f64, OperatorMatrix, f64) {
    (
        OperatorMatrix::UnitCirculant(1.0),
        1.0,
        OperatorMatrix::UnitCirculantTranspose(-1.0),
        -1.0,
    )
}

/// `∇_{Z₁,Z₋₁}[M]`.
pub fn toeplitz_displacement(m: ArrayView2<f64>) -> Result<Array2<f64>> {
    apply_sylvester(
        &OperatorMatrix::UnitCirculant(1.0),
        &OperatorMatrix::UnitCirculant(-1.0),
        m,
    )
}

/// Factors `∇_{Z₁,Z₋₁}[M] = GHᵀ` through a truncated SVD, splitting the
/// singular values evenly: `G = U_r √Σ_r`, `H = V_r √Σ_r`.
pub fn extract_generators(m: ArrayView2<f64>, rel_tol: f64) -> Result<GeneratorPair> {
    let n = square_dim(m)?;
    let d = toeplitz_displacement(m)?;
    let r = numeric_rank(d.view(), rel_tol);
    if r == 0 {
        return Ok(GeneratorPair::zeros(n, 0));
    }
    let (u, sigma, v) = linalg::svd(d.view());
    let root: Vec<f64> = sigma[..r].iter().map(|s| s.sqrt()).collect();
    let mut g = u.slice(s![.., ..r]).to_owned();
    let mut h = v.slice(s![.., ..r]).to_owned();
    for (k, w) in root.iter().enumerate() {
        g.column_mut(k).mapv_inplace(|x| x * w);
        h.column_mut(k).mapv_inplace(|x| x * w);
    }
    GeneratorPair::new(g, h)
}

/// Classical structured families used as fixtures.
#[derive(Clone, Debug, PartialEq)]
pub enum StructuredFamily {
    /// Constant diagonals; `col[0]` must equal `row[0]`.
    Toeplitz { col: Vec<f64>, row: Vec<f64> },
    /// Constant anti-diagonals, given by the first column and the last row;
    /// `col[n−1]` must equal `last_row[0]`.
    Hankel { col: Vec<f64>, last_row: Vec<f64> },
    /// Row `i` is `[1, vᵢ, vᵢ², …, vᵢ^{n−1}]`.
    Vandermonde { v: Vec<f64> },
    /// Entry `(i, j)` is `1 / (sᵢ − tⱼ)`.
    Cauchy { s: Vec<f64>, t: Vec<f64> },
}

fn same_len(a: &[f64], b: &[f64]) -> Result<usize> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "family parameters have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.len())
}

pub fn densify_family(fam: &StructuredFamily) -> Result<Array2<f64>> {
    match fam {
        StructuredFamily::Toeplitz { col, row } => {
            let n = same_len(col, row)?;
            if col[0] != row[0] {
                return Err(Error::InvalidArgument("Toeplitz col[0] must equal row[0]".into()));
            }
            Ok(Array2::from_shape_fn((n, n), |(i, j)| if i >= j { col[i - j] } else { row[j - i] }))
        }
        StructuredFamily::Hankel { col, last_row } => {
            let n = same_len(col, last_row)?;
            if col[n - 1] != last_row[0] {
                return Err(Error::InvalidArgument("Hankel col[n-1] must equal last_row[0]".into()));
            }
            let anti: Vec<f64> = col.iter().chain(&last_row[1..]).copied().collect();
            Ok(Array2::from_shape_fn((n, n), |(i, j)| anti[i + j]))
        }
        StructuredFamily::Vandermonde { v } => {
            let n = v.len();
            if n == 0 {
                return Err(Error::DimensionMismatch("empty Vandermonde nodes".into()));
            }
            Ok(Array2::from_shape_fn((n, n), |(i, j)| v[i].powi(j as i32)))
        }
        StructuredFamily::Cauchy { s, t } => {
            let n = same_len(s, t)?;
            for (i, si) in s.iter().enumerate() {
                if let Some(j) = t.iter().position(|tj| tj == si) {
                    return Err(Error::CauchyPoleCollision { i, j });
                }
            }
            Ok(Array2::from_shape_fn((n, n), |(i, j)| 1.0 / (s[i] - t[j])))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, rel_error};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn toeplitz(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let col = rand_vec(rng, n);
        let mut row = rand_vec(rng, n);
        row[0] = col[0];
        densify_family(&StructuredFamily::Toeplitz { col, row }).unwrap()
    }

    fn naive_mul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        Array2::from_shape_fn((a.nrows(), b.ncols()), |(i, j)| {
            (0..a.ncols()).map(|k| a[[i, k]] * b[[k, j]]).sum()
        })
    }

    const Z1: OperatorMatrix = OperatorMatrix::UnitCirculant(1.0);
    const ZM1: OperatorMatrix = OperatorMatrix::UnitCirculant(-1.0);

    #[test]
    fn operator_apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = rand_vec(&mut rng, 6);
        let ops = [
            OperatorMatrix::UnitCirculant(2.0),
            OperatorMatrix::UnitCirculantTranspose(-3.0),
            OperatorMatrix::Diagonal(rand_vec(&mut rng, 6)),
            OperatorMatrix::SymmetrizedShift,
        ];
        for op in ops {
            let dense = op.dense(6).unwrap().dot(&ndarray::arr1(&v)).to_vec();
            let fast = op.apply(&v).unwrap();
            for (a, b) in dense.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-15, "{op:?}");
            }
            assert_eq!(op.transpose().dense(6).unwrap(), op.dense(6).unwrap().t());
        }
    }

    #[test]
    fn unit_circulant_densifies_to_shift() {
        let z = OperatorMatrix::UnitCirculant(-2.0).dense(3).unwrap();
        assert_eq!(z, array![[0.0, 0.0, -2.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
    }

    #[test]
    fn diagonal_length_mismatch() {
        let m = Array2::<f64>::eye(3);
        let r = apply_sylvester(&OperatorMatrix::Diagonal(vec![1.0, 2.0]), &Z1, m.view());
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn identity_commutes_with_z1() {
        let m = Array2::<f64>::eye(5);
        let d = apply_sylvester(&Z1, &Z1, m.view()).unwrap();
        assert!(d.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn toeplitz_displacement_lives_on_first_row_and_last_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = toeplitz(&mut rng, 4);
        let d = apply_sylvester(&Z1, &ZM1, t.view()).unwrap();
        for i in 1..4 {
            for j in 0..3 {
                assert_eq!(d[[i, j]], 0.0);
            }
        }
        assert_eq!(numeric_rank(d.view(), DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn sylvester_and_stein_match_loop_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = rand_mat(&mut rng, 7, 7);
        let (a, b) = (Z1.dense(7).unwrap(), ZM1.dense(7).unwrap());
        let syl = naive_mul(&a, &m) - naive_mul(&m, &b);
        assert_eq!(apply_sylvester(&Z1, &ZM1, m.view()).unwrap(), syl);
        let stein = &m - &naive_mul(&naive_mul(&a, &m), &b);
        assert_eq!(apply_stein(&Z1, &ZM1, m.view()).unwrap(), stein);
    }

    #[test]
    fn stein_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = rand_mat(&mut rng, 4, 4);
        let zero = OperatorMatrix::Diagonal(vec![0.0; 4]);
        assert_eq!(apply_stein(&zero, &Z1, m.view()).unwrap(), m);
        let z = Array2::<f64>::zeros((4, 4));
        assert!(apply_stein(&Z1, &ZM1, z.view()).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn numeric_rank_cases() {
        assert_eq!(numeric_rank(Array2::<f64>::zeros((5, 5)).view(), 1e-8), 0);
        let u = array![[1.0], [2.0], [-1.0]];
        let v = array![[0.5], [3.0], [1.0]];
        assert_eq!(numeric_rank(u.dot(&v.t()).view(), 1e-8), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Array2::from_shape_fn((8, 8), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        assert_eq!(numeric_rank(g.view(), 1e-8), 8);
    }

    #[test]
    fn krylov_cases() {
        let mut e1 = vec![0.0; 5];
        e1[0] = 1.0;
        for f in [1.0, -1.0, 0.5] {
            let k = krylov_matrix(&OperatorMatrix::UnitCirculant(f), &e1).unwrap();
            assert_eq!(k, Array2::<f64>::eye(5));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = rand_vec(&mut rng, 5);
        assert_eq!(krylov_matrix(&Z1, &v).unwrap(), dense_f_circulant(1.0, &v));
        let d = rand_vec(&mut rng, 5);
        let k = krylov_matrix(&OperatorMatrix::Diagonal(d.clone()), &v).unwrap();
        for i in 0..5 {
            for p in 0..5 {
                assert!((k[[i, p]] - v[i] * d[i].powi(p as i32)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn operator_powers() {
        for n in 2..=16 {
            let z1 = Z1.dense(n).unwrap();
            let zm1 = ZM1.dense(n).unwrap();
            let (mut p1, mut pm1) = (Array2::<f64>::eye(n), Array2::<f64>::eye(n));
            for _ in 0..n {
                p1 = p1.dot(&z1);
                pm1 = pm1.dot(&zm1);
            }
            assert_eq!(p1, Array2::<f64>::eye(n));
            assert_eq!(pm1, -Array2::<f64>::eye(n));
        }
    }

    #[test]
    fn stein_zero_generators() {
        let gen = GeneratorPair::zeros(4, 1);
        let m = stein_reconstruct(&Z1, 1.0, &ZM1, -1.0, &gen).unwrap();
        assert!(m.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn stein_round_trip_z1_zm1() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gen = GeneratorPair::new(rand_mat(&mut rng, 6, 2), rand_mat(&mut rng, 6, 2)).unwrap();
        let m = stein_reconstruct(&Z1, 1.0, &ZM1, -1.0, &gen).unwrap();
        let back = apply_stein(&Z1, &ZM1, m.view()).unwrap();
        assert!((&back - &gen.outer()).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn stein_precondition_errors() {
        let gen = GeneratorPair::zeros(4, 1);
        assert!(matches!(
            stein_reconstruct(&Z1, 1.0, &Z1, 1.0, &gen),
            Err(Error::SingularDisplacement(_))
        ));
        assert!(matches!(
            stein_reconstruct(&Z1, 2.0, &ZM1, -1.0, &gen),
            Err(Error::InvalidOperatorPowers(_))
        ));
        assert!(matches!(
            stein_reconstruct(&Z1, 1.0, &OperatorMatrix::SymmetrizedShift, -1.0, &gen),
            Err(Error::InvalidOperatorPowers(_))
        ));
    }

    #[test]
    fn stein_route_agrees_with_circulant_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [3, 6, 12] {
            let gen = GeneratorPair::new(rand_mat(&mut rng, n, 2), rand_mat(&mut rng, n, 2)).unwrap();
            let (a_op, a, b_op, b) = toeplitz_stein_operators();
            let via_stein = stein_reconstruct(&a_op, a, &b_op, b, &sylvester_to_stein(&gen)).unwrap();
            let via_circ = toeplitz_like_reconstruct(&gen);
            assert!((&via_stein - &via_circ).iter().all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn toeplitz_like_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen = GeneratorPair::new(rand_mat(&mut rng, 8, 3), rand_mat(&mut rng, 8, 3)).unwrap();
        let m = toeplitz_like_reconstruct(&gen);
        let d = toeplitz_displacement(m.view()).unwrap();
        assert!((&d - &gen.outer()).iter().all(|x| x.abs() < 1e-9));
        assert!(toeplitz_like_reconstruct(&GeneratorPair::zeros(8, 2)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn toeplitz_recovered_from_its_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = toeplitz(&mut rng, 4);
        let gen = extract_generators(t.view(), DEFAULT_RANK_TOL).unwrap();
        assert!(gen.rank() <= 2);
        assert!(rel_error(toeplitz_like_reconstruct(&gen).view(), t.view()) < 1e-12);
    }

    #[test]
    fn extract_circulant_has_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = dense_f_circulant(1.0, &rand_vec(&mut rng, 9));
        let gen = extract_generators(c.view(), DEFAULT_RANK_TOL).unwrap();
        assert!(gen.rank() <= 1);
        assert!(frobenius((toeplitz_like_reconstruct(&gen) - &c).view()) <= 1e-8 * frobenius(c.view()));
    }

    #[test]
    fn extract_dense_random_has_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = Array2::from_shape_fn((8, 8), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let gen = extract_generators(m.view(), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(gen.rank(), 8);
        assert!(frobenius((toeplitz_like_reconstruct(&gen) - &m).view()) <= 1e-8 * frobenius(m.view()));
    }

    #[test]
    fn extract_zero_matrix() {
        let gen = extract_generators(Array2::<f64>::zeros((5, 5)).view(), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(gen.rank(), 0);
    }

    #[test]
    fn family_fixtures() {
        let mut col = vec![0.0; 4];
        col[0] = 2.5;
        let t = densify_family(&StructuredFamily::Toeplitz { col: col.clone(), row: col }).unwrap();
        assert_eq!(t, Array2::<f64>::eye(4) * 2.5);

        let v = densify_family(&StructuredFamily::Vandermonde { v: vec![1.0; 3] }).unwrap();
        assert_eq!(v, Array2::<f64>::ones((3, 3)));

        let c = densify_family(&StructuredFamily::Cauchy { s: vec![2.0, 3.0], t: vec![0.0, 1.0] }).unwrap();
        assert_eq!(c, array![[0.5, 1.0], [1.0 / 3.0, 0.5]]);

        let h = densify_family(&StructuredFamily::Hankel {
            col: vec![1.0, 2.0, 3.0],
            last_row: vec![3.0, 4.0, 5.0],
        })
        .unwrap();
        assert_eq!(h, array![[1.0, 2.0, 3.0], [2.0, 3.0, 4.0], [3.0, 4.0, 5.0]]);
    }

    #[test]
    fn family_errors() {
        let r = densify_family(&StructuredFamily::Cauchy { s: vec![1.0, 2.0], t: vec![2.0, 5.0] });
        assert!(matches!(r, Err(Error::CauchyPoleCollision { i: 1, j: 0 })));
        let r = densify_family(&StructuredFamily::Toeplitz { col: vec![1.0, 2.0], row: vec![3.0, 2.0] });
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn generator_pair_shape_checks() {
        assert!(GeneratorPair::new(Array2::zeros((4, 2)), Array2::zeros((4, 3))).is_err());
        assert!(GeneratorPair::new(Array2::zeros((2, 3)), Array2::zeros((2, 3))).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn reconstruction_round_trip(n in 2usize..14, r_frac in 0.0f64..1.0, seed in any::<u64>()) {
                let r = 1 + ((n - 1) as f64 * r_frac) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let gen = GeneratorPair::new(rand_mat(&mut rng, n, r), rand_mat(&mut rng, n, r)).unwrap();
                let m = toeplitz_like_reconstruct(&gen);
                let d = toeplitz_displacement(m.view()).unwrap();
                prop_assert!((&d - &gen.outer()).iter().all(|x| x.abs() < 1e-9));

                let again = extract_generators(m.view(), DEFAULT_RANK_TOL).unwrap();
                prop_assert!(again.rank() <= r);
                let m2 = toeplitz_like_reconstruct(&again);
                prop_assert!(frobenius((&m2 - &m).view()) <= 1e-8 * frobenius(m.view()));
            }
        }
    }
}
