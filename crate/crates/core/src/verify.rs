//! Property suite over the dense displacement algebra: the displacement-rank
//! table of the classical structured families, reconstruction round trips,
//! the Stein/Sylvester cross-check and richness bounds.
//!
//! Fixtures are random with a fixed seed. Rank checks use
//! [`DEFAULT_RANK_TOL`]; residual checks use [`VerifyOptions::tolerance`]
//! scaled by the size of the quantity being reproduced.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circulant::{dense_f_circulant, unit_circulant};
use crate::displacement::{
    apply_stein, apply_sylvester, densify_family, extract_generators, numeric_rank, stein_reconstruct,
    sylvester_to_stein, toeplitz_displacement, toeplitz_like_reconstruct_scaled, toeplitz_stein_operators,
    GeneratorPair, OperatorMatrix, StructuredFamily, DEFAULT_RANK_TOL,
};
use crate::linalg::{frobenius, inverse, max_abs};
use crate::Result;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Deliberate defects for checking that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Drops the leading `½` of the Toeplitz-like reconstruction formula.
    DropHalf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Relative tolerance for residual checks.
    pub tolerance: f64,
    pub seed: u64,
    /// Random draws per fixture and size.
    pub draws: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            draws: 20,
            fault: None,
        }
    }
}

impl VerifyOptions {
    fn reconstruct(&self, gen: &GeneratorPair) -> Array2<f64> {
        let scale = match self.fault {
            Some(Fault::DropHalf) => 1.0,
            None => 0.5,
        };
        toeplitz_like_reconstruct_scaled(gen, scale)
    }
}

/// Largest measured displacement rank of one family at one size.
#[derive(Clone, Debug, PartialEq)]
pub struct RankRow {
    pub family: &'static str,
    pub operators: &'static str,
    pub bound: usize,
    pub n: usize,
    pub max_rank: usize,
}

impl RankRow {
    pub fn passed(&self) -> bool {
        self.max_rank <= self.bound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub rank_rows: Vec<RankRow>,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rank_rows.iter().all(RankRow::passed) && self.properties.iter().all(|p| p.passed)
    }

    /// Names of failing properties (rank rows appear as `rank_table`).
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = self.properties.iter().filter(|p| !p.passed).map(|p| p.name).collect();
        if !self.rank_rows.iter().all(RankRow::passed) {
            out.insert(0, "rank_table");
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::from("displacement rank table\n");
        let _ = writeln!(s, "  {:<28} {:<24} {:>4} {:>6} {:>6}", "matrix", "operators (A, B)", "n", "bound", "rank");
        for row in &self.rank_rows {
            let _ = writeln!(
                s,
                "  {:<28} {:<24} {:>4} {:>6} {:>6}  {}",
                row.family,
                row.operators,
                row.n,
                row.bound,
                row.max_rank,
                if row.passed() { "ok" } else { "FAIL" }
            );
        }
        s.push_str("properties\n");
        for p in &self.properties {
            let _ = writeln!(s, "  {:<36} {:<4}  {}", p.name, if p.passed { "ok" } else { "FAIL" }, p.detail);
        }
        s
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

pub fn random_generators(rng: &mut ChaCha8Rng, n: usize, r: usize) -> GeneratorPair {
    GeneratorPair::new(rand_mat(rng, n, r), rand_mat(rng, n, r)).expect("r <= n")
}

pub fn random_toeplitz(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let col = rand_vec(rng, n);
    let mut row = rand_vec(rng, n);
    row[0] = col[0];
    densify_family(&StructuredFamily::Toeplitz { col, row }).expect("valid Toeplitz parameters")
}

/// Random Toeplitz plus `n` on the diagonal, so it is safely invertible.
pub fn dominant_toeplitz(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    random_toeplitz(rng, n) + Array2::<f64>::eye(n) * n as f64
}

pub fn random_hankel(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let col = rand_vec(rng, n);
    let mut last_row = rand_vec(rng, n);
    last_row[0] = col[n - 1];
    densify_family(&StructuredFamily::Hankel { col, last_row }).expect("valid Hankel parameters")
}

/// Interlaced nodes `sᵢ ≈ i + ½`, `tⱼ ≈ j` keep the Cauchy matrix well
/// conditioned.
fn cauchy_nodes(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let s = (0..n).map(|i| i as f64 + 0.5 + rng.random_range(-0.2..0.2)).collect();
    let t = (0..n).map(|j| j as f64 + rng.random_range(-0.2..0.2)).collect();
    (s, t)
}

/// One displacement-rank row: family name, operator description, bound, and
/// a generator of `(matrix, A, B)` fixtures.
struct RankCase {
    family: &'static str,
    operators: &'static str,
    bound: usize,
    make: fn(&mut ChaCha8Rng, usize) -> Result<(Array2<f64>, OperatorMatrix, OperatorMatrix)>,
}

fn rank_cases() -> Vec<RankCase> {
    use OperatorMatrix::*;
    vec![
        RankCase {
            family: "Toeplitz T",
            operators: "Z1, Z-1",
            bound: 2,
            make: |rng, n| Ok((random_toeplitz(rng, n), UnitCirculant(1.0), UnitCirculant(-1.0))),
        },
        RankCase {
            family: "Toeplitz inverse T^-1",
            operators: "Z1, Z-1",
            bound: 2,
            make: |rng, n| Ok((inverse(dominant_toeplitz(rng, n).view())?, UnitCirculant(1.0), UnitCirculant(-1.0))),
        },
        RankCase {
            family: "Hankel H",
            operators: "Z1, Z0^T",
            bound: 2,
            make: |rng, n| Ok((random_hankel(rng, n), UnitCirculant(1.0), UnitCirculantTranspose(0.0))),
        },
        RankCase {
            family: "Hankel inverse H^-1",
            operators: "Z1, Z0^T",
            bound: 2,
            make: |rng, n| {
                // Reversing the rows of a Toeplitz matrix gives a Hankel one.
                let h = crate::linalg::reversal(n).dot(&dominant_toeplitz(rng, n));
                Ok((inverse(h.view())?, UnitCirculant(1.0), UnitCirculantTranspose(0.0)))
            },
        },
        RankCase {
            family: "Toeplitz + Hankel T+H",
            operators: "Z0+Z0^T, Z0+Z0^T",
            bound: 4,
            make: |rng, n| Ok((random_toeplitz(rng, n) + random_hankel(rng, n), SymmetrizedShift, SymmetrizedShift)),
        },
        RankCase {
            family: "Vandermonde V",
            operators: "diag(v), Z0",
            bound: 1,
            make: |rng, n| {
                let v = rand_vec(rng, n);
                let m = densify_family(&StructuredFamily::Vandermonde { v: v.clone() })?;
                Ok((m, Diagonal(v), UnitCirculant(0.0)))
            },
        },
        RankCase {
            family: "Vandermonde transpose V^T",
            operators: "Z0^T, diag(v)",
            bound: 1,
            make: |rng, n| {
                let v = rand_vec(rng, n);
                let m = densify_family(&StructuredFamily::Vandermonde { v: v.clone() })?;
                Ok((m.reversed_axes(), UnitCirculantTranspose(0.0), Diagonal(v)))
            },
        },
        RankCase {
            family: "Cauchy C",
            operators: "diag(s), diag(t)",
            bound: 1,
            make: |rng, n| {
                let (s, t) = cauchy_nodes(rng, n);
                let m = densify_family(&StructuredFamily::Cauchy { s: s.clone(), t: t.clone() })?;
                Ok((m, Diagonal(s), Diagonal(t)))
            },
        },
        RankCase {
            family: "Cauchy inverse C^-1",
            operators: "diag(t), diag(s)",
            bound: 1,
            make: |rng, n| {
                let (s, t) = cauchy_nodes(rng, n);
                let m = densify_family(&StructuredFamily::Cauchy { s: s.clone(), t: t.clone() })?;
                Ok((inverse(m.view())?, Diagonal(t), Diagonal(s)))
            },
        },
    ]
}

/// Measures every row of the displacement-rank table at each size in `ns`.
pub fn rank_table(ns: &[usize], draws: usize, seed: u64) -> Result<Vec<RankRow>> {
    let mut rows = Vec::new();
    for (k, case) in rank_cases().into_iter().enumerate() {
        for &n in ns {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 * k as u64 + n as u64));
            let mut max_rank = 0;
            for _ in 0..draws {
                let (m, a, b) = (case.make)(&mut rng, n)?;
                let d = apply_sylvester(&a, &b, m.view())?;
                max_rank = max_rank.max(numeric_rank(d.view(), DEFAULT_RANK_TOL));
            }
            rows.push(RankRow {
                family: case.family,
                operators: case.operators,
                bound: case.bound,
                n,
                max_rank,
            });
        }
    }
    Ok(rows)
}

/// Worst `max|got − want| / max(1, max|want|)` over the draws.
fn worst<F>(draws: usize, mut f: F) -> Result<f64>
where
    F: FnMut() -> Result<(Array2<f64>, Array2<f64>)>,
{
    let mut worst = 0.0_f64;
    for _ in 0..draws {
        let (got, want) = f()?;
        let err = max_abs((&got - &want).view()) / max_abs(want.view()).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

fn residual_property(name: &'static str, err: f64, tol: f64) -> PropertyResult {
    PropertyResult {
        name,
        passed: err <= tol,
        detail: format!("worst relative residual {err:.2e} (tolerance {tol:.0e})"),
    }
}

fn rank_property(name: &'static str, rank: usize, bound: usize) -> PropertyResult {
    PropertyResult {
        name,
        passed: rank <= bound,
        detail: format!("displacement rank {rank} (bound {bound})"),
    }
}

/// `Z₁ⁿ = I` and `Z₋₁ⁿ = −I` for `n = 2..=16`.
pub fn operator_powers() -> PropertyResult {
    let mut worst = 0.0_f64;
    for n in 2..=16 {
        for f in [1.0, -1.0] {
            let z = unit_circulant(f, n);
            let mut p = Array2::<f64>::eye(n);
            for _ in 0..n {
                p = p.dot(&z);
            }
            worst = worst.max(max_abs((p - Array2::<f64>::eye(n) * f).view()));
        }
    }
    PropertyResult {
        name: "unit_circulant_powers",
        passed: worst == 0.0,
        detail: format!("max |Z_f^n - f I| = {worst:e}"),
    }
}

/// `∇_{Z₁,Z₋₁}[½ Σ Z₁(gⱼ) Z₋₁(J hⱼ)] = GHᵀ` for random generators.
pub fn toeplitz_like_round_trip(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let err = worst(opts.draws, || {
        let n = rng.random_range(2..=16);
        let r = rng.random_range(1..=n);
        let gen = random_generators(rng, n, r);
        Ok((toeplitz_displacement(opts.reconstruct(&gen).view())?, gen.outer()))
    })?;
    Ok(residual_property("toeplitz_like_round_trip", err, opts.tolerance))
}

/// `M − Z₁ M Z₋₁ = GHᵀ` for the Krylov-form Stein solution.
pub fn stein_round_trip(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let (z1, zm1) = (OperatorMatrix::UnitCirculant(1.0), OperatorMatrix::UnitCirculant(-1.0));
    let err = worst(opts.draws, || {
        let n = rng.random_range(2..=12);
        let r = rng.random_range(1..=n);
        let gen = random_generators(rng, n, r);
        let m = stein_reconstruct(&z1, 1.0, &zm1, -1.0, &gen)?;
        Ok((apply_stein(&z1, &zm1, m.view())?, gen.outer()))
    })?;
    Ok(residual_property("stein_round_trip", err, opts.tolerance))
}

/// The Krylov (Stein) and circulant-product (Sylvester) reconstructions of
/// the same Toeplitz-like matrix agree.
pub fn stein_matches_toeplitz_like(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let (a_op, a, b_op, b) = toeplitz_stein_operators();
    let err = worst(opts.draws, || {
        let n = rng.random_range(2..=12);
        let r = rng.random_range(1..=n);
        let gen = random_generators(rng, n, r);
        let stein = stein_reconstruct(&a_op, a, &b_op, b, &sylvester_to_stein(&gen))?;
        Ok((stein, opts.reconstruct(&gen)))
    })?;
    Ok(residual_property("stein_matches_toeplitz_like", err, opts.tolerance))
}

/// Extracting generators of a random dense matrix reports full rank and
/// reconstructs it.
pub fn dense_generator_round_trip(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<PropertyResult> {
    let mut min_rank = usize::MAX;
    let mut err = 0.0_f64;
    for _ in 0..opts.draws {
        let m = rand_mat(rng, 8, 8);
        let gen = extract_generators(m.view(), DEFAULT_RANK_TOL)?;
        min_rank = min_rank.min(gen.rank());
        let back = opts.reconstruct(&gen);
        err = err.max(frobenius((&back - &m).view()) / frobenius(m.view()));
    }
    let tol = opts.tolerance;
    Ok(PropertyResult {
        name: "dense_generator_round_trip",
        passed: min_rank == 8 && err <= tol,
        detail: format!("min rank {min_rank} of 8, worst relative error {err:.2e} (tolerance {tol:.0e})"),
    })
}

fn max_rank_of(draws: usize, mut make: impl FnMut() -> Array2<f64>) -> Result<usize> {
    let mut out = 0;
    for _ in 0..draws {
        let d = toeplitz_displacement(make().view())?;
        out = out.max(numeric_rank(d.view(), DEFAULT_RANK_TOL));
    }
    Ok(out)
}

/// Displacement-rank bounds for circulants, Toeplitz matrices, their
/// products and linear combinations.
pub fn richness(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<PropertyResult>> {
    let n = 16;
    let draws = opts.draws;
    let mut out = Vec::new();
    let circ = max_rank_of(draws, || dense_f_circulant(1.0, &rand_vec(rng, n)))?;
    out.push(rank_property("richness_circulant", circ, 1));
    let skew = max_rank_of(draws, || dense_f_circulant(-1.0, &rand_vec(rng, n)))?;
    out.push(rank_property("richness_skew_circulant", skew, 1));
    let toe = max_rank_of(draws, || random_toeplitz(rng, n))?;
    out.push(rank_property("richness_toeplitz", toe, 2));
    for (t, name) in [(2, "richness_toeplitz_product_2"), (3, "richness_toeplitz_product_3")] {
        let rank = max_rank_of(draws, || {
            let mut p = random_toeplitz(rng, n);
            for _ in 1..t {
                p = p.dot(&random_toeplitz(rng, n));
            }
            p
        })?;
        out.push(rank_property(name, rank, 2 * t));
    }
    let comb = max_rank_of(draws, || {
        let (b1, b2) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        random_toeplitz(rng, n) * b1 + random_toeplitz(rng, n) * b2
    })?;
    out.push(rank_property("richness_toeplitz_combination", comb, 4));
    Ok(out)
}

/// Runs the whole suite.
pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rank_rows = rank_table(&[4, 8, 16], opts.draws, opts.seed)?;
    let mut properties = vec![
        operator_powers(),
        toeplitz_like_round_trip(opts, &mut rng)?,
        stein_round_trip(opts, &mut rng)?,
        stein_matches_toeplitz_like(opts, &mut rng)?,
        dense_generator_round_trip(opts, &mut rng)?,
    ];
    properties.extend(richness(opts, &mut rng)?);
    Ok(VerifyReport { rank_rows, properties })
}
