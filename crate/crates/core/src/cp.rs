//! CP format: weighted sums of rank-one tensors.
//!
//! [`cp_als`] fits a prescribed number of terms by alternating least squares.
//! The block variant solves for a whole factor matrix at once, which is the
//! exact minimizer of the objective in that block; the per-term variant
//! updates one vector of one term at a time. Neither adds line search or
//! regularization: stagnation and degeneracy show up in the returned trace.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contraction::contract_mode;
use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::matrix::{cp_product, khatri_rao_all, pseudo_inverse, svd};
use crate::tensor::DenseTensor;

/// Condition number of `UᵀU` above which the normal equations fall back to
/// the pseudo-inverse.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Relative half-width of the band around `Δ = 0` reported as a boundary case.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// How the factors are initialized before the first sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpInit {
    /// Seeded uniform(−1, 1) entries, columns normalized.
    #[default]
    Random,
    /// Leading singular vectors of each matricization, padded with seeded
    /// random columns when the rank exceeds the mode size.
    Hosvd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlsVariant {
    /// Whole factor matrix per step.
    #[default]
    Block,
    /// One vector of one term per step.
    PerTerm,
}

/// Options shared by the alternating solvers (CP-ALS, HOOI, rank-one power
/// iteration).
#[derive(Debug, Clone, PartialEq)]
pub struct AlsOptions {
    pub max_sweeps: usize,
    /// Stop when a sweep lowers the objective by less than `rel_tol·‖A‖²`.
    pub rel_tol: f64,
    pub seed: u64,
    pub init: CpInit,
    pub variant: AlsVariant,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            max_sweeps: 200,
            rel_tol: 1e-12,
            seed: 0,
            init: CpInit::Random,
            variant: AlsVariant::Block,
        }
    }
}

impl AlsOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps < 1 {
            return arg_err("max_sweeps must be at least 1");
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return arg_err("rel_tol must be nonnegative");
        }
        Ok(())
    }
}

/// Weights `λ_a` and unit-norm factor columns: `Σ_a λ_a x₁⁽ᵃ⁾ ⊗ … ⊗ x_d⁽ᵃ⁾`.
#[derive(Debug, Clone)]
pub struct CpDecomposition {
    pub weights: Vec<f64>,
    pub factors: Vec<DMatrix<f64>>,
}

impl CpDecomposition {
    /// Builds a decomposition from arbitrary factors, moving column norms
    /// into the weights.
    pub fn from_factors(weights: Vec<f64>, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let r = weights.len();
        if factors.is_empty() {
            return arg_err("at least one factor matrix is required");
        }
        if factors.iter().any(|f| f.ncols() != r) {
            return shape_err(format!("factor column counts do not all equal {r}"));
        }
        let mut cp = CpDecomposition { weights, factors };
        cp.normalize();
        Ok(cp)
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    fn normalize(&mut self) {
        for f in self.factors.iter_mut() {
            for (a, w) in self.weights.iter_mut().enumerate() {
                let n = f.column(a).norm();
                if n > 0.0 {
                    f.column_mut(a).unscale_mut(n);
                    *w *= n;
                } else {
                    *w = 0.0;
                    let mut col = f.column_mut(a);
                    col.fill(0.0);
                    col[0] = 1.0;
                }
            }
        }
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        cp_product(&self.factors, Some(&self.weights))
    }
}

/// Dense evaluation of `Σ_a λ_a ⊗_μ x_μ⁽ᵃ⁾`.
pub fn cp_reconstruct(cp: &CpDecomposition) -> Result<DenseTensor> {
    cp.reconstruct()
}

/// Output of [`cp_als`].
#[derive(Debug, Clone)]
pub struct CpAls {
    pub decomposition: CpDecomposition,
    /// `‖A − recon‖²` at initialization (entry 0) and after each sweep.
    pub objective_trace: Vec<f64>,
    /// `‖A − recon‖²` at initialization and after every block update.
    pub block_objectives: Vec<f64>,
    /// Sweeps (1-based) in which the normal equations needed the pseudo-inverse.
    pub ill_conditioned_sweeps: Vec<usize>,
}

fn objective(a: &DenseTensor, cp: &CpDecomposition) -> Result<f64> {
    Ok(a.sub(&cp.reconstruct()?)?.norm2_squared())
}

fn random_factor(rng: &mut ChaCha8Rng, n: usize, r: usize) -> DMatrix<f64> {
    // filled row by row so the draw order does not depend on storage layout
    let mut m = DMatrix::zeros(n, r);
    for i in 0..n {
        for a in 0..r {
            m[(i, a)] = rng.random_range(-1.0..1.0);
        }
    }
    m
}

fn initial_cp(a: &DenseTensor, r: usize, opts: &AlsOptions) -> Result<CpDecomposition> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let factors = match opts.init {
        CpInit::Random => a
            .dims()
            .iter()
            .map(|&n| random_factor(&mut rng, n, r))
            .collect(),
        CpInit::Hosvd => {
            let mut out = Vec::with_capacity(a.order());
            for (mode, &n) in a.dims().iter().enumerate() {
                let s = svd(&a.matricize(mode)?.to_matrix()?);
                let k = r.min(s.rank());
                let mut f = random_factor(&mut rng, n, r);
                f.columns_mut(0, k).copy_from(&s.v.columns(0, k));
                out.push(f);
            }
            out
        }
    };
    CpDecomposition::from_factors(vec![1.0; r], factors)
}

/// Fits `r` rank-one terms to `a` by alternating least squares.
///
/// Block updates run over modes `d−1, …, 0`. Each solves
/// `X_μ = A_(μ)ᵀ U (UᵀU)⁻¹`, where `A_(μ)` is the mode-`μ` matricization and
/// `U` the Khatri–Rao product of the other factors, then moves the column
/// norms of `X_μ` into the weights.
pub fn cp_als(a: &DenseTensor, r: usize, opts: &AlsOptions) -> Result<CpAls> {
    if r < 1 {
        return arg_err("CP rank must be at least 1");
    }
    opts.validate()?;
    if a.values().iter().any(|v| !v.is_finite()) {
        return Err(TensorError::Numerical(
            "input contains NaN or infinite entries".into(),
        ));
    }
    let mut cp = initial_cp(a, r, opts)?;
    let norm2 = a.norm2_squared();
    if norm2 == 0.0 {
        cp.weights.iter_mut().for_each(|w| *w = 0.0);
        return Ok(CpAls {
            decomposition: cp,
            objective_trace: vec![0.0],
            block_objectives: vec![0.0],
            ill_conditioned_sweeps: Vec::new(),
        });
    }

    let start = objective(a, &cp)?;
    let mut trace = vec![start];
    let mut blocks = vec![start];
    let mut flagged = Vec::new();
    let unfoldings: Vec<DMatrix<f64>> = (0..a.order())
        .map(|mode| a.matricize(mode).and_then(|m| m.to_matrix()))
        .collect::<Result<_>>()?;

    for sweep in 1..=opts.max_sweeps {
        let ill = match opts.variant {
            AlsVariant::Block => block_sweep(a, &unfoldings, &mut cp, &mut blocks)?,
            AlsVariant::PerTerm => {
                per_term_sweep(a, &mut cp, &mut blocks)?;
                false
            }
        };
        if ill {
            flagged.push(sweep);
        }
        let obj = *blocks.last().unwrap();
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if prev - obj < opts.rel_tol * norm2 {
            break;
        }
    }
    Ok(CpAls {
        decomposition: cp,
        objective_trace: trace,
        block_objectives: blocks,
        ill_conditioned_sweeps: flagged,
    })
}

fn block_sweep(
    a: &DenseTensor,
    unfoldings: &[DMatrix<f64>],
    cp: &mut CpDecomposition,
    blocks: &mut Vec<f64>,
) -> Result<bool> {
    let r = cp.rank();
    let mut ill = false;
    for mode in (0..a.order()).rev() {
        let others: Vec<&DMatrix<f64>> = cp
            .factors
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != mode)
            .map(|(_, f)| f)
            .collect();
        let (rhs, gram) = if others.is_empty() {
            // order-1 tensor: U is the 1×r all-ones row
            let u = DMatrix::from_element(1, r, 1.0);
            (unfoldings[mode].transpose() * &u, u.transpose() * &u)
        } else {
            let u = khatri_rao_all(&others)?;
            let gram = others
                .iter()
                .map(|f| f.transpose() * *f)
                .reduce(|acc, g| acc.component_mul(&g))
                .unwrap();
            (unfoldings[mode].transpose() * u, gram)
        };
        let s = svd(&gram);
        let smin = *s.singular_values.last().unwrap();
        let well_posed = smin > 0.0 && s.singular_values[0] / smin <= MAX_GRAM_CONDITION;
        let solved = if well_posed {
            gram.clone()
                .cholesky()
                .map(|c| c.solve(&rhs.transpose()).transpose())
        } else {
            None
        };
        let x = match solved {
            Some(x) => x,
            None => {
                ill = true;
                rhs * pseudo_inverse(&gram)
            }
        };
        for c in 0..r {
            let n = x.column(c).norm();
            if n > 0.0 {
                cp.factors[mode].set_column(c, &(x.column(c) / n));
            }
            cp.weights[c] = n;
        }
        blocks.push(objective(a, cp)?);
    }
    Ok(ill)
}

/// `A` contracted with `vectors[ν]` on every mode `ν ≠ keep`.
fn contract_all_but(a: &DenseTensor, keep: usize, vectors: &[DVector<f64>]) -> Result<DenseTensor> {
    let mut current = a.clone();
    for nu in (0..a.order()).rev() {
        if nu != keep {
            let v = DenseTensor::from_vector(vectors[nu].iter().copied().collect())?;
            current = contract_mode(&current, nu, &v)?;
        }
    }
    Ok(current)
}

fn term(cp: &CpDecomposition, a: usize) -> Result<DenseTensor> {
    let cols: Vec<DMatrix<f64>> = cp
        .factors
        .iter()
        .map(|f| f.columns(a, 1).into_owned())
        .collect();
    cp_product(&cols, Some(&[cp.weights[a]]))
}

fn per_term_sweep(a: &DenseTensor, cp: &mut CpDecomposition, blocks: &mut Vec<f64>) -> Result<()> {
    for t in 0..cp.rank() {
        let mut others = a.clone();
        for s in 0..cp.rank() {
            if s != t {
                others = others.sub(&term(cp, s)?)?;
            }
        }
        for mode in (0..a.order()).rev() {
            let vectors: Vec<DVector<f64>> = cp
                .factors
                .iter()
                .map(|f| f.column(t).into_owned())
                .collect();
            let v = contract_all_but(&others, mode, &vectors)?;
            let v = DVector::from_column_slice(v.values());
            let n = v.norm();
            if n > 0.0 {
                cp.factors[mode].set_column(t, &(v / n));
            }
            cp.weights[t] = n;
            blocks.push(objective(a, cp)?);
        }
    }
    Ok(())
}

/// Best rank-one approximation by the fixed-point (higher-order power) iteration.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub alpha: f64,
    pub vectors: Vec<DVector<f64>>,
    /// `‖A − α ⊗_μ x_μ‖²` after each sweep.
    pub objective_trace: Vec<f64>,
}

/// Cycles `x_μ ← normalize(A contracted with all other x_ν)` starting from the
/// leading singular vectors of each matricization; `α = ⟨A, ⊗_μ x_μ⟩`.
pub fn best_rank_one(a: &DenseTensor, opts: &AlsOptions) -> Result<RankOne> {
    opts.validate()?;
    let norm = a.norm2();
    if norm == 0.0 {
        return arg_err("the zero tensor has no best rank-one direction");
    }
    let mut vectors = Vec::with_capacity(a.order());
    for mode in 0..a.order() {
        let s = svd(&a.matricize(mode)?.to_matrix()?);
        vectors.push(s.v.column(0).into_owned());
    }
    let alpha_of = |vs: &[DVector<f64>]| -> Result<f64> {
        Ok(contract_all_but(a, 0, vs)?
            .values()
            .iter()
            .zip(vs[0].iter())
            .map(|(x, y)| x * y)
            .sum())
    };
    let mut alpha = alpha_of(&vectors)?;
    let mut trace = Vec::new();
    for _ in 0..opts.max_sweeps {
        for mode in 0..a.order() {
            let v = contract_all_but(a, mode, &vectors)?;
            let v = DVector::from_column_slice(v.values());
            let n = v.norm();
            if n > 0.0 {
                vectors[mode] = v / n;
            }
        }
        let next = alpha_of(&vectors)?;
        trace.push(rank_one_objective(a, next, &vectors)?);
        let done = (next - alpha).abs() <= opts.rel_tol * norm;
        alpha = next;
        if done {
            break;
        }
    }
    Ok(RankOne {
        alpha,
        vectors,
        objective_trace: trace,
    })
}

fn rank_one_objective(a: &DenseTensor, alpha: f64, vectors: &[DVector<f64>]) -> Result<f64> {
    let cols: Vec<DMatrix<f64>> = vectors
        .iter()
        .map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
        .collect();
    let t = cp_product(&cols, Some(&[alpha]))?;
    Ok(a.sub(&t)?.norm2_squared())
}

fn check_222(a: &DenseTensor) -> Result<()> {
    if a.dims() != [2, 2, 2] {
        return shape_err(format!("expected a 2×2×2 tensor, got dims {:?}", a.dims()));
    }
    Ok(())
}

/// Cayley hyperdeterminant of a 2×2×2 tensor.
///
/// With the frontal slices `A₁ = A[:, :, 0] = [[a, b], [c, d]]` and
/// `A₂ = A[:, :, 1] = [[a', b'], [c', d']]`, this is `(Tr M)² − 4 det M` for
/// `M = adj(A₁)·A₂`, expanded in full.
pub fn hyperdeterminant_222(a: &DenseTensor) -> Result<f64> {
    check_222(a)?;
    let g = |i, j, k| a.at(&[i, j, k]);
    let (a0, b0, c0, d0) = (g(0, 0, 0), g(0, 1, 0), g(1, 0, 0), g(1, 1, 0));
    let (a1, b1, c1, d1) = (g(0, 0, 1), g(0, 1, 1), g(1, 0, 1), g(1, 1, 1));
    Ok(
        a0 * a0 * d1 * d1 + a1 * a1 * d0 * d0 + b0 * b0 * c1 * c1 + b1 * b1 * c0 * c0
            - 2.0
                * (a0 * a1 * d0 * d1
                    + b0 * b1 * c0 * c1
                    + a0 * b0 * c1 * d1
                    + a0 * b1 * c0 * d1
                    + a1 * b0 * c1 * d0
                    + a1 * b1 * c0 * d0)
            + 4.0 * (a0 * b1 * c1 * d0 + a1 * b0 * c0 * d1),
    )
}

/// Real rank class of a 2×2×2 tensor decided by the sign of the hyperdeterminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank222 {
    Rank2,
    Rank3,
    Boundary,
}

impl std::fmt::Display for Rank222 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rank222::Rank2 => "Rank2",
            Rank222::Rank3 => "Rank3",
            Rank222::Boundary => "Boundary",
        })
    }
}

/// `Rank2` when `Δ > tol·max|a|⁴`, `Rank3` when `Δ < −tol·max|a|⁴`.
pub fn rank222_classify(a: &DenseTensor, boundary_tol: f64) -> Result<(f64, Rank222)> {
    let delta = hyperdeterminant_222(a)?;
    let scale = a
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .powi(4);
    let band = boundary_tol * scale;
    let class = if delta > band {
        Rank222::Rank2
    } else if delta < -band {
        Rank222::Rank3
    } else {
        Rank222::Boundary
    };
    Ok((delta, class))
}

/// Parameter-count lower bound on the generic CP rank:
/// `⌈∏n_μ / (Σn_μ − d + 1)⌉`.
pub fn cp_rank_lower_bound(dims: &[usize]) -> usize {
    let entries: u128 = dims.iter().map(|&n| n as u128).product();
    let per_term = dims.iter().map(|&n| n as u128).sum::<u128>() + 1 - dims.len() as u128;
    entries.div_ceil(per_term.max(1)) as usize
}

/// A rank-3 tensor and a rank-2 sequence converging to it.
#[derive(Debug, Clone)]
pub struct BorderRankDemo {
    /// `x₁⊗x₂⊗y₃ + x₁⊗y₂⊗x₃ + y₁⊗x₂⊗x₃`.
    pub target: DenseTensor,
    /// `k(x₁+y₁/k)⊗(x₂+y₂/k)⊗(x₃+y₃/k) − k x₁⊗x₂⊗x₃`.
    pub approx: DenseTensor,
}

fn outer3(a: &DenseTensor, b: &DenseTensor, c: &DenseTensor) -> DenseTensor {
    a.tensor_product(b).tensor_product(c)
}

fn check_pairs(x: &[DenseTensor; 3], y: &[DenseTensor; 3]) -> Result<()> {
    for (u, v) in x.iter().zip(y) {
        if u.order() != 1 || u.dims() != v.dims() {
            return shape_err("each (x, y) pair must be two vectors of equal length");
        }
        let (uu, vv, uv) = (u.inner(u)?, v.inner(v)?, u.inner(v)?);
        if uu * vv - uv * uv <= 1e-12 * uu * vv {
            return arg_err("each (x, y) pair must be linearly independent");
        }
    }
    Ok(())
}

pub fn border_rank_demo(
    x: &[DenseTensor; 3],
    y: &[DenseTensor; 3],
    k: f64,
) -> Result<BorderRankDemo> {
    check_pairs(x, y)?;
    if k == 0.0 {
        return arg_err("k must be nonzero");
    }
    let target = outer3(&x[0], &x[1], &y[2])
        .add(&outer3(&x[0], &y[1], &x[2]))?
        .add(&outer3(&y[0], &x[1], &x[2]))?;
    let shifted: Vec<DenseTensor> = x
        .iter()
        .zip(y)
        .map(|(u, v)| u.add(&v.scale(1.0 / k)))
        .collect::<Result<_>>()?;
    let approx = outer3(&shifted[0], &shifted[1], &shifted[2])
        .scale(k)
        .sub(&outer3(&x[0], &x[1], &x[2]).scale(k))?;
    Ok(BorderRankDemo { target, approx })
}

/// `A − A_k = (y₁⊗y₂⊗x₃ + y₁⊗x₂⊗y₃ + x₁⊗y₂⊗y₃)/k + y₁⊗y₂⊗y₃/k²` up to sign:
/// this returns `A_k − A`, the quantity the sequence adds on top of `A`.
pub fn border_rank_remainder(
    x: &[DenseTensor; 3],
    y: &[DenseTensor; 3],
    k: f64,
) -> Result<DenseTensor> {
    check_pairs(x, y)?;
    let first = outer3(&y[0], &y[1], &x[2])
        .add(&outer3(&y[0], &x[1], &y[2]))?
        .add(&outer3(&x[0], &y[1], &y[2]))?;
    first
        .scale(1.0 / k)
        .add(&outer3(&y[0], &y[1], &y[2]).scale(1.0 / (k * k)))
}
