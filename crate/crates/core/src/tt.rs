//! Tensor trains.
//!
//! Core `μ` is an order-3 tensor of dims `(r_{μ−1}, n_μ, r_μ)` with
//! `r₀ = r_d = 1`; entry `i` of the train is the `1×1` product
//! `G₁(i₁)·G₂(i₂)·…·G_d(i_d)` of the core slices.

use nalgebra::DMatrix;

use crate::cp::CpDecomposition;
use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::matrix::svd;
use crate::tensor::{next_index, DenseTensor};

/// Default cap on the number of entries any densifying operation may produce.
pub const DEFAULT_MAX_DENSE_ENTRIES: u128 = 100_000_000;

/// Environment variable overriding [`DEFAULT_MAX_DENSE_ENTRIES`].
pub const MAX_DENSE_ENV: &str = "LOWRANK_MAX_DENSE_ENTRIES";

/// The dense-materialization cap: `LOWRANK_MAX_DENSE_ENTRIES` if set and
/// parseable, the default otherwise.
pub fn max_dense_entries() -> u128 {
    std::env::var(MAX_DENSE_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DENSE_ENTRIES)
}

/// Errors with [`TensorError::TooLarge`] if a tensor of these dims would
/// exceed `cap` entries.
pub fn check_dense_size(dims: &[usize], cap: u128) -> Result<()> {
    let requested = dims
        .iter()
        .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128))
        .unwrap_or(u128::MAX);
    if requested > cap {
        return Err(TensorError::TooLarge { requested, cap });
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Debug, Clone)]
pub struct TtTensor {
    cores: Vec<DenseTensor>,
}

impl TtTensor {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return arg_err("a tensor train needs at least one core");
        }
        let mut left = 1;
        for (mu, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return shape_err(format!("core {mu} has order {}, expected 3", c.order()));
            }
            if c.dims()[0] != left {
                return shape_err(format!(
                    "core {mu} has left rank {} but the previous right rank is {left}",
                    c.dims()[0]
                ));
            }
            if c.dims().contains(&0) {
                return shape_err(format!("core {mu} has a zero dimension"));
            }
            left = c.dims()[2];
        }
        if left != 1 {
            return shape_err(format!("last core has right rank {left}, expected 1"));
        }
        Ok(TtTensor { cores })
    }

    /// Rank-1 train of zero cores.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let cores = dims
            .iter()
            .map(|&n| DenseTensor::zeros(&[1, n, 1]))
            .collect::<Result<_>>()?;
        TtTensor::new(cores)
    }

    /// Rank-1 train of all-ones cores.
    pub fn ones(dims: &[usize]) -> Result<Self> {
        let cores = dims
            .iter()
            .map(|&n| DenseTensor::filled(&[1, n, 1], 1.0))
            .collect::<Result<_>>()?;
        TtTensor::new(cores)
    }

    /// `x₁ ⊗ … ⊗ x_d` as a rank-1 train.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        let cores = vectors
            .iter()
            .map(|v| DenseTensor::new(vec![1, v.len(), 1], v.clone()))
            .collect::<Result<_>>()?;
        TtTensor::new(cores)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    /// Interior ranks `(r₁, …, r_{d−1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.order() - 1]
            .iter()
            .map(|c| c.dims()[2])
            .collect()
    }

    /// All ranks including the boundary ones: `(1, r₁, …, r_{d−1}, 1)`.
    pub fn boundary_ranks(&self) -> Vec<usize> {
        let mut out = vec![1];
        out.extend(self.cores.iter().map(|c| c.dims()[2]));
        out
    }

    /// The `r_{μ−1} × r_μ` matrix `G_μ(i)`.
    pub fn slice(&self, mu: usize, i: usize) -> DMatrix<f64> {
        let c = &self.cores[mu];
        let (r, n, s) = (c.dims()[0], c.dims()[1], c.dims()[2]);
        DMatrix::from_fn(r, s, |a, b| c.values()[(a * n + i) * s + b])
    }

    fn summed_core(&self, mu: usize) -> DMatrix<f64> {
        (0..self.dims()[mu])
            .map(|i| self.slice(mu, i))
            .reduce(|a, b| a + b)
            .unwrap()
    }
}

/// How TT-SVD and rounding choose the interior ranks.
#[derive(Debug, Clone, PartialEq)]
pub enum TtTruncation {
    /// Hard caps `(r₁, …, r_{d−1})`, clamped to what each unfolding supports.
    Ranks(Vec<usize>),
    /// Total relative error `ε`, split as `ε/√(d−1)` over the SVD steps.
    Tolerance(f64),
}

impl TtTruncation {
    fn validate(&self, d: usize) -> Result<()> {
        match self {
            TtTruncation::Ranks(r) => {
                if r.len() != d.saturating_sub(1) {
                    return arg_err(format!(
                        "expected {} TT ranks, got {}",
                        d.saturating_sub(1),
                        r.len()
                    ));
                }
                if r.contains(&0) {
                    return arg_err("TT ranks must be at least 1");
                }
            }
            TtTruncation::Tolerance(eps) => {
                if !(0.0..1.0).contains(eps) {
                    return arg_err(format!("relative tolerance {eps} outside [0, 1)"));
                }
            }
        }
        Ok(())
    }

    fn rank_at(&self, step: usize, steps: usize, s: &crate::matrix::Svd) -> usize {
        match self {
            TtTruncation::Ranks(r) => r[step].min(s.rank()),
            TtTruncation::Tolerance(eps) => s.rank_for_tolerance(eps / (steps as f64).sqrt()),
        }
    }
}

/// Per-step accounting of a TT-SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct TtQuality {
    /// `θ_μ = ‖W_μ‖²/‖W_{μ−1}‖²`, the energy fraction kept by step `μ`.
    pub step_qualities: Vec<f64>,
    /// `‖E_μ‖²`, the energy discarded by step `μ`.
    pub step_tail_energies: Vec<f64>,
}

impl TtQuality {
    /// `∏ θ_μ = ‖recon‖²/‖A‖²`.
    pub fn global_quality(&self) -> f64 {
        self.step_qualities.iter().product()
    }

    /// `Σ ‖E_μ‖² = ‖A − recon‖²`.
    pub fn total_tail_energy(&self) -> f64 {
        self.step_tail_energies.iter().sum()
    }
}

/// TT-SVD: unfold the first remaining mode against the rest, truncate the
/// SVD, keep `U` as the next core and carry `ΣVᵀ` forward.
pub fn tt_svd(a: &DenseTensor, truncation: &TtTruncation) -> Result<(TtTensor, TtQuality)> {
    let d = a.order();
    truncation.validate(d)?;
    let dims = a.dims();
    let mut cores = Vec::with_capacity(d);
    let mut quality = TtQuality {
        step_qualities: Vec::new(),
        step_tail_energies: Vec::new(),
    };
    // W as a row-major (r_prev · rest) buffer
    let mut w = a.values().to_vec();
    let mut r_prev = 1;
    for (mu, &n) in dims.iter().enumerate().take(d - 1) {
        let rows = r_prev * n;
        let cols = w.len() / rows;
        let s = svd(&DMatrix::from_row_slice(rows, cols, &w));
        let r = truncation.rank_at(mu, d - 1, &s).max(1);
        let before = s.energy();
        let kept: f64 = s.singular_values[..r].iter().map(|x| x * x).sum();
        quality
            .step_qualities
            .push(if before > 0.0 { kept / before } else { 1.0 });
        quality.step_tail_energies.push(s.tail_energy(r));
        let u = s.u.columns(0, r).into_owned();
        cores.push(DenseTensor::new(vec![r_prev, n, r], row_major(&u))?);
        let mut carry = s.v.columns(0, r).transpose();
        for (a, &sigma) in s.singular_values[..r].iter().enumerate() {
            carry.row_mut(a).scale_mut(sigma);
        }
        w = row_major(&carry);
        r_prev = r;
    }
    cores.push(DenseTensor::new(vec![r_prev, dims[d - 1], 1], w)?);
    Ok((TtTensor::new(cores)?, quality))
}

/// One entry as a left-to-right product of slice matrices.
pub fn tt_entry(t: &TtTensor, index: &[usize]) -> Result<f64> {
    let dims = t.dims();
    if index.len() != dims.len() || index.iter().zip(&dims).any(|(&i, &n)| i >= n) {
        return Err(TensorError::IndexOutOfRange {
            index: index.to_vec(),
            dims,
        });
    }
    let mut row = t.slice(0, index[0]);
    for (mu, &i) in index.iter().enumerate().skip(1) {
        row = &row * t.slice(mu, i);
    }
    Ok(row[(0, 0)])
}

/// Densifies under the cap from [`max_dense_entries`].
pub fn tt_reconstruct(t: &TtTensor) -> Result<DenseTensor> {
    tt_reconstruct_with_cap(t, max_dense_entries())
}

pub fn tt_reconstruct_with_cap(t: &TtTensor, cap: u128) -> Result<DenseTensor> {
    let dims = t.dims();
    check_dense_size(&dims, cap)?;
    // w holds the partial contraction as a row-major (prefix entries × r) buffer
    let mut w = vec![1.0];
    let mut r = 1;
    for c in t.cores() {
        let (n, s) = (c.dims()[1], c.dims()[2]);
        let prefix = w.len() / r;
        let g = c.values();
        let mut next = vec![0.0; prefix * n * s];
        for p in 0..prefix {
            for a in 0..r {
                let wa = w[p * r + a];
                if wa == 0.0 {
                    continue;
                }
                for i in 0..n {
                    let src = &g[(a * n + i) * s..(a * n + i + 1) * s];
                    let dst = &mut next[(p * n + i) * s..(p * n + i + 1) * s];
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += wa * y;
                    }
                }
            }
        }
        w = next;
        r = s;
    }
    DenseTensor::new(dims, w)
}

fn check_same_dims(t: &TtTensor, u: &TtTensor) -> Result<()> {
    if t.dims() != u.dims() {
        return shape_err(format!("TT dims {:?} and {:?} differ", t.dims(), u.dims()));
    }
    Ok(())
}

/// Entrywise sum: boundary cores concatenated, interior cores block-diagonal.
pub fn tt_add(t: &TtTensor, u: &TtTensor) -> Result<TtTensor> {
    check_same_dims(t, u)?;
    let d = t.order();
    if d == 1 {
        return TtTensor::new(vec![t.cores[0].add(&u.cores[0])?]);
    }
    let mut cores = Vec::with_capacity(d);
    for mu in 0..d {
        let (g, h) = (&t.cores[mu], &u.cores[mu]);
        let (rg, n, sg) = (g.dims()[0], g.dims()[1], g.dims()[2]);
        let (rh, sh) = (h.dims()[0], h.dims()[2]);
        let r = if mu == 0 { 1 } else { rg + rh };
        let s = if mu == d - 1 { 1 } else { sg + sh };
        // offsets of the second block: shared boundary indices stay at 0
        let (ra, sa) = (
            if mu == 0 { 0 } else { rg },
            if mu == d - 1 { 0 } else { sg },
        );
        let mut core = DenseTensor::zeros(&[r, n, s])?;
        for i in 0..n {
            for a in 0..rg {
                for b in 0..sg {
                    core.values_mut()[(a * n + i) * s + b] += g.values()[(a * n + i) * sg + b];
                }
            }
            for a in 0..rh {
                for b in 0..sh {
                    core.values_mut()[((a + ra) * n + i) * s + b + sa] +=
                        h.values()[(a * n + i) * sh + b];
                }
            }
        }
        cores.push(core);
    }
    TtTensor::new(cores)
}

/// Entrywise product: each slice is the Kronecker product of the two slices.
pub fn tt_hadamard(t: &TtTensor, u: &TtTensor) -> Result<TtTensor> {
    check_same_dims(t, u)?;
    let mut cores = Vec::with_capacity(t.order());
    for (g, h) in t.cores.iter().zip(&u.cores) {
        let (rg, n, sg) = (g.dims()[0], g.dims()[1], g.dims()[2]);
        let (rh, sh) = (h.dims()[0], h.dims()[2]);
        let (r, s) = (rg * rh, sg * sh);
        let core = DenseTensor::from_fn(&[r, n, s], |idx| {
            let (row, i, col) = (idx[0], idx[1], idx[2]);
            let (a, c) = (row / rh, row % rh);
            let (b, e) = (col / sh, col % sh);
            g.values()[(a * n + i) * sg + b] * h.values()[(c * n + i) * sh + e]
        })?;
        cores.push(core);
    }
    TtTensor::new(cores)
}

/// Recompresses a train: right-to-left QR orthogonalization, then a
/// left-to-right truncated-SVD sweep.
pub fn tt_round(t: &TtTensor, truncation: &TtTruncation) -> Result<TtTensor> {
    let d = t.order();
    truncation.validate(d)?;
    let mut cores = t.cores.clone();
    for mu in (1..d).rev() {
        let (r, n, s) = (
            cores[mu].dims()[0],
            cores[mu].dims()[1],
            cores[mu].dims()[2],
        );
        let m = DMatrix::from_row_slice(r, n * s, cores[mu].values());
        let qr = m.transpose().qr();
        let (q, rr) = (qr.q(), qr.r());
        let k = q.ncols();
        cores[mu] = DenseTensor::new(vec![k, n, s], row_major(&q.transpose()))?;
        let prev = &cores[mu - 1];
        let (pr, pn) = (prev.dims()[0], prev.dims()[1]);
        let left = DMatrix::from_row_slice(pr * pn, r, prev.values()) * rr.transpose();
        cores[mu - 1] = DenseTensor::new(vec![pr, pn, k], row_major(&left))?;
    }
    for mu in 0..d.saturating_sub(1) {
        let (r, n, s) = (
            cores[mu].dims()[0],
            cores[mu].dims()[1],
            cores[mu].dims()[2],
        );
        let dec = svd(&DMatrix::from_row_slice(r * n, s, cores[mu].values()));
        let k = truncation.rank_at(mu, d - 1, &dec).max(1);
        let u = dec.u.columns(0, k).into_owned();
        cores[mu] = DenseTensor::new(vec![r, n, k], row_major(&u))?;
        let mut carry = dec.v.columns(0, k).transpose();
        for (a, &sigma) in dec.singular_values[..k].iter().enumerate() {
            carry.row_mut(a).scale_mut(sigma);
        }
        let next = &cores[mu + 1];
        let (nn, ns) = (next.dims()[1], next.dims()[2]);
        let right = carry * DMatrix::from_row_slice(s, nn * ns, next.values());
        cores[mu + 1] = DenseTensor::new(vec![k, nn, ns], row_major(&right))?;
    }
    TtTensor::new(cores)
}

/// Sum of all entries: `∏_μ (Σ_i G_μ(i))`.
pub fn tt_partition(t: &TtTensor) -> f64 {
    let mut acc = t.summed_core(0);
    for mu in 1..t.order() {
        acc = &acc * t.summed_core(mu);
    }
    acc[(0, 0)]
}

/// Sums out every mode except `mu`.
pub fn tt_marginal(t: &TtTensor, mu: usize) -> Result<DenseTensor> {
    if mu >= t.order() {
        return arg_err(format!(
            "mode {mu} out of range for an order-{} train",
            t.order()
        ));
    }
    let mut left: DMatrix<f64> = DMatrix::identity(1, 1);
    for nu in 0..mu {
        left = &left * t.summed_core(nu);
    }
    let mut right: DMatrix<f64> = DMatrix::identity(1, 1);
    for nu in (mu + 1..t.order()).rev() {
        right = t.summed_core(nu) * right;
    }
    let values = (0..t.dims()[mu])
        .map(|i| (&left * t.slice(mu, i) * &right)[(0, 0)])
        .collect();
    DenseTensor::from_vector(values)
}

/// CP to TT with every interior rank equal to the CP rank: the first core
/// holds the weighted first factor, interior slices are `Diag(X_μ[i, :])`
/// and the last core holds the last factor.
pub fn cp_to_tt(cp: &CpDecomposition) -> Result<TtTensor> {
    let d = cp.order();
    let r = cp.rank();
    let dims = cp.dims();
    let f = &cp.factors;
    let w = &cp.weights;
    if d == 1 {
        let values = (0..dims[0])
            .map(|i| (0..r).map(|a| w[a] * f[0][(i, a)]).sum())
            .collect();
        return TtTensor::new(vec![DenseTensor::new(vec![1, dims[0], 1], values)?]);
    }
    let mut cores = Vec::with_capacity(d);
    cores.push(DenseTensor::from_fn(&[1, dims[0], r], |idx| {
        w[idx[2]] * f[0][(idx[1], idx[2])]
    })?);
    for (mu, x) in f.iter().enumerate().take(d - 1).skip(1) {
        cores.push(DenseTensor::from_fn(&[r, dims[mu], r], |idx| {
            if idx[0] == idx[2] {
                x[(idx[1], idx[0])]
            } else {
                0.0
            }
        })?);
    }
    cores.push(DenseTensor::from_fn(&[r, dims[d - 1], 1], |idx| {
        f[d - 1][(idx[1], idx[0])]
    })?);
    TtTensor::new(cores)
}

/// Default cap on the number of terms [`tt_to_cp`] may enumerate.
pub const DEFAULT_MAX_CP_TERMS: u128 = 1_000_000;

/// Expands a train over all interior rank tuples `(α₁, …, α_{d−1})`; term
/// `α` has factor vectors `i ↦ G_μ[α_{μ−1}, i, α_μ]`. Terms with a zero
/// vector are dropped.
pub fn tt_to_cp(t: &TtTensor, max_terms: u128) -> Result<CpDecomposition> {
    let ranks = t.ranks();
    check_dense_size(&ranks, max_terms)?;
    let dims = t.dims();
    let d = t.order();
    let mut columns: Vec<Vec<Vec<f64>>> = vec![Vec::new(); d];
    let mut alpha = vec![0; ranks.len()];
    loop {
        let vectors: Vec<Vec<f64>> = (0..d)
            .map(|mu| {
                let a = if mu == 0 { 0 } else { alpha[mu - 1] };
                let b = if mu == d - 1 { 0 } else { alpha[mu] };
                let c = &t.cores[mu];
                let (n, s) = (c.dims()[1], c.dims()[2]);
                (0..n).map(|i| c.values()[(a * n + i) * s + b]).collect()
            })
            .collect();
        if vectors.iter().all(|v| v.iter().any(|&x| x != 0.0)) {
            for (mu, v) in vectors.into_iter().enumerate() {
                columns[mu].push(v);
            }
        }
        if !next_index(&mut alpha, &ranks) {
            break;
        }
    }
    if columns[0].is_empty() {
        // the zero tensor: one zero-weight term
        let factors = dims
            .iter()
            .map(|&n| DMatrix::from_fn(n, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }))
            .collect();
        return CpDecomposition::from_factors(vec![0.0], factors);
    }
    let r = columns[0].len();
    let factors = columns
        .into_iter()
        .zip(&dims)
        .map(|(cols, &n)| DMatrix::from_fn(n, r, |i, a| cols[a][i]))
        .collect();
    CpDecomposition::from_factors(vec![1.0; r], factors)
}

/// The rank-2 train of `Σ_μ f_μ(i_μ)`: `u(i) = (f₁(i), 1)`,
/// `G_μ(i) = [[1, 0], [f_μ(i), 1]]`, `v(i) = (1, f_d(i))ᵀ`.
pub fn additive_tt(fs: &[Vec<f64>]) -> Result<TtTensor> {
    let d = fs.len();
    if d < 2 {
        return arg_err("the additive construction needs at least two modes");
    }
    if fs.iter().any(|f| f.is_empty()) {
        return shape_err("every mode needs at least one value");
    }
    let mut cores = Vec::with_capacity(d);
    cores.push(DenseTensor::from_fn(&[1, fs[0].len(), 2], |idx| {
        if idx[2] == 0 {
            fs[0][idx[1]]
        } else {
            1.0
        }
    })?);
    for f in &fs[1..d - 1] {
        cores.push(DenseTensor::from_fn(&[2, f.len(), 2], |idx| {
            match (idx[0], idx[2]) {
                (0, 0) | (1, 1) => 1.0,
                (1, 0) => f[idx[1]],
                _ => 0.0,
            }
        })?);
    }
    cores.push(DenseTensor::from_fn(&[2, fs[d - 1].len(), 1], |idx| {
        if idx[0] == 0 {
            1.0
        } else {
            fs[d - 1][idx[1]]
        }
    })?);
    TtTensor::new(cores)
}
