//! Dense tensors and the elementary reorganizations built on them.
//!
//! Storage is generalized row-major: the last index runs fastest. With that
//! order, vectorization, reshaping into consecutive mode blocks, and
//! matricization over the last mode are pure relabelings of the flat buffer.
//!
//! Modes and multi-indices are 0-based in the Rust API. The command-line
//! front end converts from the 1-based convention users type.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{arg_err, shape_err, Result, TensorError};

/// An order-`d` real array with explicit dimensions and row-major storage.
#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

/// A multi-index addressing one entry of a tensor, one 0-based index per mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    /// Converts user-facing 1-based indices to the internal 0-based form.
    pub fn from_one_based(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&i| {
                i.checked_sub(1)
                    .ok_or_else(|| TensorError::InvalidArgument("indices are 1-based".into()))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Norm selector for [`DenseTensor::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// A permutation of mode positions.
///
/// Applying `σ` to a tensor moves the factor sitting at position `σ(μ)` to
/// position `μ`: for `σ = [2, 0, 1]`, `a⊗b⊗c` becomes `c⊗a⊗b`, and the entry
/// rule is `B[i_{σ(0)}, …, i_{σ(d-1)}] = A[i_0, …, i_{d-1}]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; image.len()];
        for &s in &image {
            if s >= image.len() || seen[s] {
                return arg_err(format!("{image:?} is not a permutation"));
            }
            seen[s] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(d: usize) -> Self {
        Permutation {
            image: (0..d).collect(),
        }
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.image.len()];
        for (mu, &s) in self.image.iter().enumerate() {
            inv[s] = mu;
        }
        Permutation { image: inv }
    }

    /// The permutation equal to applying `first` and then `self`, so that
    /// `A.permute(&first)?.permute(self)? == A.permute(&self.after(&first))?`.
    pub fn after(&self, first: &Permutation) -> Self {
        assert_eq!(self.len(), first.len(), "permutation lengths differ");
        Permutation {
            image: self.image.iter().map(|&s| first.image[s]).collect(),
        }
    }

    /// Signature, +1 for even and -1 for odd permutations.
    pub fn sign(&self) -> f64 {
        let mut visited = vec![false; self.image.len()];
        let mut transpositions = 0;
        for start in 0..self.image.len() {
            if visited[start] {
                continue;
            }
            let mut len = 0;
            let mut j = start;
            while !visited[j] {
                visited[j] = true;
                j = self.image[j];
                len += 1;
            }
            transpositions += len - 1;
        }
        if transpositions % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// All `d!` permutations of `d` positions, in lexicographic order.
    pub fn all(d: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..d).collect();
        loop {
            out.push(Permutation {
                image: current.clone(),
            });
            // next lexicographic permutation
            let Some(i) = (1..d).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..d).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }
}

/// Row-major strides for `dims`.
pub(crate) fn strides_of(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for mu in (0..dims.len().saturating_sub(1)).rev() {
        strides[mu] = strides[mu + 1] * dims[mu + 1];
    }
    strides
}

/// Advances a row-major odometer; returns false after the last index.
pub(crate) fn next_index(index: &mut [usize], dims: &[usize]) -> bool {
    for mu in (0..dims.len()).rev() {
        index[mu] += 1;
        if index[mu] < dims[mu] {
            return true;
        }
        index[mu] = 0;
    }
    false
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return shape_err("a tensor needs at least one mode");
        }
        if dims.contains(&0) {
            return shape_err(format!("zero-sized mode in {dims:?}"));
        }
        let n = checked_len(&dims)?;
        if values.len() != n {
            return shape_err(format!(
                "{} values supplied for dims {dims:?} ({n} expected)",
                values.len()
            ));
        }
        Ok(DenseTensor { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return shape_err(format!("invalid dims {dims:?}"));
        }
        let n = checked_len(dims)?;
        Ok(DenseTensor {
            dims: dims.to_vec(),
            values: vec![value; n],
        })
    }

    /// Builds a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0; dims.len()];
        for v in t.values.iter_mut() {
            *v = f(&idx);
            next_index(&mut idx, dims);
        }
        Ok(t)
    }

    /// The order-0 value represented with `dims = [1]`.
    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            dims: vec![1],
            values: vec![value],
        }
    }

    pub fn from_vector(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(vec![n], values)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(m[(i, j)]);
            }
        }
        DenseTensor {
            dims: vec![rows, cols],
            values,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.order() != 2 {
            return shape_err(format!(
                "expected an order-2 tensor, got dims {:?}",
                self.dims
            ));
        }
        Ok(DMatrix::from_row_slice(
            self.dims[0],
            self.dims[1],
            &self.values,
        ))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.dims)
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.order() || index.iter().zip(&self.dims).any(|(&i, &n)| i >= n) {
            return Err(TensorError::IndexOutOfRange {
                index: index.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(index.iter().zip(self.strides()).map(|(&i, s)| i * s).sum())
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset(index)?])
    }

    /// Entry at `index`; panics when out of range.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.get(index).expect("index out of range")
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let k = self.offset(index)?;
        self.values[k] = value;
        Ok(())
    }

    /// Relabels the dimensions while keeping the flat buffer.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, self.values.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        DenseTensor {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    fn zip_with(&self, other: &DenseTensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims != other.dims {
            return shape_err(format!("dims {:?} and {:?} differ", self.dims, other.dims));
        }
        Ok(DenseTensor {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &DenseTensor) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.dims != other.dims {
            return shape_err(format!("dims {:?} and {:?} differ", self.dims, other.dims));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm(&self, p: Norm) -> f64 {
        match p {
            Norm::L1 => self.values.iter().map(|v| v.abs()).sum(),
            Norm::L2 => self.values.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Inf => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn norm2(&self) -> f64 {
        self.norm(Norm::L2)
    }

    pub fn norm2_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Sum of all entries (the partition function of a nonnegative tensor).
    pub fn partition_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Outer product; dims concatenate and entries multiply.
    pub fn tensor_product(&self, other: &DenseTensor) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut values = Vec::with_capacity(self.len() * other.len());
        for &a in &self.values {
            values.extend(other.values.iter().map(|&b| a * b));
        }
        DenseTensor { dims, values }
    }

    pub fn permute(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.order() {
            return arg_err(format!(
                "permutation of {} modes applied to an order-{} tensor",
                sigma.len(),
                self.order()
            ));
        }
        let src_strides = self.strides();
        let dims: Vec<usize> = sigma.image.iter().map(|&s| self.dims[s]).collect();
        // stride in the source buffer for each destination mode
        let step: Vec<usize> = sigma.image.iter().map(|&s| src_strides[s]).collect();
        let mut values = Vec::with_capacity(self.len());
        let mut idx = vec![0; dims.len()];
        loop {
            let off: usize = idx.iter().zip(&step).map(|(i, s)| i * s).sum();
            values.push(self.values[off]);
            if !next_index(&mut idx, &dims) {
                break;
            }
        }
        Ok(DenseTensor { dims, values })
    }

    /// Fixes the modes in `modes` at the indices in `fixed` and returns the
    /// tensor over the remaining modes, in their original order. Fixing every
    /// mode yields a `dims = [1]` scalar.
    pub fn slice(&self, modes: &[usize], fixed: &[usize]) -> Result<Self> {
        if modes.len() != fixed.len() {
            return arg_err("one fixed index is needed per fixed mode");
        }
        let mut pinned: Vec<Option<usize>> = vec![None; self.order()];
        for (&mu, &i) in modes.iter().zip(fixed) {
            if mu >= self.order() {
                return arg_err(format!("mode {mu} out of range for order {}", self.order()));
            }
            if pinned[mu].is_some() {
                return arg_err(format!("mode {mu} fixed twice"));
            }
            if i >= self.dims[mu] {
                return Err(TensorError::IndexOutOfRange {
                    index: fixed.to_vec(),
                    dims: modes.iter().map(|&m| self.dims[m]).collect(),
                });
            }
            pinned[mu] = Some(i);
        }
        let strides = self.strides();
        let base: usize = pinned
            .iter()
            .zip(&strides)
            .filter_map(|(p, s)| p.map(|i| i * s))
            .sum();
        let free: Vec<usize> = (0..self.order())
            .filter(|&mu| pinned[mu].is_none())
            .collect();
        if free.is_empty() {
            return Ok(DenseTensor::scalar(self.values[base]));
        }
        let dims: Vec<usize> = free.iter().map(|&mu| self.dims[mu]).collect();
        let step: Vec<usize> = free.iter().map(|&mu| strides[mu]).collect();
        let mut values = Vec::with_capacity(dims.iter().product());
        let mut idx = vec![0; dims.len()];
        loop {
            values
                .push(self.values[base + idx.iter().zip(&step).map(|(i, s)| i * s).sum::<usize>()]);
            if !next_index(&mut idx, &dims) {
                break;
            }
        }
        Ok(DenseTensor { dims, values })
    }

    /// Aggregates consecutive mode blocks into single modes. Each block lists
    /// its modes; blocks must be consecutive, in order, and cover every mode.
    pub fn reshape(&self, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut next = 0;
        let mut dims = Vec::with_capacity(blocks.len());
        for block in blocks {
            if block.is_empty() {
                return arg_err("empty block in partition");
            }
            for &mu in block {
                if mu != next {
                    return arg_err(format!(
                        "partition {blocks:?} is not consecutive and ordered over {} modes",
                        self.order()
                    ));
                }
                next += 1;
            }
            dims.push(
                block
                    .iter()
                    .map(|&mu| self.dims.get(mu).copied().unwrap_or(0))
                    .product(),
            );
        }
        if next != self.order() {
            return arg_err(format!(
                "partition {blocks:?} does not cover all {} modes",
                self.order()
            ));
        }
        Self::new(dims, self.values.clone())
    }

    /// Unfolds into a matrix with mode `mode` as the column index and the
    /// remaining modes, flattened row-major in ascending order, as rows.
    pub fn matricize(&self, mode: usize) -> Result<Self> {
        if mode >= self.order() {
            return arg_err(format!(
                "mode {mode} out of range for order {}",
                self.order()
            ));
        }
        let mut image: Vec<usize> = (0..self.order()).filter(|&m| m != mode).collect();
        image.push(mode);
        let p = self.permute(&Permutation { image })?;
        let rows = self.len() / self.dims[mode];
        p.with_dims(vec![rows, self.dims[mode]])
    }

    /// Inverse of [`matricize`](Self::matricize) for a tensor of dims `dims`.
    pub fn dematricize(m: &DenseTensor, dims: &[usize], mode: usize) -> Result<Self> {
        if mode >= dims.len() {
            return arg_err(format!("mode {mode} out of range for order {}", dims.len()));
        }
        let n = checked_len(dims)?;
        if m.order() != 2 || m.dims[1] != dims[mode] || m.len() != n {
            return shape_err(format!(
                "matrix {:?} cannot fold into {dims:?} at mode {mode}",
                m.dims
            ));
        }
        let mut moved: Vec<usize> = (0..dims.len())
            .filter(|&k| k != mode)
            .map(|k| dims[k])
            .collect();
        moved.push(dims[mode]);
        let t = m.with_dims(moved)?;
        // mode sat last; move it back to position `mode`
        let mut image: Vec<usize> = (0..dims.len() - 1).collect();
        image.insert(mode, dims.len() - 1);
        t.permute(&Permutation { image })
    }

    /// Unfolds as (modes `0..split`) × (modes `split..d`), both row-major.
    pub fn unfold_at(&self, split: usize) -> Result<Self> {
        if split == 0 || split >= self.order() {
            return arg_err(format!(
                "split {split} must lie strictly inside 0..{}",
                self.order()
            ));
        }
        let rows: usize = self.dims[..split].iter().product();
        self.with_dims(vec![rows, self.len() / rows])
    }

    pub fn vectorize(&self) -> Self {
        DenseTensor {
            dims: vec![self.len()],
            values: self.values.clone(),
        }
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| TensorError::Shape(format!("dims {dims:?} overflow")))
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

fn require_cubical(a: &DenseTensor) -> Result<()> {
    if a.dims.iter().any(|&n| n != a.dims[0]) {
        return shape_err(format!(
            "expected equal dims on every mode, got {:?}",
            a.dims
        ));
    }
    Ok(())
}

/// Symmetric part: the average of `σ(A)` over all mode permutations.
pub fn sym(a: &DenseTensor) -> Result<DenseTensor> {
    signed_average(a, false)
}

/// Antisymmetric part: the signed average of `σ(A)` over all permutations.
pub fn antisym(a: &DenseTensor) -> Result<DenseTensor> {
    signed_average(a, true)
}

fn signed_average(a: &DenseTensor, signed: bool) -> Result<DenseTensor> {
    require_cubical(a)?;
    let d = a.order();
    let mut acc = DenseTensor::zeros(&a.dims)?;
    for sigma in Permutation::all(d) {
        let s = if signed { sigma.sign() } else { 1.0 };
        let p = a.permute(&sigma)?;
        for (x, y) in acc.values.iter_mut().zip(&p.values) {
            *x += s * y;
        }
    }
    Ok(acc.scale(1.0 / factorial(d)))
}

/// `a ∧ b = ½(a⊗b − b⊗a)` for two vectors of equal length.
pub fn wedge(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.order() != 1 || b.order() != 1 || a.len() != b.len() {
        return shape_err("wedge needs two vectors of equal length");
    }
    a.tensor_product(b)
        .sub(&b.tensor_product(a))
        .map(|t| t.scale(0.5))
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 16;
        write!(f, "DenseTensor {{ dims: {:?}, values: ", self.dims)?;
        if self.values.len() <= SHOWN {
            write!(f, "{:?} }}", self.values)
        } else {
            write!(
                f,
                "{:?}… ({} total) }}",
                &self.values[..SHOWN],
                self.values.len()
            )
        }
    }
}
