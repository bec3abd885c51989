//! Contraction of a tensor against another over a subset of its modes.
//!
//! `A •_J X` sums over the modes in `J`, pairing them with the modes of `X`
//! in order. The surviving modes of `A` keep their original relative order.

use crate::error::{arg_err, shape_err, Result};
use crate::tensor::{DenseTensor, Permutation};

/// A strictly increasing list of mode positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSubset(Vec<usize>);

impl ModeSubset {
    pub fn new(modes: Vec<usize>) -> Result<Self> {
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return arg_err(format!("modes {modes:?} are not strictly increasing"));
        }
        Ok(ModeSubset(modes))
    }

    pub fn empty() -> Self {
        ModeSubset(Vec::new())
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `A •_J X`: entry `i'` of the result (over the modes of `A` not in `J`) is
/// `Σ_j a_{i'j} x_j`. Contracting every mode yields the scalar `⟨A, X⟩` as
/// a `dims = [1]` tensor; an empty `J` scales `A` by the single value of `X`.
pub fn contract(a: &DenseTensor, x: &DenseTensor, modes: &ModeSubset) -> Result<DenseTensor> {
    let j = modes.modes();
    if j.last().is_some_and(|&m| m >= a.order()) {
        return arg_err(format!("modes {j:?} out of range for order {}", a.order()));
    }
    if j.is_empty() {
        if x.len() != 1 {
            return shape_err("contracting over no modes needs a single-value operand");
        }
        return Ok(a.scale(x.values()[0]));
    }
    let expected: Vec<usize> = j.iter().map(|&m| a.dims()[m]).collect();
    if x.dims() != expected.as_slice() {
        return shape_err(format!(
            "operand dims {:?} do not match contracted dims {expected:?}",
            x.dims()
        ));
    }

    let free: Vec<usize> = (0..a.order()).filter(|m| !j.contains(m)).collect();
    let mut image = free.clone();
    image.extend_from_slice(j);
    let p = a.permute(&Permutation::new(image)?)?;
    let inner = x.len();
    let rows = a.len() / inner;
    let xv = x.values();
    let out: Vec<f64> = p
        .values()
        .chunks_exact(inner)
        .map(|row| row.iter().zip(xv).map(|(u, v)| u * v).sum())
        .collect();
    debug_assert_eq!(out.len(), rows);
    if free.is_empty() {
        return Ok(DenseTensor::scalar(out[0]));
    }
    DenseTensor::new(free.iter().map(|&m| a.dims()[m]).collect(), out)
}

/// Contracts `A` against `x` over one mode.
pub fn contract_mode(a: &DenseTensor, mode: usize, x: &DenseTensor) -> Result<DenseTensor> {
    contract(a, x, &ModeSubset(vec![mode]))
}

/// Applies several contractions in turn. Each step names modes by their
/// position in the original `A`, so the steps may be given in any order and
/// must not overlap.
pub fn contract_sequence(
    a: &DenseTensor,
    steps: &[(DenseTensor, ModeSubset)],
) -> Result<DenseTensor> {
    let mut labels: Vec<usize> = (0..a.order()).collect();
    let mut current = a.clone();
    for (x, subset) in steps {
        let mut positions = Vec::with_capacity(subset.len());
        for &m in subset.modes() {
            match labels.iter().position(|&l| l == m) {
                Some(p) => positions.push(p),
                None => return arg_err(format!("mode {m} is out of range or already contracted")),
            }
        }
        labels.retain(|l| !subset.modes().contains(l));
        current = contract(&current, x, &ModeSubset(positions))?;
    }
    Ok(current)
}

/// The structure tensor of the matrix–vector product for `m×n` matrices.
///
/// Its dims are `(m·n, n, m)`: the first mode takes `vec A`, the second `x`,
/// and the last is the output, so `apply_bilinear(B, vec A, x) = A·x`.
pub fn structure_tensor_matvec(m: usize, n: usize) -> Result<DenseTensor> {
    // b_{(i,j),k,l} = 1 iff i = l and j = k
    DenseTensor::from_fn(&[m * n, n, m], |idx| {
        let (i, j) = (idx[0] / n, idx[0] % n);
        if i == idx[2] && j == idx[1] {
            1.0
        } else {
            0.0
        }
    })
}

/// `B •_{0,1} (x ⊗ y)` for an order-3 structure tensor whose last mode is the output.
pub fn apply_bilinear(b: &DenseTensor, x: &DenseTensor, y: &DenseTensor) -> Result<DenseTensor> {
    apply_multilinear(b, &[x, y])
}

/// Generalization to `d` inputs: `B` has order `d + 1`, output last.
pub fn apply_multilinear(b: &DenseTensor, inputs: &[&DenseTensor]) -> Result<DenseTensor> {
    if b.order() != inputs.len() + 1 {
        return shape_err(format!(
            "structure tensor of order {} cannot take {} inputs",
            b.order(),
            inputs.len()
        ));
    }
    let mut current = b.clone();
    for x in inputs {
        if x.order() != 1 {
            return shape_err("inputs must be vectors");
        }
        // the next input always pairs with the current first mode
        current = contract_mode(&current, 0, x)?;
    }
    Ok(current)
}
