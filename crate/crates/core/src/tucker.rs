//! Tucker format: a core tensor and one factor matrix per mode.
//!
//! [`hosvd`] takes each factor from an independent SVD of the mode
//! matricization; [`hooi`] then refines the factors one mode at a time with
//! the others held fixed, which never decreases the core energy.

use nalgebra::DMatrix;

use crate::cp::AlsOptions;
use crate::error::{arg_err, shape_err, Result};
use crate::matrix::svd;
use crate::tensor::DenseTensor;

/// Core tensor plus orthonormal factors `U_μ` of shape `n_μ × r_μ`.
#[derive(Debug, Clone)]
pub struct TuckerDecomposition {
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
}

impl TuckerDecomposition {
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor> {
        tucker_reconstruct(self)
    }
}

/// Multiplies mode `mode` of `a` by `m`: the result has `m.nrows()` entries
/// along that mode and `b[…, k, …] = Σ_i m[k, i]·a[…, i, …]`.
pub fn mode_product(a: &DenseTensor, mode: usize, m: &DMatrix<f64>) -> Result<DenseTensor> {
    if mode >= a.order() {
        return arg_err(format!("mode {mode} out of range for order {}", a.order()));
    }
    if m.ncols() != a.dims()[mode] {
        return shape_err(format!(
            "mode {mode} has {} entries but the matrix has {} columns",
            a.dims()[mode],
            m.ncols()
        ));
    }
    let unfolded = a.matricize(mode)?.to_matrix()?;
    let product = unfolded * m.transpose();
    let mut dims = a.dims().to_vec();
    dims[mode] = m.nrows();
    DenseTensor::dematricize(&DenseTensor::from_matrix(&product), &dims, mode)
}

/// Applies one matrix per mode. With `transpose[μ]` false mode `μ` is
/// multiplied by `mats[μ]`, otherwise by its transpose; the cycle runs
/// matricize, multiply, fold back, one mode at a time.
pub fn tucker_apply(
    a: &DenseTensor,
    mats: &[DMatrix<f64>],
    transpose: &[bool],
) -> Result<DenseTensor> {
    if mats.len() != a.order() || transpose.len() != a.order() {
        return shape_err(format!(
            "{} matrices and {} flags for an order-{} tensor",
            mats.len(),
            transpose.len(),
            a.order()
        ));
    }
    let mut current = a.clone();
    for (mode, (m, &t)) in mats.iter().zip(transpose).enumerate() {
        current = if t {
            mode_product(&current, mode, &m.transpose())?
        } else {
            mode_product(&current, mode, m)?
        };
    }
    Ok(current)
}

/// `core ×₁ U₁ ×₂ … ×_d U_d`.
pub fn tucker_reconstruct(t: &TuckerDecomposition) -> Result<DenseTensor> {
    tucker_apply(&t.core, &t.factors, &vec![false; t.factors.len()])
}

/// Projects `a` onto the column spaces of the factors: `a ×_μ U_μᵀ` for all μ.
pub fn project_core(a: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<DenseTensor> {
    tucker_apply(a, factors, &vec![true; factors.len()])
}

/// HOSVD output: the decomposition and every mode's full singular spectrum.
#[derive(Debug, Clone)]
pub struct Hosvd {
    pub decomposition: TuckerDecomposition,
    pub singular_values: Vec<Vec<f64>>,
}

fn check_ranks(a: &DenseTensor, ranks: &[usize]) -> Result<()> {
    if ranks.len() != a.order() {
        return arg_err(format!(
            "{} ranks for an order-{} tensor",
            ranks.len(),
            a.order()
        ));
    }
    for (mu, (&r, &n)) in ranks.iter().zip(a.dims()).enumerate() {
        if r == 0 || r > n {
            return arg_err(format!("rank {r} for mode {mu} outside 1..={n}"));
        }
    }
    Ok(())
}

/// Leading `r` right singular vectors of `m`, completed to `r` orthonormal
/// columns when `m` has fewer rows than `r`.
fn leading_right_vectors(m: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, Vec<f64>) {
    let d = svd(m);
    let mut s = d.singular_values.clone();
    s.resize(m.ncols(), 0.0);
    let k = r.min(d.rank());
    let mut basis = d.v.columns(0, k).into_owned();
    if k < r {
        basis = complete_orthonormal(&basis, r);
    }
    (basis, s)
}

/// Extends orthonormal columns to `r` columns by Gram–Schmidt on unit vectors.
fn complete_orthonormal(q: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let n = q.nrows();
    let mut cols: Vec<nalgebra::DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < r && e < n {
        let mut v = nalgebra::DVector::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
        e += 1;
    }
    DMatrix::from_columns(&cols)
}

/// Truncated higher-order SVD at per-mode ranks.
pub fn hosvd(a: &DenseTensor, ranks: &[usize]) -> Result<Hosvd> {
    check_ranks(a, ranks)?;
    let mut factors = Vec::with_capacity(a.order());
    let mut spectra = Vec::with_capacity(a.order());
    for (mode, &r) in ranks.iter().enumerate() {
        let m = a.matricize(mode)?.to_matrix()?;
        let (basis, s) = leading_right_vectors(&m, r);
        factors.push(basis);
        spectra.push(s);
    }
    let core = project_core(a, &factors)?;
    Ok(Hosvd {
        decomposition: TuckerDecomposition { core, factors },
        singular_values: spectra,
    })
}

/// Per-mode ranks whose HOSVD truncation has relative error at most `eps`:
/// each mode keeps the smallest rank whose discarded tail is within
/// `eps²/d` of `‖A‖²`.
pub fn ranks_for_tolerance(a: &DenseTensor, eps: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&eps) {
        return arg_err(format!("relative tolerance {eps} outside [0, 1)"));
    }
    let split = eps / (a.order() as f64).sqrt();
    (0..a.order())
        .map(|mode| Ok(svd(&a.matricize(mode)?.to_matrix()?).rank_for_tolerance(split)))
        .collect()
}

/// HOOI output: the refined decomposition and `‖A − recon‖` after
/// initialization (entry 0) and after each full sweep.
#[derive(Debug, Clone)]
pub struct Hooi {
    pub decomposition: TuckerDecomposition,
    pub error_trace: Vec<f64>,
}

fn residual_norm(a: &DenseTensor, t: &TuckerDecomposition) -> Result<f64> {
    Ok(a.sub(&t.reconstruct()?)?.norm2())
}

/// Higher-order orthogonal iteration, started from the HOSVD.
///
/// Modes are updated in order `0..d` using the freshest factors of the
/// other modes. Stops after `opts.max_sweeps` sweeps or when a sweep lowers
/// the squared error by less than `opts.rel_tol·‖A‖²`.
pub fn hooi(a: &DenseTensor, ranks: &[usize], opts: &AlsOptions) -> Result<Hooi> {
    opts.validate()?;
    let init = hosvd(a, ranks)?;
    let start = residual_norm(a, &init.decomposition)?;
    let mut factors = init.decomposition.factors;
    let norm2 = a.norm2_squared();
    let mut trace = vec![start];
    let d = a.order();
    for _ in 0..opts.max_sweeps {
        for mode in 0..d {
            let mut projected = a.clone();
            for (other, u) in factors.iter().enumerate() {
                if other != mode {
                    projected = mode_product(&projected, other, &u.transpose())?;
                }
            }
            let m = projected.matricize(mode)?.to_matrix()?;
            factors[mode] = leading_right_vectors(&m, ranks[mode]).0;
        }
        let core = project_core(a, &factors)?;
        let err = residual_norm(
            a,
            &TuckerDecomposition {
                core,
                factors: factors.clone(),
            },
        )?;
        let prev = *trace.last().unwrap();
        trace.push(err);
        if prev * prev - err * err < opts.rel_tol * norm2 {
            break;
        }
    }
    let core = project_core(a, &factors)?;
    Ok(Hooi {
        decomposition: TuckerDecomposition { core, factors },
        error_trace: trace,
    })
}
