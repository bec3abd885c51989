//! Meshes, grid sampling of functions, polynomials in CP form and
//! Chebyshev expansions on `[−1, 1]^d`.

use nalgebra::DMatrix;

use crate::cp::CpDecomposition;
use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::tensor::{next_index, DenseTensor};
use crate::tucker::tucker_apply;

/// Strictly increasing sample points on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<f64>,
}

impl Mesh {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return arg_err("a mesh needs at least one point");
        }
        if points.iter().any(|x| !x.is_finite()) {
            return arg_err("mesh points must be finite");
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return arg_err("mesh points must be strictly increasing");
        }
        Ok(Mesh { points })
    }

    /// `n` equispaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        match n {
            0 => arg_err("a mesh needs at least one point"),
            1 => Mesh::new(vec![lo]),
            _ => {
                let h = (hi - lo) / (n - 1) as f64;
                Mesh::new((0..n).map(|k| lo + h * k as f64).collect())
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Product of per-axis meshes; grid point `i` is `(x⁽¹⁾_{i₁}, …, x⁽ᵈ⁾_{i_d})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    meshes: Vec<Mesh>,
}

impl CartesianGrid {
    pub fn new(meshes: Vec<Mesh>) -> Result<Self> {
        if meshes.is_empty() {
            return arg_err("a grid needs at least one mesh");
        }
        Ok(CartesianGrid { meshes })
    }

    pub fn meshes(&self) -> &[Mesh] {
        &self.meshes
    }

    pub fn order(&self) -> usize {
        self.meshes.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.meshes.iter().map(Mesh::len).collect()
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.meshes)
            .map(|(&i, m)| m.points[i])
            .collect()
    }

    /// `x ⊗_M y`: the meshes of `self` followed by those of `other`.
    pub fn product(&self, other: &CartesianGrid) -> CartesianGrid {
        let mut meshes = self.meshes.clone();
        meshes.extend(other.meshes.iter().cloned());
        CartesianGrid { meshes }
    }
}

/// Samples `f` at every grid point. A returned error or a non-finite value
/// aborts with the offending point.
pub fn discretize<F>(grid: &CartesianGrid, mut f: F) -> Result<DenseTensor>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    let dims = grid.dims();
    let mut values = Vec::with_capacity(dims.iter().product());
    let mut idx = vec![0; dims.len()];
    loop {
        let x = grid.point(&idx);
        match f(&x) {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(TensorError::Evaluation {
                    point: x,
                    reason: format!("non-finite value {v}"),
                })
            }
            Err(reason) => return Err(TensorError::Evaluation { point: x, reason }),
        }
        if !next_index(&mut idx, &dims) {
            break;
        }
    }
    DenseTensor::new(dims, values)
}

/// `Σ a_e x₁^{e₁} ⋯ x_d^{e_d}` with distinct exponent tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialPoly {
    arity: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl MonomialPoly {
    /// Merges terms with equal exponents, keeping first-appearance order.
    pub fn new(arity: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if arity == 0 {
            return arg_err("a polynomial needs at least one variable");
        }
        let mut merged: Vec<(f64, Vec<u32>)> = Vec::with_capacity(terms.len());
        for (c, e) in terms {
            if e.len() != arity {
                return shape_err(format!("exponent list {e:?} does not have {arity} entries"));
            }
            if !c.is_finite() {
                return arg_err(format!("coefficient {c} is not finite"));
            }
            match merged.iter_mut().find(|(_, f)| *f == e) {
                Some((acc, _)) => *acc += c,
                None => merged.push((c, e)),
            }
        }
        Ok(MonomialPoly {
            arity,
            terms: merged,
        })
    }

    pub fn constant(arity: usize, c: f64) -> Result<Self> {
        MonomialPoly::new(arity, vec![(c, vec![0; arity])])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                c * x
                    .iter()
                    .zip(e)
                    .map(|(xi, &k)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn check_arity(&self, other: &MonomialPoly) -> Result<()> {
        if self.arity != other.arity {
            return shape_err(format!(
                "arity {} does not match {}",
                self.arity, other.arity
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &MonomialPoly) -> Result<MonomialPoly> {
        self.check_arity(other)?;
        MonomialPoly::new(
            self.arity,
            self.terms.iter().chain(&other.terms).cloned().collect(),
        )
    }

    pub fn mul(&self, other: &MonomialPoly) -> Result<MonomialPoly> {
        self.check_arity(other)?;
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for (c, e) in &self.terms {
            for (d, f) in &other.terms {
                terms.push((c * d, e.iter().zip(f).map(|(a, b)| a + b).collect()));
            }
        }
        MonomialPoly::new(self.arity, terms)
    }
}

fn check_poly_grid(p: &MonomialPoly, grid: &CartesianGrid) -> Result<()> {
    if p.arity() != grid.order() {
        return shape_err(format!(
            "polynomial in {} variables on a {}-axis grid",
            p.arity(),
            grid.order()
        ));
    }
    Ok(())
}

pub fn discretize_poly(p: &MonomialPoly, grid: &CartesianGrid) -> Result<DenseTensor> {
    check_poly_grid(p, grid)?;
    discretize(grid, |x| Ok(p.eval(x)))
}

/// One CP term per monomial: the factor column on axis `μ` holds
/// `x^{e_μ}` over that axis' mesh and the weight is the coefficient.
pub fn poly_discretize_cp(p: &MonomialPoly, grid: &CartesianGrid) -> Result<CpDecomposition> {
    check_poly_grid(p, grid)?;
    if p.is_empty() {
        let factors = grid
            .meshes()
            .iter()
            .map(|m| DMatrix::from_fn(m.len(), 1, |i, _| if i == 0 { 1.0 } else { 0.0 }))
            .collect();
        return CpDecomposition::from_factors(vec![0.0], factors);
    }
    let r = p.len();
    let factors = grid
        .meshes()
        .iter()
        .enumerate()
        .map(|(mu, m)| {
            DMatrix::from_fn(m.len(), r, |i, a| m.points[i].powi(p.terms[a].1[mu] as i32))
        })
        .collect();
    CpDecomposition::from_factors(p.terms.iter().map(|t| t.0).collect(), factors)
}

/// `T_n(x)` and whether `x` lay in `[−1, 1]`; outside the interval the
/// recurrence still runs but the result is an extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebEval {
    pub value: f64,
    pub in_domain: bool,
}

/// `T₀ = 1`, `T₁ = x`, `T_n = 2x T_{n−1} − T_{n−2}`.
pub fn chebyshev_eval(n: usize, x: f64) -> ChebEval {
    ChebEval {
        value: chebyshev_all(n, x)[n],
        in_domain: (-1.0..=1.0).contains(&x),
    }
}

/// `(T₀(x), …, T_n(x))`.
fn chebyshev_all(n: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 2..=n {
        t.push(2.0 * x * t[k - 1] - t[k - 2]);
    }
    t
}

/// Gauss–Chebyshev nodes `cos((2k−1)π/(2m))`, `k = 1..m`.
pub fn chebyshev_nodes(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|k| ((2 * k - 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos())
        .collect()
}

/// Coefficients `φ̂_n`, `n ≤ r` componentwise, of `f ≈ Σ φ̂_n ∏_μ T_{n_μ}(x_μ)`.
///
/// `f` is sampled on the tensor grid of `m = 2(max r_μ + 1)` Gauss–Chebyshev
/// nodes per axis and transformed with `φ̂_n = (2/m) Σ_k f(x_k) T_n(x_k)`,
/// halved for `n = 0`. These are the usual Chebyshev series coefficients,
/// so `x² = (T₀ + T₂)/2` gives `(½, 0, ½)`, and the transform is exact for
/// polynomials of degree at most `r_μ` in each variable.
pub fn cheb_project<F>(f: F, degrees: &[usize]) -> Result<DenseTensor>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    if degrees.is_empty() {
        return arg_err("at least one degree bound is required");
    }
    let m = 2 * (degrees.iter().max().unwrap() + 1);
    let nodes = chebyshev_nodes(m);
    let mesh = Mesh::new(nodes.iter().rev().copied().collect())?;
    let grid = CartesianGrid::new(vec![mesh; degrees.len()])?;
    let samples = discretize(&grid, f)?;
    // the mesh is ascending, i.e. the node list reversed
    let transforms: Vec<DMatrix<f64>> = degrees
        .iter()
        .map(|&r| {
            DMatrix::from_fn(r + 1, m, |n, k| {
                let x = nodes[m - 1 - k];
                let w = if n == 0 { 1.0 } else { 2.0 };
                w / m as f64 * chebyshev_all(n, x)[n]
            })
        })
        .collect();
    tucker_apply(&samples, &transforms, &vec![false; degrees.len()])
}

/// Evaluates the truncated series with coefficients `coeffs` at each point.
pub fn cheb_reconstruct(coeffs: &DenseTensor, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = coeffs.order();
    let dims = coeffs.dims();
    points
        .iter()
        .map(|x| {
            if x.len() != d {
                return shape_err(format!("point {x:?} does not have {d} coordinates"));
            }
            let basis: Vec<Vec<f64>> = x
                .iter()
                .zip(dims)
                .map(|(&xi, &n)| chebyshev_all(n - 1, xi))
                .collect();
            let mut idx = vec![0; d];
            let mut acc = 0.0;
            for &c in coeffs.values() {
                acc += c * idx
                    .iter()
                    .enumerate()
                    .map(|(mu, &k)| basis[mu][k])
                    .product::<f64>();
                next_index(&mut idx, dims);
            }
            Ok(acc)
        })
        .collect()
}

/// Affine map between a box `∏[lo_μ, hi_μ]` and `[−1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMap {
    bounds: Vec<(f64, f64)>,
}

impl BoxMap {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds
            .iter()
            .any(|&(lo, hi)| lo >= hi || !lo.is_finite() || !hi.is_finite())
        {
            return arg_err("each box side needs finite bounds with lo < hi");
        }
        Ok(BoxMap { bounds })
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (2.0 * v - lo - hi) / (hi - lo))
            .collect()
    }

    pub fn from_unit(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| 0.5 * (hi - lo) * v + 0.5 * (hi + lo))
            .collect()
    }
}
