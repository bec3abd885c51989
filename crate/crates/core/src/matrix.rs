//! Matrix algebra used by the decompositions: SVD and its truncations,
//! pseudo-inverse, Kronecker-family products, CUR, and unit-ball volumes.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; [`DenseTensor::from_matrix`] and
//! [`DenseTensor::to_matrix`] move between the two views.

use nalgebra::DMatrix;

use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::tensor::{DenseTensor, Norm};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Thin singular value decomposition `M = U diag(σ) Vᵀ`.
///
/// Singular values are nonincreasing. Each left vector has its
/// largest-magnitude entry nonnegative, with the right vector flipped to match.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Keeps the leading `r` triples.
    pub fn truncate(&self, r: usize) -> Result<Svd> {
        if r == 0 || r > self.rank() {
            return arg_err(format!("truncation rank {r} outside 1..={}", self.rank()));
        }
        Ok(Svd {
            u: self.u.columns(0, r).into_owned(),
            singular_values: self.singular_values[..r].to_vec(),
            v: self.v.columns(0, r).into_owned(),
        })
    }

    /// `Σ σ_a u_a ⊗ v_a`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (a, &s) in self.singular_values.iter().enumerate() {
            us.column_mut(a).scale_mut(s);
        }
        us * self.v.transpose()
    }

    /// `Σ σ_a²`, the squared Frobenius norm of the decomposed matrix.
    pub fn energy(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum()
    }

    /// `Σ_{a ≥ r} σ_a²`, the squared error of keeping only the first `r` triples.
    pub fn tail_energy(&self, r: usize) -> f64 {
        self.singular_values.iter().skip(r).map(|s| s * s).sum()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }

    /// Number of singular values above `rel_cutoff · σ₁`.
    pub fn numerical_rank(&self, rel_cutoff: f64) -> usize {
        let Some(&top) = self.singular_values.first() else {
            return 0;
        };
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_cutoff * top)
            .count()
    }

    /// Smallest `r ≥ 1` whose discarded tail satisfies `Σ_{a≥r} σ_a² ≤ ε²·Σ σ_a²`.
    pub fn rank_for_tolerance(&self, eps_rel: f64) -> usize {
        let budget = eps_rel * eps_rel * self.energy();
        (1..=self.rank())
            .find(|&r| self.tail_energy(r) <= budget)
            .unwrap_or(self.rank())
            .max(1)
    }
}

/// Full thin SVD.
pub fn svd(m: &DMatrix<f64>) -> Svd {
    let raw = m.clone().svd(true, true);
    let u = raw.u.expect("left singular vectors requested");
    let v = raw
        .v_t
        .expect("right singular vectors requested")
        .transpose();
    let s: Vec<f64> = raw.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let k = s.len();
    let mut out = Svd {
        u: DMatrix::zeros(m.nrows(), k),
        singular_values: Vec::with_capacity(k),
        v: DMatrix::zeros(m.ncols(), k),
    };
    for (dst, &src) in order.iter().enumerate() {
        let mut uc = u.column(src).into_owned();
        let mut vc = v.column(src).into_owned();
        let pivot = uc.iter().fold(
            0.0_f64,
            |best, &x| if x.abs() > best.abs() { x } else { best },
        );
        if pivot < 0.0 {
            uc.neg_mut();
            vc.neg_mut();
        }
        out.u.set_column(dst, &uc);
        out.v.set_column(dst, &vc);
        out.singular_values.push(s[src].max(0.0));
    }
    out
}

/// SVD truncated to rank `r`.
pub fn truncated_svd(m: &DMatrix<f64>, r: usize) -> Result<Svd> {
    let k = m.nrows().min(m.ncols());
    if r == 0 || r > k {
        return arg_err(format!("rank {r} outside 1..={k}"));
    }
    svd(m).truncate(r)
}

/// SVD truncated to the smallest rank whose relative tail is within `eps_rel`.
pub fn svd_to_tolerance(m: &DMatrix<f64>, eps_rel: f64) -> Result<Svd> {
    if !(0.0..1.0).contains(&eps_rel) {
        return arg_err(format!("relative tolerance {eps_rel} outside [0, 1)"));
    }
    let full = svd(m);
    let r = full.rank_for_tolerance(eps_rel);
    full.truncate(r)
}

/// Moore–Penrose pseudo-inverse with the default cutoff `1e-12·σ₁`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    pseudo_inverse_with_cutoff(m, RANK_CUTOFF)
}

/// `Σ_{σ_a > τ} σ_a⁻¹ v_a ⊗ u_a` with `τ = rel_cutoff·σ₁`.
pub fn pseudo_inverse_with_cutoff(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let d = svd(m);
    let top = d.singular_values.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (a, &s) in d.singular_values.iter().enumerate() {
        if s > rel_cutoff * top && s > 0.0 {
            out += (d.v.column(a) * d.u.column(a).transpose()) / s;
        }
    }
    out
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)]·B`.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(a.nrows() * p, a.ncols() * q);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let aij = a[(i, j)];
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Columnwise Kronecker product.
pub fn khatri_rao(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return shape_err(format!(
            "column counts {} and {} differ",
            a.ncols(),
            b.ncols()
        ));
    }
    let (m, p) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(m * p, a.ncols());
    for c in 0..a.ncols() {
        for i in 0..m {
            for k in 0..p {
                out[(i * p + k, c)] = a[(i, c)] * b[(k, c)];
            }
        }
    }
    Ok(out)
}

/// Khatri–Rao product of several matrices, first matrix slowest.
pub fn khatri_rao_all(mats: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let (first, rest) = mats
        .split_first()
        .ok_or_else(|| TensorError::InvalidArgument("no matrices given".into()))?;
    rest.iter()
        .try_fold((*first).clone(), |acc, m| khatri_rao(&acc, m))
}

/// Row and column block sizes describing how a matrix is partitioned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl BlockPartition {
    pub fn single(m: &DMatrix<f64>) -> Self {
        BlockPartition {
            rows: vec![m.nrows()],
            cols: vec![m.ncols()],
        }
    }

    fn check(&self, m: &DMatrix<f64>) -> Result<()> {
        let ok = self.rows.iter().sum::<usize>() == m.nrows()
            && self.cols.iter().sum::<usize>() == m.ncols()
            && !self.rows.contains(&0)
            && !self.cols.contains(&0);
        if !ok {
            return shape_err(format!(
                "partition {self:?} does not tile a {}x{} matrix",
                m.nrows(),
                m.ncols()
            ));
        }
        Ok(())
    }

    fn offsets(sizes: &[usize]) -> Vec<usize> {
        sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect()
    }
}

/// Tracy–Singh product: the block at block-row `(i, k)` and block-column
/// `(j, l)` is `A_ij ⊗ B_kl`, with the blocks of `A` varying slowest.
pub fn tracy_singh(
    a: &DMatrix<f64>,
    a_part: &BlockPartition,
    b: &DMatrix<f64>,
    b_part: &BlockPartition,
) -> Result<DMatrix<f64>> {
    a_part.check(a)?;
    b_part.check(b)?;
    let (ar, ac) = (
        BlockPartition::offsets(&a_part.rows),
        BlockPartition::offsets(&a_part.cols),
    );
    let (br, bc) = (
        BlockPartition::offsets(&b_part.rows),
        BlockPartition::offsets(&b_part.cols),
    );
    let mut out = DMatrix::zeros(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    let mut row = 0;
    for (i, &ai) in a_part.rows.iter().enumerate() {
        for (k, &bk) in b_part.rows.iter().enumerate() {
            let mut col = 0;
            for (j, &aj) in a_part.cols.iter().enumerate() {
                for (l, &bl) in b_part.cols.iter().enumerate() {
                    let block = kronecker(
                        &a.view((ar[i], ac[j]), (ai, aj)).into_owned(),
                        &b.view((br[k], bc[l]), (bk, bl)).into_owned(),
                    );
                    out.view_mut((row, col), block.shape()).copy_from(&block);
                    col += aj * bl;
                }
            }
            row += ai * bk;
        }
    }
    Ok(out)
}

/// `Σ_a w_a x₁⁽ᵃ⁾ ⊗ … ⊗ x_d⁽ᵃ⁾` over the columns of the factor matrices.
pub fn cp_product(factors: &[DMatrix<f64>], weights: Option<&[f64]>) -> Result<DenseTensor> {
    let Some(first) = factors.first() else {
        return arg_err("at least one factor matrix is required");
    };
    let r = first.ncols();
    if factors.iter().any(|f| f.ncols() != r) {
        return shape_err("factor matrices have different column counts");
    }
    if let Some(w) = weights {
        if w.len() != r {
            return shape_err(format!("{} weights for {r} columns", w.len()));
        }
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let refs: Vec<&DMatrix<f64>> = factors.iter().collect();
    let kr = khatri_rao_all(&refs)?;
    let w = match weights {
        Some(w) => nalgebra::DVector::from_column_slice(w),
        None => nalgebra::DVector::from_element(r, 1.0),
    };
    let flat = kr * w;
    DenseTensor::new(dims, flat.iter().copied().collect())
}

/// Result of a CUR (skeleton) approximation.
#[derive(Debug, Clone)]
pub struct Cur {
    pub approx: DMatrix<f64>,
    /// The pivot submatrix `A[I, J]`.
    pub pivot: DMatrix<f64>,
}

/// Condition number above which a CUR pivot block is rejected.
pub const CUR_MAX_CONDITION: f64 = 1e12;

/// `C Â⁻¹ R` with `C = A[:, J]`, `R = A[I, :]`, `Â = A[I, J]`.
pub fn cur(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<Cur> {
    if rows.len() != cols.len() || rows.is_empty() {
        return arg_err("CUR needs equally many (and at least one) rows and columns");
    }
    if rows.iter().any(|&i| i >= a.nrows()) || cols.iter().any(|&j| j >= a.ncols()) {
        return arg_err("CUR pivot index out of range");
    }
    let c = a.select_columns(cols);
    let r = a.select_rows(rows);
    let pivot = c.select_rows(rows);
    let s = svd(&pivot);
    let smax = s.singular_values[0];
    let smin = *s.singular_values.last().unwrap();
    if smin <= 0.0 || smax / smin > CUR_MAX_CONDITION {
        return Err(TensorError::Numerical(format!(
            "CUR pivot block is singular or ill-conditioned (σmax/σmin = {:e})",
            if smin > 0.0 {
                smax / smin
            } else {
                f64::INFINITY
            }
        )));
    }
    let lu = pivot.clone().lu();
    let core_r = lu
        .solve(&r)
        .ok_or_else(|| TensorError::Numerical("CUR pivot block is singular".into()))?;
    Ok(Cur {
        approx: c * core_r,
        pivot,
    })
}

/// Greedy pivot selection: repeatedly takes the largest-magnitude entry of
/// the current residual and removes its cross. Returns `(rows, cols)`.
pub fn greedy_cross_pivots(a: &DMatrix<f64>, r: usize) -> (Vec<usize>, Vec<usize>) {
    let mut residual = a.clone();
    let (mut rows, mut cols) = (Vec::new(), Vec::new());
    for _ in 0..r.min(a.nrows()).min(a.ncols()) {
        let (mut bi, mut bj, mut best) = (0, 0, 0.0_f64);
        for j in 0..residual.ncols() {
            for i in 0..residual.nrows() {
                if residual[(i, j)].abs() > best {
                    best = residual[(i, j)].abs();
                    bi = i;
                    bj = j;
                }
            }
        }
        if best == 0.0 {
            break;
        }
        let piv = residual[(bi, bj)];
        let col = residual.column(bj).into_owned();
        let row = residual.row(bi).into_owned();
        residual -= (col * row) / piv;
        rows.push(bi);
        cols.push(bj);
    }
    (rows, cols)
}

/// Volume of the unit ball of `ℓᵖ` in `ℝⁿ`, for `p ∈ {1, 2, ∞}`.
pub fn ball_volume(n: usize, p: Norm) -> Result<f64> {
    if n == 0 {
        return arg_err("dimension must be at least 1");
    }
    let two_n = 2f64.powi(n as i32);
    Ok(match p {
        Norm::Inf => two_n,
        Norm::L1 => two_n / (1..=n).map(|k| k as f64).product::<f64>(),
        Norm::L2 => {
            // V_n = 2π/n · V_{n-2}, V_0 = 1, V_1 = 2
            let mut v = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
            let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
            while k <= n {
                v *= 2.0 * std::f64::consts::PI / k as f64;
                k += 2;
            }
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    fn check_svd(m: &DMatrix<f64>, d: &Svd) {
        let k = d.rank();
        assert!(max_abs(&(d.u.transpose() * &d.u - DMatrix::identity(k, k))) < 1e-10);
        assert!(max_abs(&(d.v.transpose() * &d.v - DMatrix::identity(k, k))) < 1e-10);
        assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!((d.reconstruct() - m).norm() <= 1e-9 * m.norm().max(1e-300));
        let s1 = d.singular_values[0];
        for a in 0..k {
            let mv = m * d.v.column(a) - d.u.column(a) * d.singular_values[a];
            let mtu = m.transpose() * d.u.column(a) - d.v.column(a) * d.singular_values[a];
            assert!(mv.norm() <= 1e-10 * s1 && mtu.norm() <= 1e-10 * s1);
        }
    }

    #[test]
    fn svd_of_diagonal_and_random() {
        let d = svd(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, 3.0, 2.0,
        ])));
        assert_eq!(d.singular_values, vec![3.0, 2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(6, 4), (4, 6), (1, 5), (5, 1), (7, 7)] {
            let a = random(&mut rng, m, n);
            let s = svd(&a);
            check_svd(&a, &s);
            assert!((s.energy() - a.norm_squared()).abs() < 1e-12 * a.norm_squared());
        }
    }

    #[test]
    fn svd_sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(&mut rng, 5, 3);
        let d = svd(&a);
        for c in 0..3 {
            let col = d.u.column(c);
            let pivot = col
                .iter()
                .fold(0.0_f64, |b, &x| if x.abs() > b.abs() { x } else { b });
            assert!(pivot >= 0.0);
        }
        let neg = svd(&(-&a));
        assert!((neg.reconstruct() + &a).norm() < 1e-12);
    }

    #[test]
    fn svd_of_zero_and_rank_one() {
        let z = svd(&DMatrix::zeros(3, 2));
        assert!(z.singular_values.iter().all(|&s| s == 0.0));
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = nalgebra::DVector::from_vec(vec![3.0, 1.0]);
        let d = svd(&(&x * y.transpose()));
        assert!((d.singular_values[0] - x.norm() * y.norm()).abs() < 1e-12);
        assert!(d.singular_values[1] <= 1e-12 * d.singular_values[0]);
    }

    #[test]
    fn identity_truncation_error() {
        let n = 10;
        let id = DMatrix::<f64>::identity(n, n);
        for r in 1..n {
            let t = truncated_svd(&id, r).unwrap();
            assert_eq!((t.reconstruct() - &id).norm_squared(), (n - r) as f64);
        }
        let dn = &id / (n as f64).sqrt();
        for r in 1..n {
            let err = (truncated_svd(&dn, r).unwrap().reconstruct() - &dn).norm();
            assert!((err - (1.0 - r as f64 / n as f64).sqrt()).abs() < 1e-12);
        }
        assert!(truncated_svd(&id, 0).is_err());
        assert!(truncated_svd(&id, 11).is_err());
    }

    #[test]
    fn truncation_error_is_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&mut rng, 6, 4);
        let full = svd(&a);
        let t = truncated_svd(&a, 2).unwrap();
        let err2 = (t.reconstruct() - &a).norm_squared();
        let tail = full.singular_values[2].powi(2) + full.singular_values[3].powi(2);
        assert!((err2 - tail).abs() < 1e-12 * tail.max(1.0));
    }

    #[test]
    fn tolerance_driven_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(&mut rng, 6, 5);
        assert_eq!(svd_to_tolerance(&a, 0.0).unwrap().rank(), 5);
        let d = svd(&a);
        for eps in [0.05, 0.2, 0.5, 0.9] {
            let t = svd_to_tolerance(&a, eps).unwrap();
            let r = t.rank();
            assert!(d.tail_energy(r) <= eps * eps * d.energy());
            if r > 1 {
                assert!(d.tail_energy(r - 1) > eps * eps * d.energy());
            }
        }
        assert!(svd_to_tolerance(&a, 1.0).is_err());
    }

    #[test]
    fn pseudo_inverse_cases() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            pseudo_inverse(&d),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])
        );

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random(&mut rng, 4, 4) + DMatrix::identity(4, 4) * 3.0;
        let inv = m.clone().lu().solve(&DMatrix::identity(4, 4)).unwrap();
        assert!(max_abs(&(pseudo_inverse(&m) - inv)) < 1e-10);

        let a = random(&mut rng, 5, 3);
        let p = pseudo_inverse(&a);
        let tol = 1e-9 * a.norm();
        assert!((&a * &p * &a - &a).norm() < tol);
        assert!((&p * &a * &p - &p).norm() < tol);
        assert!(((&a * &p).transpose() - &a * &p).norm() < tol);
        assert!(((&p * &a).transpose() - &p * &a).norm() < tol);
    }

    #[test]
    fn kronecker_examples() {
        let a = DMatrix::from_column_slice(2, 1, &[2.0, 3.0]);
        let b = DMatrix::from_column_slice(3, 1, &[5.0, 7.0, 11.0]);
        let k = kronecker(&a, &b);
        assert_eq!(k.as_slice(), &[10.0, 14.0, 22.0, 15.0, 21.0, 33.0]);
        let one = DMatrix::from_element(1, 1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random(&mut rng, 3, 2);
        assert_eq!(kronecker(&m, &one), m);
    }

    #[test]
    fn khatri_rao_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&mut rng, 2, 2);
        let b = random(&mut rng, 3, 2);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.shape(), (6, 2));
        for c in 0..2 {
            for i in 0..2 {
                for k in 0..3 {
                    assert_eq!(kr[(i * 3 + k, c)], a[(i, c)] * b[(k, c)]);
                }
            }
        }
        let x = random(&mut rng, 2, 1);
        let y = random(&mut rng, 4, 1);
        assert_eq!(khatri_rao(&x, &y).unwrap(), kronecker(&x, &y));
        assert!(khatri_rao(&a, &random(&mut rng, 3, 3)).is_err());
    }

    #[test]
    fn tracy_singh_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random(&mut rng, 3, 2);
        let b = random(&mut rng, 4, 5);
        let single = tracy_singh(
            &a,
            &BlockPartition::single(&a),
            &b,
            &BlockPartition::single(&b),
        )
        .unwrap();
        assert_eq!(single, kronecker(&a, &b));

        // A unpartitioned, B in 2×2 blocks: [[A⊗B11, A⊗B12], [A⊗B21, A⊗B22]]
        let bp = BlockPartition {
            rows: vec![1, 3],
            cols: vec![2, 3],
        };
        let ts = tracy_singh(&a, &BlockPartition::single(&a), &b, &bp).unwrap();
        let b11 = b.view((0, 0), (1, 2)).into_owned();
        let b12 = b.view((0, 2), (1, 3)).into_owned();
        let b21 = b.view((1, 0), (3, 2)).into_owned();
        let b22 = b.view((1, 2), (3, 3)).into_owned();
        assert_eq!(ts.view((0, 0), (3, 4)).into_owned(), kronecker(&a, &b11));
        assert_eq!(ts.view((0, 4), (3, 6)).into_owned(), kronecker(&a, &b12));
        assert_eq!(ts.view((3, 0), (9, 4)).into_owned(), kronecker(&a, &b21));
        assert_eq!(ts.view((3, 4), (9, 6)).into_owned(), kronecker(&a, &b22));

        let ap = BlockPartition {
            rows: vec![2, 1],
            cols: vec![1, 1],
        };
        let both = tracy_singh(&a, &ap, &b, &bp).unwrap();
        let mut x: Vec<f64> = both.iter().copied().collect();
        let mut y: Vec<f64> = kronecker(&a, &b).iter().copied().collect();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        assert_eq!(x, y);

        let bad = BlockPartition {
            rows: vec![2],
            cols: vec![2],
        };
        assert!(tracy_singh(&a, &bad, &b, &bp).is_err());
    }

    #[test]
    fn cp_product_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random(&mut rng, 3, 2);
        let y = random(&mut rng, 4, 2);
        let t = cp_product(&[x.clone(), y.clone()], None).unwrap();
        assert!(max_abs(&(t.to_matrix().unwrap() - &x * y.transpose())) < 1e-15);

        let f: Vec<DMatrix<f64>> = (0..3).map(|k| random(&mut rng, 2 + k, 3)).collect();
        let w = [0.5, -1.5, 2.0];
        let t = cp_product(&f, Some(&w)).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    let mut s = 0.0;
                    for a in 0..3 {
                        s += w[a] * f[0][(i, a)] * f[1][(j, a)] * f[2][(k, a)];
                    }
                    assert!((t.at(&[i, j, k]) - s).abs() < 1e-12);
                }
            }
        }
        assert!(cp_product(&[x, random(&mut rng, 2, 3)], None).is_err());
    }

    #[test]
    fn cur_reconstructs_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random(&mut rng, 6, 2);
        let y = random(&mut rng, 6, 2);
        let a = &x * y.transpose();
        let (rows, cols) = greedy_cross_pivots(&a, 2);
        let c = cur(&a, &rows, &cols).unwrap();
        assert!((c.approx - &a).norm() <= 1e-8 * a.norm());

        let sq = random(&mut rng, 4, 4) + DMatrix::identity(4, 4) * 2.0;
        let all: Vec<usize> = (0..4).collect();
        assert!((cur(&sq, &all, &all).unwrap().approx - &sq).norm() < 1e-12);

        let u = random(&mut rng, 5, 1);
        let v = random(&mut rng, 4, 1);
        let r1 = &u * v.transpose();
        let (ri, ci) = greedy_cross_pivots(&r1, 1);
        assert!((cur(&r1, &ri, &ci).unwrap().approx - &r1).norm() < 1e-14 * r1.norm().max(1.0));

        assert!(cur(&a, &[0, 1, 2], &[0, 1, 2]).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(2, Norm::L1).unwrap() - 2.0).abs() < 1e-12);
        assert!((ball_volume(2, Norm::L2).unwrap() - std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(2, Norm::Inf).unwrap() - 4.0).abs() < 1e-12);
        for p in [Norm::L1, Norm::L2, Norm::Inf] {
            assert_eq!(ball_volume(1, p).unwrap(), 2.0);
        }
        assert!(
            (ball_volume(3, Norm::L2).unwrap() - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12
        );
        assert!(ball_volume(0, Norm::L2).is_err());
    }
}
