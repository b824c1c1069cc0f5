//! Dense linear algebra used throughout the crate.
//!
//! Everything here works on symmetric matrices built from connection
//! Laplacians, so the symmetric eigendecomposition is the workhorse:
//! pseudoinverses and kernels are read off the spectrum directly, and
//! positive definite principal blocks are solved by Cholesky.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative rank tolerance per unit of matrix dimension.
pub const RANK_TOL_PER_DIM: f64 = 1e-10;

/// Default relative rank tolerance for a `dim x dim` matrix.
pub fn default_rank_tol(dim: usize) -> f64 {
    RANK_TOL_PER_DIM * dim.max(1) as f64
}

/// Sorted, duplicate-free set of block indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        if let Some(&bad) = v.iter().find(|&&i| i >= n) {
            return Err(Error::VertexOutOfRange { vertex: bad, n });
        }
        Ok(IndexSet(v))
    }

    /// The indices of `0..n` not in `self`, in increasing order.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n)
            .filter(|i| self.0.binary_search(i).is_err())
            .collect()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scalar row/column indices covered by the given blocks of size `block`.
pub fn block_indices(blocks: &[usize], block: usize) -> Vec<usize> {
    blocks
        .iter()
        .flat_map(|&b| (b * block)..(b * block + block))
        .collect()
}

/// Submatrix with the given rows and columns, in the order listed.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn max_abs(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Moore-Penrose pseudoinverse of a symmetric matrix.
///
/// Eigenvalues with `|lambda| <= rank_tol * max|lambda|` are treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, rank_tol: f64) -> DMatrix<f64> {
    let (vals, vecs) = sorted_eigen(m);
    let cutoff = rank_tol * max_abs(&vals);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cutoff || lam == 0.0 {
            continue;
        }
        let v = vecs.column(k);
        out += (v * v.transpose()) / lam;
    }
    symmetrize(&out)
}

/// Solve `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularBlock)?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a.clone().cholesky().ok_or(Error::SingularBlock)?;
    Ok(symmetrize(&chol.inverse()))
}

/// Generalized Schur complement `M / D = A - B D^+ C` of a block-partitioned
/// matrix, where `D` collects the blocks listed in `eliminate` (blocks of size
/// `block`). The result is indexed by the remaining blocks in increasing order.
///
/// With `use_pseudo == false` the `D` block must be positive definite and is
/// factored by Cholesky; otherwise its pseudoinverse is used.
pub fn schur_complement(
    m: &DMatrix<f64>,
    eliminate: &IndexSet,
    block: usize,
    use_pseudo: bool,
) -> Result<DMatrix<f64>> {
    if block == 0 || m.nrows() != m.ncols() || !m.nrows().is_multiple_of(block) {
        return Err(Error::DimensionMismatch {
            expected: format!("square matrix with block size {block}"),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let nb = m.nrows() / block;
    if let Some(&bad) = eliminate.as_slice().iter().find(|&&b| b >= nb) {
        return Err(Error::VertexOutOfRange { vertex: bad, n: nb });
    }
    let keep = block_indices(&eliminate.complement(nb), block);
    let drop = block_indices(eliminate.as_slice(), block);
    let a = select(m, &keep, &keep);
    if drop.is_empty() {
        return Ok(a);
    }
    let b = select(m, &keep, &drop);
    let c = select(m, &drop, &keep);
    let d = select(m, &drop, &drop);
    let dc = if use_pseudo {
        pseudoinverse(&d, default_rank_tol(d.nrows())) * &c
    } else {
        solve_spd(&d, &c)?
    };
    Ok(a - b * dc)
}

/// Orthonormal basis (as columns) of the numerical kernel of a symmetric PSD
/// matrix: eigenvectors whose eigenvalue is at most `tol * lambda_max`.
pub fn kernel_basis(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (vals, vecs) = sorted_eigen(m);
    let cutoff = tol * max_abs(&vals);
    let cols: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] <= cutoff).collect();
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| vecs[(r, cols[c])])
}

/// Number of eigenvalues at most `tol * lambda_max`.
pub fn numerical_nullity(m: &DMatrix<f64>, tol: f64) -> usize {
    let vals = symmetric_eigenvalues(m);
    let cutoff = tol * max_abs(&vals);
    vals.iter().filter(|&&v| v <= cutoff).count()
}

/// Largest absolute entry of `m^T m - I`.
pub fn orthogonality_deviation(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut dev = 0.0_f64;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((g[(r, c)] - target).abs());
        }
    }
    dev
}

/// Extend a `d x rho` matrix with orthonormal columns to a `d x d`
/// orthogonal matrix whose first `rho` columns are the input.
///
/// Candidate directions are drawn from the standard basis, always taking the
/// one with the largest residual after projection, and orthogonalized twice.
pub fn complete_orthonormal(partial: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = partial.nrows();
    let rho = partial.ncols();
    if rho > d {
        return Err(Error::DimensionMismatch {
            expected: format!("at most {d} columns"),
            got: format!("{rho}"),
        });
    }
    if rho > 0 {
        let dev = orthogonality_deviation(partial);
        if dev > 1e-8 {
            return Err(Error::NotOrthonormalInput(dev));
        }
    }
    let mut q = DMatrix::<f64>::zeros(d, d);
    q.columns_mut(0, rho).copy_from(partial);
    for k in rho..d {
        let mut best = None;
        let mut best_norm = -1.0;
        for e in 0..d {
            let mut v = nalgebra::DVector::<f64>::zeros(d);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in 0..k {
                    let col = q.column(c);
                    let proj = col.dot(&v);
                    v -= col * proj;
                }
            }
            let nrm = v.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(v);
            }
        }
        let v = best.expect("d > 0") / best_norm;
        q.set_column(k, &v);
    }
    Ok(q)
}

/// Largest singular value, from the eigenvalues of `m^T m`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = symmetrize(&(m.transpose() * m));
    gram.symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
        .sqrt()
}

/// Largest absolute entry.
pub fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Block-diagonal matrix `a ⊕ b`.
pub fn direct_sum_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), (b.nrows(), b.ncols()))
        .copy_from(b);
    out
}

/// Block-diagonal matrix with the given square blocks along the diagonal.
pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(total, total);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols()))
            .copy_from(b);
        off += b.nrows();
    }
    out
}

/// 2D rotation by `theta` radians.
pub fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
