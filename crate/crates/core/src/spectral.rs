//! Eigen-decomposition of symmetric OD matrices with a canonical ordering
//! and sign convention, and the inverse reconstruction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{OdError, Result};
use crate::matrix::{max_asymmetry, OdMatrix};

/// Relative gap under which two eigenvalues are treated as repeated.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Orthonormal eigenvectors `P` (columns), eigenvalues in descending order,
/// and the column sums `S[k] = Σ_j P[j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralForm {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    column_sums: DVector<f64>,
    degenerate_blocks: Vec<(usize, usize)>,
}

impl SpectralForm {
    /// Wraps an externally supplied basis. Columns are sign-canonicalized;
    /// the order given is kept.
    pub fn from_parts(vectors: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        let n = vectors.nrows();
        if vectors.ncols() != n || values.len() != n {
            return Err(OdError::Dimension(format!(
                "eigenvectors {}x{} with {} eigenvalues",
                n,
                vectors.ncols(),
                values.len()
            )));
        }
        let mut vectors = vectors;
        canonicalize_signs(&mut vectors);
        let column_sums = column_sums(&vectors);
        let degenerate_blocks = degenerate_blocks(&values);
        Ok(Self {
            vectors,
            values,
            column_sums,
            degenerate_blocks,
        })
    }

    /// `P`: column `k` is the eigenvector of `values()[k]`.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// `S`, the column sums of `P`.
    pub fn column_sums(&self) -> &DVector<f64> {
        &self.column_sums
    }

    /// `S_d = diag(S)`.
    pub fn column_sum_diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.column_sums)
    }

    /// `P·S`, the vector whose i-th entry is `Σ_k P[i][k] S[k]`.
    pub fn row_weights(&self) -> DVector<f64> {
        &self.vectors * &self.column_sums
    }

    /// `A = P·S_d`, mapping eigenvalues to expected departures.
    pub fn margin_operator(&self) -> DMatrix<f64> {
        let mut a = self.vectors.clone();
        for (k, mut col) in a.column_iter_mut().enumerate() {
            col *= self.column_sums[k];
        }
        a
    }

    /// Index ranges `[start, end)` of eigenvalue blocks that are repeated
    /// within [`DEGENERACY_TOL`]. Eigenvectors there are not unique.
    pub fn degenerate_blocks(&self) -> &[(usize, usize)] {
        &self.degenerate_blocks
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_blocks.is_empty()
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        reconstruct(&self.vectors, &self.values).expect("shapes checked at construction")
    }
}

/// Decomposes a symmetric matrix. Eigenvalues are sorted by signed value
/// (descending) and each eigenvector's largest-magnitude entry is made
/// nonnegative.
pub fn spectral_decompose(r: &OdMatrix) -> Result<SpectralForm> {
    decompose_matrix(r.entries())
}

/// As [`spectral_decompose`] for any symmetric square matrix (the diagonal
/// need not be zero).
pub fn decompose_matrix(m: &DMatrix<f64>) -> Result<SpectralForm> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(OdError::Dimension(format!(
            "cannot decompose a {}x{} matrix",
            n,
            m.ncols()
        )));
    }
    let scale = m.amax();
    let asym = max_asymmetry(m);
    if asym > 1e-12 * scale.max(1.0) {
        return Err(OdError::NotSymmetric { max_asymmetry: asym });
    }
    if n == 0 {
        return SpectralForm::from_parts(DMatrix::zeros(0, 0), DVector::zeros(0));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or_else(|| {
        OdError::Numeric(format!(
            "symmetric eigensolver did not converge for {n}x{n} matrix \
             (max |entry| {scale:e}, Frobenius norm {:e}, max asymmetry {asym:e})",
            m.norm()
        ))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    canonicalize_signs(&mut vectors);

    // Within repeated-eigenvalue blocks, order by the first entry of the
    // canonical eigenvector so the basis is reproducible.
    let blocks = degenerate_blocks(&values);
    for &(start, end) in &blocks {
        let mut cols: Vec<usize> = (start..end).collect();
        cols.sort_by(|&a, &b| vectors[(0, b)].total_cmp(&vectors[(0, a)]));
        let block = DMatrix::from_fn(n, end - start, |i, c| vectors[(i, cols[c])]);
        for (c, col) in block.column_iter().enumerate() {
            vectors.set_column(start + c, &col);
        }
    }

    let column_sums = column_sums(&vectors);
    Ok(SpectralForm {
        vectors,
        values,
        column_sums,
        degenerate_blocks: blocks,
    })
}

/// `P·diag(λ)·Pᵀ`. No constraint handling: the diagonal may be nonzero and
/// off-diagonal entries negative.
pub fn reconstruct(p: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if p.ncols() != n || lambda.len() != n {
        return Err(OdError::Dimension(format!(
            "reconstruct: P is {}x{}, lambda has {} entries",
            n,
            p.ncols(),
            lambda.len()
        )));
    }
    let mut scaled = p.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= lambda[k];
    }
    let mut r = scaled * p.transpose();
    // Exact symmetry despite rounding.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(r)
}

/// Flips each column so its largest-magnitude entry is nonnegative. Ties on
/// magnitude resolve to the lowest row index.
pub fn canonicalize_signs(p: &mut DMatrix<f64>) {
    for mut col in p.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col.len() > 0 && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn column_sums(p: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(p.ncols(), p.column_iter().map(|c| c.sum()))
}

fn degenerate_blocks(values: &DVector<f64>) -> Vec<(usize, usize)> {
    let n = values.len();
    let tol = DEGENERACY_TOL * values.amax();
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=n {
        if k == n || (values[k - 1] - values[k]).abs() > tol {
            if k - start > 1 {
                blocks.push((start, k));
            }
            start = k;
        }
    }
    blocks
}

/// `‖PᵀP − I‖_max`.
pub fn orthonormality_error(p: &DMatrix<f64>) -> f64 {
    let n = p.ncols();
    (p.transpose() * p - DMatrix::identity(n, n)).amax()
}
