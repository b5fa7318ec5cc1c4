//! Dense symmetric-matrix primitives: truncated spectra, Ky-Fan norms and
//! spectral-mass selection of the number of norms.
//!
//! A symmetric matrix `A = Σ Λ_j u_j u_jᵀ` has singular values `|Λ_j|`, left
//! singular vectors `u_j` and right singular vectors `sign(Λ_j) u_j`. All
//! singular triplets here are produced that way from one symmetric
//! eigendecomposition, which also pins down the sign convention.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
// Unused when a std build supplies the inherent float methods.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Relative tolerance accepted when a caller hands in a nearly symmetric matrix.
const SYMMETRY_TOL: f64 = 1e-10;

/// A real symmetric `p × p` matrix. Symmetry is exact: the upper and lower
/// triangles are bitwise mirrors of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Wraps a square matrix, rejecting non-finite entries and asymmetry
    /// beyond a small relative tolerance. The mirrored pairs are averaged so
    /// the stored matrix is exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || rows != cols {
            return Err(Error::Data(format!(
                "symmetric matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("matrix has non-finite entries".into()));
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        let mut m = m;
        for r in 0..rows {
            for s in (r + 1)..rows {
                let (a, b) = (m[(r, s)], m[(s, r)]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Data(format!(
                        "matrix is not symmetric at ({r}, {s}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m[(r, s)] = avg;
                m[(s, r)] = avg;
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds a matrix from its upper triangle; `f(r, s)` is called for `r <= s`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let mut m = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for s in r..dim {
                let v = f(r, s);
                m[(r, s)] = v;
                m[(s, r)] = v;
            }
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("matrix has non-finite entries".into()));
        }
        Ok(Self { inner: m })
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "identity dimension must be positive");
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_upper_fn(diag.len(), |r, s| if r == s { diag[r] } else { 0.0 })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    /// Symmetrizes `m` as `(m + mᵀ)/2` without any tolerance check. Used on
    /// products such as `XᵀX` that are symmetric up to rounding.
    pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        debug_assert_eq!(p, m.ncols());
        for r in 0..p {
            for s in (r + 1)..p {
                let avg = 0.5 * (m[(r, s)] + m[(s, r)]);
                m[(r, s)] = avg;
                m[(s, r)] = avg;
            }
        }
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.inner[(r, s)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            inner: &self.inner - &other.inner,
        })
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { inner: &self.inner * c }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        self.inner
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(v))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Data(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// Top singular triplets of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpectrum {
    /// Singular values, non-increasing and non-negative.
    pub values: Vec<f64>,
    /// `p × k`, column `j` is `u_j`.
    pub left_vectors: DMatrix<f64>,
    /// `p × k`, column `j` is `sign(Λ_j) u_j`.
    pub right_vectors: DMatrix<f64>,
    pub source_dim: usize,
}

impl SymmetricSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Signs of the underlying eigenvalues, `+1` for zero.
    pub fn signs(&self) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let dot = self.left_vectors.column(j).dot(&self.right_vectors.column(j));
                if dot < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// Full symmetric eigendecomposition ordered by decreasing `|Λ_j|`.
///
/// Returns the signed eigenvalues and the matching eigenvector columns. Ties
/// in `|Λ_j|` keep the solver's order.
pub fn eigen_by_magnitude(m: &SymmetricMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.inner.clone().symmetric_eigen();
    let p = m.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .partial_cmp(&eig.eigenvalues[a].abs())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// All singular values of a symmetric matrix, non-increasing.
pub fn singular_values(m: &SymmetricMatrix) -> Vec<f64> {
    abs_sorted_desc(m.inner.clone().symmetric_eigenvalues().iter().copied())
}

/// `|x|` of every item, sorted non-increasing.
pub(crate) fn abs_sorted_desc(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = values.map(f64::abs).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    out
}

/// Top-`k` singular triplets of a symmetric matrix.
pub fn truncated_svd(m: &SymmetricMatrix, k: usize) -> Result<SymmetricSpectrum> {
    let p = m.dim();
    if k == 0 || k > p {
        return Err(Error::param("k", format!("must lie in 1..={p}, got {k}")));
    }
    let (eigvals, eigvecs) = eigen_by_magnitude(m);
    let mut left = DMatrix::zeros(p, k);
    let mut right = DMatrix::zeros(p, k);
    for (j, &lambda) in eigvals.iter().take(k).enumerate() {
        let sign = if lambda < 0.0 { -1.0 } else { 1.0 };
        left.set_column(j, &eigvecs.column(j));
        right.set_column(j, &(eigvecs.column(j) * sign));
    }
    Ok(SymmetricSpectrum {
        values: eigvals[..k].iter().map(|v| v.abs()).collect(),
        left_vectors: left,
        right_vectors: right,
        source_dim: p,
    })
}

/// Ky-Fan(k) norm: the sum of the `k` largest singular values.
pub fn ky_fan_norm(m: &SymmetricMatrix, k: usize) -> Result<f64> {
    let p = m.dim();
    if k == 0 || k > p {
        return Err(Error::param("k", format!("must lie in 1..={p}, got {k}")));
    }
    Ok(singular_values(m)[..k].iter().sum())
}

/// Ky-Fan(1..=m) norms from singular values sorted non-increasing.
///
/// Positions past the end of `values` repeat the last sum, which is the
/// correct norm whenever the remaining singular values are zero (the matrix
/// rank is at most `values.len()`).
pub fn ky_fan_prefix(values: &[f64], m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    let mut acc = 0.0;
    for k in 0..m {
        if let Some(v) = values.get(k) {
            acc += v;
        }
        out.push(acc);
    }
    out
}

/// Smallest `K <= cap` whose top-`K` share of the total singular-value sum
/// strictly exceeds `cutoff`. Returns `cap` when no such `K` exists.
pub fn select_k(values: &[f64], cutoff: f64, cap: usize) -> Result<usize> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::param("cutoff", format!("must lie in (0, 1), got {cutoff}")));
    }
    if cap == 0 {
        return Err(Error::param("cap", "must be at least 1"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Data("spectrum must be finite and non-negative".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("spectrum is identically zero".into()));
    }
    let mut acc = 0.0;
    for (i, v) in values.iter().take(cap).enumerate() {
        acc += v;
        if acc / total > cutoff {
            return Ok(i + 1);
        }
    }
    Ok(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_identity_and_diagonal() {
        let s = truncated_svd(&SymmetricMatrix::identity(5), 3).unwrap();
        assert_eq!(s.values, [1.0, 1.0, 1.0]);
        let d = SymmetricMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap();
        let s = truncated_svd(&d, 2).unwrap();
        assert!((s.values[0] - 3.0).abs() < 1e-14 && (s.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn negative_eigenvalues_flip_right_vectors() {
        let d = SymmetricMatrix::from_diagonal(&[-4.0, 1.0, 0.0]).unwrap();
        let s = truncated_svd(&d, 2).unwrap();
        assert!((s.values[0] - 4.0).abs() < 1e-14);
        assert_eq!(s.signs(), [-1.0, 1.0]);
        let dot = s.left_vectors.column(0).dot(&s.right_vectors.column(0));
        assert!((dot + 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let m = SymmetricMatrix::identity(3);
        assert!(matches!(truncated_svd(&m, 0), Err(Error::Parameter { .. })));
        assert!(matches!(ky_fan_norm(&m, 4), Err(Error::Parameter { .. })));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        m[(1, 0)] = f64::NAN;
        assert!(matches!(SymmetricMatrix::new(m), Err(Error::Data(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]);
        assert!(matches!(SymmetricMatrix::new(m), Err(Error::Data(_))));
    }

    #[test]
    fn ky_fan_examples() {
        assert_eq!(ky_fan_norm(&SymmetricMatrix::identity(5), 3).unwrap(), 3.0);
        let mut diag = [0.0; 6];
        diag[0] = 4.0;
        diag[1] = 1.0;
        let d = SymmetricMatrix::from_diagonal(&diag).unwrap();
        assert!((ky_fan_norm(&d, 1).unwrap() - 4.0).abs() < 1e-14);
        assert!((ky_fan_norm(&d, 2).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn prefix_saturates_past_rank() {
        assert_eq!(ky_fan_prefix(&[3.0, 1.0], 4), [3.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn select_k_examples() {
        assert_eq!(select_k(&[8.0, 1.0, 1.0], 0.8, 3).unwrap(), 2);
        assert_eq!(select_k(&[9.0, 1.0], 0.8, 2).unwrap(), 1);
        assert_eq!(select_k(&[1.0; 10], 0.8, 10).unwrap(), 9);
        // cap binds before the cutoff is reached
        assert_eq!(select_k(&[1.0; 10], 0.8, 4).unwrap(), 4);
    }

    #[test]
    fn select_k_rejects_bad_input() {
        assert!(matches!(select_k(&[0.0, 0.0], 0.8, 2), Err(Error::Degenerate(_))));
        assert!(select_k(&[1.0], 1.0, 1).is_err());
        assert!(select_k(&[1.0], 0.5, 0).is_err());
    }
}
