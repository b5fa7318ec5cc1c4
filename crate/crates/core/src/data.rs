//! Two-sample datasets, centering, covariate residualization and sample
//! covariances. Every covariance uses the unbiased `n - 1` divisor.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{abs_sorted_desc, SymmetricMatrix};

/// Two groups of `p`-dimensional observations, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleDataset {
    group1: DMatrix<f64>,
    group2: DMatrix<f64>,
    feature_names: Option<Vec<String>>,
}

impl TwoSampleDataset {
    pub fn new(group1: DMatrix<f64>, group2: DMatrix<f64>) -> Result<Self> {
        if group1.ncols() != group2.ncols() {
            return Err(Error::Data(format!(
                "groups have different dimensions: {} vs {}",
                group1.ncols(),
                group2.ncols()
            )));
        }
        if group1.ncols() == 0 {
            return Err(Error::Data("dimension must be at least 1".into()));
        }
        for g in [&group1, &group2] {
            if g.nrows() < 2 {
                return Err(Error::InsufficientData {
                    needed: 2,
                    got: g.nrows(),
                });
            }
        }
        if group1.iter().chain(group2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("observations must be finite".into()));
        }
        Ok(Self {
            group1,
            group2,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::Data(format!(
                "{} feature names for {} features",
                names.len(),
                self.p()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn group1(&self) -> &DMatrix<f64> {
        &self.group1
    }

    pub fn group2(&self) -> &DMatrix<f64> {
        &self.group2
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n1(&self) -> usize {
        self.group1.nrows()
    }

    pub fn n2(&self) -> usize {
        self.group2.nrows()
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn p(&self) -> usize {
        self.group1.ncols()
    }

    /// Group 1 rows followed by group 2 rows.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (n1, n, p) = (self.n1(), self.n(), self.p());
        DMatrix::from_fn(n, p, |i, j| {
            if i < n1 {
                self.group1[(i, j)]
            } else {
                self.group2[(i - n1, j)]
            }
        })
    }

    /// Reassigns the stacked rows: `order[..n1]` become group 1 and the rest
    /// group 2. `order` must be a permutation of `0..n`.
    pub fn relabel(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.n(), "relabel order has the wrong length");
        let stacked = self.stacked();
        let n1 = self.n1();
        let pick = |rows: &[usize]| DMatrix::from_fn(rows.len(), self.p(), |i, j| stacked[(rows[i], j)]);
        Self {
            group1: pick(&order[..n1]),
            group2: pick(&order[n1..]),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Selects rows from each group by index.
    pub fn subset(&self, rows1: &[usize], rows2: &[usize]) -> Result<Self> {
        let pick = |g: &DMatrix<f64>, rows: &[usize]| DMatrix::from_fn(rows.len(), g.ncols(), |i, j| g[(rows[i], j)]);
        let out = Self::new(pick(&self.group1, rows1), pick(&self.group2, rows2))?;
        Ok(Self {
            feature_names: self.feature_names.clone(),
            ..out
        })
    }

    /// Regresses each group's observations on its own covariate design.
    pub fn residualize_within_groups(&self, c1: &CovariateMatrix, c2: &CovariateMatrix) -> Result<Self> {
        Ok(Self {
            group1: residualize(&self.group1, c1)?,
            group2: residualize(&self.group2, c2)?,
            feature_names: self.feature_names.clone(),
        })
    }
}

/// `n × q` regression design for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    design: DMatrix<f64>,
}

impl CovariateMatrix {
    pub fn new(design: DMatrix<f64>) -> Result<Self> {
        let (n, q) = design.shape();
        if q == 0 || q >= n {
            return Err(Error::Data(format!(
                "covariate design must have 1 <= q < n, got n = {n}, q = {q}"
            )));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("covariates must be finite".into()));
        }
        Ok(Self { design })
    }

    /// Prepends an all-ones intercept column to `covariates`.
    pub fn with_intercept(covariates: &DMatrix<f64>) -> Result<Self> {
        let (n, q) = covariates.shape();
        Self::new(DMatrix::from_fn(n, q + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                covariates[(i, j - 1)]
            }
        }))
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn nrows(&self) -> usize {
        self.design.nrows()
    }
}

/// How the pooled covariance removes means before stacking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PooledCentering {
    /// Each group is centered at its own mean.
    #[default]
    PerGroup,
    /// The stacked data are centered at the grand mean.
    Global,
}

/// Subtracts each group's column means.
pub fn center_by_group(d: &TwoSampleDataset) -> TwoSampleDataset {
    TwoSampleDataset {
        group1: center_columns(&d.group1),
        group2: center_columns(&d.group2),
        feature_names: d.feature_names.clone(),
    }
}

pub(crate) fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    let n = x.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Removes the linear effect of the covariates: `X - C (CᵀC)⁻¹ Cᵀ X`.
pub fn residualize(x: &DMatrix<f64>, c: &CovariateMatrix) -> Result<DMatrix<f64>> {
    if x.nrows() != c.nrows() {
        return Err(Error::Data(format!(
            "{} observations but {} covariate rows",
            x.nrows(),
            c.nrows()
        )));
    }
    let design = c.design();
    let q = design.ncols();
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = (0..q).fold(0.0f64, |acc, i| acc.max(r[(i, i)].abs()));
    if scale == 0.0 || (0..q).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return Err(Error::SingularDesign);
    }
    let basis = qr.q();
    let fitted = &basis * (basis.transpose() * x);
    Ok(x - fitted)
}

/// Unbiased sample covariance of the rows of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<SymmetricMatrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if x.ncols() == 0 {
        return Err(Error::Data("dimension must be at least 1".into()));
    }
    let centered = center_columns(x);
    let cross = centered.tr_mul(&centered) / (n as f64 - 1.0);
    Ok(SymmetricMatrix::symmetrize(cross))
}

/// Covariance of all observations from both groups.
pub fn pooled_covariance(d: &TwoSampleDataset, centering: PooledCentering) -> Result<SymmetricMatrix> {
    let n = d.n();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let stacked = pooled_rows(d, centering);
    let cross = stacked.tr_mul(&stacked) / (n as f64 - 1.0);
    Ok(SymmetricMatrix::symmetrize(cross))
}

/// Singular values of the pooled covariance, non-increasing. Only the
/// `min(n, p)` leading values are returned; the rest are zero.
pub fn pooled_singular_values(d: &TwoSampleDataset, centering: PooledCentering) -> Result<Vec<f64>> {
    let (n, p) = (d.n(), d.p());
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let rows = pooled_rows(d, centering);
    let divisor = n as f64 - 1.0;
    let gram = if p <= n {
        rows.tr_mul(&rows)
    } else {
        &rows * rows.transpose()
    };
    let gram = SymmetricMatrix::symmetrize(gram / divisor);
    // eigenvalues of a PSD Gram matrix; tiny negatives are rounding noise
    Ok(abs_sorted_desc(
        gram.into_inner().symmetric_eigenvalues().iter().map(|v| v.max(0.0)),
    ))
}

fn pooled_rows(d: &TwoSampleDataset, centering: PooledCentering) -> DMatrix<f64> {
    match centering {
        PooledCentering::PerGroup => center_by_group(d).stacked(),
        PooledCentering::Global => center_columns(&d.stacked()),
    }
}
