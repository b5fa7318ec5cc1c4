//! Observed two-sample statistics.
//!
//! All families are evaluated by one [`StatKernel`], which the permutation
//! engine reuses for every relabeling. Observed values are the kernel applied
//! to the identity labeling, so an identity permutation drawn at random
//! reproduces the observed row bit for bit.
//!
//! Rotation-invariant families (Ky-Fan, Frobenius, trace) only depend on the
//! Gram matrix of the stacked observations. When `n < p` the kernel rotates the
//! rows into an `n`-dimensional basis of their span once (a QR factorization of
//! the transposed data), after which each evaluation works with `n × n`
//! covariances instead of `p × p` ones.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
// Unused when a std build supplies the inherent float methods.
#[allow(unused_imports)]
use num_traits::Float;

use crate::data::TwoSampleDataset;
use crate::error::{Error, Result};
use crate::matrix::{abs_sorted_desc, ky_fan_prefix};

/// Floor applied to the max-elementwise variance estimate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StatFamily {
    /// `T_k = ‖Σ̂₁ − Σ̂₂‖_(k)` for `k = 1..=m`.
    KyFanGrid,
    Frobenius,
    /// Largest standardized squared entrywise difference.
    MaxElementwise,
    /// Squared difference mass on superdiagonals `q = 0..=Q`.
    SuperdiagGrid,
    /// Contrast of plug-in second spectral moments.
    Trace,
}

impl StatFamily {
    pub fn name(self) -> &'static str {
        match self {
            StatFamily::KyFanGrid => "kyfan",
            StatFamily::Frobenius => "frobenius",
            StatFamily::MaxElementwise => "max_elementwise",
            StatFamily::SuperdiagGrid => "superdiag",
            StatFamily::Trace => "trace",
        }
    }
}

/// One family's statistics, indexed by component (`k` for Ky-Fan, `q` for
/// superdiagonals, `0` for scalar families).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatisticVector {
    pub family: StatFamily,
    pub components: Vec<usize>,
    pub values: Vec<f64>,
}

impl StatisticVector {
    pub fn get(&self, component: usize) -> Option<f64> {
        self.components
            .iter()
            .position(|&c| c == component)
            .map(|i| self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which statistic families to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FamilySet {
    /// Largest Ky-Fan index `m`; the grid is `1..=m`.
    pub kyfan: Option<usize>,
    pub frobenius: bool,
    pub max_elementwise: bool,
    /// Largest superdiagonal offset `Q`; the grid is `0..=Q`.
    pub superdiag: Option<usize>,
    pub trace: bool,
}

impl FamilySet {
    pub fn kyfan(m: usize) -> Self {
        Self {
            kyfan: Some(m),
            ..Self::default()
        }
    }

    /// The Ky-Fan grid up to `m` plus every baseline, with superdiagonals up
    /// to `⌊p^0.7⌋`.
    pub fn all(m: usize, p: usize) -> Self {
        Self {
            kyfan: Some(m),
            frobenius: true,
            max_elementwise: true,
            superdiag: Some(default_superdiag_max(p)),
            trace: true,
        }
    }

    /// `(family, components)` in the order the kernel emits them.
    pub fn layout(&self) -> Vec<(StatFamily, Vec<usize>)> {
        let mut out = Vec::new();
        if let Some(m) = self.kyfan {
            out.push((StatFamily::KyFanGrid, (1..=m).collect()));
        }
        if self.frobenius {
            out.push((StatFamily::Frobenius, vec![0]));
        }
        if self.max_elementwise {
            out.push((StatFamily::MaxElementwise, vec![0]));
        }
        if let Some(q) = self.superdiag {
            out.push((StatFamily::SuperdiagGrid, (0..=q).collect()));
        }
        if self.trace {
            out.push((StatFamily::Trace, vec![0]));
        }
        out
    }

    pub fn width(&self) -> usize {
        self.layout().iter().map(|(_, c)| c.len()).sum()
    }

    fn needs_reduced(&self) -> bool {
        self.kyfan.is_some() || self.frobenius || self.trace
    }

    fn needs_full(&self) -> bool {
        self.max_elementwise || self.superdiag.is_some()
    }

    fn validate(&self, d: &TwoSampleDataset) -> Result<()> {
        let p = d.p();
        if let Some(m) = self.kyfan {
            if m == 0 || m > p {
                return Err(Error::param("K", format!("Ky-Fan grid must lie in 1..={p}, got {m}")));
            }
        }
        if let Some(q) = self.superdiag {
            if q >= p {
                return Err(Error::param(
                    "q",
                    format!("superdiagonal offset must be < {p}, got {q}"),
                ));
            }
        }
        if self.max_elementwise && (d.n1() < 4 || d.n2() < 4) {
            return Err(Error::InsufficientData {
                needed: 4,
                got: d.n1().min(d.n2()),
            });
        }
        if self.layout().is_empty() {
            return Err(Error::param("families", "no statistic family selected"));
        }
        Ok(())
    }
}

/// `⌊p^0.7⌋`, capped at `p - 1`.
pub fn default_superdiag_max(p: usize) -> usize {
    let q = (p as f64).powf(0.7).floor() as usize;
    q.min(p.saturating_sub(1))
}

/// Evaluates a [`FamilySet`] on arbitrary relabelings of one dataset.
#[derive(Debug, Clone)]
pub struct StatKernel {
    n1: usize,
    n2: usize,
    p: usize,
    families: FamilySet,
    /// Rows in a basis of their span (`n × min(n, p)`), for invariant families.
    reduced: Option<DMatrix<f64>>,
    /// Original coordinates, for basis-dependent families.
    full: Option<DMatrix<f64>>,
}

impl StatKernel {
    pub fn new(d: &TwoSampleDataset, families: FamilySet) -> Result<Self> {
        families.validate(d)?;
        let stacked = d.stacked();
        let reduced = families.needs_reduced().then(|| reduce_rows(&stacked));
        let full = families.needs_full().then_some(stacked);
        Ok(Self {
            n1: d.n1(),
            n2: d.n2(),
            p: d.p(),
            families,
            reduced,
            full,
        })
    }

    pub fn families(&self) -> &FamilySet {
        &self.families
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Statistics for the identity labeling.
    pub fn observed(&self) -> Vec<StatisticVector> {
        let identity: Vec<usize> = (0..self.n()).collect();
        self.split(&self.evaluate(&identity))
    }

    /// Flat row of statistics when `order[..n1]` form group 1.
    pub fn evaluate(&self, order: &[usize]) -> Vec<f64> {
        debug_assert_eq!(order.len(), self.n());
        let (g1, g2) = order.split_at(self.n1);
        let f = &self.families;
        let mut kyfan = Vec::new();
        let mut frob = 0.0;
        let mut trace = 0.0;
        if let Some(y) = &self.reduced {
            let s1 = group_covariance(y, g1);
            let s2 = group_covariance(y, g2);
            let diff = &s1 - &s2;
            if let Some(m) = f.kyfan {
                let sv = abs_sorted_desc(diff.clone().symmetric_eigenvalues().iter().copied());
                kyfan = ky_fan_prefix(&sv, m);
            }
            if f.frobenius {
                frob = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            }
            if f.trace {
                let a1 = second_moment_contrast(&s1, self.p, self.n1);
                let a2 = second_moment_contrast(&s2, self.p, self.n2);
                trace = (a1 - a2).abs();
            }
        }
        let mut max_el = 0.0;
        let mut superdiag = Vec::new();
        if let Some(x) = &self.full {
            let c1 = center_rows(x, g1);
            let c2 = center_rows(x, g2);
            let s1 = covariance_of_centered(&c1);
            let s2 = covariance_of_centered(&c2);
            let diff = &s1 - &s2;
            if f.max_elementwise {
                max_el = max_elementwise_from_parts(&c1, &s1, &c2, &s2).value;
            }
            if let Some(q) = f.superdiag {
                superdiag = (0..=q).map(|q| superdiag_sum(&diff, q)).collect();
            }
        }

        let mut row = Vec::with_capacity(f.width());
        row.extend(kyfan);
        if f.frobenius {
            row.push(frob);
        }
        if f.max_elementwise {
            row.push(max_el);
        }
        row.extend(superdiag);
        if f.trace {
            row.push(trace);
        }
        row
    }

    /// Splits a flat row into per-family vectors.
    pub fn split(&self, row: &[f64]) -> Vec<StatisticVector> {
        let mut offset = 0;
        self.families
            .layout()
            .into_iter()
            .map(|(family, components)| {
                let values = row[offset..offset + components.len()].to_vec();
                offset += components.len();
                StatisticVector {
                    family,
                    components,
                    values,
                }
            })
            .collect()
    }
}

/// Coordinates of the rows of `y` in an orthonormal basis of their span.
/// Inner products between rows are preserved exactly (up to rounding).
fn reduce_rows(y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = y.shape();
    if p <= n {
        return y.clone();
    }
    // yᵀ = Q R with Q: p × n orthonormal, so y = Rᵀ Qᵀ.
    y.transpose().qr().r().transpose()
}

fn center_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let cols = x.ncols();
    let mut out = DMatrix::from_fn(rows.len(), cols, |i, j| x[(rows[i], j)]);
    let n = rows.len() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

fn covariance_of_centered(c: &DMatrix<f64>) -> DMatrix<f64> {
    c.tr_mul(c) / (c.nrows() as f64 - 1.0)
}

fn group_covariance(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    covariance_of_centered(&center_rows(x, rows))
}

/// `tr(S²)/p − tr(S)²/(p·n)`.
fn second_moment_contrast(s: &DMatrix<f64>, p: usize, n: usize) -> f64 {
    let tr = s.trace();
    let tr_sq: f64 = s.iter().map(|v| v * v).sum();
    let p = p as f64;
    tr_sq / p - tr * tr / (p * n as f64)
}

fn superdiag_sum(diff: &DMatrix<f64>, q: usize) -> f64 {
    let p = diff.nrows();
    (0..p - q).map(|r| diff[(r, r + q)].powi(2)).sum()
}

/// Result of the max-elementwise scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxElementwise {
    pub value: f64,
    /// `(r, s)` with `r <= s` attaining the maximum.
    pub argmax: (usize, usize),
    /// Some variance estimate fell below [`VARIANCE_FLOOR`] and was floored.
    pub floored: bool,
}

/// Per-entry variance of the centered cross-products, divisor `n`:
/// `θ[r,s] = mean_i (x_ir x_is − mean_i' x_i'r x_i's)²`.
fn cross_product_variance(c: &DMatrix<f64>, s: &DMatrix<f64>, r: usize, col: usize) -> f64 {
    let n = c.nrows() as f64;
    let mean = s[(r, col)] * (n - 1.0) / n;
    c.column(r)
        .iter()
        .zip(c.column(col).iter())
        .map(|(a, b)| (a * b - mean).powi(2))
        .sum::<f64>()
        / n
}

fn max_elementwise_from_parts(
    c1: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    c2: &DMatrix<f64>,
    s2: &DMatrix<f64>,
) -> MaxElementwise {
    let p = s1.nrows();
    let (n1, n2) = (c1.nrows() as f64, c2.nrows() as f64);
    let mut best = MaxElementwise {
        value: f64::NEG_INFINITY,
        argmax: (0, 0),
        floored: false,
    };
    for r in 0..p {
        for s in r..p {
            let num = (s1[(r, s)] - s2[(r, s)]).powi(2);
            let mut den = cross_product_variance(c1, s1, r, s) / n1 + cross_product_variance(c2, s2, r, s) / n2;
            if den < VARIANCE_FLOOR {
                den = VARIANCE_FLOOR;
                best.floored = true;
            }
            let v = num / den;
            if v > best.value {
                best.value = v;
                best.argmax = (r, s);
            }
        }
    }
    best
}

/// `T_k` for `k = 1..=K`, from one eigendecomposition of `Σ̂₁ − Σ̂₂`.
pub fn t_k_grid(d: &TwoSampleDataset, k_max: usize) -> Result<StatisticVector> {
    let cap = d.n().min(d.p());
    if k_max == 0 || k_max > cap {
        return Err(Error::param("K", format!("must lie in 1..={cap}, got {k_max}")));
    }
    single(d, FamilySet::kyfan(k_max))
}

/// `‖Σ̂₁ − Σ̂₂‖_F`.
pub fn frobenius_stat(d: &TwoSampleDataset) -> Result<f64> {
    let families = FamilySet {
        frobenius: true,
        ..FamilySet::default()
    };
    Ok(single(d, families)?.values[0])
}

/// `max_{r<=s} (Σ̂₁[r,s] − Σ̂₂[r,s])² / (θ̂₁[r,s]/n₁ + θ̂₂[r,s]/n₂)`.
pub fn max_elementwise_stat(d: &TwoSampleDataset) -> Result<MaxElementwise> {
    if d.n1() < 4 || d.n2() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: d.n1().min(d.n2()),
        });
    }
    let c1 = crate::data::center_columns(d.group1());
    let c2 = crate::data::center_columns(d.group2());
    let s1 = covariance_of_centered(&c1);
    let s2 = covariance_of_centered(&c2);
    Ok(max_elementwise_from_parts(&c1, &s1, &c2, &s2))
}

/// `Σ_r (Σ̂₁[r,r+q] − Σ̂₂[r,r+q])²`.
pub fn superdiag_stat(d: &TwoSampleDataset, q: usize) -> Result<f64> {
    if q >= d.p() {
        return Err(Error::param("q", format!("must be < {}, got {q}", d.p())));
    }
    let s1 = covariance_of_centered(&crate::data::center_columns(d.group1()));
    let s2 = covariance_of_centered(&crate::data::center_columns(d.group2()));
    Ok(superdiag_sum(&(s1 - s2), q))
}

/// `|â₁ − â₂|` with `â_g = tr(Σ̂_g²)/p − tr(Σ̂_g)²/(p·n_g)`.
pub fn trace_stat(d: &TwoSampleDataset) -> Result<f64> {
    let families = FamilySet {
        trace: true,
        ..FamilySet::default()
    };
    Ok(single(d, families)?.values[0])
}

fn single(d: &TwoSampleDataset, families: FamilySet) -> Result<StatisticVector> {
    let kernel = StatKernel::new(d, families)?;
    Ok(kernel.observed().remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_covariance;

    fn dataset(g1: &[f64], g2: &[f64], p: usize) -> TwoSampleDataset {
        TwoSampleDataset::new(
            DMatrix::from_row_slice(g1.len() / p, p, g1),
            DMatrix::from_row_slice(g2.len() / p, p, g2),
        )
        .unwrap()
    }

    #[test]
    fn identical_groups_give_zero() {
        let g = [1.0, 2.0, 0.5, -1.0, 3.0, 1.0, 2.0, 2.0, -1.0, 0.0];
        let mut swapped = g;
        swapped.swap(0, 8);
        swapped.swap(1, 9);
        let d = dataset(&g, &swapped, 2);
        let t = t_k_grid(&d, 2).unwrap();
        assert!(t.values.iter().all(|v| v.abs() < 1e-10));
        assert!(frobenius_stat(&d).unwrap() < 1e-12);
        assert!(trace_stat(&d).unwrap() < 1e-12);
        assert!(max_elementwise_stat(&d).unwrap().value < 1e-12);
        for q in 0..2 {
            assert!(superdiag_stat(&d, q).unwrap() < 1e-12);
        }
    }

    #[test]
    fn grid_out_of_range() {
        let d = dataset(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.0, 5.0, 1.0], 1);
        assert!(t_k_grid(&d, 2).is_err());
        assert!(t_k_grid(&d, 0).is_err());
        assert!(superdiag_stat(&d, 1).is_err());
    }

    #[test]
    fn engineered_difference_diag_3_4() {
        // group 1 covariance diag(3·2, 4·2)/… built from ±a rows; group 2 is zero.
        // Rows (±a, 0), (0, ±b) give covariance diag(2a²/3, 2b²/3) with n = 4.
        let a = (4.5f64).sqrt();
        let b = 6.0f64.sqrt();
        let g1 = [a, 0.0, -a, 0.0, 0.0, b, 0.0, -b];
        let g2 = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let d = dataset(&g1, &g2, 2);
        let s1 = sample_covariance(d.group1()).unwrap();
        assert!((s1.get(0, 0) - 3.0).abs() < 1e-12 && (s1.get(1, 1) - 4.0).abs() < 1e-12);
        assert!((frobenius_stat(&d).unwrap() - 5.0).abs() < 1e-12);
        assert!((superdiag_stat(&d, 0).unwrap() - 25.0).abs() < 1e-12);
        let t = t_k_grid(&d, 2).unwrap();
        assert!((t.values[0] - 4.0).abs() < 1e-12 && (t.values[1] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn layout_order_and_width() {
        let f = FamilySet::all(3, 10);
        let fams: Vec<_> = f.layout().into_iter().map(|(f, _)| f).collect();
        assert_eq!(
            fams,
            [
                StatFamily::KyFanGrid,
                StatFamily::Frobenius,
                StatFamily::MaxElementwise,
                StatFamily::SuperdiagGrid,
                StatFamily::Trace
            ]
        );
        // ⌊10^0.7⌋ = 5
        assert_eq!(f.width(), 3 + 1 + 1 + 6 + 1);
    }

    #[test]
    fn max_elementwise_needs_four_rows() {
        let d = dataset(&[0.0, 1.0, 2.0], &[1.0, 0.0, 5.0, 2.0], 1);
        assert!(matches!(max_elementwise_stat(&d), Err(Error::InsufficientData { .. })));
    }
}
