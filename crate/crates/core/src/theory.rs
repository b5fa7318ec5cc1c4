//! Population signal-to-noise calculus for the Ky-Fan statistics.
//!
//! For Gaussian data, `√n (T_k − ‖Σ₁ − Σ₂‖_(k)) / ω_{1:k}` is asymptotically
//! standard normal with
//!
//! ```text
//! ω²_{1:k} = 2 Σ_s r_s tr{(U_kᵀ Σ_s V_k)²},   r_s = n / n_s,
//! ```
//!
//! where `U_k`, `V_k` hold the top-`k` left and right singular vectors of
//! `Σ₁ − Σ₂`, taken as `u_j` and `sign(Λ_j) u_j` from its eigendecomposition.
//! `SNR_k = ‖Σ₁ − Σ₂‖_(k) / ω_{1:k}` then governs the power of `T_k`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
// Unused when a std build supplies the inherent float methods.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::matrix::{eigen_by_magnitude, SymmetricMatrix};

/// Singular-value gap below which the top-`k` subspace is not identifiable.
pub const EIGEN_GAP_TOL: f64 = 1e-8;

/// Population covariances and sample-size ratios `r_s = n / n_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPair {
    sigma1: SymmetricMatrix,
    sigma2: SymmetricMatrix,
    r1: f64,
    r2: f64,
}

impl PopulationPair {
    pub fn new(sigma1: SymmetricMatrix, sigma2: SymmetricMatrix, r1: f64, r2: f64) -> Result<Self> {
        if sigma1.dim() != sigma2.dim() {
            return Err(Error::Data(format!(
                "covariances have different dimensions: {} vs {}",
                sigma1.dim(),
                sigma2.dim()
            )));
        }
        if !(r1 > 1.0 && r2 > 1.0) || (1.0 / r1 + 1.0 / r2 - 1.0).abs() > 1e-10 {
            return Err(Error::param(
                "r",
                format!("need r1, r2 > 1 with 1/r1 + 1/r2 = 1, got ({r1}, {r2})"),
            ));
        }
        for (name, s) in [("sigma1", &sigma1), ("sigma2", &sigma2)] {
            if s.min_eigenvalue() <= 0.0 {
                return Err(Error::Data(format!("{name} is not positive definite")));
            }
        }
        Ok(Self { sigma1, sigma2, r1, r2 })
    }

    /// Ratios from group sizes: `r_s = (n₁ + n₂) / n_s`.
    pub fn from_sample_sizes(sigma1: SymmetricMatrix, sigma2: SymmetricMatrix, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::param("n", "group sizes must be positive"));
        }
        let n = (n1 + n2) as f64;
        Self::new(sigma1, sigma2, n / n1 as f64, n / n2 as f64)
    }

    pub fn sigma1(&self) -> &SymmetricMatrix {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &SymmetricMatrix {
        &self.sigma2
    }

    pub fn ratios(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn dim(&self) -> usize {
        self.sigma1.dim()
    }

    /// `Σ₁ − Σ₂`.
    pub fn difference(&self) -> SymmetricMatrix {
        self.sigma1
            .sub(&self.sigma2)
            .expect("dimensions checked at construction")
    }
}

/// `Σ₁ = cI`, `Σ₂ = Σ₁ + diag(4, 1, 0, …, 0)`, balanced groups.
pub fn crossover_example(c: f64, p: usize) -> Result<PopulationPair> {
    if p < 2 {
        return Err(Error::param("p", "need at least 2 dimensions"));
    }
    let sigma1 = SymmetricMatrix::from_upper_fn(p, |r, s| if r == s { c } else { 0.0 })?;
    let sigma2 = SymmetricMatrix::from_upper_fn(p, |r, s| match (r, s) {
        (0, 0) => c + 4.0,
        (1, 1) => c + 1.0,
        (r, s) if r == s => c,
        _ => 0.0,
    })?;
    PopulationPair::new(sigma1, sigma2, 2.0, 2.0)
}

struct Difference {
    signed: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Difference {
    fn of(pop: &PopulationPair) -> Self {
        let (signed, vectors) = eigen_by_magnitude(&pop.difference());
        Self { signed, vectors }
    }

    fn kyfan(&self, k: usize) -> f64 {
        self.signed[..k].iter().map(|v| v.abs()).sum()
    }

    fn check_k(&self, k: usize) -> Result<()> {
        let p = self.signed.len();
        if k == 0 || k > p {
            return Err(Error::param("k", format!("must lie in 1..={p}, got {k}")));
        }
        if k < p {
            let gap = self.signed[k - 1].abs() - self.signed[k].abs();
            if gap <= EIGEN_GAP_TOL {
                return Err(Error::IllPosedSubspace { k, gap });
            }
        }
        Ok(())
    }

    fn omega_sq(&self, pop: &PopulationPair, k: usize) -> Result<f64> {
        self.check_k(k)?;
        let p = self.signed.len();
        let u = self.vectors.columns(0, k).into_owned();
        let mut v = u.clone();
        for j in 0..k {
            if self.signed[j] < 0.0 {
                v.column_mut(j).neg_mut();
            }
        }
        debug_assert_eq!(u.nrows(), p);
        let term = |sigma: &SymmetricMatrix| {
            let m = u.transpose() * sigma.as_matrix() * &v;
            (&m * &m).trace()
        };
        let (r1, r2) = pop.ratios();
        Ok(2.0 * (r1 * term(pop.sigma1()) + r2 * term(pop.sigma2())))
    }
}

/// Asymptotic variance `ω²_{1:k}` of `√n T_k`.
pub fn omega_sq(pop: &PopulationPair, k: usize) -> Result<f64> {
    Difference::of(pop).omega_sq(pop, k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SnrProfile {
    pub k: usize,
    /// `‖Σ₁ − Σ₂‖_(k)`.
    pub kyfan_signal: f64,
    pub omega_sq: f64,
    pub snr: f64,
}

pub fn snr_k(pop: &PopulationPair, k: usize) -> Result<SnrProfile> {
    let diff = Difference::of(pop);
    snr_from(&diff, pop, k)
}

fn snr_from(diff: &Difference, pop: &PopulationPair, k: usize) -> Result<SnrProfile> {
    let omega_sq = diff.omega_sq(pop, k)?;
    let kyfan_signal = diff.kyfan(k);
    Ok(SnrProfile {
        k,
        kyfan_signal,
        omega_sq,
        snr: kyfan_signal / omega_sq.sqrt(),
    })
}

/// Relative signal and noise increments between two Ky-Fan indices.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Increments {
    pub k1: usize,
    pub k2: usize,
    /// `(‖Δ‖_(k2) − ‖Δ‖_(k1)) / ‖Δ‖_(k1)`.
    pub beta: f64,
    /// `(ω²_{1:k2} − ω²_{1:k1}) / ω²_{1:k1}`.
    pub gamma: f64,
    /// `β ≥ √(γ + 1) − 1`, equivalently `SNR_{k2} ≥ SNR_{k1}`.
    pub snr_increases: bool,
}

pub fn increments(pop: &PopulationPair, k1: usize, k2: usize) -> Result<Increments> {
    if k1 == 0 || k1 >= k2 {
        return Err(Error::param("k", format!("need 1 <= k1 < k2, got ({k1}, {k2})")));
    }
    let diff = Difference::of(pop);
    let lo = snr_from(&diff, pop, k1)?;
    let hi = snr_from(&diff, pop, k2)?;
    increments_from(&lo, &hi)
}

fn increments_from(lo: &SnrProfile, hi: &SnrProfile) -> Result<Increments> {
    if lo.kyfan_signal <= 0.0 {
        return Err(Error::UndefinedRatio(format!("zero signal at k = {}", lo.k)));
    }
    let beta = (hi.kyfan_signal - lo.kyfan_signal) / lo.kyfan_signal;
    let gamma = (hi.omega_sq - lo.omega_sq) / lo.omega_sq;
    Ok(Increments {
        k1: lo.k,
        k2: hi.k,
        beta,
        gamma,
        snr_increases: beta >= (gamma + 1.0).sqrt() - 1.0,
    })
}

/// One row of a diagnostics table; the increment is measured against `k = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticRow {
    pub profile: SnrProfile,
    pub from_first: Option<Increments>,
}

/// Rows for `k = 1..=k_max`, skipping indices whose subspace is ill-posed.
pub fn diagnostics_table(pop: &PopulationPair, k_max: usize) -> Result<Vec<DiagnosticRow>> {
    let diff = Difference::of(pop);
    let first = snr_from(&diff, pop, 1)?;
    let mut rows = Vec::new();
    for k in 1..=k_max.min(pop.dim()) {
        let profile = match snr_from(&diff, pop, k) {
            Ok(p) => p,
            Err(Error::IllPosedSubspace { .. }) => continue,
            Err(e) => return Err(e),
        };
        let from_first = if k > 1 {
            Some(increments_from(&first, &profile)?)
        } else {
            None
        };
        rows.push(DiagnosticRow { profile, from_first });
    }
    Ok(rows)
}
