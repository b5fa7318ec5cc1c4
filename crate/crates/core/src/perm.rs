//! Permutation calibration.
//!
//! Replicate `b` (1-based) relabels the stacked observations with a shuffle
//! drawn from a ChaCha8 stream keyed by `(master_seed, b)`, so every replicate
//! can be computed independently and in any order. The observed labeling is
//! never inserted into the replicates; the `+1` terms in the p-values account
//! for it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Unused when a std build supplies the inherent float methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{center_by_group, pooled_singular_values, PooledCentering, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::select_k;
use crate::stats::{default_superdiag_max, FamilySet, StatFamily, StatKernel, StatisticVector};

/// Random stream for replicate `b` of a run seeded with `master_seed`.
pub fn replicate_rng(master_seed: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(b);
    rng
}

/// Uniformly random ordering of `0..n` for replicate `b`.
pub fn permutation_order(n: usize, master_seed: u64, b: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut replicate_rng(master_seed, b));
    order
}

/// Relabels the observations of `d` for replicate `b`, keeping group sizes.
pub fn permute_labels(d: &TwoSampleDataset, b: u64, master_seed: u64) -> TwoSampleDataset {
    d.relabel(&permutation_order(d.n(), master_seed, b))
}

/// Null replicates of one statistic family.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationNull {
    pub family: StatFamily,
    pub components: Vec<usize>,
    pub master_seed: u64,
    /// Row-major `B × m`.
    replicates: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
    degenerate: Vec<bool>,
}

impl PermutationNull {
    /// Builds a null from replicate rows, each of length `components.len()`.
    pub fn from_rows(family: StatFamily, components: Vec<usize>, rows: &[Vec<f64>], master_seed: u64) -> Result<Self> {
        let m = components.len();
        let b = rows.len();
        if b < 2 {
            return Err(Error::param("B", format!("need at least 2 replicates, got {b}")));
        }
        if m == 0 {
            return Err(Error::param("components", "empty statistic grid"));
        }
        let mut replicates = Vec::with_capacity(b * m);
        for row in rows {
            if row.len() != m {
                return Err(Error::Data(format!(
                    "replicate row has {} values, expected {m}",
                    row.len()
                )));
            }
            replicates.extend_from_slice(row);
        }
        let mut null = Self {
            family,
            components,
            master_seed,
            replicates,
            means: vec![0.0; m],
            sds: vec![0.0; m],
            degenerate: vec![false; m],
        };
        for j in 0..m {
            let col: Vec<f64> = null.column(j).collect();
            let mean = col.iter().sum::<f64>() / b as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
            let sd = var.sqrt();
            null.means[j] = mean;
            null.sds[j] = sd;
            null.degenerate[j] = sd.is_nan() || mean.is_nan() || sd <= 1e-10 * mean.abs();
        }
        Ok(null)
    }

    /// Number of replicates `B`.
    pub fn b(&self) -> usize {
        self.replicates.len() / self.width()
    }

    pub fn width(&self) -> usize {
        self.components.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn degenerate(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn replicate(&self, b: usize) -> &[f64] {
        let m = self.width();
        &self.replicates[b * m..(b + 1) * m]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.replicates.iter().skip(j).step_by(self.width()).copied()
    }

    /// The first `m` components only.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.width() {
            return Err(Error::param("m", format!("must lie in 1..={}, got {m}", self.width())));
        }
        let rows: Vec<Vec<f64>> = (0..self.b()).map(|b| self.replicate(b)[..m].to_vec()).collect();
        Self::from_rows(self.family, self.components[..m].to_vec(), &rows, self.master_seed)
    }

    /// Components excluded from the standardized maximum.
    pub fn dropped_components(&self) -> Vec<usize> {
        self.components
            .iter()
            .zip(&self.degenerate)
            .filter(|(_, &d)| d)
            .map(|(&c, _)| c)
            .collect()
    }
}

/// Evaluates `families` on `B` relabelings of `d` and returns one null per
/// family, in [`FamilySet::layout`] order.
pub fn build_null<E: Executor>(
    d: &TwoSampleDataset,
    b: usize,
    families: FamilySet,
    master_seed: u64,
    exec: &E,
) -> Result<Vec<PermutationNull>> {
    let kernel = StatKernel::new(d, families)?;
    build_null_with(&kernel, b, master_seed, exec)
}

pub(crate) fn build_null_with<E: Executor>(
    kernel: &StatKernel,
    b: usize,
    master_seed: u64,
    exec: &E,
) -> Result<Vec<PermutationNull>> {
    let n = kernel.n();
    let rows = exec.map_indexed(b, |i| kernel.evaluate(&permutation_order(n, master_seed, i as u64 + 1)));
    let mut offset = 0;
    kernel
        .families()
        .layout()
        .into_iter()
        .map(|(family, components)| {
            let m = components.len();
            let sub: Vec<Vec<f64>> = rows.iter().map(|r| r[offset..offset + m].to_vec()).collect();
            offset += m;
            PermutationNull::from_rows(family, components, &sub, master_seed)
        })
        .collect()
}

/// `max_k (T_k − mean_k)/sd_k` over the non-degenerate components.
fn standardized_max(values: &[f64], null: &PermutationNull) -> Result<f64> {
    let mut best: Option<f64> = None;
    for (j, &v) in values.iter().enumerate() {
        if null.degenerate[j] {
            continue;
        }
        let z = (v - null.means[j]) / null.sds[j];
        best = Some(best.map_or(z, |b: f64| b.max(z)));
    }
    best.ok_or_else(|| Error::Degenerate("every null column has zero spread".into()))
}

/// Standardized-max statistic of an observed vector against `null`.
pub fn t_ract(observed: &StatisticVector, null: &PermutationNull) -> Result<f64> {
    if observed.components != null.components {
        return Err(Error::Data("observed grid differs from null grid".into()));
    }
    standardized_max(&observed.values, null)
}

/// Standardized-max statistic of every replicate, using the same constants.
pub fn t_ract_replicates(null: &PermutationNull) -> Result<Vec<f64>> {
    (0..null.b())
        .map(|b| standardized_max(null.replicate(b), null))
        .collect()
}

/// Where the standardization constants of `T_RACT` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Standardization {
    /// Mean and sd over the observed value and all `B` replicates. The
    /// statistic is then a symmetric function of the `B + 1` relabelings and
    /// the p-value has exact size.
    #[default]
    Pooled,
    /// Mean and sd over the `B` replicates only. Anti-conservative for small
    /// `B`: the observed value never enters its own reference constants.
    Replicates,
}

/// Observed `T_RACT`, replicate `T_RACT`s and dropped components under the
/// chosen standardization.
pub fn t_ract_test(
    observed: &StatisticVector,
    null: &PermutationNull,
    standardization: Standardization,
) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    if observed.components != null.components {
        return Err(Error::Data("observed grid differs from null grid".into()));
    }
    let reference = match standardization {
        Standardization::Replicates => None,
        Standardization::Pooled => {
            let mut rows: Vec<Vec<f64>> = (0..null.b()).map(|b| null.replicate(b).to_vec()).collect();
            rows.push(observed.values.clone());
            Some(PermutationNull::from_rows(
                null.family,
                null.components.clone(),
                &rows,
                null.master_seed,
            )?)
        }
    };
    let reference = reference.as_ref().unwrap_or(null);
    let t = standardized_max(&observed.values, reference)?;
    let reps = (0..null.b())
        .map(|b| standardized_max(null.replicate(b), reference))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, reps, reference.dropped_components()))
}

/// `(1 + #{b : replicate_b ≥ observed}) / (B + 1)`.
pub fn permutation_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&r| r >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Per-component permutation p-values of `observed` against `null`.
pub fn component_p_values(observed: &StatisticVector, null: &PermutationNull) -> Vec<f64> {
    observed
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let col: Vec<f64> = null.column(j).collect();
            permutation_p_value(v, &col)
        })
        .collect()
}

/// Observed min-p statistic.
pub fn minp_observed(per_component_p_values: &[f64]) -> f64 {
    per_component_p_values.iter().fold(f64::INFINITY, |a, &p| a.min(p))
}

/// Leave-one-out min-p of every replicate:
/// `min_k (1 + #{b₁ ≠ b : T_k^(b₁) ≥ T_k^(b)}) / B`.
pub fn minp_replicates(null: &PermutationNull) -> Vec<f64> {
    let b = null.b();
    let mut out = vec![f64::INFINITY; b];
    for j in 0..null.width() {
        let col: Vec<f64> = null.column(j).collect();
        let mut sorted = col.clone();
        sorted.sort_by(|a, c| a.partial_cmp(c).unwrap_or(core::cmp::Ordering::Equal));
        for (i, &v) in col.iter().enumerate() {
            // replicates ≥ v, itself included, which stands in for the leading 1
            let at_least = b - sorted.partition_point(|&x| x < v);
            let p = at_least as f64 / b as f64;
            if p < out[i] {
                out[i] = p;
            }
        }
    }
    out
}

/// `(1 + #{b : minp^(b) ≤ minp_obs}) / (B + 1)`.
///
/// Both sides are ratios with denominators `B` and `B + 1`; distinct values
/// differ by at least `1/(B(B+1))`, far above rounding error, so the float
/// comparison orders them exactly.
pub fn minp_p_value(observed_minp: f64, replicate_minps: &[f64]) -> f64 {
    let below = replicate_minps.iter().filter(|&&r| r <= observed_minp).count();
    (1 + below) as f64 / (replicate_minps.len() + 1) as f64
}

/// Min-p of every replicate with the observed statistic pooled into the
/// reference set: `min_k #{v ∈ {T_k, T_k^(1), …, T_k^(B)} : v ≥ T_k^(b)} / (B + 1)`.
///
/// Observed and replicate min-p values then come from one symmetric rule,
/// which keeps the combined test exact under exchangeability.
pub fn minp_replicates_pooled(observed: &StatisticVector, null: &PermutationNull) -> Vec<f64> {
    let b = null.b();
    let mut out = vec![f64::INFINITY; b];
    for j in 0..null.width() {
        let col: Vec<f64> = null.column(j).collect();
        let mut sorted = col.clone();
        sorted.push(observed.values[j]);
        sorted.sort_by(|a, c| a.partial_cmp(c).unwrap_or(core::cmp::Ordering::Equal));
        for (i, &v) in col.iter().enumerate() {
            let at_least = b + 1 - sorted.partition_point(|&x| x < v);
            let p = at_least as f64 / (b + 1) as f64;
            if p < out[i] {
                out[i] = p;
            }
        }
    }
    out
}

/// How replicate min-p values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MinpCalibration {
    /// [`minp_replicates`]. Replicate p-values have denominator `B` while the
    /// observed ones have `B + 1`, so the test runs liberal when many
    /// components are combined at small `B`.
    #[default]
    LeaveOneOut,
    /// [`minp_replicates_pooled`].
    Pooled,
}

/// Min-p combination of a grid family: `(observed min-p, calibrated p-value)`.
pub fn minp_test(observed: &StatisticVector, null: &PermutationNull) -> (f64, f64) {
    minp_test_with(observed, null, MinpCalibration::LeaveOneOut)
}

pub fn minp_test_with(observed: &StatisticVector, null: &PermutationNull, calibration: MinpCalibration) -> (f64, f64) {
    let per = component_p_values(observed, null);
    let obs = minp_observed(&per);
    let reps = match calibration {
        MinpCalibration::LeaveOneOut => minp_replicates(null),
        MinpCalibration::Pooled => minp_replicates_pooled(observed, null),
    };
    (obs, minp_p_value(obs, &reps))
}

/// Baseline statistic families run next to the Ky-Fan grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Baselines {
    pub frobenius: bool,
    pub max_elementwise: bool,
    pub superdiag: bool,
    pub trace: bool,
}

impl Baselines {
    pub const NONE: Self = Self {
        frobenius: false,
        max_elementwise: false,
        superdiag: false,
        trace: false,
    };
    pub const ALL: Self = Self {
        frobenius: true,
        max_elementwise: true,
        superdiag: true,
        trace: true,
    };
}

impl Default for Baselines {
    fn default() -> Self {
        Self::ALL
    }
}

/// Settings of one end-to-end test.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RactConfig {
    /// Number of permutation replicates `B`.
    pub b: usize,
    /// Spectral-mass cutoff for choosing `K`.
    pub cutoff: f64,
    pub master_seed: u64,
    pub centering: PooledCentering,
    pub baselines: Baselines,
    /// Uses this `K` instead of the cutoff rule.
    pub k_override: Option<usize>,
    /// Also evaluates single Ky-Fan norms up to this index, beyond `K` if needed.
    pub extra_kyfan: usize,
    /// Centers each group at its own mean before permuting. Removes mean
    /// differences, but the centered rows are no longer exchangeable, so the
    /// size guarantee becomes approximate; in high dimensions the test turns
    /// markedly anti-conservative.
    pub center_groups: bool,
    /// Calibration of the Ky-Fan min-p combination. The superdiagonal
    /// baseline always uses [`MinpCalibration::Pooled`].
    pub minp_calibration: MinpCalibration,
    pub standardization: Standardization,
}

impl Default for RactConfig {
    fn default() -> Self {
        Self {
            b: 1000,
            cutoff: 0.8,
            master_seed: 0,
            centering: PooledCentering::PerGroup,
            baselines: Baselines::ALL,
            k_override: None,
            extra_kyfan: 0,
            center_groups: false,
            minp_calibration: MinpCalibration::LeaveOneOut,
            standardization: Standardization::Pooled,
        }
    }
}

/// Everything one test produces.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestReport {
    /// Number of Ky-Fan norms combined, `𝒦 = {1, …, K}`.
    pub k: usize,
    pub observed: Vec<StatisticVector>,
    pub t_ract: f64,
    /// Standardized-max p-value.
    pub p_ract: f64,
    pub t_minp: f64,
    /// Min-p p-value.
    pub p_minp: f64,
    /// `p_k` for `k = 1..=K`.
    pub per_k_pvalues: Vec<f64>,
    /// `p_k` for every evaluated Ky-Fan index, including those beyond `K`.
    pub kyfan_pvalues: Vec<f64>,
    /// Baseline name → p-value.
    pub baseline_pvalues: BTreeMap<String, f64>,
    /// Per-offset p-values of the superdiagonal grid.
    pub superdiag_pvalues: Vec<f64>,
    /// Ky-Fan indices dropped from the standardized max for zero null spread.
    pub dropped_k: Vec<usize>,
    pub b: usize,
    pub master_seed: u64,
    pub cutoff: f64,
}

/// Chooses `K` from the pooled covariance of the unpermuted data.
pub fn choose_k(d: &TwoSampleDataset, cutoff: f64, centering: PooledCentering) -> Result<usize> {
    let spectrum = pooled_singular_values(d, centering)?;
    select_k(&spectrum, cutoff, d.n().min(d.p()))
}

/// Runs the full procedure: select `K`, evaluate the observed statistics,
/// build the permutation null and compute every p-value.
pub fn run_test<E: Executor>(d: &TwoSampleDataset, cfg: &RactConfig, exec: &E) -> Result<TestReport> {
    if cfg.b < 2 {
        return Err(Error::param("B", format!("need at least 2 replicates, got {}", cfg.b)));
    }
    let k = match cfg.k_override {
        Some(k) => {
            let cap = d.n().min(d.p());
            if k == 0 || k > cap {
                return Err(Error::param("K", format!("must lie in 1..={cap}, got {k}")));
            }
            k
        }
        None => choose_k(d, cfg.cutoff, cfg.centering)?,
    };
    let m = k.max(cfg.extra_kyfan);
    let base = cfg.baselines;
    let families = FamilySet {
        kyfan: Some(m),
        frobenius: base.frobenius,
        max_elementwise: base.max_elementwise,
        superdiag: base.superdiag.then(|| default_superdiag_max(d.p())),
        trace: base.trace,
    };
    let kernel = if cfg.center_groups {
        StatKernel::new(&center_by_group(d), families)?
    } else {
        StatKernel::new(d, families)?
    };
    let observed = kernel.observed();
    let nulls = build_null_with(&kernel, cfg.b, cfg.master_seed, exec)?;

    let mut baseline_pvalues = BTreeMap::new();
    let mut superdiag_pvalues = Vec::new();
    let mut kyfan = None;
    for (obs, null) in observed.iter().zip(&nulls) {
        match obs.family {
            StatFamily::KyFanGrid => kyfan = Some((obs, null)),
            StatFamily::SuperdiagGrid => {
                superdiag_pvalues = component_p_values(obs, null);
                let (_, p) = minp_test_with(obs, null, MinpCalibration::Pooled);
                baseline_pvalues.insert(String::from("superdiag_minp"), p);
            }
            family => {
                let col: Vec<f64> = null.column(0).collect();
                baseline_pvalues.insert(String::from(family.name()), permutation_p_value(obs.values[0], &col));
            }
        }
    }
    let (kyfan_obs, kyfan_null) = kyfan.expect("Ky-Fan grid is always evaluated");
    let kyfan_pvalues = component_p_values(kyfan_obs, kyfan_null);

    let grid_null = kyfan_null.truncated(k)?;
    let grid_obs = StatisticVector {
        family: StatFamily::KyFanGrid,
        components: kyfan_obs.components[..k].to_vec(),
        values: kyfan_obs.values[..k].to_vec(),
    };
    let (t, t_reps, dropped_k) = t_ract_test(&grid_obs, &grid_null, cfg.standardization)?;
    if !dropped_k.is_empty() {
        log::warn!("dropping Ky-Fan indices {dropped_k:?} from the standardized max: zero null spread");
    }
    let p_ract = permutation_p_value(t, &t_reps);
    let per_k_pvalues = kyfan_pvalues[..k].to_vec();
    let (t_minp, p_minp) = minp_test_with(&grid_obs, &grid_null, cfg.minp_calibration);

    Ok(TestReport {
        k,
        observed,
        t_ract: t,
        p_ract,
        t_minp,
        p_minp,
        per_k_pvalues,
        kyfan_pvalues,
        baseline_pvalues,
        superdiag_pvalues,
        dropped_k,
        b: cfg.b,
        master_seed: cfg.master_seed,
        cutoff: cfg.cutoff,
    })
}
