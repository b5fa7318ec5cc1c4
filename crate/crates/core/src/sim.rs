//! Scenario generators and Monte Carlo experiment drivers.
//!
//! Scenarios S1–S3 perturb the identity by low-rank terms whose factors are
//! the leading eigenvectors of `AAᵀ` for a standard-normal `A`; S4 flips the
//! sign of an off-diagonal block of an equicorrelation matrix. Drivers run
//! one independent dataset per work item: dataset `i` draws its covariances,
//! observations and permutation seed from a ChaCha8 stream keyed by
//! `(seed, i)`, so results do not depend on scheduling and every grid point
//! of a power curve sees the same random numbers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
// Unused when a std build supplies the inherent float methods.
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{PooledCentering, TwoSampleDataset};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::matrix::SymmetricMatrix;
use crate::perm::{run_test, Baselines, MinpCalibration, RactConfig, Standardization, TestReport};
use crate::stats::{FamilySet, StatKernel};

/// Tolerance below which a negative eigenvalue makes a covariance invalid.
pub const PSD_TOL: f64 = 1e-8;

/// Side length of the changing block in S3.
pub const SMALL_BLOCK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scenario {
    /// S1: `Σ₁ = I + τ²U₁U₁ᵀ`, `Σ₂ = I + τ²V₁V₁ᵀ`.
    LowRank,
    /// S2: the change is confined to the leading `p/2 × p/2` block.
    BlockLarge,
    /// S3: the change is confined to the leading `10 × 10` block.
    BlockSmall,
    /// S4: equicorrelation block with one off-diagonal sub-block negated.
    OffDiagonal,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::LowRank,
        Scenario::BlockLarge,
        Scenario::BlockSmall,
        Scenario::OffDiagonal,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Scenario::LowRank => "S1",
            Scenario::BlockLarge => "S2",
            Scenario::BlockSmall => "S3",
            Scenario::OffDiagonal => "S4",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" | "LOWRANK" => Ok(Scenario::LowRank),
            "S2" | "BLOCKLARGE" => Ok(Scenario::BlockLarge),
            "S3" | "BLOCKSMALL" => Ok(Scenario::BlockSmall),
            "S4" | "OFFDIAGONAL" => Ok(Scenario::OffDiagonal),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub tau_sq: f64,
    /// Rank of each low-rank factor; ignored by S4.
    pub w: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Desk-scale defaults: `p = 100`, `n₁ = n₂ = 25`, `w = 2`.
    pub fn desk(scenario: Scenario, tau_sq: f64, seed: u64) -> Self {
        Self {
            scenario,
            p: 100,
            n1: 25,
            n2: 25,
            tau_sq,
            w: 2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p == 0 || self.n1 < 2 || self.n2 < 2 {
            return bad(format!(
                "need p >= 1 and n1, n2 >= 2, got p = {}, n = ({}, {})",
                self.p, self.n1, self.n2
            ));
        }
        if !(self.tau_sq >= 0.0 && self.tau_sq.is_finite()) {
            return bad(format!("tau_sq must be finite and non-negative, got {}", self.tau_sq));
        }
        match self.scenario {
            Scenario::OffDiagonal => {
                if self.p % 2 != 0 || self.p < 4 {
                    return bad(format!("S4 needs an even p >= 4, got {}", self.p));
                }
                if self.tau_sq >= 1.0 {
                    return bad(format!(
                        "S4 needs tau_sq < 1 for positive definiteness, got {}",
                        self.tau_sq
                    ));
                }
            }
            s => {
                let block = match s {
                    Scenario::LowRank => self.p,
                    Scenario::BlockLarge => self.p / 2,
                    _ => {
                        if self.p <= SMALL_BLOCK {
                            return bad(format!("S3 needs p > {SMALL_BLOCK}, got {}", self.p));
                        }
                        SMALL_BLOCK
                    }
                };
                // the block scenarios also place a rank-w factor in the remaining block
                let limit = if s == Scenario::LowRank {
                    block
                } else {
                    block.min(self.p - block)
                };
                if self.w == 0 || self.w > limit {
                    return bad(format!("w must lie in 1..={limit}, got {}", self.w));
                }
            }
        }
        Ok(())
    }
}

/// Stream for work item `index` of a run seeded with `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // row-major fill keeps the draw order independent of the storage layout
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Leading `w` eigenvectors of `AAᵀ`, `A` a `dim × dim` standard-normal draw.
pub fn lowrank_factor<R: Rng + ?Sized>(dim: usize, w: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if w == 0 || w > dim {
        return Err(Error::param("w", format!("must lie in 1..={dim}, got {w}")));
    }
    let a = standard_normal_matrix(dim, dim, rng);
    let gram = SymmetricMatrix::symmetrize(&a * a.transpose());
    let eig = gram.into_inner().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    Ok(DMatrix::from_fn(dim, w, |r, c| eig.eigenvectors[(r, order[c])]))
}

fn add_block(target: &mut DMatrix<f64>, offset: usize, factor: &DMatrix<f64>, scale: f64) {
    let block = factor * factor.transpose() * scale;
    let d = block.nrows();
    for r in 0..d {
        for s in 0..d {
            target[(offset + r, offset + s)] += block[(r, s)];
        }
    }
}

/// Which covariances to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Build {
    Both,
    FirstOnly,
}

fn build_pair<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
    build: Build,
) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    cfg.validate()?;
    let p = cfg.p;
    let tau = cfg.tau_sq;
    let mut s1 = DMatrix::identity(p, p);
    let mut s2 = DMatrix::identity(p, p);
    match cfg.scenario {
        Scenario::LowRank => {
            let u1 = lowrank_factor(p, cfg.w, rng)?;
            add_block(&mut s1, 0, &u1, tau);
            if build == Build::Both {
                let v1 = lowrank_factor(p, cfg.w, rng)?;
                add_block(&mut s2, 0, &v1, tau);
            }
        }
        Scenario::BlockLarge | Scenario::BlockSmall => {
            let h = if cfg.scenario == Scenario::BlockLarge {
                p / 2
            } else {
                SMALL_BLOCK
            };
            let u1 = lowrank_factor(h, cfg.w, rng)?;
            let u2 = lowrank_factor(p - h, cfg.w, rng)?;
            add_block(&mut s1, 0, &u1, tau);
            add_block(&mut s1, h, &u2, 1.0);
            if build == Build::Both {
                let v1 = lowrank_factor(h, cfg.w, rng)?;
                add_block(&mut s2, 0, &v1, tau);
                add_block(&mut s2, h, &u2, 1.0);
            }
        }
        Scenario::OffDiagonal => {
            let h = p / 2;
            // 1-based index sets (1, …, ⌈p/4⌉ − 1) and (⌈p/4⌉, …, p/2)
            let split = p.div_ceil(4) - 1;
            for r in 0..h {
                for s in 0..h {
                    if r != s {
                        s1[(r, s)] = tau;
                        let flipped = (r < split) != (s < split);
                        s2[(r, s)] = if flipped { -tau } else { tau };
                    }
                }
            }
        }
    }
    let s1 = SymmetricMatrix::symmetrize(s1);
    let s2 = if build == Build::Both {
        SymmetricMatrix::symmetrize(s2)
    } else {
        s1.clone()
    };
    Ok((s1, s2))
}

/// `(Σ₁, Σ₂)` for `cfg`, drawn from the stream seeded by `cfg.seed`.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    build_scenario_with(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

pub fn build_scenario_with<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    build_pair(cfg, rng, Build::Both)
}

/// `Σ[r,s] = ρ^{|r−s|}`.
pub fn ar_covariance(p: usize, rho: f64) -> Result<SymmetricMatrix> {
    SymmetricMatrix::from_upper_fn(p, |r, s| rho.powi((s - r) as i32))
}

/// Symmetric square-root factor for Gaussian sampling.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    /// `L` with `L Lᵀ = Σ`.
    factor: DMatrix<f64>,
}

impl GaussianFactor {
    pub fn new(sigma: &SymmetricMatrix) -> Result<Self> {
        let eig = sigma.as_matrix().clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if min < -PSD_TOL {
            return Err(Error::Data(format!(
                "covariance is indefinite: minimum eigenvalue {min:e}"
            )));
        }
        if min < -1e-12 {
            log::warn!("clipping negative eigenvalues down to {min:e} to zero");
        }
        let mut factor = eig.eigenvectors;
        for (j, &v) in eig.eigenvalues.iter().enumerate() {
            factor.column_mut(j).scale_mut(v.max(0.0).sqrt());
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `n` rows, i.i.d. `N(0, Σ)`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let z = standard_normal_matrix(n, self.dim(), rng);
        z * self.factor.transpose()
    }
}

pub fn sample_gaussian<R: Rng + ?Sized>(sigma: &SymmetricMatrix, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(GaussianFactor::new(sigma)?.sample(n, rng))
}

/// A test whose rejection rate an experiment records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    /// Min-p combination over `k = 1..=K`.
    Ract,
    /// Standardized maximum over `k = 1..=K`.
    RactMax,
    /// A single Ky-Fan(k) norm.
    KyFan(usize),
    Frobenius,
    /// Max standardized elementwise difference.
    MaxElementwise,
    /// Min-p over superdiagonal offsets.
    Superdiag,
    /// Second-spectral-moment contrast.
    Trace,
}

impl Method {
    /// The method list of the default power curves.
    pub fn power_defaults() -> Vec<Method> {
        vec![
            Method::Ract,
            Method::KyFan(1),
            Method::KyFan(4),
            Method::KyFan(10),
            Method::KyFan(25),
        ]
    }

    pub fn p_value(self, report: &TestReport) -> f64 {
        let baseline = |name: &str| {
            *report
                .baseline_pvalues
                .get(name)
                .expect("baseline family was evaluated")
        };
        match self {
            Method::Ract => report.p_minp,
            Method::RactMax => report.p_ract,
            Method::KyFan(k) => report.kyfan_pvalues[k - 1],
            Method::Frobenius => baseline("frobenius"),
            Method::MaxElementwise => baseline("max_elementwise"),
            Method::Superdiag => baseline("superdiag_minp"),
            Method::Trace => baseline("trace"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ract => f.write_str("ract"),
            Method::RactMax => f.write_str("ract_max"),
            Method::KyFan(k) => write!(f, "kyfan_{k}"),
            Method::Frobenius => f.write_str("frobenius"),
            Method::MaxElementwise => f.write_str("clx"),
            Method::Superdiag => f.write_str("hc"),
            Method::Trace => f.write_str("sy"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let parsed = match lower.as_str() {
            "ract" | "ract_minp" => Method::Ract,
            "ract_max" => Method::RactMax,
            "frobenius" | "frob" => Method::Frobenius,
            "clx" | "max_elementwise" => Method::MaxElementwise,
            "hc" | "superdiag" => Method::Superdiag,
            "sy" | "trace" => Method::Trace,
            other => {
                let k = other
                    .strip_prefix("kyfan_")
                    .or_else(|| other.strip_prefix("kyfan"))
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k > 0);
                match k {
                    Some(k) => Method::KyFan(k),
                    None => return Err(Error::Config(format!("unknown method `{s}`"))),
                }
            }
        };
        Ok(parsed)
    }
}

/// Permutation settings shared by every dataset of an experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSettings {
    pub b: usize,
    pub n_datasets: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub cutoff: f64,
    pub centering: PooledCentering,
    /// Draws one covariance pair from `seed` and reuses it for every dataset
    /// instead of drawing fresh factors per dataset.
    pub fixed_pair: bool,
    pub minp_calibration: MinpCalibration,
    pub standardization: Standardization,
}

impl SimSettings {
    /// Desk-scale defaults: 500 datasets, `B = 199`, `α = 0.05`.
    pub fn desk(methods: Vec<Method>) -> Self {
        Self {
            b: 199,
            n_datasets: 500,
            alpha: 0.05,
            methods,
            cutoff: 0.8,
            centering: PooledCentering::PerGroup,
            fixed_pair: false,
            minp_calibration: MinpCalibration::LeaveOneOut,
            standardization: Standardization::Pooled,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.n_datasets == 0 {
            return Err(Error::Config("need at least one dataset".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        for m in &self.methods {
            if let Method::KyFan(k) = m {
                if *k > p {
                    return Err(Error::Config(format!("kyfan_{k} exceeds the dimension {p}")));
                }
            }
        }
        Ok(())
    }

    fn ract_config(&self, master_seed: u64, cutoff: f64) -> RactConfig {
        let has = |m: Method| self.methods.contains(&m);
        RactConfig {
            b: self.b,
            cutoff,
            master_seed,
            centering: self.centering,
            baselines: Baselines {
                frobenius: has(Method::Frobenius),
                max_elementwise: has(Method::MaxElementwise),
                superdiag: has(Method::Superdiag),
                trace: has(Method::Trace),
            },
            k_override: None,
            center_groups: false,
            minp_calibration: self.minp_calibration,
            standardization: self.standardization,
            extra_kyfan: self
                .methods
                .iter()
                .filter_map(|m| match m {
                    Method::KyFan(k) => Some(*k),
                    _ => None,
                })
                .max()
                .unwrap_or(0),
        }
    }
}

/// The quantity varied along a power curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GridAxis {
    TauSq,
    Cutoff,
    SampleSize,
}

impl GridAxis {
    pub fn name(self) -> &'static str {
        match self {
            GridAxis::TauSq => "tau_sq",
            GridAxis::Cutoff => "cutoff",
            GridAxis::SampleSize => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentRow {
    pub scenario: String,
    pub method: Method,
    pub grid_value: f64,
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
    pub mean_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentResult {
    pub axis: GridAxis,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    pub fn rate(&self, method: Method, grid_value: f64) -> Option<&ExperimentRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.grid_value == grid_value)
    }
}

/// Per-dataset outcome: which methods rejected, and the chosen `K`.
struct Outcome {
    rejected: Vec<bool>,
    k: usize,
}

fn evaluate(report: &TestReport, settings: &SimSettings) -> Outcome {
    Outcome {
        rejected: settings
            .methods
            .iter()
            .map(|m| m.p_value(report) <= settings.alpha)
            .collect(),
        k: report.k,
    }
}

fn aggregate(scenario: &str, grid_value: f64, settings: &SimSettings, outcomes: &[Outcome]) -> Vec<ExperimentRow> {
    let reps = outcomes.len();
    let mean_k = outcomes.iter().map(|o| o.k as f64).sum::<f64>() / reps as f64;
    settings
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let hits = outcomes.iter().filter(|o| o.rejected[j]).count();
            let rate = hits as f64 / reps as f64;
            ExperimentRow {
                scenario: scenario.to_string(),
                method,
                grid_value,
                rate,
                se: (rate * (1.0 - rate) / reps as f64).sqrt(),
                reps,
                mean_k,
            }
        })
        .collect()
}

/// Draws one dataset (and its permutation seed) for item `index`.
fn simulate_dataset(
    cfg: &ScenarioConfig,
    index: u64,
    null: bool,
    fixed: Option<&(GaussianFactor, GaussianFactor)>,
) -> Result<(TwoSampleDataset, u64)> {
    let mut rng = item_rng(cfg.seed, index);
    let owned;
    let (f1, f2) = match fixed {
        Some(pair) => (&pair.0, &pair.1),
        None => {
            let build = if null { Build::FirstOnly } else { Build::Both };
            let (s1, s2) = build_pair(cfg, &mut rng, build)?;
            let f1 = GaussianFactor::new(&s1)?;
            let f2 = if null { f1.clone() } else { GaussianFactor::new(&s2)? };
            owned = (f1, f2);
            (&owned.0, &owned.1)
        }
    };
    let g1 = f1.sample(cfg.n1, &mut rng);
    let g2 = f2.sample(cfg.n2, &mut rng);
    let master_seed = rng.next_u64();
    Ok((TwoSampleDataset::new(g1, g2)?, master_seed))
}

fn fixed_factors(cfg: &ScenarioConfig, null: bool) -> Result<(GaussianFactor, GaussianFactor)> {
    let (s1, s2) = build_scenario(cfg)?;
    let f1 = GaussianFactor::new(&s1)?;
    let f2 = if null { f1.clone() } else { GaussianFactor::new(&s2)? };
    Ok((f1, f2))
}

fn run_point<E: Executor>(
    cfg: &ScenarioConfig,
    settings: &SimSettings,
    cutoff: f64,
    null: bool,
    exec: &E,
) -> Result<Vec<Outcome>> {
    cfg.validate()?;
    settings.validate(cfg.p)?;
    let fixed = if settings.fixed_pair {
        Some(fixed_factors(cfg, null)?)
    } else {
        None
    };
    exec.map_indexed(settings.n_datasets, |i| {
        let (d, master_seed) = simulate_dataset(cfg, i as u64, null, fixed.as_ref())?;
        let report = run_test(&d, &settings.ract_config(master_seed, cutoff), &Sequential)?;
        Ok(evaluate(&report, settings))
    })
    .into_iter()
    .collect()
}

/// Type I error: both groups are drawn from the scenario's `Σ₁`.
pub fn run_type1<E: Executor>(cfg: &ScenarioConfig, settings: &SimSettings, exec: &E) -> Result<ExperimentResult> {
    let outcomes = run_point(cfg, settings, settings.cutoff, true, exec)?;
    Ok(ExperimentResult {
        axis: GridAxis::TauSq,
        rows: aggregate(cfg.scenario.code(), cfg.tau_sq, settings, &outcomes),
    })
}

/// Power along a grid of `τ²` values or `K` cutoffs. Every grid point reuses
/// the same dataset streams.
pub fn run_power<E: Executor>(
    base: &ScenarioConfig,
    axis: GridAxis,
    grid: &[f64],
    settings: &SimSettings,
    exec: &E,
) -> Result<ExperimentResult> {
    let mut rows = Vec::new();
    for &value in grid {
        let (cfg, cutoff) = match axis {
            GridAxis::TauSq => (
                ScenarioConfig {
                    tau_sq: value,
                    ..base.clone()
                },
                settings.cutoff,
            ),
            GridAxis::Cutoff => (base.clone(), value),
            GridAxis::SampleSize => {
                let n = value as usize;
                if value != n as f64 || n < 2 {
                    return Err(Error::Config(format!(
                        "sample size must be an integer >= 2, got {value}"
                    )));
                }
                (
                    ScenarioConfig {
                        n1: n,
                        n2: n,
                        ..base.clone()
                    },
                    settings.cutoff,
                )
            }
        };
        let outcomes = run_point(&cfg, settings, cutoff, false, exec)?;
        rows.extend(aggregate(cfg.scenario.code(), value, settings, &outcomes));
    }
    Ok(ExperimentResult { axis, rows })
}

/// Power on subsamples of an observed dataset: for each size `m`, draws `m`
/// rows without replacement from each group `n_datasets` times.
pub fn run_subsample_power<E: Executor>(
    data: &TwoSampleDataset,
    sizes: &[usize],
    settings: &SimSettings,
    seed: u64,
    label: &str,
    exec: &E,
) -> Result<ExperimentResult> {
    settings.validate(data.p())?;
    let mut rows = Vec::new();
    for (g, &m) in sizes.iter().enumerate() {
        if m < 2 || m > data.n1() || m > data.n2() {
            return Err(Error::Config(format!(
                "subsample size {m} must lie in 2..={}",
                data.n1().min(data.n2())
            )));
        }
        let outcomes: Result<Vec<Outcome>> = exec
            .map_indexed(settings.n_datasets, |i| {
                let mut rng = item_rng(seed, ((g as u64) << 32) | i as u64);
                let mut pick = |n: usize| {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut rng);
                    idx.truncate(m);
                    idx
                };
                let rows1 = pick(data.n1());
                let rows2 = pick(data.n2());
                let sub = data.subset(&rows1, &rows2)?;
                let master_seed = rng.next_u64();
                let report = run_test(&sub, &settings.ract_config(master_seed, settings.cutoff), &Sequential)?;
                Ok(evaluate(&report, settings))
            })
            .into_iter()
            .collect();
        rows.extend(aggregate(label, m as f64, settings, &outcomes?));
    }
    Ok(ExperimentResult {
        axis: GridAxis::SampleSize,
        rows,
    })
}

/// Population covariances used for null-distribution studies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NullCovariance {
    Iid,
    /// `I + τ²U₁U₁ᵀ` with a rank-`w` factor.
    LowRank {
        w: usize,
        tau_sq: f64,
    },
    /// The S4 equicorrelation matrix before the sign flip.
    OffDiagonal {
        tau_sq: f64,
    },
    /// `Σ[r,s] = ρ^{|r−s|}`.
    Ar {
        rho: f64,
    },
}

impl NullCovariance {
    pub fn build(&self, p: usize, seed: u64) -> Result<SymmetricMatrix> {
        let scenario = |scenario, tau_sq, w| ScenarioConfig {
            scenario,
            p,
            n1: 2,
            n2: 2,
            tau_sq,
            w,
            seed,
        };
        match *self {
            NullCovariance::Iid => Ok(SymmetricMatrix::identity(p)),
            NullCovariance::Ar { rho } => ar_covariance(p, rho),
            NullCovariance::LowRank { w, tau_sq } => Ok(build_scenario(&scenario(Scenario::LowRank, tau_sq, w))?.0),
            NullCovariance::OffDiagonal { tau_sq } => {
                Ok(build_scenario(&scenario(Scenario::OffDiagonal, tau_sq, 1))?.0)
            }
        }
    }
}

impl fmt::Display for NullCovariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullCovariance::Iid => f.write_str("iid"),
            NullCovariance::LowRank { w, .. } => write!(f, "lowrank{w}"),
            NullCovariance::OffDiagonal { .. } => f.write_str("offdiag"),
            NullCovariance::Ar { .. } => f.write_str("ar"),
        }
    }
}

/// Standardized null draws of `T_k` for several `k`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NullShapeTable {
    pub ks: Vec<usize>,
    /// Empirical means and standard deviations used to standardize.
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// `n_datasets` rows of standardized values, one column per `k`.
    pub rows: Vec<Vec<f64>>,
}

/// Draws `n_datasets` null datasets of `n` observations (split evenly between
/// the groups) from one fixed `Σ`, and standardizes each `T_k` column by its
/// empirical mean and standard deviation.
pub fn run_nullshape<E: Executor>(
    sigma: &SymmetricMatrix,
    ks: &[usize],
    n: usize,
    n_datasets: usize,
    seed: u64,
    exec: &E,
) -> Result<NullShapeTable> {
    let p = sigma.dim();
    let k_max = ks
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::Config("no k values".into()))?;
    if ks.contains(&0) || k_max > p {
        return Err(Error::Config(format!("k values must lie in 1..={p}")));
    }
    if n < 4 || n_datasets < 2 {
        return Err(Error::Config("need n >= 4 and at least 2 datasets".into()));
    }
    let (n1, n2) = (n / 2, n - n / 2);
    let factor = GaussianFactor::new(sigma)?;
    let raw: Result<Vec<Vec<f64>>> = exec
        .map_indexed(n_datasets, |i| {
            let mut rng = item_rng(seed, i as u64);
            let d = TwoSampleDataset::new(factor.sample(n1, &mut rng), factor.sample(n2, &mut rng))?;
            let grid = StatKernel::new(&d, FamilySet::kyfan(k_max))?.observed().remove(0);
            Ok(ks.iter().map(|&k| grid.values[k - 1]).collect())
        })
        .into_iter()
        .collect();
    let raw = raw?;
    let count = raw.len() as f64;
    let mut means = vec![0.0; ks.len()];
    let mut sds = vec![0.0; ks.len()];
    for j in 0..ks.len() {
        let mean = raw.iter().map(|r| r[j]).sum::<f64>() / count;
        let var = raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (count - 1.0);
        means[j] = mean;
        sds[j] = var.sqrt();
        if sds[j].is_nan() || sds[j] <= 0.0 {
            return Err(Error::Degenerate(format!("T_{} has zero spread", ks[j])));
        }
    }
    let rows = raw
        .iter()
        .map(|r| (0..ks.len()).map(|j| (r[j] - means[j]) / sds[j]).collect())
        .collect();
    Ok(NullShapeTable {
        ks: ks.to_vec(),
        means,
        sds,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_and_method_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.code().parse::<Scenario>().unwrap(), s);
        }
        for m in [
            Method::Ract,
            Method::RactMax,
            Method::KyFan(25),
            Method::Frobenius,
            Method::MaxElementwise,
            Method::Superdiag,
            Method::Trace,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("kyfan_0".parse::<Method>().is_err());
        assert!("S9".parse::<Scenario>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScenarioConfig::desk(Scenario::OffDiagonal, 1.0, 0);
        assert!(cfg.validate().is_err());
        cfg.tau_sq = 0.5;
        cfg.p = 101;
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            p: 10,
            ..ScenarioConfig::desk(Scenario::BlockSmall, 0.5, 0)
        };
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            w: 11,
            ..ScenarioConfig::desk(Scenario::BlockSmall, 0.5, 0)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn null_scenarios_have_equal_covariances() {
        for s in Scenario::ALL {
            let cfg = ScenarioConfig {
                p: 24,
                ..ScenarioConfig::desk(s, 0.0, 3)
            };
            let (a, b) = build_scenario(&cfg).unwrap();
            assert_eq!(a, b, "{s}");
        }
        let (a, _) = build_scenario(&ScenarioConfig::desk(Scenario::LowRank, 0.0, 3)).unwrap();
        assert_eq!(a, SymmetricMatrix::identity(100));
    }

    #[test]
    fn zero_covariance_samples_zero() {
        let x = sample_gaussian(&SymmetricMatrix::zeros(3), 5, &mut item_rng(1, 0)).unwrap();
        assert_eq!(x, DMatrix::zeros(5, 3));
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let s = SymmetricMatrix::from_diagonal(&[1.0, -0.1]).unwrap();
        assert!(sample_gaussian(&s, 2, &mut item_rng(1, 0)).is_err());
    }

    #[test]
    fn ar_structure() {
        let s = ar_covariance(4, 0.8).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert!((s.get(0, 3) - 0.512).abs() < 1e-15);
        assert_eq!(s.get(3, 1), s.get(1, 3));
    }

    #[test]
    fn alpha_zero_never_rejects() {
        let cfg = ScenarioConfig {
            p: 8,
            n1: 6,
            n2: 6,
            ..ScenarioConfig::desk(Scenario::LowRank, 0.5, 5)
        };
        let settings = SimSettings {
            b: 19,
            n_datasets: 10,
            alpha: 0.0,
            ..SimSettings::desk(vec![Method::Ract, Method::KyFan(2)])
        };
        let res = run_type1(&cfg, &settings, &Sequential).unwrap();
        assert!(res.rows.iter().all(|r| r.rate == 0.0 && r.reps == 10));
    }
}
