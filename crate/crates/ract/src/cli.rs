//! Command-line surface.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ract_core::perm::{run_test, Baselines};
use ract_core::sim::{
    run_nullshape, run_power, run_subsample_power, run_type1, ExperimentResult, GridAxis, Method, NullCovariance,
    Scenario, ScenarioConfig, SimSettings,
};
use ract_core::theory::{crossover_example, diagnostics_table, increments, PopulationPair};
use ract_core::{MinpCalibration, PooledCentering, RactConfig, Standardization, SymmetricMatrix};
use serde::Serialize;

use crate::error::{exit, CliError, CliResult};
use crate::exec::{resolve_workers, RayonExecutor};
use crate::input::{load, load_matrix, Source};
use crate::output::{diagnostics_csv, emit, experiment_csv, nullshape_csv, to_json, ExperimentDoc, Meta, ReportDoc};

/// Smallest number of permutations accepted on the command line.
pub const MIN_B: usize = 19;

#[derive(Debug, Parser)]
#[command(name = "ract", version, about = "Rank-adaptive two-sample covariance testing")]
pub struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test equality of two covariance matrices from CSV data.
    Test(TestArgs),
    /// Type I error of simulated null data.
    Simulate(SimulateArgs),
    /// Power along a grid of signal strengths, cutoffs or sample sizes.
    Power(PowerArgs),
    /// Standardized null distributions of T_k.
    Nullshape(NullshapeArgs),
    /// Population signal-to-noise diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    PerGroup,
    Global,
}

impl From<Centering> for PooledCentering {
    fn from(c: Centering) -> Self {
        match c {
            Centering::PerGroup => PooledCentering::PerGroup,
            Centering::Global => PooledCentering::Global,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    LeaveOneOut,
    Pooled,
}

impl From<Calibration> for MinpCalibration {
    fn from(c: Calibration) -> Self {
        match c {
            Calibration::LeaveOneOut => MinpCalibration::LeaveOneOut,
            Calibration::Pooled => MinpCalibration::Pooled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StandardizeWith {
    /// Observed value and replicates together; exact size.
    Pooled,
    /// Replicates only.
    Replicates,
}

impl From<StandardizeWith> for Standardization {
    fn from(s: StandardizeWith) -> Self {
        match s {
            StandardizeWith::Pooled => Standardization::Pooled,
            StandardizeWith::Replicates => Standardization::Replicates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Minp,
    Max,
}

/// Options shared by every command that runs permutations.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Permutation replicates.
    #[arg(short = 'B', long = "B")]
    pub b: Option<usize>,

    /// Significance level for reported rejections.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Spectral-mass cutoff for choosing K.
    #[arg(long, default_value_t = 0.8)]
    pub cutoff: f64,

    /// Master seed of every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Centering of the pooled covariance that selects K.
    #[arg(long, value_enum, default_value_t = Centering::PerGroup)]
    pub centering: Centering,

    /// Replicate p-values of the min-p combination.
    #[arg(long, value_enum, default_value_t = Calibration::LeaveOneOut)]
    pub minp_calibration: Calibration,

    /// Source of the mean and sd that standardize each T_k.
    #[arg(long, value_enum, default_value_t = StandardizeWith::Pooled)]
    pub standardize: StandardizeWith,

    /// Worker threads; RACT_WORKERS overrides.
    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<String>,
}

impl Common {
    fn b_or(&self, default: usize) -> usize {
        self.b.unwrap_or(default)
    }

    fn validate(&self, default_b: usize) -> CliResult<()> {
        let b = self.b_or(default_b);
        if b < MIN_B {
            return Err(CliError::usage(format!("--B must be at least {MIN_B}, got {b}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::usage(format!(
                "--alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(CliError::usage(format!(
                "--cutoff must lie in (0, 1), got {}",
                self.cutoff
            )));
        }
        Ok(())
    }

    fn executor(&self) -> CliResult<RayonExecutor> {
        let workers = resolve_workers(self.workers);
        log::info!("using {workers} worker thread(s)");
        RayonExecutor::new(workers).map_err(|e| CliError::Internal(e.to_string()))
    }
}

/// Where `test` and real-data `power` read their groups from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV with the first group's observations.
    #[arg(long, requires = "group2", conflicts_with = "input")]
    #[serde(skip)]
    pub group1: Option<PathBuf>,

    /// CSV with the second group's observations.
    #[arg(long, requires = "group1")]
    #[serde(skip)]
    pub group2: Option<PathBuf>,

    /// One CSV holding both groups, labeled by `--group-col`.
    #[arg(long, requires = "group_col")]
    #[serde(skip)]
    pub input: Option<PathBuf>,

    /// Column of `--input` holding the group labels.
    #[arg(long)]
    pub group_col: Option<String>,

    /// Label of the first group in `--group-col`; defaults to the first label seen.
    #[arg(long)]
    pub group1_label: Option<String>,

    /// Covariate columns regressed out within each group (with an intercept).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
}

impl InputArgs {
    fn source(&self) -> CliResult<Source> {
        match (&self.group1, &self.group2, &self.input) {
            (Some(a), Some(b), None) => Ok(Source::TwoFiles(a.clone(), b.clone())),
            (None, None, Some(f)) => Ok(Source::Labeled {
                path: f.clone(),
                group_col: self.group_col.clone().expect("clap enforces --group-col"),
                group1: self.group1_label.clone(),
            }),
            _ => Err(CliError::usage(
                "give either --group1 and --group2, or --input with --group-col",
            )),
        }
    }

    fn given(&self) -> bool {
        self.group1.is_some() || self.input.is_some()
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[command(flatten)]
    pub common: Common,

    /// Fixed K instead of the cutoff rule.
    #[arg(long = "k")]
    pub k: Option<usize>,

    /// Baseline statistics: `all`, `none`, or a list of frobenius, clx, hc, sy.
    #[arg(long, default_value = "all")]
    pub baselines: String,

    /// Also report single Ky-Fan p-values up to this index.
    #[arg(long, default_value_t = 0)]
    pub kyfan_max: usize,

    /// Center each group at its own mean before permuting. Use when group
    /// means differ; the permutation null is then only approximate.
    #[arg(long)]
    pub center_groups: bool,

    /// Exit with status 2 when the test rejects at `--alpha`.
    #[arg(long)]
    #[serde(skip)]
    pub script: bool,

    /// Which adaptive p-value `--script` uses.
    #[arg(long, value_enum, default_value_t = Decision::Minp)]
    pub decision: Decision,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScenarioArgs {
    /// S1, S2, S3 or S4.
    #[arg(long, value_parser = Scenario::from_str)]
    #[serde(serialize_with = "as_display")]
    pub scenario: Scenario,

    #[arg(long, default_value_t = 100)]
    pub p: usize,

    #[arg(long, default_value_t = 25)]
    pub n1: usize,

    #[arg(long, default_value_t = 25)]
    pub n2: usize,

    /// Rank of the low-rank factors.
    #[arg(long, default_value_t = 2)]
    pub w: usize,

    /// Simulated datasets per grid point.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,

    /// Comma-separated methods: ract, ract_max, kyfan_<k>, frobenius, clx, hc, sy.
    #[arg(long, value_delimiter = ',', value_parser = Method::from_str)]
    #[serde(serialize_with = "all_display")]
    pub methods: Vec<Method>,

    /// Reuse one covariance pair for every dataset.
    #[arg(long)]
    pub fixed_pair: bool,

    /// JSON summary written next to the CSV.
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<String>,
}

fn as_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn all_display<S: serde::Serializer, T: std::fmt::Display>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    #[command(flatten)]
    pub common: Common,

    /// Signal strength of the common covariance.
    #[arg(long, default_value_t = 0.0)]
    pub tau_sq: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerArgs {
    /// Scenario for simulated power; omit with `--input`.
    #[arg(long, value_parser = Scenario::from_str, required_unless_present_any = ["input", "group1"])]
    #[serde(serialize_with = "opt_display")]
    pub scenario: Option<Scenario>,

    #[arg(long, default_value_t = 100)]
    pub p: usize,

    #[arg(long, default_value_t = 25)]
    pub n1: usize,

    #[arg(long, default_value_t = 25)]
    pub n2: usize,

    #[arg(long, default_value_t = 2)]
    pub w: usize,

    #[arg(long, default_value_t = 500)]
    pub reps: usize,

    #[arg(long, value_delimiter = ',', value_parser = Method::from_str)]
    #[serde(serialize_with = "all_display")]
    pub methods: Vec<Method>,

    #[arg(long)]
    pub fixed_pair: bool,

    /// `start:end:count` or a comma list of τ² values.
    #[arg(long, conflicts_with_all = ["cutoff_grid", "n_grid"])]
    pub tau_grid: Option<String>,

    /// Grid of K cutoffs at fixed `--tau-sq`.
    #[arg(long, conflicts_with = "n_grid")]
    pub cutoff_grid: Option<String>,

    /// Grid of per-group sample sizes at fixed `--tau-sq`.
    #[arg(long)]
    pub n_grid: Option<String>,

    /// τ² for cutoff and sample-size grids.
    #[arg(long, default_value_t = 1.0)]
    pub tau_sq: f64,

    /// Per-group subsample sizes for real-data power.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,

    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<String>,

    #[command(flatten)]
    pub common: Common,
}

fn opt_display<S: serde::Serializer, T: std::fmt::Display>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovKind {
    Iid,
    Lowrank,
    Offdiag,
    Ar,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NullshapeArgs {
    #[arg(long, value_enum, default_value_t = CovKind::Iid)]
    pub cov: CovKind,

    #[arg(long, default_value_t = 100)]
    pub p: usize,

    /// Total observations per dataset, split evenly between the groups.
    #[arg(long, default_value_t = 50)]
    pub n: usize,

    #[arg(long = "k", value_delimiter = ',', default_value = "1,5,25")]
    pub ks: Vec<usize>,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 1.0)]
    pub tau_sq: f64,

    #[arg(long, default_value_t = 2)]
    pub w: usize,

    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    #[serde(skip)]
    pub workers: Option<usize>,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiagnoseArgs {
    /// The crossover example `Σ₁ = cI`, `Σ₂ = Σ₁ + diag(4, 1, 0, …)`.
    #[arg(long, conflicts_with_all = ["sigma1", "sigma2"])]
    pub prop2: bool,

    #[arg(long, default_value_t = 1.0)]
    pub c: f64,

    /// Dimension of the crossover example.
    #[arg(long, default_value_t = 6)]
    pub p: usize,

    /// CSV file with Σ₁ (header row, then a square matrix).
    #[arg(long, requires = "sigma2")]
    #[serde(skip)]
    pub sigma1: Option<PathBuf>,

    #[arg(long, requires = "sigma1")]
    #[serde(skip)]
    pub sigma2: Option<PathBuf>,

    /// Group sizes defining the ratios r_s = n / n_s.
    #[arg(long, default_value_t = 1)]
    pub n1: usize,

    #[arg(long, default_value_t = 1)]
    pub n2: usize,

    #[arg(long, default_value_t = 1)]
    pub k1: usize,

    #[arg(long, default_value_t = 2)]
    pub k2: usize,

    /// Largest k in the table; defaults to the dimension.
    #[arg(long)]
    pub k_max: Option<usize>,

    #[arg(short, long)]
    #[serde(skip)]
    pub output: Option<String>,
}

/// Parses `start:end:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_grid(raw: &str) -> CliResult<Vec<f64>> {
    let bad = || {
        CliError::usage(format!(
            "invalid grid `{raw}`: expected start:end:count or a comma list"
        ))
    };
    let parts: Vec<&str> = raw.split(':').collect();
    let grid = if parts.len() == 3 {
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match count {
            0 => return Err(bad()),
            1 => vec![start],
            _ => (0..count)
                .map(|i| (start * (count - 1 - i) as f64 + end * i as f64) / (count - 1) as f64)
                .collect(),
        }
    } else if parts.len() == 1 {
        raw.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<Vec<f64>>>()?
    } else {
        return Err(bad());
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn parse_baselines(raw: &str) -> CliResult<Baselines> {
    match raw.trim() {
        "all" => return Ok(Baselines::ALL),
        "none" => return Ok(Baselines::NONE),
        _ => {}
    }
    let mut b = Baselines::NONE;
    for name in raw.split(',').map(str::trim) {
        match name {
            "frobenius" => b.frobenius = true,
            "clx" | "max_elementwise" => b.max_elementwise = true,
            "hc" | "superdiag" => b.superdiag = true,
            "sy" | "trace" => b.trace = true,
            other => return Err(CliError::usage(format!("unknown baseline `{other}`"))),
        }
    }
    Ok(b)
}

/// Runs one parsed command line and returns the exit status.
pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Power(args) => cmd_power(&args),
        Command::Nullshape(args) => cmd_nullshape(&args),
        Command::Diagnose(args) => cmd_diagnose(&args),
    }
}

/// Default `B` for `test`.
pub const TEST_B: usize = 1000;
/// Default `B` for the simulation commands.
pub const SIM_B: usize = 199;

fn cmd_test(args: &TestArgs) -> CliResult<u8> {
    let common = &args.common;
    common.validate(TEST_B)?;
    let b = common.b_or(TEST_B);
    let baselines = parse_baselines(&args.baselines)?;
    let loaded = load(&args.input.source()?, &args.input.covariates)?;
    let d = &loaded.dataset;
    let meta = Meta::new("test", Some(common.seed), Some(b), &(args, b, &loaded.digests))?;
    let cfg = RactConfig {
        b,
        cutoff: common.cutoff,
        master_seed: common.seed,
        centering: common.centering.into(),
        baselines,
        k_override: args.k,
        extra_kyfan: args.kyfan_max,
        center_groups: args.center_groups,
        minp_calibration: common.minp_calibration.into(),
        standardization: common.standardize.into(),
    };
    let exec = common.executor()?;
    let report = run_test(d, &cfg, &exec)?;
    let doc = ReportDoc::new(&meta, &report, (d.n1(), d.n2(), d.p()), common.alpha);
    emit(common.output.as_deref(), &to_json(&doc)?)?;
    let p = match args.decision {
        Decision::Minp => report.p_minp,
        Decision::Max => report.p_ract,
    };
    Ok(if args.script && p <= common.alpha {
        exit::REJECT
    } else {
        exit::OK
    })
}

/// Default Ky-Fan indices beyond the dimension `p` are dropped; explicit
/// ones are left for validation to reject.
fn settings(
    common: &Common,
    methods: &[Method],
    reps: usize,
    fixed_pair: bool,
    defaults: Vec<Method>,
    p: usize,
) -> SimSettings {
    let defaults = defaults
        .into_iter()
        .filter(|m| !matches!(m, Method::KyFan(k) if *k > p))
        .collect();
    SimSettings {
        b: common.b_or(SIM_B),
        n_datasets: reps,
        alpha: common.alpha,
        methods: if methods.is_empty() { defaults } else { methods.to_vec() },
        cutoff: common.cutoff,
        centering: common.centering.into(),
        fixed_pair,
        minp_calibration: common.minp_calibration.into(),
        standardization: common.standardize.into(),
    }
}

fn write_experiment(
    meta: &Meta,
    result: &ExperimentResult,
    output: Option<&str>,
    summary: Option<&str>,
) -> CliResult<()> {
    emit(output, &experiment_csv(meta, result)?)?;
    if let Some(path) = summary {
        let doc = ExperimentDoc {
            meta,
            axis: result.axis.name(),
            rows: &result.rows,
        };
        emit(Some(path), &to_json(&doc)?)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<u8> {
    let common = &args.common;
    common.validate(SIM_B)?;
    let s = &args.scenario;
    let defaults = vec![
        Method::Ract,
        Method::Frobenius,
        Method::MaxElementwise,
        Method::Superdiag,
        Method::Trace,
    ];
    let settings = settings(common, &s.methods, s.reps, s.fixed_pair, defaults, s.p);
    let cfg = ScenarioConfig {
        scenario: s.scenario,
        p: s.p,
        n1: s.n1,
        n2: s.n2,
        tau_sq: args.tau_sq,
        w: s.w,
        seed: common.seed,
    };
    let meta = Meta::new(
        "simulate",
        Some(common.seed),
        Some(settings.b),
        &(
            args,
            settings.b,
            &settings.methods.iter().map(ToString::to_string).collect::<Vec<_>>(),
        ),
    )?;
    let result = run_type1(&cfg, &settings, &common.executor()?)?;
    write_experiment(&meta, &result, common.output.as_deref(), s.summary.as_deref())?;
    Ok(exit::OK)
}

fn cmd_power(args: &PowerArgs) -> CliResult<u8> {
    let common = &args.common;
    common.validate(SIM_B)?;
    let exec = common.executor()?;

    if args.input.given() {
        if args.sizes.is_empty() {
            return Err(CliError::usage("real-data power needs --sizes"));
        }
        let loaded = load(&args.input.source()?, &args.input.covariates)?;
        let settings = settings(
            common,
            &args.methods,
            args.reps,
            args.fixed_pair,
            Method::power_defaults(),
            loaded.dataset.p(),
        );
        let method_names: Vec<String> = settings.methods.iter().map(ToString::to_string).collect();
        let meta = Meta::new(
            "power",
            Some(common.seed),
            Some(settings.b),
            &(args, settings.b, &method_names, &loaded.digests),
        )?;
        let result = run_subsample_power(&loaded.dataset, &args.sizes, &settings, common.seed, "data", &exec)?;
        write_experiment(&meta, &result, common.output.as_deref(), args.summary.as_deref())?;
        return Ok(exit::OK);
    }

    let scenario = args.scenario.ok_or_else(|| CliError::usage("--scenario is required"))?;
    let (axis, grid) = match (&args.tau_grid, &args.cutoff_grid, &args.n_grid) {
        (Some(g), None, None) => (GridAxis::TauSq, parse_grid(g)?),
        (None, Some(g), None) => (GridAxis::Cutoff, parse_grid(g)?),
        (None, None, Some(g)) => (GridAxis::SampleSize, parse_grid(g)?),
        (None, None, None) => return Err(CliError::usage("give one of --tau-grid, --cutoff-grid or --n-grid")),
        _ => return Err(CliError::usage("give only one grid")),
    };
    if axis == GridAxis::Cutoff && grid.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
        return Err(CliError::usage("cutoff grid values must lie in (0, 1)"));
    }
    let base = ScenarioConfig {
        scenario,
        p: args.p,
        n1: args.n1,
        n2: args.n2,
        tau_sq: args.tau_sq,
        w: args.w,
        seed: common.seed,
    };
    let settings = settings(
        common,
        &args.methods,
        args.reps,
        args.fixed_pair,
        Method::power_defaults(),
        args.p,
    );
    let method_names: Vec<String> = settings.methods.iter().map(ToString::to_string).collect();
    let meta = Meta::new(
        "power",
        Some(common.seed),
        Some(settings.b),
        &(args, settings.b, &method_names),
    )?;
    let result = run_power(&base, axis, &grid, &settings, &exec)?;
    write_experiment(&meta, &result, common.output.as_deref(), args.summary.as_deref())?;
    Ok(exit::OK)
}

fn cmd_nullshape(args: &NullshapeArgs) -> CliResult<u8> {
    let null_cov = match args.cov {
        CovKind::Iid => NullCovariance::Iid,
        CovKind::Lowrank => NullCovariance::LowRank {
            w: args.w,
            tau_sq: args.tau_sq,
        },
        CovKind::Offdiag => NullCovariance::OffDiagonal { tau_sq: args.tau_sq },
        CovKind::Ar => NullCovariance::Ar { rho: args.rho },
    };
    let sigma = null_cov.build(args.p, args.seed)?;
    let exec = RayonExecutor::new(resolve_workers(args.workers)).map_err(|e| CliError::Internal(e.to_string()))?;
    let table = run_nullshape(&sigma, &args.ks, args.n, args.reps, args.seed, &exec)?;
    let meta = Meta::new("nullshape", Some(args.seed), None, args)?;
    emit(args.output.as_deref(), &nullshape_csv(&meta, &table)?)?;
    Ok(exit::OK)
}

fn cmd_diagnose(args: &DiagnoseArgs) -> CliResult<u8> {
    let (pop, digests) = if args.prop2 {
        (crossover_example(args.c, args.p)?, Vec::new())
    } else {
        let (Some(a), Some(b)) = (&args.sigma1, &args.sigma2) else {
            return Err(CliError::usage("give --prop2, or --sigma1 and --sigma2"));
        };
        let (m1, d1) = load_matrix(a)?;
        let (m2, d2) = load_matrix(b)?;
        let pop =
            PopulationPair::from_sample_sizes(SymmetricMatrix::new(m1)?, SymmetricMatrix::new(m2)?, args.n1, args.n2)?;
        (pop, vec![d1, d2])
    };
    let meta = Meta::new("diagnose", None, None, &(args, &digests))?;
    let inc = increments(&pop, args.k1, args.k2)?;
    let verdict = if inc.snr_increases {
        format!("SNR_{} >= SNR_{}", args.k2, args.k1)
    } else {
        format!("SNR_{} < SNR_{}", args.k2, args.k1)
    };
    let rows = diagnostics_table(&pop, args.k_max.unwrap_or(pop.dim()))?;
    let preamble = format!(
        "{}# beta_{k1}_{k2}={}\n# gamma_{k1}_{k2}={}\n# threshold=sqrt(gamma+1)-1={}\n# verdict: {verdict}\n",
        meta.csv_header(),
        inc.beta,
        inc.gamma,
        (inc.gamma + 1.0).sqrt() - 1.0,
        k1 = args.k1,
        k2 = args.k2,
    );
    emit(args.output.as_deref(), &diagnostics_csv(&preamble, &rows)?)?;
    Ok(exit::OK)
}
