//! Rank-adaptive two-sample covariance testing.
//!
//! The crate computes Ky-Fan(k) norm statistics of the difference between two
//! sample covariance matrices, calibrates them by label permutation and
//! combines them adaptively, either through a standardized maximum or through
//! a minimum p-value. Baseline statistics (Frobenius, max-elementwise,
//! superdiagonal, trace) share the same permutation engine.
//!
//! Everything here is `no_std` with `alloc`. Parallel execution, file formats
//! and the command-line driver live in the `ract` companion crate, which plugs
//! a thread pool in through [`exec::Executor`].
//!
//! Module map:
//! - [`matrix`]: symmetric matrices, truncated spectra, Ky-Fan norms, K selection
//! - [`data`]: two-sample datasets, centering, residualization, covariances
//! - [`stats`]: observed statistic families
//! - [`perm`]: permutation nulls, standardized max, min-p, p-values, full test
//! - [`theory`]: population signal-to-noise diagnostics
//! - [`sim`]: scenario generators and Monte Carlo experiment drivers

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod exec;
pub mod matrix;
pub mod perm;
pub mod sim;
pub mod stats;
pub mod theory;

pub use data::{CovariateMatrix, PooledCentering, TwoSampleDataset};
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use matrix::{SymmetricMatrix, SymmetricSpectrum};
pub use perm::{MinpCalibration, PermutationNull, RactConfig, Standardization, TestReport};
pub use stats::{FamilySet, StatFamily, StatisticVector};
