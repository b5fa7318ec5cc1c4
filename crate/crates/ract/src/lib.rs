//! Command-line driver and std plumbing for `ract-core`.
//!
//! - [`exec`]: rayon-backed [`ract_core::Executor`] with a fixed worker budget
//! - [`input`]: CSV ingestion into [`ract_core::TwoSampleDataset`]
//! - [`output`]: JSON reports and CSV grids carrying run metadata
//! - [`cli`]: the `ract` command line
//!
//! Exit statuses are listed in [`error::exit`].

pub mod cli;
pub mod error;
pub mod exec;
pub mod input;
pub mod output;

pub use exec::RayonExecutor;
