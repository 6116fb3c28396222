//! Benchmark harness for the parsco optimizers: synthetic problems with known
//! optima, a projected SGD baseline, experiment configs, CSV output and depth
//! scaling fits.

pub mod baseline;
pub mod config;
pub mod error;
pub mod invariants;
pub mod problems;
pub mod record;
pub mod runner;
pub mod scaling;

pub use error::{BenchError, Result};
