//! Simulation scenarios, accuracy metrics, baselines and the replicate harness.

pub mod baselines;
pub mod bench;
pub mod generators;
pub mod metrics;

pub use generators::*;
pub use metrics::*;
