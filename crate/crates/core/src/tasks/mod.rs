//! Downstream uses of a fitted decomposition.

pub mod cluster;
pub mod completion;
pub mod factor;
pub mod regression;

pub use cluster::{cluster, ClusterModel, EmConfig};
pub use completion::{complete, complete_grid};
pub use factor::{factor_model, FactorModel};
pub use regression::{regress, RegressionModel, DEFAULT_R_USE};
