//! Random forest engine with out-of-bag evaluation and automatic
//! hyperparameter tuning.
//!
//! The crate is organised around a small set of modules:
//!
//! * [`data`]: columnar datasets, CSV I/O, cross-validation plans and
//!   synthetic fixture generators
//! * [`forest`]: tree growing, bagging, prediction and model files
//! * [`metrics`]: classification and regression measures
//! * [`oob`]: out-of-bag curves, permutation importance and stability
//! * [`space`]: the tunable hyperparameter space and its unit-cube encoding
//! * [`smbo`]: sequential model-based optimization with a forest surrogate
//!   and expected improvement
//! * [`tuner`]: the tuning front-ends (the SMBO tuner plus mtry-walk, grid
//!   and random-search baselines)
//! * [`bench`]: a repeated cross-validation benchmark harness

pub mod bench;
pub mod data;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod oob;
pub mod rng;
pub mod smbo;
pub mod space;
pub mod tuner;

pub use error::{Error, Result};
