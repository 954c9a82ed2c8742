//! Sparse maximum likelihood feature screening for generalized linear models.
//!
//! The screener runs iterative hard thresholding on the log-likelihood of a
//! canonical-link GLM and keeps a fixed number `k` of features. A second stage
//! picks a sub-model from the retained set with AIC, BIC or extended BIC.
//!
//! ```no_run
//! use smle::{gen_data, run_screening, GenConfig, ScreeningConfig};
//!
//! let data = gen_data(&GenConfig::default()).unwrap().dataset;
//! let fit = run_screening(&data, &ScreeningConfig::with_k(20)).unwrap();
//! println!("{:?}", fit.retained_features);
//! ```

pub mod bench;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod frame;
pub mod glm;
pub mod iht;
pub mod select;

pub use bench::{mrd, prr, ssr, ExperimentReport, ExperimentSpec};
pub use datagen::{gen_data, Correlation, CovarianceSpec, GenConfig, Generated};
pub use error::{Result, SmleError};
pub use frame::{FeatureColumn, FeatureFrame};
pub use glm::{newton_refit, CoefVector, Dataset, Family, GroupMap, Refit, Scale, Truth};
pub use iht::{default_k, run_screening, ScreeningConfig, ScreeningResult, StepInit, StopReason};
pub use select::{run_selection, Criterion, SelectionConfig, SelectionResult};
