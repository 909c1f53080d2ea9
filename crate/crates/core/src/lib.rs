//! Hypothesis tests for high-dimensional split-plot designs whose groups may
//! have different dimensions.
//!
//! The statistic is the quadratic form `Q_N = N·X̄ᵀTX̄` in the stacked group
//! means, standardized with unbiased estimates of the traces of `TV_N`. Three
//! reference distributions are offered: standard normal, standardized `χ²₁`,
//! and the standardized `χ²_f` with estimated Pearson degrees of freedom.

pub mod dists;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod hypothesis;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod rng;
pub mod summary;

pub use error::{Error, Result};
pub use estimators::{ContrastGram, Family, IndexSource, PermutationSet, TraceEstimates, TraceOrder};
pub use hypothesis::{BlockMatrix, ScenarioLabel, ScenarioSpec};
pub use inference::{run_test, EstimatorConfig, Flavor, Rule, TestReport, UpsilonPolicy};
pub use linalg::{Matrix, Vector};
pub use model::{CovarianceKind, CovarianceModel, GaussianGenerator, GroupedSample, StudyDesign};
pub use moments::{ExactMoments, SpectralSummary};
pub use rng::{Lane, RngStream};
