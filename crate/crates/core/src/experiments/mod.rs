//! Synthetic studies: data generation, metrics, cross-validation and Monte Carlo.

pub mod cv;
pub mod data;
pub mod metrics;
pub mod monte_carlo;

pub use cv::{cv_score, cv_select, CvCell, CvGrid, CvSelection};
pub use data::{derive_seed, generate, sample_covariance, GroundTruth, SPattern, SyntheticSpec};
pub use metrics::{extract_loading, rmse, subspace_ratio, support_f1};
pub use monte_carlo::{
    compare_penalties, monte_carlo, run_trial, BoxStats, MonteCarloConfig, MonteCarloSummary, TrialFailure,
    TrialResult, Tuning,
};
