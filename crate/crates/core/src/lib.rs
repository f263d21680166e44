//! ℓ0-penalized factor analysis by a six-block ADMM.
//!
//! A sample covariance `Sigma_check` is split as `L + S`, `L` low rank and
//! PSD, `S` sparse and PSD, by minimizing
//! `tr L + mu (tr((L + S) Sigma_check^-1) - log det(L + S)) + C ||S||_0`.

pub mod admm;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod objective;
pub mod prox;
pub mod stationarity;

pub use admm::{solve, AdmmConfig, AdmmState, SolveReport, TraceMode};
pub use error::{Error, Result};
pub use linalg::{NumericalRank, SymMatrix};
pub use objective::Problem;
pub use prox::{Penalty, ProxParams};
pub use stationarity::{check_p_stationary, Multipliers, StationarityReport};
