//! Repeated synthetic trials and their summary statistics.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{solve, AdmmConfig, TraceMode};
use crate::error::{Error, Result};
use crate::experiments::cv::{cv_select, CvGrid};
use crate::experiments::data::{derive_seed, generate, sample_covariance, SyntheticSpec};
use crate::experiments::metrics::{extract_loading, rmse, subspace_ratio, support_f1};
use crate::linalg::{self, NumericalRank, DEFAULT_RATIO_THRESHOLD};
use crate::objective::Problem;
use crate::prox::{l0_norm, Penalty};

/// Fixed weights, or a fresh hold-out selection per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Fixed,
    Cv(CvGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    /// `spec.seed` is the master seed; trial `t` uses `derive_seed(seed, t)`.
    pub spec: SyntheticSpec,
    pub trials: usize,
    pub solver: AdmmConfig,
    pub tuning: Tuning,
    pub ratio_threshold: f64,
}

impl MonteCarloConfig {
    pub fn new(spec: SyntheticSpec, trials: usize, solver: AdmmConfig, tuning: Tuning) -> Self {
        Self {
            spec,
            trials,
            solver,
            tuning,
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
        }
    }

    pub fn with_penalty(&self, penalty: Penalty) -> Self {
        let mut out = self.clone();
        out.solver.penalty = penalty;
        out
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.solver.gamma = gamma;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub rank: NumericalRank,
    /// Rank used in the metrics; `p` when undetermined.
    pub r_star: usize,
    pub ratio: f64,
    pub sq_err: f64,
    pub s_support_f1: f64,
    pub s_l0: usize,
    pub kl_to_truth: f64,
    pub runtime_secs: f64,
    pub converged: bool,
    pub iterations: usize,
    pub c: f64,
    pub mu: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub penalty: Penalty,
    pub gamma: f64,
    pub rmse: Option<f64>,
    pub ratio: Option<BoxStats>,
    pub mean_support_f1: Option<f64>,
    pub mean_kl_to_truth: Option<f64>,
    pub mean_runtime_secs: Option<f64>,
    pub converged: usize,
    pub failures: Vec<TrialFailure>,
    pub results: Vec<TrialResult>,
}

pub fn run_trial(cfg: &MonteCarloConfig, trial: usize) -> Result<TrialResult> {
    let start = Instant::now();
    let seed = derive_seed(cfg.spec.seed, trial as u64);
    let spec = SyntheticSpec {
        seed,
        ..cfg.spec.clone()
    };
    let truth = generate(&spec)?;
    let sigma_check = sample_covariance(&truth.samples)?;

    let mut solver = AdmmConfig {
        trace: TraceMode::Off,
        seed,
        ..cfg.solver.clone()
    };
    if let Tuning::Cv(grid) = &cfg.tuning {
        let sel = cv_select(&truth.samples, grid, &solver, derive_seed(seed, 0), cfg.ratio_threshold)?;
        solver.c_weight = sel.c;
        solver.mu_weight = sel.mu;
        solver.rho = sel.rho;
    }
    let prob = Problem::new(sigma_check, solver.c_weight, solver.mu_weight)?;
    let rep = solve(&prob, &solver)?;
    let st = &rep.final_state;

    let p = spec.p;
    let rank = linalg::numerical_rank(&st.l, cfg.ratio_threshold)?;
    let r_star = rank.value_or(p);
    let ratio = subspace_ratio(&truth.gamma_mat, &extract_loading(&st.l, r_star)?)?;
    let diff = r_star as f64 - spec.r as f64;
    let f1 = support_f1(&st.s, &truth.s_hat, 0.0)?;
    let kl = linalg::kl_divergence(&(&st.l + &st.s), &truth.sigma())?;

    Ok(TrialResult {
        trial,
        seed,
        rank,
        r_star,
        ratio,
        sq_err: diff * diff,
        s_support_f1: f1,
        s_l0: l0_norm(&st.s, 0.0),
        kl_to_truth: kl,
        runtime_secs: start.elapsed().as_secs_f64(),
        converged: rep.converged,
        iterations: rep.iterations,
        c: solver.c_weight,
        mu: solver.mu_weight,
        rho: solver.rho,
    })
}

/// Runs all trials concurrently; failed trials are recorded, not fatal.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloSummary> {
    if cfg.trials == 0 {
        return Err(Error::EmptyTrialSet);
    }
    cfg.spec.validate()?;
    let outcomes: Vec<(usize, Result<TrialResult>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| (t, run_trial(cfg, t)))
        .collect();

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (t, out) in outcomes {
        match out {
            Ok(r) => results.push(r),
            Err(e) => failures.push(TrialFailure {
                trial: t,
                seed: derive_seed(cfg.spec.seed, t as u64),
                error: e.to_string(),
            }),
        }
    }
    Ok(summarize(cfg, results, failures))
}

fn summarize(cfg: &MonteCarloConfig, results: Vec<TrialResult>, failures: Vec<TrialFailure>) -> MonteCarloSummary {
    let mean = |f: &dyn Fn(&TrialResult) -> f64| {
        (!results.is_empty()).then(|| results.iter().map(f).sum::<f64>() / results.len() as f64)
    };
    let r_stars: Vec<usize> = results.iter().map(|r| r.r_star).collect();
    let ratios: Vec<f64> = results.iter().map(|r| r.ratio).collect();
    MonteCarloSummary {
        trials: cfg.trials,
        penalty: cfg.solver.penalty,
        gamma: cfg.solver.gamma,
        rmse: rmse(&r_stars, cfg.spec.r).ok(),
        ratio: BoxStats::from_values(&ratios),
        mean_support_f1: mean(&|r| r.s_support_f1),
        mean_kl_to_truth: mean(&|r| r.kl_to_truth),
        mean_runtime_secs: mean(&|r| r.runtime_secs),
        converged: results.iter().filter(|r| r.converged).count(),
        failures,
        results,
    }
}

/// Same data per trial for both penalties: the l0 arm, then the l1 arm.
pub fn compare_penalties(cfg: &MonteCarloConfig) -> Result<(MonteCarloSummary, MonteCarloSummary)> {
    let l0 = monte_carlo(&cfg.with_penalty(Penalty::L0))?;
    let l1 = monte_carlo(&cfg.with_penalty(Penalty::L1))?;
    Ok((l0, l1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::data::SPattern;

    fn small() -> MonteCarloConfig {
        let spec = SyntheticSpec {
            p: 8,
            r: 2,
            n: 400,
            snr: 6.0,
            s_pattern: SPattern::Diagonal,
            seed: 11,
        };
        let solver = AdmmConfig {
            max_iter: 300,
            ..Default::default()
        };
        MonteCarloConfig::new(spec, 3, solver, Tuning::Fixed)
    }

    #[test]
    fn box_stats_examples() {
        let b = BoxStats::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let b = BoxStats::from_values(&[1.0, 2.0]).unwrap();
        assert_eq!(b.median, 1.5);
        assert!(BoxStats::from_values(&[]).is_none());
    }

    #[test]
    fn single_trial_summary() {
        let mut cfg = small();
        cfg.trials = 1;
        let s = monte_carlo(&cfg).unwrap();
        assert_eq!(s.results.len(), 1);
        let r = &s.results[0];
        assert_eq!(s.rmse, Some(r.sq_err.sqrt()));
        assert_eq!(s.ratio.unwrap().median, r.ratio);
        assert_eq!(s.mean_support_f1, Some(r.s_support_f1));
    }

    #[test]
    fn zero_trials_rejected() {
        let mut cfg = small();
        cfg.trials = 0;
        assert_eq!(monte_carlo(&cfg), Err(Error::EmptyTrialSet));
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small();
        cfg.spec.n = 3; // fewer samples than p: rank-deficient covariance
        let s = monte_carlo(&cfg).unwrap();
        assert_eq!(s.failures.len(), 3);
        assert!(s.results.is_empty());
        assert!(s.rmse.is_none());
    }
}
