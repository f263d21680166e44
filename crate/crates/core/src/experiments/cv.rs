//! Hold-out selection of `(C, mu, rho)`.
//!
//! The samples are shuffled once and split in half. Every grid cell is solved
//! on the training covariance and scored on the validation covariance with
//! `(r*(L) + ||S||_0) * D_KL(L + S || Sigma_v)`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{solve, AdmmConfig, TraceMode};
use crate::error::{Error, Result};
use crate::experiments::data::sample_covariance;
use crate::linalg::{self, SymMatrix};
use crate::objective::Problem;
use crate::prox::l0_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvGrid {
    pub c_set: Vec<f64>,
    pub mu_set: Vec<f64>,
    pub rho_set: Vec<f64>,
}

impl CvGrid {
    /// `C, mu in {60, 110, ..., 360}`, `rho in {1, 2, 4, ..., 32}`.
    pub fn paper() -> Self {
        let weights: Vec<f64> = (0..7).map(|i| 60.0 + 50.0 * i as f64).collect();
        Self {
            c_set: weights.clone(),
            mu_set: weights,
            rho_set: (0..6).map(|i| 2f64.powi(i)).collect(),
        }
    }

    /// Coarse sub-grid of [`CvGrid::paper`] for quick runs: 27 cells.
    pub fn desk() -> Self {
        Self {
            c_set: vec![60.0, 210.0, 360.0],
            mu_set: vec![60.0, 210.0, 360.0],
            rho_set: vec![1.0, 4.0, 32.0],
        }
    }

    pub fn singleton(c: f64, mu: f64, rho: f64) -> Self {
        Self {
            c_set: vec![c],
            mu_set: vec![mu],
            rho_set: vec![rho],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, set) in [("C", &self.c_set), ("mu", &self.mu_set), ("rho", &self.rho_set)] {
            if set.is_empty() {
                return Err(Error::InvalidParameter(format!("empty {name} candidate set")));
            }
            if let Some(v) = set.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter(format!("{name} candidate {v} is not positive")));
            }
        }
        Ok(())
    }

    /// Cells in lexicographic `(C, mu, rho)` order.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (cs, ms, rs) = (sorted(&self.c_set), sorted(&self.mu_set), sorted(&self.rho_set));
        let mut out = Vec::with_capacity(cs.len() * ms.len() * rs.len());
        for &c in &cs {
            for &m in &ms {
                for &r in &rs {
                    out.push((c, m, r));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.cells().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for CvGrid {
    fn default() -> Self {
        Self::paper()
    }
}

/// `(r* + ||S||_0) * D_KL(L + S || Sigma_v)`; an undetermined rank counts as `p`.
pub fn cv_score(
    l_tilde: &SymMatrix,
    s_tilde: &SymMatrix,
    sigma_v: &SymMatrix,
    ratio_threshold: f64,
    zero_tol: f64,
) -> Result<f64> {
    let p = l_tilde.dim();
    let rank = linalg::numerical_rank(l_tilde, ratio_threshold)?.value_or(p);
    let nnz = l0_norm(s_tilde, zero_tol);
    let kl = linalg::kl_divergence(&(l_tilde + s_tilde), sigma_v)?;
    Ok((rank + nnz) as f64 * kl.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub c: f64,
    pub mu: f64,
    pub rho: f64,
    /// `None` when the training solve or the scoring failed.
    pub score: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    pub c: f64,
    pub mu: f64,
    pub rho: f64,
    pub score: f64,
    pub cells: Vec<CvCell>,
}

/// Half/half split of the sample rows, shuffled by `seed`.
pub fn split_samples(samples: &DMatrix<f64>, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let half = n / 2;
    let pick = |rows: &[usize]| DMatrix::from_fn(rows.len(), samples.ncols(), |i, j| samples[(rows[i], j)]);
    Ok((pick(&idx[..half]), pick(&idx[half..])))
}

/// Solves every cell on the training half and returns the lowest-scoring triple.
///
/// `base` supplies everything except `(C, mu, rho)`, including the fixed `gamma`.
pub fn cv_select(
    samples: &DMatrix<f64>,
    grid: &CvGrid,
    base: &AdmmConfig,
    seed: u64,
    ratio_threshold: f64,
) -> Result<CvSelection> {
    grid.validate()?;
    let (train, valid) = split_samples(samples, seed)?;
    let sigma_t = sample_covariance(&train)?;
    let sigma_v = sample_covariance(&valid)?;
    let first = grid.cells()[0];
    let prob = Problem::new(sigma_t, first.0, first.1)?;

    let cells: Vec<CvCell> = grid
        .cells()
        .into_par_iter()
        .map(|(c, mu, rho)| {
            let cfg = AdmmConfig {
                c_weight: c,
                mu_weight: mu,
                rho,
                trace: TraceMode::Off,
                ..base.clone()
            };
            let outcome = solve(&prob, &cfg).and_then(|rep| {
                let st = &rep.final_state;
                let score = cv_score(&st.l, &st.s, &sigma_v, ratio_threshold, 0.0)?;
                Ok((score, rep.converged, rep.iterations))
            });
            match outcome {
                Ok((score, converged, iterations)) => CvCell {
                    c,
                    mu,
                    rho,
                    score: Some(score),
                    converged,
                    iterations,
                    error: None,
                },
                Err(e) => CvCell {
                    c,
                    mu,
                    rho,
                    score: None,
                    converged: false,
                    iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    // cells are in lexicographic order, so a strict comparison keeps the first tie
    let mut best: Option<&CvCell> = None;
    for cell in &cells {
        if let Some(s) = cell.score {
            if best.is_none_or(|b| s < b.score.unwrap_or(f64::INFINITY)) {
                best = Some(cell);
            }
        }
    }
    let best = best.ok_or(Error::AllCellsFailed)?;
    Ok(CvSelection {
        c: best.c,
        mu: best.mu,
        rho: best.rho,
        score: best.score.unwrap_or_default(),
        cells: cells.clone(),
    })
}
