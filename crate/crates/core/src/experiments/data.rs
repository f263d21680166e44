//! Synthetic factor-model data: `y = Gamma u + w`, `u ~ N(0, I_r)`, `w ~ N(0, S_hat)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

const MAX_DRAWS: usize = 10;

/// How the noise covariance `S_hat` is built before the SNR rescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SPattern {
    ScaledIdentity,
    /// Diagonal entries uniform on `(0.5, 1.5)`.
    Diagonal,
    /// Symmetric random off-diagonal fill, made PD by diagonal dominance.
    SparseRandom { density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub p: usize,
    pub r: usize,
    pub n: usize,
    pub snr: f64,
    pub s_pattern: SPattern,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Desk scale: `p = 20`, `r = 4`, `N = 1000`, SNR 6, diagonal noise.
    fn default() -> Self {
        Self {
            p: 20,
            r: 4,
            n: 1000,
            snr: 6.0,
            s_pattern: SPattern::Diagonal,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Full scale: `p = 40`.
    pub fn paper() -> Self {
        Self {
            p: 40,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r >= self.p {
            return Err(Error::InvalidParameter(format!(
                "rank r must satisfy 1 <= r < p, got r={} p={}",
                self.r, self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("sample count n must be >= 1".into()));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("snr must be positive, got {}", self.snr)));
        }
        if let SPattern::SparseRandom { density } = self.s_pattern {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "density must lie in (0, 1], got {density}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `p x r` loading matrix.
    pub gamma_mat: DMatrix<f64>,
    pub s_hat: SymMatrix,
    pub l_hat: SymMatrix,
    /// `n x p`, one sample per row.
    pub samples: DMatrix<f64>,
}

impl GroundTruth {
    pub fn sigma(&self) -> SymMatrix {
        &self.l_hat + &self.s_hat
    }

    pub fn achieved_snr(&self) -> f64 {
        self.l_hat.frobenius_norm() / self.s_hat.frobenius_norm()
    }
}

/// Independent stream seed for work item `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a golden-ratio stride
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate(spec: &SyntheticSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (p, r) = (spec.p, spec.r);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let gamma_raw = draw_full_rank(&mut rng, p, r)?;
    let l_raw = SymMatrix::gram(&gamma_raw);
    let s_raw = noise_pattern(&mut rng, p, spec.s_pattern);
    // keep the loadings at their drawn scale and rescale the noise
    let scale = l_raw.frobenius_norm() / (spec.snr * s_raw.frobenius_norm());
    let s_hat = &s_raw * scale;

    let s_factor = nalgebra::Cholesky::new(s_hat.as_matrix().clone())
        .ok_or_else(|| Error::InvalidMatrix("noise covariance is not positive definite".into()))?;
    let s_chol = s_factor.l();
    let mut samples = DMatrix::zeros(spec.n, p);
    for i in 0..spec.n {
        let u = DMatrix::from_fn(r, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = DMatrix::from_fn(p, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = &gamma_raw * u + &s_chol * z;
        samples.row_mut(i).copy_from(&y.transpose());
    }

    Ok(GroundTruth {
        gamma_mat: gamma_raw,
        s_hat,
        l_hat: l_raw,
        samples,
    })
}

fn draw_full_rank(rng: &mut ChaCha8Rng, p: usize, r: usize) -> Result<DMatrix<f64>> {
    for _ in 0..MAX_DRAWS {
        let g = DMatrix::from_fn(p, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gram = SymMatrix::gram(&g.transpose());
        let eig = linalg::sym_eig(&gram)?;
        if eig.min() > 1e-10 * eig.max().max(1.0) {
            return Ok(g);
        }
    }
    Err(Error::DegenerateDraw {
        rank: r,
        attempts: MAX_DRAWS,
    })
}

fn noise_pattern(rng: &mut ChaCha8Rng, p: usize, pattern: SPattern) -> SymMatrix {
    match pattern {
        SPattern::ScaledIdentity => SymMatrix::identity(p),
        SPattern::Diagonal => {
            let dist = Uniform::new(0.5, 1.5).expect("valid range");
            let d: Vec<f64> = (0..p).map(|_| dist.sample(rng)).collect();
            SymMatrix::from_diagonal(&d)
        }
        SPattern::SparseRandom { density } => {
            let vals = Uniform::new(-1.0, 1.0).expect("valid range");
            let load = Uniform::new(0.1, 0.5).expect("valid range");
            let mut m = DMatrix::<f64>::zeros(p, p);
            for i in 0..p {
                for j in (i + 1)..p {
                    if rng.random::<f64>() < density {
                        let v = vals.sample(rng);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
            }
            for i in 0..p {
                let off: f64 = (0..p).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
                m[(i, i)] = off + load.sample(rng);
            }
            SymMatrix::symmetrized(m)
        }
    }
}

/// `(1/N) sum y_i y_i^T`, required to be positive definite.
pub fn sample_covariance(samples: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = samples.nrows();
    if n == 0 || samples.ncols() == 0 {
        return Err(Error::InvalidParameter("need at least one non-empty sample".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite sample entry".into()));
    }
    let cov = &SymMatrix::gram(&samples.transpose()) * (1.0 / n as f64);
    let min_eig = linalg::min_eigenvalue(&cov)?;
    if !(min_eig > linalg::pd_tol(&cov)) {
        return Err(Error::RankDeficientCovariance { min_eig });
    }
    Ok(cov)
}
