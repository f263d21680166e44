//! Dense symmetric matrix primitives.
//!
//! Everything in the solver is a real symmetric `p x p` matrix: the sample
//! covariance, the low-rank and sparse blocks, their splitting copies and the
//! two multipliers. [`SymMatrix`] keeps the matrix exactly symmetric (every
//! constructor averages with the transpose), so callers never have to.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`SymMatrix::new`] before symmetrizing.
const INGEST_SYMMETRY_TOL: f64 = 1e-8;

/// Relative floor applied to eigenvalues before forming consecutive ratios.
pub const EIGEN_FLOOR_REL: f64 = 1e-12;

/// Default ratio threshold for the numerical rank rule.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.05;

/// A dense, exactly symmetric real matrix.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.m)
    }
}

impl SymMatrix {
    /// Validates and ingests a square matrix.
    ///
    /// Rejects empty, non-square, non-finite, or visibly asymmetric input, then
    /// replaces the matrix by `(A + A^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let p = m.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > INGEST_SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds from a square matrix by averaging with its transpose. No checks.
    pub fn symmetrized(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let t = m.transpose();
        Self { m: (m + t) * 0.5 }
    }

    pub fn from_row_slice(p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(p, p, data))
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            m: DMatrix::zeros(p, p),
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            m: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// `f(i, j)` is evaluated on the upper triangle and mirrored.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    /// `A A^T` for any `p x k` matrix `A`.
    pub fn gram(a: &DMatrix<f64>) -> Self {
        Self::symmetrized(a * a.transpose())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.m.iter()
    }

    /// Applies a scalar map entrywise. Mirrored entries are equal, so any
    /// deterministic scalar map preserves symmetry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            m: self.m.map(f),
        }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// `<A, B> = tr(A B^T)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    /// `||A - A^T||_F`; zero for anything built by this type.
    pub fn asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).norm()
    }

    /// Symmetric product `(A B + B A) / 2`; equals `A B` when the factors commute.
    pub fn sym_product(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix::symmetrized(&self.m * &other.m)
    }

    /// Applies a symmetric permutation `P A P^T` where `perm[i]` is the source row of row `i`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        let p = self.dim();
        SymMatrix::from_fn(p, |i, j| self.m[(perm[i], perm[j])])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.m.diagonal().iter().copied().collect()
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m + &rhs.m }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { m: &self.m - &rhs.m }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix { m: &self.m * rhs }
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        SymMatrix { m: -&self.m }
    }
}

/// Spectral decomposition `A = Q diag(values) Q^T`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    /// `Q diag(f(values)) Q^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..p {
                scaled[(i, j)] *= s;
            }
        }
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenPairs> {
    if !a.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let p = a.dim();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenPairs { values, vectors })
}

/// Frobenius-nearest positive semidefinite matrix: eigenvalues clipped at zero.
pub fn psd_project(t: &SymMatrix) -> Result<SymMatrix> {
    Ok(sym_eig(t)?.reconstruct_with(|v| v.max(0.0)))
}

/// Default positive-definiteness floor, relative to the matrix scale.
pub fn pd_tol(a: &SymMatrix) -> f64 {
    1e-10 * a.frobenius_norm().max(1.0)
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(a)?.min())
}

/// `lambda_min(A) > tol`. Non-finite input is never positive definite.
pub fn is_pd(a: &SymMatrix, tol: f64) -> bool {
    min_eigenvalue(a).map(|m| m > tol).unwrap_or(false)
}

/// `lambda_min(A) >= -tol`.
pub fn is_psd(a: &SymMatrix, tol: f64) -> bool {
    min_eigenvalue(a).map(|m| m >= -tol).unwrap_or(false)
}

/// Spectral data of a positive definite matrix: log-determinant and inverse.
#[derive(Debug, Clone)]
pub struct PdFactor {
    pub eig: EigenPairs,
}

impl PdFactor {
    /// Fails with `NotPositiveDefinite` when `lambda_min <= pd_tol(a)`.
    pub fn new(a: &SymMatrix, what: &'static str) -> Result<Self> {
        let eig = sym_eig(a)?;
        let tol = pd_tol(a);
        if eig.min() <= tol {
            return Err(Error::NotPositiveDefinite {
                what,
                min_eig: eig.min(),
                tol,
            });
        }
        Ok(Self { eig })
    }

    pub fn log_det(&self) -> f64 {
        self.eig.values.iter().map(|v| v.ln()).sum()
    }

    pub fn inverse(&self) -> SymMatrix {
        self.eig.reconstruct_with(|v| 1.0 / v)
    }

    pub fn min_eig(&self) -> f64 {
        self.eig.min()
    }
}

/// Gaussian KL divergence `log det(Sigma^-1 Sigma_check) + tr(Sigma Sigma_check^-1) - p`.
pub fn kl_divergence(sigma: &SymMatrix, sigma_check: &SymMatrix) -> Result<f64> {
    if sigma.dim() != sigma_check.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma_check.dim(),
            found: sigma.dim(),
        });
    }
    let fs = PdFactor::new(sigma, "Sigma")?;
    let fc = PdFactor::new(sigma_check, "Sigma_check")?;
    Ok(kl_with_inverse(&fs, &fc.inverse(), fc.log_det()))
}

/// KL divergence against a reference whose inverse and log-determinant are known.
pub(crate) fn kl_with_inverse(sigma: &PdFactor, check_inv: &SymMatrix, check_log_det: f64) -> f64 {
    let p = check_inv.dim() as f64;
    let sigma_m = sigma.eig.reconstruct();
    check_log_det - sigma.log_det() + sigma_m.inner(check_inv) - p
}

/// Outcome of the eigenvalue-ratio rank rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericalRank {
    Determined(usize),
    /// No consecutive eigenvalue ratio fell below the threshold.
    Undetermined,
}

impl NumericalRank {
    /// Undetermined counts as full rank `p`.
    pub fn value_or(self, p: usize) -> usize {
        match self {
            NumericalRank::Determined(r) => r,
            NumericalRank::Undetermined => p,
        }
    }

    pub fn determined(self) -> Option<usize> {
        match self {
            NumericalRank::Determined(r) => Some(r),
            NumericalRank::Undetermined => None,
        }
    }
}

/// Rank by the largest eigenvalue gap before the first collapse.
///
/// With eigenvalues `l_1 >= ... >= l_p` (clipped at `1e-12 * l_1`), `i_max` is
/// the smallest `i` with `l_{i+1} / l_i < ratio_threshold` and the rank is the
/// `i <= i_max` maximizing `l_i / l_{i+1}` (smallest index on ties).
pub fn numerical_rank(l: &SymMatrix, ratio_threshold: f64) -> Result<NumericalRank> {
    let eig = sym_eig(l)?;
    Ok(rank_from_spectrum(&eig.values, ratio_threshold))
}

pub fn rank_from_spectrum(values: &[f64], ratio_threshold: f64) -> NumericalRank {
    let Some(&top) = values.first() else {
        return NumericalRank::Undetermined;
    };
    if values.len() < 2 || !(top > 0.0) {
        return NumericalRank::Undetermined;
    }
    let floor = EIGEN_FLOOR_REL * top;
    let lam: Vec<f64> = values.iter().map(|v| v.max(floor)).collect();
    let Some(i_max) = (0..lam.len() - 1).find(|&i| lam[i + 1] / lam[i] < ratio_threshold) else {
        return NumericalRank::Undetermined;
    };
    let mut best = 0;
    let mut best_ratio = f64::NEG_INFINITY;
    for i in 0..=i_max {
        let ratio = lam[i] / lam[i + 1];
        if ratio > best_ratio {
            best_ratio = ratio;
            best = i;
        }
    }
    NumericalRank::Determined(best + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &SymMatrix, b: &SymMatrix, tol: f64) {
        let d = (a - b).frobenius_norm();
        assert!(d <= tol, "distance {d} > {tol}\n{a:?}\n{b:?}");
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);

        let e = sym_eig(&SymMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        // permuted basis: value 3 -> e0, 2 -> e2, 1 -> e1
        assert!((e.vectors[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(2, 1)].abs() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(1, 2)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = f64::NAN;
        assert!(SymMatrix::new(m.clone()).is_err());
        let s = SymMatrix::symmetrized(m);
        assert!(matches!(sym_eig(&s), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn psd_project_examples() {
        let out = psd_project(&SymMatrix::from_diagonal(&[1.0, -1.0])).unwrap();
        assert_close(&out, &SymMatrix::from_diagonal(&[1.0, 0.0]), 1e-12);

        let t = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = psd_project(&t).unwrap();
        let expect = SymMatrix::from_row_slice(2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert_close(&out, &expect, 1e-12);

        let a = SymMatrix::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        assert_close(&psd_project(&a).unwrap(), &a, 1e-9);
    }

    #[test]
    fn kl_examples() {
        let i2 = SymMatrix::identity(2);
        assert!(kl_divergence(&i2, &i2).unwrap().abs() < 1e-14);

        let two = &i2 * 2.0;
        let expect = 2.0 - 2.0 * std::f64::consts::LN_2;
        assert!((kl_divergence(&two, &i2).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 0.61371).abs() < 1e-5);

        let singular = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(matches!(
            kl_divergence(&i2, &singular),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(
            rank_from_spectrum(&[10.0, 9.0, 0.1, 0.01], 0.05),
            NumericalRank::Determined(2)
        );
        assert_eq!(
            rank_from_spectrum(&[5.0, 4.0, 3.0, 2.0], 0.05),
            NumericalRank::Undetermined
        );
        assert_eq!(
            rank_from_spectrum(&[1.0, 1.0, 1e-13, -1e-14], 0.05),
            NumericalRank::Determined(2)
        );
        assert_eq!(rank_from_spectrum(&[0.0, 0.0], 0.05), NumericalRank::Undetermined);
        assert_eq!(rank_from_spectrum(&[3.0], 0.05), NumericalRank::Undetermined);
    }

    #[test]
    fn rank_is_the_first_collapse_index() {
        // every ratio before the collapse is at most 1/threshold, the collapse ratio exceeds it
        assert_eq!(
            rank_from_spectrum(&[1.0, 0.01, 0.01, 1e-4], 0.05),
            NumericalRank::Determined(1)
        );
        assert_eq!(
            rank_from_spectrum(&[8.0, 4.0, 2.0, 0.04], 0.05),
            NumericalRank::Determined(3)
        );
    }

    #[test]
    fn predicates() {
        assert!(is_pd(&SymMatrix::identity(3), 1e-10));
        let d = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(!is_pd(&d, 1e-10));
        assert!(is_psd(&d, 1e-10));
        assert!(!is_psd(&SymMatrix::from_diagonal(&[1.0, -1e-6]), 1e-10));
    }

    #[test]
    fn ingest_rejects_asymmetry_and_shape() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(SymMatrix::new(m).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-12, 1.0]);
        let s = SymMatrix::new(m).unwrap();
        assert_eq!(s.asymmetry(), 0.0);
    }
}
