//! Evaluation metrics for recovered decompositions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// `sqrt(mean((r*_t - r)^2))`.
pub fn rmse(r_stars: &[usize], r_true: usize) -> Result<f64> {
    if r_stars.is_empty() {
        return Err(Error::EmptyTrialSet);
    }
    let sum: f64 = r_stars
        .iter()
        .map(|&r| {
            let d = r as f64 - r_true as f64;
            d * d
        })
        .sum();
    Ok((sum / r_stars.len() as f64).sqrt())
}

/// `tr(G^T P G) / tr(G^T G)` with `P` the orthogonal projector onto `range(G_est)`.
pub fn subspace_ratio(gamma_true: &DMatrix<f64>, gamma_est: &DMatrix<f64>) -> Result<f64> {
    if gamma_true.nrows() != gamma_est.nrows() {
        return Err(Error::DimensionMismatch {
            expected: gamma_true.nrows(),
            found: gamma_est.nrows(),
        });
    }
    let est_norm = gamma_est.norm();
    if gamma_est.ncols() == 0 || est_norm == 0.0 {
        return Err(Error::ZeroEstimate);
    }
    let basis = orthonormal_basis(gamma_est);
    let denom = gamma_true.norm_squared();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("true loading matrix is zero".into()));
    }
    let num = (basis.transpose() * gamma_true).norm_squared();
    Ok(num / denom)
}

/// Left singular vectors with singular value above a relative cutoff.
fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let cutoff = 1e-10 * smax;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > cutoff)
        .collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Top-`r*` eigenvectors of `L*` scaled by `sqrt(max(lambda, 0))`.
pub fn extract_loading(l_star: &SymMatrix, r_star: usize) -> Result<DMatrix<f64>> {
    let p = l_star.dim();
    if r_star == 0 || r_star > p {
        return Err(Error::InvalidParameter(format!(
            "rank must lie in [1, {p}], got {r_star}"
        )));
    }
    let eig = linalg::sym_eig(l_star)?;
    Ok(DMatrix::from_fn(p, r_star, |i, j| {
        eig.vectors[(i, j)] * eig.values[j].max(0.0).sqrt()
    }))
}

/// F1 score of the nonzero patterns; two empty supports score 1.
pub fn support_f1(s_est: &SymMatrix, s_true: &SymMatrix, zero_tol: f64) -> Result<f64> {
    if s_est.dim() != s_true.dim() {
        return Err(Error::DimensionMismatch {
            expected: s_true.dim(),
            found: s_est.dim(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (e, t) in s_est.iter().zip(s_true.iter()) {
        match (e.abs() > zero_tol, t.abs() > zero_tol) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[4, 4, 4], 4).unwrap(), 0.0);
        assert!((rmse(&[4, 4, 6], 4).unwrap() - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(rmse(&[], 4), Err(Error::EmptyTrialSet));
    }

    #[test]
    fn ratio_examples() {
        let g = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 3.0, -1.0, 1.0]);
        assert!((subspace_ratio(&g, &g).unwrap() - 1.0).abs() < 1e-12);

        let r = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        assert!((subspace_ratio(&g, &(&g * r)).unwrap() - 1.0).abs() < 1e-12);

        let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[0.0, 2.0, 0.0]);
        assert!(subspace_ratio(&a, &b).unwrap().abs() < 1e-15);

        assert_eq!(subspace_ratio(&a, &DMatrix::zeros(3, 1)), Err(Error::ZeroEstimate));
    }

    #[test]
    fn loading_examples() {
        let l = SymMatrix::from_diagonal(&[4.0, 1.0, 0.0]);
        let g = extract_loading(&l, 1).unwrap();
        assert!((g[(0, 0)].abs() - 2.0).abs() < 1e-12);
        assert!(g[(1, 0)].abs() < 1e-12 && g[(2, 0)].abs() < 1e-12);

        let gamma = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -2.0, 1.0, 0.0, 3.0, 1.0, 1.0]);
        let lstar = SymMatrix::gram(&gamma);
        let est = extract_loading(&lstar, 2).unwrap();
        assert!((subspace_ratio(&gamma, &est).unwrap() - 1.0).abs() < 1e-10);
        assert!((&SymMatrix::gram(&est) - &lstar).frobenius_norm() < 1e-10);

        let zero = extract_loading(&SymMatrix::zeros(3), 1).unwrap();
        assert_eq!(subspace_ratio(&gamma.rows(0, 3).into_owned(), &zero), Err(Error::ZeroEstimate));
    }

    #[test]
    fn f1_examples() {
        let d = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(support_f1(&d, &d, 0.0).unwrap(), 1.0);
        assert_eq!(support_f1(&SymMatrix::zeros(4), &d, 0.0).unwrap(), 0.0);
        assert_eq!(support_f1(&SymMatrix::zeros(4), &SymMatrix::zeros(4), 0.0).unwrap(), 1.0);

        let spurious = SymMatrix::from_fn(4, |i, j| match (i, j) {
            (i, j) if i == j => 1.0,
            (0, 1) | (1, 0) => 0.3,
            _ => 0.0,
        });
        assert!((support_f1(&spurious, &d, 0.0).unwrap() - 0.8).abs() < 1e-15);
    }
}
