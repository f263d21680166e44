//! The smooth term, the full objective, their gradients, and the augmented
//! Lagrangian.
//!
//! With `Sigma = L + S`,
//! `f(L, S) = tr(L) + mu * (tr(Sigma Sigma_check^-1) - log det Sigma)`, which
//! equals `tr(L) + mu * KL(Sigma || Sigma_check)` up to the constant
//! `mu * (log det Sigma_check - p)`. Gradients:
//! `grad_S f = mu * (Sigma_check^-1 - Sigma^-1)` and `grad_L f = I + grad_S f`.

use nalgebra::DMatrix;

use crate::admm::AdmmState;
use crate::error::{Error, Result};
use crate::linalg::{self, PdFactor, SymMatrix};
use crate::prox::Penalty;

/// Relative tolerance for the PSD indicator of the splitting blocks.
pub const INDICATOR_PSD_TOL: f64 = 1e-9;

/// An immutable problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    sigma_check: SymMatrix,
    sigma_check_inv: SymMatrix,
    log_det_check: f64,
    c_weight: f64,
    mu_weight: f64,
}

impl Problem {
    pub fn new(sigma_check: SymMatrix, c_weight: f64, mu_weight: f64) -> Result<Self> {
        if !(c_weight > 0.0 && c_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {c_weight}")));
        }
        if !(mu_weight > 0.0 && mu_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu_weight}")));
        }
        let factor = PdFactor::new(&sigma_check, "Sigma_check")?;
        let inv = factor.inverse();
        let p = sigma_check.dim();
        let residual = (sigma_check.as_matrix() * inv.as_matrix() - DMatrix::identity(p, p)).norm();
        if residual > 1e-8 {
            return Err(Error::InvalidMatrix(format!(
                "Sigma_check is too ill-conditioned to invert (||S S^-1 - I|| = {residual:.2e})"
            )));
        }
        Ok(Self {
            log_det_check: factor.log_det(),
            sigma_check,
            sigma_check_inv: inv,
            c_weight,
            mu_weight,
        })
    }

    /// Same covariance, new weights. Reuses the cached inverse.
    pub fn with_weights(&self, c_weight: f64, mu_weight: f64) -> Result<Self> {
        if !(c_weight > 0.0 && mu_weight > 0.0 && c_weight.is_finite() && mu_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be positive, got C={c_weight}, mu={mu_weight}"
            )));
        }
        Ok(Self {
            c_weight,
            mu_weight,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma_check.dim()
    }

    pub fn sigma_check(&self) -> &SymMatrix {
        &self.sigma_check
    }

    pub fn sigma_check_inv(&self) -> &SymMatrix {
        &self.sigma_check_inv
    }

    pub fn log_det_check(&self) -> f64 {
        self.log_det_check
    }

    pub fn c_weight(&self) -> f64 {
        self.c_weight
    }

    pub fn mu_weight(&self) -> f64 {
        self.mu_weight
    }

    /// Spectral factor of `L + S`, or `SingularSum` if it is not positive definite.
    pub fn factor_sum(&self, l: &SymMatrix, s: &SymMatrix) -> Result<PdFactor> {
        let sum = l + s;
        PdFactor::new(&sum, "L + S").map_err(|e| match e {
            Error::NotPositiveDefinite { min_eig, .. } => Error::SingularSum { min_eig },
            other => other,
        })
    }

    pub(crate) fn f_from_factor(&self, l: &SymMatrix, sum: &PdFactor) -> f64 {
        let sigma = sum.eig.reconstruct();
        l.trace() + self.mu_weight * (sigma.inner(&self.sigma_check_inv) - sum.log_det())
    }

    pub(crate) fn grad_s_from_factor(&self, sum: &PdFactor) -> SymMatrix {
        grad_s_raw(&self.sigma_check_inv, self.mu_weight, &sum.inverse())
    }
}

fn grad_s_raw(check_inv: &SymMatrix, mu: f64, sum_inv: &SymMatrix) -> SymMatrix {
    &(check_inv - sum_inv) * mu
}

fn grad_l_from_grad_s(grad_s: &SymMatrix) -> SymMatrix {
    grad_s + &SymMatrix::identity(grad_s.dim())
}

/// Low-rank and sparse components together.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePair {
    pub l: SymMatrix,
    pub s: SymMatrix,
}

impl FeasiblePair {
    /// True when `L >= 0`, `S >= 0` and `L + S > 0` within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        linalg::is_psd(&self.l, tol)
            && linalg::is_psd(&self.s, tol)
            && linalg::is_pd(&(&self.l + &self.s), tol)
    }
}

/// `tr(L) + mu * (tr((L + S) Sigma_check^-1) - log det(L + S))`.
pub fn f_value(prob: &Problem, l: &SymMatrix, s: &SymMatrix) -> Result<f64> {
    let sum = prob.factor_sum(l, s)?;
    Ok(prob.f_from_factor(l, &sum))
}

/// `f(L, S) + C ||S||_0`.
pub fn big_f_value(prob: &Problem, l: &SymMatrix, s: &SymMatrix, zero_tol: f64) -> Result<f64> {
    Ok(f_value(prob, l, s)? + Penalty::L0.value(s, prob.c_weight, zero_tol))
}

pub fn grad_l(prob: &Problem, l: &SymMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    Ok(grad_l_from_grad_s(&grad_s(prob, l, s)?))
}

pub fn grad_s(prob: &Problem, l: &SymMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    let sum = prob.factor_sum(l, s)?;
    Ok(prob.grad_s_from_factor(&sum))
}

/// Both gradients from one factorization.
pub fn gradients(prob: &Problem, l: &SymMatrix, s: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let gs = grad_s(prob, l, s)?;
    Ok((grad_l_from_grad_s(&gs), gs))
}

/// Value of the augmented Lagrangian. The PSD indicator of `U` and `V` is
/// either zero or infinite; infinity is its own variant, never a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagrangianValue {
    Finite(f64),
    Infinite,
}

impl LagrangianValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LagrangianValue::Finite(v) => Some(v),
            LagrangianValue::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LagrangianValue::Finite(_))
    }
}

/// `L_rho` with the l0 penalty.
pub fn augmented_lagrangian(
    prob: &Problem,
    state: &AdmmState,
    rho: f64,
    zero_tol: f64,
) -> Result<LagrangianValue> {
    augmented_lagrangian_with(prob, state, rho, Penalty::L0, zero_tol)
}

pub fn augmented_lagrangian_with(
    prob: &Problem,
    state: &AdmmState,
    rho: f64,
    penalty: Penalty,
    zero_tol: f64,
) -> Result<LagrangianValue> {
    let sum = prob.factor_sum(&state.l, &state.s)?;
    let f = prob.f_from_factor(&state.l, &sum);
    if !indicator_is_zero(&state.u) || !indicator_is_zero(&state.v) {
        return Ok(LagrangianValue::Infinite);
    }
    Ok(LagrangianValue::Finite(
        f + penalty.value(&state.s, prob.c_weight, zero_tol)
            + splitting_terms(state, rho),
    ))
}

/// `-<Lambda, L - U> + rho/2 ||L - U||^2 - <Theta, S - V> + rho/2 ||S - V||^2`.
pub(crate) fn splitting_terms(state: &AdmmState, rho: f64) -> f64 {
    let dl = &state.l - &state.u;
    let ds = &state.s - &state.v;
    -state.lambda.inner(&dl) + 0.5 * rho * dl.inner(&dl) - state.theta.inner(&ds)
        + 0.5 * rho * ds.inner(&ds)
}

pub(crate) fn indicator_is_zero(x: &SymMatrix) -> bool {
    linalg::is_psd(x, INDICATOR_PSD_TOL * x.frobenius_norm().max(1.0))
}

/// Largest observed `||grad f(x1) - grad f(x2)|| / ||x1 - x2||` over consecutive points.
pub fn lipschitz_estimate(prob: &Problem, points: &[FeasiblePair]) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    let mut prev: Option<(SymMatrix, &FeasiblePair)> = None;
    for pt in points {
        let gs = grad_s(prob, &pt.l, &pt.s)?;
        if let Some((prev_gs, prev_pt)) = &prev {
            if let Some(k) = gradient_ratio(prev_gs, &gs, prev_pt, pt) {
                best = Some(best.map_or(k, |b: f64| b.max(k)));
            }
        }
        prev = Some((gs, pt));
    }
    Ok(best)
}

/// Ratio for one pair; grad_L and grad_S differ by the identity, so both
/// gradient differences equal the grad_S difference.
pub(crate) fn gradient_ratio(
    gs1: &SymMatrix,
    gs2: &SymMatrix,
    x1: &FeasiblePair,
    x2: &FeasiblePair,
) -> Option<f64> {
    let dl = (&x1.l - &x2.l).frobenius_norm();
    let ds = (&x1.s - &x2.s).frobenius_norm();
    let dx = (dl * dl + ds * ds).sqrt();
    if dx <= 1e-14 {
        return None;
    }
    let dg = (gs1 - gs2).frobenius_norm();
    Some((2.0 * dg * dg).sqrt() / dx)
}
