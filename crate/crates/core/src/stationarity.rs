//! Numerical check of the proximal stationarity conditions
//!
//! ```text
//! L, S >= 0            L + S > 0           Lambda, Theta >= 0
//! tr(Lambda L) = 0     tr(Theta S) = 0
//! grad_L f(L, S) - Lambda = 0
//! prox_{gamma C ||.||_0}[S - gamma (grad_S f(L, S) - Theta)] = S
//! ```
//!
//! Failures are report content rather than errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};
use crate::objective::Problem;
use crate::prox::{Penalty, ProxParams};

pub const DEFAULT_CHECK_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    PrimalL,
    PrimalS,
    PdSum,
    DualL,
    DualS,
    SlackL,
    SlackS,
    GradL,
    ProxFixedPoint,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::PrimalL => "primal_l",
            Condition::PrimalS => "primal_s",
            Condition::PdSum => "pd_sum",
            Condition::DualL => "dual_l",
            Condition::DualS => "dual_s",
            Condition::SlackL => "slack_l",
            Condition::SlackS => "slack_s",
            Condition::GradL => "grad_l",
            Condition::ProxFixedPoint => "prox_fixed_point",
        }
    }
}

/// Signed smallest eigenvalues for the cone conditions, absolute residuals for
/// the rest. The gradient and prox residuals are `None` when `L + S` is not
/// positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub r_primal_l: f64,
    pub r_primal_s: f64,
    pub r_pd_sum: f64,
    pub r_dual_l: f64,
    pub r_dual_s: f64,
    pub r_slack_l: f64,
    pub r_slack_s: f64,
    pub r_grad_l: Option<f64>,
    pub r_prox: Option<f64>,
    pub gamma_used: f64,
    pub tol: f64,
    pub scale: f64,
    pub failed: Vec<Condition>,
}

impl StationarityReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

pub struct Multipliers<'a> {
    pub lambda: &'a SymMatrix,
    pub theta: &'a SymMatrix,
}

pub fn check_p_stationary(
    prob: &Problem,
    l: &SymMatrix,
    s: &SymMatrix,
    duals: Multipliers<'_>,
    gamma: f64,
    tol: f64,
) -> Result<StationarityReport> {
    check_stationary_with(prob, l, s, duals, gamma, tol, Penalty::L0)
}

/// As [`check_p_stationary`] with the fixed-point test taken under `penalty`.
pub fn check_stationary_with(
    prob: &Problem,
    l: &SymMatrix,
    s: &SymMatrix,
    duals: Multipliers<'_>,
    gamma: f64,
    tol: f64,
    penalty: Penalty,
) -> Result<StationarityReport> {
    let p = prob.dim();
    for m in [l, s, duals.lambda, duals.theta] {
        if m.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: m.dim(),
            });
        }
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let prox = ProxParams::new(gamma, prob.c_weight())?;
    let scale = 1f64.max(l.frobenius_norm()).max(s.frobenius_norm());

    let r_primal_l = linalg::min_eigenvalue(l)?;
    let r_primal_s = linalg::min_eigenvalue(s)?;
    let r_pd_sum = linalg::min_eigenvalue(&(l + s))?;
    let r_dual_l = linalg::min_eigenvalue(duals.lambda)?;
    let r_dual_s = linalg::min_eigenvalue(duals.theta)?;
    let r_slack_l = duals.lambda.inner(l).abs();
    let r_slack_s = duals.theta.inner(s).abs();

    let (r_grad_l, r_prox) = match prob.factor_sum(l, s) {
        Ok(sum) => {
            let gs = prob.grad_s_from_factor(&sum);
            let gl = &gs + &SymMatrix::identity(p);
            let grad = (&gl - duals.lambda).frobenius_norm();
            let arg = s - &(&(&gs - duals.theta) * gamma);
            let fixed = (&penalty.prox_matrix(&arg, prox) - s).frobenius_norm();
            (Some(grad), Some(fixed))
        }
        Err(_) => (None, None),
    };

    let within = |v: Option<f64>| v.is_some_and(|v| v <= tol * scale);
    let checks = [
        (Condition::PrimalL, r_primal_l >= -tol),
        (Condition::PrimalS, r_primal_s >= -tol),
        (Condition::PdSum, r_pd_sum > tol),
        (Condition::DualL, r_dual_l >= -tol),
        (Condition::DualS, r_dual_s >= -tol),
        (Condition::SlackL, r_slack_l <= tol * scale),
        (Condition::SlackS, r_slack_s <= tol * scale),
        (Condition::GradL, within(r_grad_l)),
        (Condition::ProxFixedPoint, within(r_prox)),
    ];
    let failed = checks.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect();

    Ok(StationarityReport {
        r_primal_l,
        r_primal_s,
        r_pd_sum,
        r_dual_l,
        r_dual_s,
        r_slack_l,
        r_slack_s,
        r_grad_l,
        r_prox,
        gamma_used: gamma,
        tol,
        scale,
        failed,
    })
}

/// Open interval `(0, 1/(2K))` of admissible prox step sizes for a local
/// Lipschitz constant `K`.
pub fn step_size_band(lipschitz_estimate: f64) -> Result<(f64, f64)> {
    if !(lipschitz_estimate > 0.0) || !lipschitz_estimate.is_finite() {
        return Err(Error::NonPositiveK(lipschitz_estimate));
    }
    Ok((0.0, 1.0 / (2.0 * lipschitz_estimate)))
}
