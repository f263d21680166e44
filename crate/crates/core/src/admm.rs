//! Six-block ADMM for the l0-penalized decomposition.
//!
//! The split problem is
//! `min f(L, S) + C ||S||_0 + g(U) + g(V)  s.t.  L = U, S = V`
//! with `g` the indicator of the PSD cone. Each sweep updates, in order,
//! `L` (closed form), `S` (one proximal-gradient step), `U` and `V` (PSD
//! projections), then the multipliers `Lambda` and `Theta`.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_project, sym_eig, SymMatrix};
use crate::objective::{self, FeasiblePair, Problem};
use crate::prox::{Penalty, ProxParams};

/// Solver tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_GAMMA: f64 = 1e-4;

/// Absolute slack allowed by [`descent_check`].
pub const DESCENT_SLACK: f64 = 1e-8;

/// How much of the per-iteration trace a solve keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// Every iteration for `p <= 100`, every 10th beyond.
    #[default]
    Auto,
    Full,
    /// Every `n`-th iteration plus the last one.
    Thin(usize),
    /// Residuals only; no objective or Lagrangian evaluations.
    Off,
}

impl TraceMode {
    fn stride(self, p: usize) -> Option<usize> {
        match self {
            TraceMode::Auto if p <= 100 => Some(1),
            TraceMode::Auto => Some(10),
            TraceMode::Full => Some(1),
            TraceMode::Thin(n) => Some(n.max(1)),
            TraceMode::Off => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmConfig {
    pub c_weight: f64,
    pub mu_weight: f64,
    pub rho: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Rank kept by the spectral initialization; `None` means `ceil(p / 4)`.
    pub init_rank: Option<usize>,
    /// Project the closed-form L update onto the PSD cone.
    pub project_l: bool,
    /// Recorded for provenance. The solver itself draws no random numbers.
    pub seed: u64,
    pub penalty: Penalty,
    pub trace: TraceMode,
    /// Stop with [`Error::SingularLagrangian`] when a recorded iterate has
    /// `L + S` not positive definite, instead of marking the Lagrangian undefined.
    pub abort_on_singular: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            c_weight: 60.0,
            mu_weight: 60.0,
            rho: 1.0,
            gamma: DEFAULT_GAMMA,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            init_rank: None,
            project_l: true,
            seed: 0,
            penalty: Penalty::L0,
            trace: TraceMode::Auto,
            abort_on_singular: false,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("C", self.c_weight)?;
        positive("mu", self.mu_weight)?;
        positive("rho", self.rho)?;
        positive("gamma", self.gamma)?;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        let d = self.init_rank_for(p);
        if d == 0 || d >= p {
            return Err(Error::BadInitRank {
                d,
                max: p.saturating_sub(1),
            });
        }
        Ok(())
    }

    pub fn init_rank_for(&self, p: usize) -> usize {
        self.init_rank.unwrap_or_else(|| default_init_rank(p))
    }

    pub fn prox_params(&self) -> Result<ProxParams> {
        ProxParams::new(self.gamma, self.c_weight)
    }
}

/// `ceil(p / 4)`.
pub fn default_init_rank(p: usize) -> usize {
    p.div_ceil(4)
}

/// The iterate `(L, S, U, V; Lambda, Theta)` after `k` sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub l: SymMatrix,
    pub s: SymMatrix,
    pub u: SymMatrix,
    pub v: SymMatrix,
    pub lambda: SymMatrix,
    pub theta: SymMatrix,
    pub k: usize,
}

impl AdmmState {
    /// `U = L`, `V = S`, zero multipliers.
    pub fn from_primal(l: SymMatrix, s: SymMatrix) -> Self {
        let p = l.dim();
        Self {
            u: l.clone(),
            v: s.clone(),
            l,
            s,
            lambda: SymMatrix::zeros(p),
            theta: SymMatrix::zeros(p),
            k: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn blocks(&self) -> [(&'static str, &SymMatrix); 6] {
        [
            ("L", &self.l),
            ("S", &self.s),
            ("U", &self.u),
            ("V", &self.v),
            ("Lambda", &self.lambda),
            ("Theta", &self.theta),
        ]
    }

    pub fn pair(&self) -> FeasiblePair {
        FeasiblePair {
            l: self.l.clone(),
            s: self.s.clone(),
        }
    }
}

/// Per-iteration record. `lagrangian` and `f_val` are `None` when `L + S` is
/// not positive definite at that iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterDiag {
    pub k: usize,
    pub betas: [f64; 6],
    pub lagrangian: Option<f64>,
    pub f_val: Option<f64>,
    pub s_l0: usize,
}

impl IterDiag {
    pub fn max_beta(&self) -> f64 {
        max_beta(&self.betas)
    }
}

pub fn max_beta(betas: &[f64; 6]) -> f64 {
    betas.iter().copied().fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_state: AdmmState,
    pub converged: bool,
    pub iterations: usize,
    /// Lagrangian at the initialization, when defined.
    pub initial_lagrangian: Option<f64>,
    pub diagnostics: Vec<IterDiag>,
    /// Residuals of the last sweep, recorded even when the trace is off.
    pub last_betas: Option<[f64; 6]>,
    /// Largest observed gradient-difference ratio between consecutive iterates.
    pub lipschitz_estimate: Option<f64>,
    pub wall_time: Duration,
    pub config: AdmmConfig,
}

impl SolveReport {
    pub fn final_max_beta(&self) -> Option<f64> {
        self.last_betas.as_ref().map(max_beta)
    }
}

/// Spectral initialization: `L0` keeps the top `d` eigenpairs of `Sigma_check`,
/// `S0 = Sigma_check - L0`, `U0 = L0`, `V0 = S0`, zero multipliers.
pub fn initialize(prob: &Problem, d: usize) -> Result<AdmmState> {
    let p = prob.dim();
    if d == 0 || d >= p {
        return Err(Error::BadInitRank {
            d,
            max: p.saturating_sub(1),
        });
    }
    let eig = sym_eig(prob.sigma_check())?;
    let top = DMatrix::from_fn(p, d, |i, j| eig.vectors[(i, j)] * eig.values[j].max(0.0).sqrt());
    let l0 = SymMatrix::gram(&top);
    let s0 = prob.sigma_check() - &l0;
    Ok(AdmmState::from_primal(l0, s0))
}

/// Closed-form minimizer of the L subproblem
/// `f(L, S^k) - <Lambda^k, L> + rho/2 ||L - U^k||^2`, optionally projected.
///
/// With `X D X^T` the spectral decomposition of
/// `M = (I - Lambda^k + mu Sigma_check^-1 - rho (S^k + U^k)) / mu`,
/// `L + S^k = X diag(x_i) X^T` where `x_i > 0` solves `(rho/mu) x^2 + d_i x - 1 = 0`.
pub fn update_l(prob: &Problem, state: &AdmmState, rho: f64, project: bool) -> Result<SymMatrix> {
    let mu = prob.mu_weight();
    let p = prob.dim();
    let mut m = &SymMatrix::identity(p) - &state.lambda;
    m = &m + &(prob.sigma_check_inv() * mu);
    m = &m - &(&(&state.s + &state.u) * rho);
    let m = &m * (1.0 / mu);
    let eig = sym_eig(&m)?;
    let c = 4.0 * rho / mu;
    let scale = mu / (2.0 * rho);
    let sum = eig.reconstruct_with(|d| {
        let root = (d * d + c).sqrt();
        if d >= 0.0 {
            // scale * (root - d) without cancellation
            2.0 / (root + d)
        } else {
            scale * (root - d)
        }
    });
    let l = &sum - &state.s;
    if project {
        psd_project(&l)
    } else {
        Ok(l)
    }
}

/// One proximal-gradient step on the S subproblem:
/// `prox[S^k - gamma (grad_S f(L^{k+1}, S^k) - Theta^k + rho (S^k - V^k))]`.
///
/// `state.l` must already hold `L^{k+1}`.
pub fn update_s(
    prob: &Problem,
    state: &AdmmState,
    rho: f64,
    prox: ProxParams,
    penalty: Penalty,
) -> Result<SymMatrix> {
    let grad = fast_grad_s(prob, &state.l, &state.s)?;
    let arg = s_prox_argument(&state.s, &grad, &state.theta, &state.v, rho, prox.gamma());
    Ok(penalty.prox_matrix(&arg, prox))
}

pub(crate) fn s_prox_argument(
    s: &SymMatrix,
    grad_s: &SymMatrix,
    theta: &SymMatrix,
    v: &SymMatrix,
    rho: f64,
    gamma: f64,
) -> SymMatrix {
    let mut step = grad_s - theta;
    step = &step + &(&(s - v) * rho);
    s - &(&step * gamma)
}

/// `Pi_+(L^{k+1} - Lambda^k / rho)`.
pub fn update_u(state: &AdmmState, rho: f64) -> Result<SymMatrix> {
    psd_project(&(&state.l - &(&state.lambda * (1.0 / rho))))
}

/// `Pi_+(S^{k+1} - Theta^k / rho)`.
pub fn update_v(state: &AdmmState, rho: f64) -> Result<SymMatrix> {
    psd_project(&(&state.s - &(&state.theta * (1.0 / rho))))
}

/// `Lambda - rho (L - U)` and `Theta - rho (S - V)`.
pub fn update_duals(state: &AdmmState, rho: f64) -> (SymMatrix, SymMatrix) {
    let lambda = &state.lambda - &(&(&state.l - &state.u) * rho);
    let theta = &state.theta - &(&(&state.s - &state.v) * rho);
    (lambda, theta)
}

/// Frobenius norms of the six block differences.
pub fn residuals(prev: &AdmmState, next: &AdmmState) -> [f64; 6] {
    let a = prev.blocks();
    let b = next.blocks();
    std::array::from_fn(|i| (a[i].1 - b[i].1).frobenius_norm())
}

/// One full Gauss-Seidel sweep.
pub fn step(prob: &Problem, state: &AdmmState, cfg: &AdmmConfig) -> Result<AdmmState> {
    let rho = cfg.rho;
    let prox = cfg.prox_params()?;
    let mut next = state.clone();
    next.l = update_l(prob, &next, rho, cfg.project_l)?;
    next.s = update_s(prob, &next, rho, prox, cfg.penalty)?;
    next.u = update_u(&next, rho)?;
    next.v = update_v(&next, rho)?;
    let (lambda, theta) = update_duals(&next, rho);
    next.lambda = lambda;
    next.theta = theta;
    next.k = state.k + 1;
    Ok(next)
}

/// Runs the ADMM until every block moves by less than `tol` or the budget runs out.
///
/// The weights `C` and `mu` in `cfg` take precedence over those stored in `prob`.
pub fn solve(prob: &Problem, cfg: &AdmmConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let p = prob.dim();
    cfg.validate(p)?;
    let prob = prob.with_weights(cfg.c_weight, cfg.mu_weight)?;
    let stride = cfg.trace.stride(p);

    let mut state = initialize(&prob, cfg.init_rank_for(p))?;
    let mut monitor = Monitor::default();
    let initial_lagrangian = match stride {
        Some(_) => monitor.observe(&prob, &state, cfg)?.0,
        None => None,
    };

    let mut diagnostics = Vec::new();
    let mut last_betas = None;
    let mut converged = false;
    while state.k < cfg.max_iter {
        let next = step(&prob, &state, cfg).map_err(|e| match e {
            Error::SingularSum { min_eig } => Error::SingularLagrangian {
                iteration: state.k + 1,
                min_eig,
            },
            other => other,
        })?;
        for (name, block) in next.blocks() {
            if !block.is_finite() {
                return Err(Error::NonFiniteIterate {
                    iteration: next.k,
                    block: name,
                });
            }
        }
        let betas = residuals(&state, &next);
        state = next;
        last_betas = Some(betas);
        converged = max_beta(&betas) < cfg.tol;

        if let Some(n) = stride {
            if state.k % n == 0 || converged || state.k == cfg.max_iter {
                let (lagrangian, f_val) = monitor.observe(&prob, &state, cfg)?;
                if cfg.abort_on_singular && f_val.is_none() {
                    return Err(Error::SingularLagrangian {
                        iteration: state.k,
                        min_eig: crate::linalg::min_eigenvalue(&(&state.l + &state.s))?,
                    });
                }
                diagnostics.push(IterDiag {
                    k: state.k,
                    betas,
                    lagrangian,
                    f_val,
                    s_l0: crate::prox::l0_norm(&state.s, 0.0),
                });
            }
        }
        if converged {
            break;
        }
    }

    Ok(SolveReport {
        iterations: state.k,
        final_state: state,
        converged,
        initial_lagrangian,
        diagnostics,
        last_betas,
        lipschitz_estimate: monitor.lipschitz,
        wall_time: start.elapsed(),
        config: cfg.clone(),
    })
}

/// Evaluates the Lagrangian trace and tracks the local Lipschitz estimate.
#[derive(Default)]
struct Monitor {
    prev: Option<(SymMatrix, FeasiblePair)>,
    lipschitz: Option<f64>,
}

impl Monitor {
    fn observe(
        &mut self,
        prob: &Problem,
        state: &AdmmState,
        cfg: &AdmmConfig,
    ) -> Result<(Option<f64>, Option<f64>)> {
        let Some(chol) = SumCholesky::new(&state.l, &state.s) else {
            self.prev = None;
            return Ok((None, None));
        };
        let f = state.l.trace()
            + prob.mu_weight() * ((&state.l + &state.s).inner(prob.sigma_check_inv()) - chol.log_det);
        let gs = &(prob.sigma_check_inv() - &chol.inverse) * prob.mu_weight();
        let pair = state.pair();
        if let Some((prev_gs, prev_pair)) = &self.prev {
            if let Some(k) = objective::gradient_ratio(prev_gs, &gs, prev_pair, &pair) {
                self.lipschitz = Some(self.lipschitz.map_or(k, |b| b.max(k)));
            }
        }
        self.prev = Some((gs, pair));

        let lagrangian = if objective::indicator_is_zero(&state.u) && objective::indicator_is_zero(&state.v) {
            Some(
                f + cfg.penalty.value(&state.s, prob.c_weight(), 0.0)
                    + objective::splitting_terms(state, cfg.rho),
            )
        } else {
            None
        };
        Ok((lagrangian, Some(f)))
    }
}

/// Cholesky-based inverse and log-determinant of `L + S` for the inner loop.
struct SumCholesky {
    inverse: SymMatrix,
    log_det: f64,
}

impl SumCholesky {
    fn new(l: &SymMatrix, s: &SymMatrix) -> Option<Self> {
        let sum = l + s;
        let chol = nalgebra::Cholesky::new(sum.as_matrix().clone())?;
        let diag = chol.l_dirty().diagonal();
        if diag.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let log_det = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
        Some(Self {
            inverse: SymMatrix::symmetrized(chol.inverse()),
            log_det,
        })
    }
}

fn fast_grad_s(prob: &Problem, l: &SymMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    match SumCholesky::new(l, s) {
        Some(chol) => Ok(&(prob.sigma_check_inv() - &chol.inverse) * prob.mu_weight()),
        None => objective::grad_s(prob, l, s),
    }
}

/// Iterations `k >= 1` at which the sufficient-descent inequality
/// `L(A^k) - L(A^{k+1}) >= eps/2 * sum_primal ||dX||^2 + 1/rho * sum_dual ||dY||^2`
/// fails by more than [`DESCENT_SLACK`]. An undefined Lagrangian at either
/// end counts as a failure. Only consecutive recorded iterations are compared.
pub fn descent_check(report: &SolveReport, rho: f64, epsilon: f64) -> Vec<usize> {
    let mut violations = Vec::new();
    for pair in report.diagnostics.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.k < 1 || b.k != a.k + 1 {
            continue;
        }
        let ok = match (a.lagrangian, b.lagrangian) {
            (Some(la), Some(lb)) => {
                let primal: f64 = b.betas[..4].iter().map(|x| x * x).sum();
                let dual: f64 = b.betas[4..].iter().map(|x| x * x).sum();
                la - lb >= 0.5 * epsilon * primal + dual / rho - DESCENT_SLACK
            }
            _ => false,
        };
        if !ok {
            violations.push(a.k);
        }
    }
    violations
}
