//! Independent reference computations shared by the oracle and acceptance suites.
//! Nothing here calls into the library's objective or update code.
#![allow(dead_code)]

pub mod props;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use l0fa::SymMatrix;

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_sym(rng: &mut impl Rng, p: usize, scale: f64) -> SymMatrix {
    let a = gaussian(rng, p, p);
    SymMatrix::symmetrized((&a + a.transpose()) * (0.5 * scale))
}

/// `A A^T / k + floor I`.
pub fn random_spd(rng: &mut impl Rng, p: usize, floor: f64) -> SymMatrix {
    let a = gaussian(rng, p, p + 2);
    let m = &a * a.transpose() / (p + 2) as f64 + DMatrix::identity(p, p) * floor;
    SymMatrix::symmetrized(m)
}

pub fn random_psd_rank(rng: &mut impl Rng, p: usize, rank: usize) -> SymMatrix {
    let a = gaussian(rng, p, rank);
    SymMatrix::symmetrized(&a * a.transpose())
}

/// `log det` through Cholesky; `None` when not positive definite.
pub fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(m.clone())?;
    Some(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Smooth objective straight from its definition.
pub fn f_ref(sigma_check: &DMatrix<f64>, mu: f64, l: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<f64> {
    let sum = l + s;
    let ld = log_det(&sum)?;
    let check_inv = inverse(sigma_check);
    Some(l.trace() + mu * ((&sum * check_inv).trace() - ld))
}

/// `min_x phi(x)` over `[lo, hi]` by a dense grid (plus the point 0) refined
/// with golden-section search in the winning cell.
pub fn brute_min(phi: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const N: usize = 4000;
    let h = (hi - lo) / N as f64;
    let mut best = (phi(0.0), 0.0, 0usize, false);
    for i in 0..=N {
        let x = lo + h * i as f64;
        let v = phi(x);
        if v < best.0 {
            best = (v, x, i, true);
        }
    }
    if !best.3 {
        return best.0;
    }
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    for _ in 0..200 {
        if phi(c) < phi(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    best.0.min(phi(0.5 * (a + b)))
}

pub fn prox_objective_l0(x: f64, s: f64, gamma: f64, c: f64) -> f64 {
    c * if x != 0.0 { 1.0 } else { 0.0 } + (x - s).powi(2) / (2.0 * gamma)
}

pub fn prox_objective_l1(x: f64, s: f64, gamma: f64, c: f64) -> f64 {
    c * x.abs() + (x - s).powi(2) / (2.0 * gamma)
}

/// Central differences of `f_ref` with respect to `L` (`wrt_l`) or `S` along
/// each symmetric basis direction, returned as a full gradient matrix.
pub fn fd_gradient(
    sigma_check: &DMatrix<f64>,
    mu: f64,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    wrt_l: bool,
    h: f64,
) -> DMatrix<f64> {
    let p = l.nrows();
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut e = DMatrix::zeros(p, p);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let eval = |t: f64| {
                let shifted = &e * t;
                if wrt_l {
                    f_ref(sigma_check, mu, &(l + &shifted), s).unwrap()
                } else {
                    f_ref(sigma_check, mu, l, &(s + &shifted)).unwrap()
                }
            };
            let d = (eval(h) - eval(-h)) / (2.0 * h);
            // a symmetric perturbation of an off-diagonal pair moves two entries
            let v = if i == j { d } else { d / 2.0 };
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `f(L, S) - <Lambda, L> + rho/2 ||L - U||^2`, the L subproblem.
pub fn l_subproblem(
    sigma_check: &DMatrix<f64>,
    mu: f64,
    rho: f64,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> Option<f64> {
    let f = f_ref(sigma_check, mu, l, s)?;
    let diff = l - u;
    Some(f - lambda.dot(l) + 0.5 * rho * diff.dot(&diff))
}

/// Gradient of [`l_subproblem`].
pub fn l_subproblem_grad(
    sigma_check: &DMatrix<f64>,
    mu: f64,
    rho: f64,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let p = l.nrows();
    let sum_inv = inverse(&(l + s));
    DMatrix::identity(p, p) + (inverse(sigma_check) - sum_inv) * mu - lambda + (l - u) * rho
}

/// Minimizes the L subproblem by damped Newton steps on the upper-triangle
/// parameterization with a finite-difference Hessian of the analytic gradient,
/// starting from `L = t I - S` with `t` large enough for feasibility.
pub fn l_subproblem_numeric(
    sigma_check: &DMatrix<f64>,
    mu: f64,
    rho: f64,
    s: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> (DMatrix<f64>, f64) {
    let p = s.nrows();
    let idx: Vec<(usize, usize)> = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
    let n = idx.len();
    let to_mat = |x: &[f64]| {
        let mut m = DMatrix::zeros(p, p);
        for (k, &(i, j)) in idx.iter().enumerate() {
            m[(i, j)] = x[k];
            m[(j, i)] = x[k];
        }
        m
    };
    // gradient in the parameters: off-diagonal parameters move two entries
    let grad_vec = |m: &DMatrix<f64>| -> Vec<f64> {
        let g = l_subproblem_grad(sigma_check, mu, rho, m, s, lambda, u);
        idx.iter().map(|&(i, j)| if i == j { g[(i, j)] } else { 2.0 * g[(i, j)] }).collect()
    };
    let obj = |m: &DMatrix<f64>| l_subproblem(sigma_check, mu, rho, m, s, lambda, u).unwrap_or(f64::INFINITY);

    let t = 1.0 + s.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let start = DMatrix::identity(p, p) * t - s;
    let mut x: Vec<f64> = idx.iter().map(|&(i, j)| start[(i, j)]).collect();
    for _ in 0..200 {
        let m = to_mat(&x);
        let g = grad_vec(&m);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            break;
        }
        let h = 1e-6;
        let mut hess = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (grad_vec(&to_mat(&xp)), grad_vec(&to_mat(&xm)));
            for r in 0..n {
                hess[(r, k)] = (gp[r] - gm[r]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let gv = nalgebra::DVector::from_vec(g.clone());
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv.clone(),
        };
        let f0 = obj(&m);
        let slope: f64 = dir.dot(&gv);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let ft = obj(&to_mat(&trial));
            if ft <= f0 + 1e-4 * step * slope || step < 1e-12 {
                if ft <= f0 {
                    x = trial;
                }
                break;
            }
            step *= 0.5;
        }
    }
    let m = to_mat(&x);
    let v = obj(&m);
    (m, v)
}
