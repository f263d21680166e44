//! Property bodies and input strategies, run by both the proptest suite and
//! the acceptance harness.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use l0fa::admm::{self, AdmmConfig, TraceMode};
use l0fa::experiments::{
    extract_loading, generate, monte_carlo, sample_covariance, MonteCarloConfig, SPattern, SyntheticSpec, Tuning,
};
use l0fa::{linalg, solve, Problem, SymMatrix};

/// Symmetric matrix from a square of entries in `[-mag, mag]`.
pub fn sym_matrix(max_p: usize, mag: f64) -> impl Strategy<Value = SymMatrix> {
    (1..=max_p).prop_flat_map(move |p| sym_of(p, mag))
}

pub fn sym_of(p: usize, mag: f64) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-mag..mag, p * p).prop_map(move |v| {
        let m = nalgebra::DMatrix::from_row_slice(p, p, &v);
        SymMatrix::symmetrized(&m + m.transpose())
    })
}

/// `B B^T + eps I` for a random square `B`.
pub fn spd_matrix(p: usize) -> impl Strategy<Value = SymMatrix> {
    (prop::collection::vec(-2.0..2.0f64, p * p), 1e-3..1.0f64).prop_map(move |(v, eps)| {
        let b = nalgebra::DMatrix::from_row_slice(p, p, &v);
        SymMatrix::symmetrized(&b * b.transpose() + nalgebra::DMatrix::identity(p, p) * eps)
    })
}

pub fn spd_pair() -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
    (1..=6usize).prop_flat_map(|p| (spd_matrix(p), spd_matrix(p)))
}

/// Matrix plus the entries of a square `W`; `W W^T` is one competitor PSD point.
pub fn projection_case() -> impl Strategy<Value = (SymMatrix, Vec<f64>)> {
    sym_matrix(6, 5.0).prop_flat_map(|a| {
        let p = a.dim();
        (Just(a), prop::collection::vec(-3.0..3.0f64, p * p))
    })
}

pub fn psd_projection(a: &SymMatrix, w: &[f64]) -> Result<(), TestCaseError> {
    let p = a.dim();
    let proj = linalg::psd_project(a).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let scale = a.frobenius_norm().max(1.0);
    prop_assert!(linalg::min_eigenvalue(&proj).unwrap() >= -1e-12 * scale);
    let again = linalg::psd_project(&proj).unwrap();
    prop_assert!((&again - &proj).frobenius_norm() <= 1e-10 * scale, "not idempotent");

    let best = (a - &proj).frobenius_norm();
    let wm = nalgebra::DMatrix::from_row_slice(p, p, w);
    let competitors = [
        SymMatrix::gram(&wm),
        SymMatrix::zeros(p),
        // nearby PSD points
        linalg::psd_project(&(&proj + &SymMatrix::symmetrized(&wm * 1e-3))).unwrap(),
        &proj * 1.01,
        &proj * 0.99,
    ];
    for q in &competitors {
        prop_assert!(best <= (a - q).frobenius_norm() + 1e-10 * scale, "a PSD point is closer");
    }
    Ok(())
}

pub fn kl_nonnegative(a: &SymMatrix, b: &SymMatrix) -> Result<(), TestCaseError> {
    let kl = linalg::kl_divergence(a, b).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(kl >= -1e-10 * kl.abs().max(1.0), "KL {kl}");
    let self_kl = linalg::kl_divergence(a, a).unwrap();
    prop_assert!(self_kl.abs() < 1e-9, "self KL {self_kl}");
    Ok(())
}

/// Parameters for a short solver run on synthetic data.
#[derive(Debug, Clone)]
pub struct RunCase {
    pub p: usize,
    pub seed: u64,
    pub rho: f64,
    pub gamma: f64,
    pub project_l: bool,
}

pub fn run_case() -> impl Strategy<Value = RunCase> {
    (
        4..9usize,
        any::<u64>(),
        prop::sample::select(vec![1.0, 4.0, 32.0]),
        prop::sample::select(vec![1e-8, 1e-4, 1e-3, 1e-2]),
        any::<bool>(),
    )
        .prop_map(|(p, seed, rho, gamma, project_l)| RunCase {
            p,
            seed,
            rho,
            gamma,
            project_l,
        })
}

fn case_problem(c: &RunCase) -> Problem {
    let truth = generate(&SyntheticSpec {
        p: c.p,
        r: 2,
        n: 300,
        snr: 4.0,
        s_pattern: SPattern::Diagonal,
        seed: c.seed,
    })
    .unwrap();
    Problem::new(sample_covariance(&truth.samples).unwrap(), 60.0, 60.0).unwrap()
}

fn case_config(c: &RunCase) -> AdmmConfig {
    AdmmConfig {
        rho: c.rho,
        gamma: c.gamma,
        project_l: c.project_l,
        max_iter: 60,
        trace: TraceMode::Full,
        ..Default::default()
    }
}

/// Every block is symmetric after every sweep, and the U and V blocks stay PSD.
pub fn symmetric_iterates(c: &RunCase) -> Result<(), TestCaseError> {
    let prob = case_problem(c);
    let cfg = case_config(c);
    let mut st = admm::initialize(&prob, 2).unwrap();
    for _ in 0..cfg.max_iter {
        st = match admm::step(&prob, &st, &cfg) {
            Ok(next) => next,
            // an L + S that stops being positive definite ends the run, not the property
            Err(l0fa::Error::SingularSum { .. }) => break,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        for (name, m) in st.blocks() {
            prop_assert!(m.asymmetry() <= 1e-12 * m.frobenius_norm().max(1.0), "{} asymmetric at {}", name, st.k);
        }
        let tol = 1e-10 * st.u.frobenius_norm().max(1.0);
        prop_assert!(linalg::min_eigenvalue(&st.u).unwrap() >= -tol, "U left the cone at {}", st.k);
        let tol = 1e-10 * st.v.frobenius_norm().max(1.0);
        prop_assert!(linalg::min_eigenvalue(&st.v).unwrap() >= -tol, "V left the cone at {}", st.k);
    }
    Ok(())
}

pub fn solve_deterministic(c: &RunCase) -> Result<(), TestCaseError> {
    let prob = case_problem(c);
    let cfg = case_config(c);
    let (a, b) = (solve(&prob, &cfg), solve(&prob, &cfg));
    match (a, b) {
        (Ok(a), Ok(b)) => {
            prop_assert_eq!(&a.final_state, &b.final_state);
            prop_assert_eq!(&a.diagnostics, &b.diagnostics);
            prop_assert_eq!(a.iterations, b.iterations);
        }
        (Err(a), Err(b)) => prop_assert_eq!(a, b),
        _ => prop_assert!(false, "one run failed and the other did not"),
    }
    Ok(())
}

pub fn monte_carlo_deterministic(seed: u64) -> Result<(), TestCaseError> {
    let spec = SyntheticSpec {
        p: 6,
        r: 2,
        n: 200,
        snr: 6.0,
        s_pattern: SPattern::Diagonal,
        seed,
    };
    let solver = AdmmConfig {
        max_iter: 100,
        ..Default::default()
    };
    let grid = l0fa::experiments::CvGrid::singleton(60.0, 110.0, 2.0);
    let cfg = MonteCarloConfig::new(spec, 3, solver, Tuning::Cv(grid));
    let strip = |mut s: l0fa::experiments::MonteCarloSummary| {
        s.mean_runtime_secs = None;
        for r in &mut s.results {
            r.runtime_secs = 0.0;
        }
        s
    };
    let a = strip(monte_carlo(&cfg).unwrap());
    let b = strip(monte_carlo(&cfg).unwrap());
    prop_assert_eq!(a, b);
    Ok(())
}

/// The loading extracted from `G G^T` spans `range(G)` exactly.
pub fn ratio_of_exact_loading(p: usize, r: usize, g: &[f64]) -> Result<(), TestCaseError> {
    let gm = nalgebra::DMatrix::from_row_slice(p, r, g);
    let l = SymMatrix::gram(&gm);
    let est = extract_loading(&l, r).unwrap();
    let ratio = l0fa::experiments::subspace_ratio(&gm, &est).unwrap();
    prop_assert!((ratio - 1.0).abs() < 1e-8, "ratio {ratio}");
    Ok(())
}
