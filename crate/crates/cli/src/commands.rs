use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use l0fa::experiments::{
    cv_select, generate as draw, monte_carlo, sample_covariance, BoxStats, CvCell, MonteCarloConfig,
    MonteCarloSummary, SyntheticSpec, TrialFailure, Tuning,
};
use l0fa::linalg::{self, NumericalRank};
use l0fa::prox::l0_norm;
use l0fa::stationarity::check_stationary_with;
use l0fa::{solve as run_solver, Multipliers, Penalty, Problem, StationarityReport};

use crate::config::{RunConfig, TuningMode, SCHEMA};
use crate::error::CliError;
use crate::io::{self, fmt_f64};
use crate::{Common, PenaltyArg, TuningArg};

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if common.paper_scale {
        cfg.paper_scale();
    }
    let s = &mut cfg.solver;
    if let Some(seed) = common.seed {
        s.seed = seed;
        cfg.synthetic.seed = seed;
    }
    if let Some(v) = common.gamma {
        s.gamma = v;
    }
    if let Some(v) = common.rho {
        s.rho = v;
    }
    if let Some(v) = common.c {
        s.c_weight = v;
    }
    if let Some(v) = common.mu {
        s.mu_weight = v;
    }
    if let Some(v) = common.tol {
        s.tol = v;
    }
    if let Some(v) = common.max_iter {
        s.max_iter = v;
    }
    if let Some(v) = common.init_rank {
        s.init_rank = Some(v);
    }
    if let Some(p) = common.penalty {
        s.penalty = match p {
            PenaltyArg::L0 => Penalty::L0,
            PenaltyArg::L1 => Penalty::L1,
        };
    }
    cfg.validate().map_err(CliError::input)?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<&Path, CliError> {
    fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    Ok(&common.out)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Serialize)]
struct TruthDoc<'a> {
    schema: &'static str,
    seed: u64,
    spec: &'a SyntheticSpec,
    achieved_snr: f64,
    rank_deficient: bool,
}

pub fn generate(common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let truth = draw(&cfg.synthetic)?;
    io::write_rect(&dir.join("gamma.csv"), &truth.gamma_mat)?;
    io::write_matrix(&dir.join("s_hat.csv"), &truth.s_hat)?;
    io::write_samples(&dir.join("samples.csv"), &truth.samples)?;

    let sigma = sample_covariance(&truth.samples);
    if let Ok(sigma) = &sigma {
        io::write_matrix(&dir.join("sigma_check.csv"), sigma)?;
    }
    io::write_json(
        &dir.join("truth.json"),
        &TruthDoc {
            schema: SCHEMA,
            seed: cfg.synthetic.seed,
            spec: &cfg.synthetic,
            achieved_snr: truth.achieved_snr(),
            rank_deficient: sigma.is_err(),
        },
    )?;
    sigma?;
    println!(
        "generated p={} r={} n={} snr={:.4} into {}",
        cfg.synthetic.p,
        cfg.synthetic.r,
        cfg.synthetic.n,
        truth.achieved_snr(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SolveDoc {
    schema: &'static str,
    converged: bool,
    iterations: usize,
    max_beta: Option<f64>,
    rank: NumericalRank,
    r_star: usize,
    s_l0: usize,
    /// `None` when `L + S` is not positive definite.
    kl_to_sigma_check: Option<f64>,
    initial_lagrangian: Option<f64>,
    final_lagrangian: Option<f64>,
    lipschitz_estimate: Option<f64>,
    config: l0fa::AdmmConfig,
}

pub fn solve(sigma_path: &Path, common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let sigma = io::read_matrix(sigma_path)?;
    let prob = Problem::new(sigma, cfg.solver.c_weight, cfg.solver.mu_weight)?;
    let rep = run_solver(&prob, &cfg.solver)?;
    let dir = out_dir(common)?;

    for (name, m) in rep.final_state.blocks() {
        io::write_matrix(&dir.join(format!("{}_star.csv", name.to_lowercase())), m)?;
    }
    io::write_diagnostics(&dir.join("diagnostics.csv"), &rep.diagnostics)?;

    let st = &rep.final_state;
    let p = prob.dim();
    let rank = linalg::numerical_rank(&st.l, cfg.ratio_threshold)?;
    let doc = SolveDoc {
        schema: SCHEMA,
        converged: rep.converged,
        iterations: rep.iterations,
        max_beta: rep.final_max_beta(),
        rank,
        r_star: rank.value_or(p),
        s_l0: l0_norm(&st.s, 0.0),
        kl_to_sigma_check: linalg::kl_divergence(&(&st.l + &st.s), prob.sigma_check()).ok(),
        initial_lagrangian: rep.initial_lagrangian,
        final_lagrangian: rep.diagnostics.last().and_then(|d| d.lagrangian),
        lipschitz_estimate: rep.lipschitz_estimate,
        config: rep.config.clone(),
    };
    io::write_json(&dir.join("report.json"), &doc)?;
    println!(
        "{} after {} iterations ({:.3}s): r*={} ||S||_0={}",
        if rep.converged { "converged" } else { "stopped" },
        rep.iterations,
        rep.wall_time.as_secs_f64(),
        doc.r_star,
        doc.s_l0
    );
    Ok(())
}

#[derive(Serialize)]
struct SelectionDoc<'a> {
    schema: &'static str,
    c: f64,
    mu: f64,
    rho: f64,
    score: f64,
    gamma: f64,
    seed: u64,
    cells: &'a [CvCell],
}

pub fn cv(samples_path: &Path, common: &Common) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let samples = io::read_samples(samples_path)?;
    let sel = cv_select(&samples, &cfg.grid, &cfg.solver, cfg.solver.seed, cfg.ratio_threshold)?;
    let dir = out_dir(common)?;
    io::write_json(
        &dir.join("selection.json"),
        &SelectionDoc {
            schema: SCHEMA,
            c: sel.c,
            mu: sel.mu,
            rho: sel.rho,
            score: sel.score,
            gamma: cfg.solver.gamma,
            seed: cfg.solver.seed,
            cells: &sel.cells,
        },
    )?;
    let rows: Vec<Vec<String>> = sel
        .cells
        .iter()
        .map(|c| {
            vec![
                fmt_f64(c.c),
                fmt_f64(c.mu),
                fmt_f64(c.rho),
                opt(c.score),
                c.converged.to_string(),
                c.iterations.to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    io::write_table(
        &dir.join("cv_cells.csv"),
        &["c", "mu", "rho", "score", "converged", "iterations", "error"],
        &rows,
    )?;
    println!(
        "selected C={} mu={} rho={} (score {:.6e}) over {} cells",
        sel.c,
        sel.mu,
        sel.rho,
        sel.score,
        sel.cells.len()
    );
    Ok(())
}

pub struct SweepArgs {
    pub trials: Option<usize>,
    pub gammas: Option<Vec<f64>>,
    pub sample_sizes: Option<Vec<usize>>,
    pub tuning: Option<TuningArg>,
    pub compare: bool,
}

#[derive(Serialize)]
struct ArmDoc<'a> {
    penalty: Penalty,
    gamma: f64,
    n: usize,
    completed: usize,
    converged: usize,
    rmse: Option<f64>,
    ratio: Option<BoxStats>,
    mean_support_f1: Option<f64>,
    mean_kl_to_truth: Option<f64>,
    failures: &'a [TrialFailure],
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    schema: &'static str,
    seed: u64,
    trials: usize,
    p: usize,
    r: usize,
    snr: f64,
    tuning: TuningMode,
    arms: Vec<ArmDoc<'a>>,
}

pub fn montecarlo(common: &Common, args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = load_config(common)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(g) = args.gammas {
        cfg.gammas = g;
    }
    if let Some(n) = args.sample_sizes {
        cfg.sample_sizes = n;
    }
    if let Some(t) = args.tuning {
        cfg.tuning = match t {
            TuningArg::Fixed => TuningMode::Fixed,
            TuningArg::Cv => TuningMode::Cv,
        };
    }
    cfg.validate().map_err(CliError::input)?;

    let gammas = if cfg.gammas.is_empty() { vec![cfg.solver.gamma] } else { cfg.gammas.clone() };
    let ns = if cfg.sample_sizes.is_empty() { vec![cfg.synthetic.n] } else { cfg.sample_sizes.clone() };
    let penalties = if args.compare { vec![Penalty::L0, Penalty::L1] } else { vec![cfg.solver.penalty] };
    let tuning = match cfg.tuning {
        TuningMode::Fixed => Tuning::Fixed,
        TuningMode::Cv => Tuning::Cv(cfg.grid.clone()),
    };

    // every arm at a given N sees the same trial data
    let mut arms: Vec<(usize, MonteCarloSummary)> = Vec::new();
    for &n in &ns {
        for &gamma in &gammas {
            for &penalty in &penalties {
                let spec = SyntheticSpec { n, ..cfg.synthetic.clone() };
                let mut mc = MonteCarloConfig::new(spec, cfg.trials, cfg.solver.clone(), tuning.clone())
                    .with_gamma(gamma)
                    .with_penalty(penalty);
                mc.ratio_threshold = cfg.ratio_threshold;
                let summary = monte_carlo(&mc)?;
                eprintln!(
                    "penalty={penalty:?} gamma={gamma:e} n={n}: rmse={} ({} of {} trials ok)",
                    summary.rmse.map_or("n/a".into(), |v| format!("{v:.4}")),
                    summary.results.len(),
                    cfg.trials
                );
                arms.push((n, summary));
            }
        }
    }

    let dir = out_dir(common)?;
    write_montecarlo(dir, &cfg, &arms)?;
    println!("wrote {} arms to {}", arms.len(), dir.display());
    Ok(())
}

fn penalty_name(p: Penalty) -> &'static str {
    match p {
        Penalty::L0 => "l0",
        Penalty::L1 => "l1",
    }
}

fn write_montecarlo(dir: &Path, cfg: &RunConfig, arms: &[(usize, MonteCarloSummary)]) -> Result<(), CliError> {
    let doc = SummaryDoc {
        schema: SCHEMA,
        seed: cfg.synthetic.seed,
        trials: cfg.trials,
        p: cfg.synthetic.p,
        r: cfg.synthetic.r,
        snr: cfg.synthetic.snr,
        tuning: cfg.tuning,
        arms: arms
            .iter()
            .map(|(n, s)| ArmDoc {
                penalty: s.penalty,
                gamma: s.gamma,
                n: *n,
                completed: s.results.len(),
                converged: s.converged,
                rmse: s.rmse,
                ratio: s.ratio,
                mean_support_f1: s.mean_support_f1,
                mean_kl_to_truth: s.mean_kl_to_truth,
                failures: &s.failures,
            })
            .collect(),
    };
    io::write_json(&dir.join("summary.json"), &doc)?;

    let mut boxes = Vec::new();
    let mut rmse_rows = Vec::new();
    let mut trials = Vec::new();
    let mut timings = Vec::new();
    for (n, s) in arms {
        let key = [penalty_name(s.penalty).to_string(), fmt_f64(s.gamma), n.to_string()];
        let b = s.ratio;
        let mut row = key.to_vec();
        row.push(s.results.len().to_string());
        row.extend([b.map(|b| b.min), b.map(|b| b.q1), b.map(|b| b.median), b.map(|b| b.q3), b.map(|b| b.max)].map(opt));
        boxes.push(row);

        let mut row = key.to_vec();
        row.extend([cfg.synthetic.r.to_string(), opt(s.rmse)]);
        rmse_rows.push(row);

        for t in &s.results {
            let mut row = key.to_vec();
            row.extend([
                t.trial.to_string(),
                t.seed.to_string(),
                t.r_star.to_string(),
                (t.rank.determined().is_some()).to_string(),
                fmt_f64(t.ratio),
                fmt_f64(t.sq_err),
                fmt_f64(t.s_support_f1),
                t.s_l0.to_string(),
                fmt_f64(t.kl_to_truth),
                t.converged.to_string(),
                t.iterations.to_string(),
                fmt_f64(t.c),
                fmt_f64(t.mu),
                fmt_f64(t.rho),
            ]);
            trials.push(row);
            let mut row = key.to_vec();
            row.extend([t.trial.to_string(), fmt_f64(t.runtime_secs)]);
            timings.push(row);
        }
    }
    let key = ["penalty", "gamma", "n"];
    let with = |rest: &[&'static str]| -> Vec<&'static str> { key.iter().chain(rest).copied().collect() };
    io::write_table(
        &dir.join("boxplot_stats.csv"),
        &with(&["count", "min", "q1", "median", "q3", "max"]),
        &boxes,
    )?;
    io::write_table(&dir.join("rmse_table.csv"), &with(&["r", "rmse"]), &rmse_rows)?;
    io::write_table(
        &dir.join("trials.csv"),
        &with(&[
            "trial",
            "seed",
            "r_star",
            "rank_determined",
            "ratio",
            "sq_err",
            "s_support_f1",
            "s_l0",
            "kl_to_truth",
            "converged",
            "iterations",
            "c",
            "mu",
            "rho",
        ]),
        &trials,
    )?;
    // wall-clock times vary run to run, so they live apart from the reproducible tables
    io::write_table(&dir.join("timings.csv"), &with(&["trial", "runtime_secs"]), &timings)
}

#[derive(Serialize)]
struct CheckDoc<'a> {
    schema: &'static str,
    passed: bool,
    penalty: Penalty,
    c: f64,
    mu: f64,
    #[serde(flatten)]
    report: &'a StationarityReport,
}

pub fn check(common: &Common, paths: [&PathBuf; 5]) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let [sigma, l, s, lambda, theta] = paths.map(|p| io::read_matrix(p));
    let prob = Problem::new(sigma?, cfg.solver.c_weight, cfg.solver.mu_weight)?;
    let (l, s, lambda, theta) = (l?, s?, lambda?, theta?);
    // --tol here is the check tolerance, not the solver's stopping rule
    let tol = common.tol.unwrap_or(cfg.check_tol);
    let report = check_stationary_with(
        &prob,
        &l,
        &s,
        Multipliers {
            lambda: &lambda,
            theta: &theta,
        },
        cfg.solver.gamma,
        tol,
        cfg.solver.penalty,
    )?;
    let dir = out_dir(common)?;
    io::write_json(
        &dir.join("stationarity.json"),
        &CheckDoc {
            schema: SCHEMA,
            passed: report.passed(),
            penalty: cfg.solver.penalty,
            c: cfg.solver.c_weight,
            mu: cfg.solver.mu_weight,
            report: &report,
        },
    )?;
    if report.passed() {
        println!("stationary at tol {tol}");
    } else {
        let names: Vec<&str> = report.failed.iter().map(|c| c.name()).collect();
        println!("not stationary at tol {tol}: failed {}", names.join(", "));
    }
    Ok(())
}
