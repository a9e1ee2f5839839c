//! Batch front-end: reads a TOML problem description, runs one of the solver
//! pipelines and writes CSV files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use mpbvp::approx::{approximate, build_sequence, perturb_experiment};
use mpbvp::boundary::BoundaryOperator;
use mpbvp::bvpsolve::solve_bvp_with;
use mpbvp::nbv::{self, SUP_GRID};
use mpbvp::odecore::{cn_distance, cn_distance_to, CN_GRID};
use mpbvp::Error;

use config::{exact_jet, MeasureConfig, ProblemConfig, ToleranceOverrides};
use output::{num, opt, row};

/// Default number of samples in `solution.csv`.
pub const SOLUTION_GRID: usize = 201;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: &str, msg: impl Display) -> Self {
        Self::Parse(format!("field `{field}`: {msg}"))
    }

    /// 0 success, 2 parse, 3 not uniquely solvable, 4 integration failure,
    /// 5 perturbation validation, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Parse(_) => 2,
            Self::Solver(e) => solver_code(e),
            Self::Io { .. } => 1,
        }
    }
}

fn solver_code(e: &Error) -> u8 {
    match e {
        Error::NotUniquelySolvable { .. } => 3,
        Error::IntegrationFailure { .. } => 4,
        Error::PerturbationTooLarge { .. } => 5,
        Error::ReferenceUnsolvable(inner) => solver_code(inner),
        Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::UnsupportedWeight { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Sample count for solution files and C^(n) norms.
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl RunOptions {
    fn overrides(&self) -> ToleranceOverrides {
        ToleranceOverrides { rtol: self.tol }
    }

    fn norm_grid(&self) -> usize {
        self.grid.unwrap_or(CN_GRID)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

/// Solves the configured problem and writes `solution.csv`; returns the
/// summary lines.
pub fn cmd_solve(cfg: &ProblemConfig, opts: &RunOptions) -> Result<Vec<String>, CliError> {
    let solve = cfg.solve_options(opts.overrides())?;
    let general = cfg.problem()?;
    let imported = cfg.imported_problem()?;
    let problem = imported.as_ref().unwrap_or(&general);
    let rec = solve_bvp_with(problem, &solve)?;
    let (n, m) = (cfg.n, cfg.m);
    let (a, b) = cfg.domain();

    let mut csv = String::from("t");
    for l in 0..=n {
        for mu in 0..m {
            csv.push_str(&format!(",y{mu}_d{l}_re,y{mu}_d{l}_im"));
        }
    }
    csv.push('\n');
    let samples = opts.grid.unwrap_or(SOLUTION_GRID).max(2);
    for i in 0..samples {
        let t = if i + 1 == samples {
            b
        } else {
            a + (b - a) * i as f64 / (samples - 1) as f64
        };
        let jet = rec.solution.jet(t, n)?;
        let mut fields = vec![num(t)];
        for d in &jet {
            for mu in 0..m {
                fields.push(num(d[(mu, 0)].re));
                fields.push(num(d[(mu, 0)].im));
            }
        }
        csv.push_str(&row(&fields));
    }
    let path = write(&opts.out, "solution.csv", &csv)?;

    let mut summary = vec![
        format!("solution = {}", path.display()),
        format!("cond_M = {}", num(rec.condition)),
        format!("boundary_residual = {}", num(rec.boundary_residual)),
        format!("ode_residual = {}", num(rec.ode_residual)),
    ];
    if let Some(exact) = cfg.exact()? {
        let err = cn_distance_to(&rec.solution, n, opts.norm_grid(), |t| exact_jet(&exact, t, n))?;
        summary.push(format!("err_exact = {}", num(err)));
    }
    if imported.is_some() {
        let reference = solve_bvp_with(&general, &solve).map_err(|e| Error::ReferenceUnsolvable(Box::new(e)))?;
        let err = cn_distance(&rec.solution, &reference.solution, n, opts.norm_grid())?;
        summary.push(format!("err_Cn = {}", num(err)));
    }
    Ok(summary)
}

/// Runs the convergence study and writes `convergence.csv`, plus `nodes.csv`
/// when `dump_nodes` is set.
pub fn cmd_approximate(cfg: &ProblemConfig, opts: &RunOptions, dump_nodes: bool) -> Result<Vec<String>, CliError> {
    let solve = cfg.solve_options(opts.overrides())?;
    let sched = cfg.schedule(opts.grid, solve)?;
    let problem = cfg.problem()?;
    let report = approximate(&problem, &sched)?;

    let mut csv = String::from("k,p_k,status,err_Cn,boundary_discrepancy,cond_M\n");
    for r in &report.records {
        csv.push_str(&row(&[
            r.k.to_string(),
            r.node_count.to_string(),
            r.status.label().to_string(),
            opt(r.err),
            num(r.discrepancy),
            opt(r.condition),
        ]));
    }
    let path = write(&opts.out, "convergence.csv", &csv)?;
    let mut summary = vec![
        format!("convergence = {}", path.display()),
        format!("reference_cond_M = {}", num(report.reference.condition)),
    ];
    if dump_nodes {
        let mut table = String::from(output::NODE_HEADER);
        for (pk, &k) in build_sequence(&problem, &sched)?.iter().zip(sched.ks()) {
            if let BoundaryOperator::Multipoint(bk) = pk.boundary() {
                output::dump_nodes(&mut table, k, bk);
            }
        }
        let path = write(&opts.out, "nodes.csv", &table)?;
        summary.push(format!("nodes = {}", path.display()));
    }
    Ok(summary)
}

/// Runs the perturbation experiment for every epsilon and writes
/// `perturbation.csv`. Uses the configured perturbation if present, otherwise
/// the default generator.
pub fn cmd_perturb(cfg: &ProblemConfig, opts: &RunOptions, epsilons: &[f64]) -> Result<Vec<String>, CliError> {
    let solve = cfg.solve_options(opts.overrides())?;
    let sched = cfg.schedule(opts.grid, solve)?;
    let problem = cfg.problem()?;
    let eps_list = if epsilons.is_empty() {
        &cfg.schedule.epsilons
    } else {
        epsilons
    };
    if eps_list.is_empty() {
        return Err(CliError::config("schedule.epsilons", "no epsilon values given"));
    }
    let perturbation = cfg.perturbation()?;
    let mut csv = String::from("epsilon,k,status,err,ratio,offset_ratio,kappa_hat,rho_hat\n");
    let mut summary = Vec::new();
    for &eps in eps_list {
        let rep = perturb_experiment(&problem, &sched, eps, perturbation.as_ref())?;
        let rho = rep.rho_hat.map(|k| k.to_string()).unwrap_or_default();
        for r in &rep.records {
            csv.push_str(&row(&[
                num(eps),
                r.k.to_string(),
                r.status.label().to_string(),
                opt(r.err),
                opt(r.ratio),
                opt(r.offset_ratio),
                opt(rep.kappa_hat),
                rho.clone(),
            ]));
        }
        summary.push(format!("epsilon = {}: kappa_hat = {}, rho_hat = {rho}", num(eps), opt(rep.kappa_hat)));
    }
    let path = write(&opts.out, "perturbation.csv", &csv)?;
    summary.insert(0, format!("perturbation = {}", path.display()));
    Ok(summary)
}

/// Step-approximates a standalone measure; writes `nbv_atoms.csv` and
/// `nbv_metrics.csv`.
pub fn cmd_nbv_approx(cfg: &MeasureConfig, opts: &RunOptions) -> Result<Vec<String>, CliError> {
    let g = cfg.measure()?;
    let v = g.total_variation();
    let grid = opts.grid.unwrap_or(SUP_GRID);
    let mut atoms = String::from("k,t,mass_re,mass_im\n");
    let mut metrics = String::from("k,atoms,sup_err,variation,variation_g\n");
    for k in cfg.ks()? {
        let gk = nbv::step_approximate(&g, k)?;
        for at in gk.atoms() {
            atoms.push_str(&row(&[k.to_string(), num(at.t), num(at.mass.re), num(at.mass.im)]));
        }
        let sup = nbv::sup_distance(&g, &gk.to_nbv(), grid)?;
        metrics.push_str(&row(&[
            k.to_string(),
            gk.len().to_string(),
            num(sup),
            num(gk.total_variation()),
            num(v),
        ]));
    }
    let p1 = write(&opts.out, "nbv_atoms.csv", &atoms)?;
    let p2 = write(&opts.out, "nbv_metrics.csv", &metrics)?;
    Ok(vec![
        format!("atoms = {}", p1.display()),
        format!("metrics = {}", p2.display()),
    ])
}
