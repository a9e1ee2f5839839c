//! Approximation of a problem with a general boundary operator by a sequence of
//! multipoint problems, and the perturbation experiment on that sequence.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::boundary::{boundary_discrepancy, discretize_boundary, BoundaryOperator, GeneralBoundaryOperator};
use crate::bvpsolve::{solve_bvp_with, BVPSolveRecord, BVProblem, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, LuDecomposition};
use crate::nbv::{PiecewisePolynomial, SUP_GRID};
use crate::odecore::{cn_distance, LinearOdeSystem, PolyMatrix, SolutionFunction, CN_GRID};

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationSchedule {
    ks: Vec<usize>,
    /// Replace each `A_i` by its piecewise Hermite interpolant on `k` pieces.
    pub coefficient_approximation: bool,
    /// Uniform samples for C^(n) norms.
    pub grid: usize,
    pub solve: SolveOptions,
}

impl ApproximationSchedule {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one k".into()));
        }
        if ks[0] == 0 || ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "schedule values must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            ks,
            coefficient_approximation: false,
            grid: CN_GRID,
            solve: SolveOptions::default(),
        })
    }

    /// `1, 2, 4, ..., 2^(count-1)`.
    pub fn doubling(count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| 1usize << i).collect())
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }
}

fn general_operator(p: &BVProblem) -> Result<&GeneralBoundaryOperator> {
    match p.boundary() {
        BoundaryOperator::General(b) => Ok(b),
        BoundaryOperator::Multipoint(_) => Err(Error::InvalidInput(
            "approximation needs a problem with a general boundary operator".into(),
        )),
    }
}

/// Piecewise Hermite interpolant of degree `2d + 1` on `pieces` uniform pieces,
/// matching derivatives through order `d` at every knot; it is `C^(d)` and
/// converges to `p` in `C^(d)` as the number of pieces grows.
pub fn hermite_approximant(p: &PiecewisePolynomial, d: usize, pieces: usize) -> Result<PiecewisePolynomial> {
    let (a, b) = p.domain();
    let pieces = pieces.max(1);
    let knots: Vec<f64> = (0..=pieces)
        .map(|i| if i == pieces { b } else { a + (b - a) * i as f64 / pieces as f64 })
        .collect();
    let jets: Vec<Vec<Complex64>> = knots.iter().map(|&t| p.eval_jet(t, d)).collect();
    let mut fact = vec![1.0; 2 * d + 2];
    for i in 1..fact.len() {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut out = Vec::with_capacity(pieces);
    for i in 0..pieces {
        let h = knots[i + 1] - knots[i];
        let mut coeffs: Vec<Complex64> = (0..=d).map(|j| jets[i][j] / fact[j]).collect();
        // Remaining d + 1 coefficients from the right-end conditions.
        let sys = CMatrix::from_fn(d + 1, d + 1, |row, col| {
            let k = d + 1 + col;
            Complex64::new(fact[k] / fact[k - row] * h.powi((k - row) as i32), 0.0)
        });
        let rhs: Vec<Complex64> = (0..=d)
            .map(|row| {
                let known: Complex64 = (row..=d)
                    .map(|k| coeffs[k] * (fact[k] / fact[k - row] * h.powi((k - row) as i32)))
                    .sum();
                jets[i + 1][row] - known
            })
            .collect();
        coeffs.extend(LuDecomposition::factor(&sys)?.solve(&rhs)?);
        out.push(coeffs);
    }
    PiecewisePolynomial::new(knots, out)
}

fn approximate_system(sys: &LinearOdeSystem, k: usize) -> Result<LinearOdeSystem> {
    let d = sys.smoothness() - sys.order();
    let coefficients = sys
        .coefficients()
        .iter()
        .map(|c| {
            let entries = c
                .entries()
                .iter()
                .map(|p| hermite_approximant(p, d, k))
                .collect::<Result<Vec<_>>>()?;
            PolyMatrix::new(c.dim(), entries)
        })
        .collect::<Result<Vec<_>>>()?;
    sys.with_coefficients(coefficients)
}

/// The multipoint problems `(L_k, B_k)` for every scheduled `k`; `f` and `q`
/// are copied unchanged and play no role in the construction.
pub fn build_sequence(p: &BVProblem, sched: &ApproximationSchedule) -> Result<Vec<BVProblem>> {
    let b = general_operator(p)?;
    sched
        .ks
        .iter()
        .map(|&k| {
            let bk = discretize_boundary(b, k)?;
            let system = if sched.coefficient_approximation {
                Arc::new(approximate_system(p.system(), k)?)
            } else {
                Arc::clone(p.system())
            };
            BVProblem::new(system, BoundaryOperator::Multipoint(bk), p.q().to_vec())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Solved,
    NotUniquelySolvable,
    Failed(String),
}

impl SolveStatus {
    pub fn label(&self) -> &str {
        match self {
            Self::Solved => "solved",
            Self::NotUniquelySolvable => "not_uniquely_solvable",
            Self::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub k: usize,
    /// `p_k`, the number of multipoint nodes.
    pub node_count: usize,
    pub status: SolveStatus,
    /// `|y_k - y|_(n)`, only for solved `k`.
    pub err: Option<f64>,
    /// `|B_k y - B y|` at the reference solution.
    pub discrepancy: f64,
    pub condition: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub reference: BVPSolveRecord,
    pub records: Vec<ConvergenceRecord>,
}

fn classify(res: &Result<BVPSolveRecord>) -> (SolveStatus, Option<f64>) {
    match res {
        Ok(rec) => (SolveStatus::Solved, Some(rec.condition)),
        Err(Error::NotUniquelySolvable { condition }) => (SolveStatus::NotUniquelySolvable, Some(*condition)),
        Err(e) => (SolveStatus::Failed(e.to_string()), None),
    }
}

fn node_count(p: &BVProblem) -> usize {
    match p.boundary() {
        BoundaryOperator::Multipoint(b) => b.node_count(),
        BoundaryOperator::General(_) => 0,
    }
}

fn solve_reference(p: &BVProblem, sched: &ApproximationSchedule) -> Result<BVPSolveRecord> {
    solve_bvp_with(p, &sched.solve).map_err(|e| Error::ReferenceUnsolvable(Box::new(e)))
}

pub fn approximate(p: &BVProblem, sched: &ApproximationSchedule) -> Result<ConvergenceReport> {
    let b = general_operator(p)?;
    let reference = solve_reference(p, sched)?;
    let sequence = build_sequence(p, sched)?;
    let n = p.system().smoothness();
    let records = sequence
        .par_iter()
        .zip(&sched.ks)
        .map(|(pk, &k)| {
            let res = solve_bvp_with(pk, &sched.solve);
            let (status, condition) = classify(&res);
            let err = match &res {
                Ok(rec) => Some(cn_distance(&rec.solution, &reference.solution, n, sched.grid)?),
                Err(_) => None,
            };
            let discrepancy = match pk.boundary() {
                BoundaryOperator::Multipoint(bk) => boundary_discrepancy(b, bk, &reference.solution)?,
                BoundaryOperator::General(_) => 0.0,
            };
            Ok(ConvergenceRecord {
                k,
                node_count: node_count(pk),
                status,
                err,
                discrepancy,
                condition,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport { reference, records })
}

/// Perturbed right-hand sides `(f_k, q_k)` used for every scheduled `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub forcing: Vec<PiecewisePolynomial>,
    pub q: Vec<Complex64>,
}

impl Perturbation {
    /// `f + (eps/2) u` and `q + (eps/2) e`, where every component of `u` is the
    /// constant `1/m` (unit `C^(n-r)` norm) and `e = (1, ..., 1) / sqrt(rm)`.
    pub fn default_for(p: &BVProblem, eps: f64) -> Result<Self> {
        let sys = p.system();
        let (a, b) = sys.domain();
        let m = sys.dim();
        let shift = PiecewisePolynomial::constant(a, b, Complex64::new(0.5 * eps / m as f64, 0.0));
        let forcing = sys
            .forcing()
            .iter()
            .map(|f| f.add(&shift))
            .collect::<Result<Vec<_>>>()?;
        let e = 0.5 * eps / (p.q().len() as f64).sqrt();
        let q = p.q().iter().map(|z| z + e).collect();
        Ok(Self { forcing, q })
    }
}

/// `|f - g|_(order)` on a uniform grid plus all breakpoints.
pub fn forcing_distance(f: &[PiecewisePolynomial], g: &[PiecewisePolynomial], order: usize) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch(format!(
            "forcing has {} components, perturbation has {}",
            f.len(),
            g.len()
        )));
    }
    let diff = f
        .iter()
        .zip(g)
        .map(|(x, y)| x.sub(y))
        .collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for d in &diff {
        let (a, b) = d.domain();
        let mut maxima = vec![0.0f64; order + 1];
        let mut visit = |t: f64, left: bool| {
            for (mx, v) in maxima.iter_mut().zip(d.eval_jet_side(t, order, left)) {
                *mx = mx.max(v.norm());
            }
        };
        for i in 0..=SUP_GRID {
            visit(a + (b - a) * i as f64 / SUP_GRID as f64, false);
        }
        for &t in d.breakpoints() {
            visit(t, false);
            visit(t, true);
        }
        total += maxima.iter().sum::<f64>();
    }
    Ok(total)
}

fn euclidean_distance(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRecord {
    pub k: usize,
    pub status: SolveStatus,
    /// `|y - y^_k|_(n)`.
    pub err: Option<f64>,
    /// Unperturbed `|y - y_k|_(n)`.
    pub err_unperturbed: Option<f64>,
    /// `err / eps`, or the raw `err` when `eps = 0`.
    pub ratio: Option<f64>,
    /// `(err - err_unperturbed) / eps`.
    pub offset_ratio: Option<f64>,
    /// `|y^_k - y_k|_(n) / eps`.
    pub shift_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub epsilon: f64,
    /// `|f - f_k|_(n-r)`.
    pub forcing_distance: f64,
    /// `|q - q_k|`.
    pub q_distance: f64,
    pub records: Vec<PerturbationRecord>,
    /// Empirical estimate of the stability constant: the largest ratio over
    /// `k >= rho_hat`.
    pub kappa_hat: Option<f64>,
    /// Empirical threshold index: the first scheduled `k` from which every
    /// perturbed solve succeeds.
    pub rho_hat: Option<usize>,
}

/// Solves the multipoint sequence with perturbed right-hand sides and compares
/// against the unperturbed original solution.
pub fn perturb_experiment(
    p: &BVProblem,
    sched: &ApproximationSchedule,
    eps: f64,
    perturbation: Option<&Perturbation>,
) -> Result<PerturbationReport> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be finite and nonnegative, got {eps}")));
    }
    let generated;
    let pert = match perturbation {
        Some(pert) => pert,
        None => {
            generated = Perturbation::default_for(p, eps)?;
            &generated
        }
    };
    let sys = p.system();
    let f_dist = forcing_distance(sys.forcing(), &pert.forcing, sys.smoothness() - sys.order())?;
    if pert.q.len() != p.q().len() {
        return Err(Error::DimensionMismatch(format!(
            "perturbed q has length {}, expected {}",
            pert.q.len(),
            p.q().len()
        )));
    }
    let q_dist = euclidean_distance(p.q(), &pert.q);
    let within = |d: f64| d < eps || (eps == 0.0 && d == 0.0);
    if !within(f_dist) {
        return Err(Error::PerturbationTooLarge {
            epsilon: eps,
            which: "forcing",
            distance: f_dist,
        });
    }
    if !within(q_dist) {
        return Err(Error::PerturbationTooLarge {
            epsilon: eps,
            which: "q",
            distance: q_dist,
        });
    }

    general_operator(p)?;
    let reference = solve_reference(p, sched)?;
    let sequence = build_sequence(p, sched)?;
    let n = sys.smoothness();
    let records = sequence
        .par_iter()
        .zip(&sched.ks)
        .map(|(pk, &k)| {
            let perturbed_sys = Arc::new(pk.system().with_forcing(pert.forcing.clone())?);
            let perturbed = BVProblem::new(perturbed_sys, pk.boundary().clone(), pert.q.clone())?;
            let res = solve_bvp_with(&perturbed, &sched.solve);
            let (status, _) = classify(&res);
            let Ok(rec) = res else {
                return Ok(PerturbationRecord {
                    k,
                    status,
                    err: None,
                    err_unperturbed: None,
                    ratio: None,
                    offset_ratio: None,
                    shift_ratio: None,
                });
            };
            let err = cn_distance(&rec.solution, &reference.solution, n, sched.grid)?;
            let unperturbed: Option<SolutionFunction> = solve_bvp_with(pk, &sched.solve).ok().map(|r| r.solution);
            let err_unperturbed = unperturbed
                .as_ref()
                .map(|y| cn_distance(y, &reference.solution, n, sched.grid))
                .transpose()?;
            let shift = unperturbed
                .as_ref()
                .map(|y| cn_distance(&rec.solution, y, n, sched.grid))
                .transpose()?;
            let (ratio, offset_ratio, shift_ratio) = if eps > 0.0 {
                (
                    Some(err / eps),
                    err_unperturbed.map(|e0| (err - e0) / eps),
                    shift.map(|s| s / eps),
                )
            } else {
                (Some(err), None, None)
            };
            Ok(PerturbationRecord {
                k,
                status,
                err: Some(err),
                err_unperturbed,
                ratio,
                offset_ratio,
                shift_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rho_idx = records
        .iter()
        .rposition(|r| r.status != SolveStatus::Solved)
        .map_or(Some(0), |i| (i + 1 < records.len()).then_some(i + 1));
    let rho_hat = rho_idx.map(|i| records[i].k);
    let kappa_hat = rho_idx.and_then(|i| {
        records[i..]
            .iter()
            .filter_map(|r| r.ratio)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |y| y.max(x))))
    });
    Ok(PerturbationReport {
        epsilon: eps,
        forcing_distance: f_dist,
        q_distance: q_dist,
        records,
        kappa_hat,
        rho_hat,
    })
}
