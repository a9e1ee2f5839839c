//! `L y = f`, `B y = q` by superposition of fundamental solutions.
//!
//! With fundamental columns `Y_i` and a particular solution `y_p`, every solution
//! of `L y = f` is `y = Y c + y_p`; the boundary condition becomes the square
//! system `M c = q - B y_p` with `M = [B Y_1 ... B Y_rm]`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::boundary::BoundaryOperator;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, LuDecomposition};
use crate::nbv::QuadratureOptions;
use crate::odecore::{fundamental_with_particular, IntegratorOptions, LinearOdeSystem, SolutionFunction};

/// Number of sample points for the ODE residual of a solved problem.
pub const RESIDUAL_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BVProblem {
    system: Arc<LinearOdeSystem>,
    boundary: BoundaryOperator,
    q: Vec<Complex64>,
}

impl BVProblem {
    pub fn new(system: Arc<LinearOdeSystem>, boundary: BoundaryOperator, q: Vec<Complex64>) -> Result<Self> {
        let (n, r, m) = boundary.dims();
        if (n, r, m) != (system.smoothness(), system.order(), system.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "boundary operator has (n, r, m) = ({n}, {r}, {m}), system has ({}, {}, {})",
                system.smoothness(),
                system.order(),
                system.dim()
            )));
        }
        if boundary.domain() != system.domain() {
            return Err(Error::DimensionMismatch(format!(
                "boundary operator on {:?}, system on {:?}",
                boundary.domain(),
                system.domain()
            )));
        }
        if q.len() != r * m {
            return Err(Error::DimensionMismatch(format!(
                "q has length {}, expected r*m = {}",
                q.len(),
                r * m
            )));
        }
        Ok(Self { system, boundary, q })
    }

    pub fn system(&self) -> &Arc<LinearOdeSystem> {
        &self.system
    }

    pub fn boundary(&self) -> &BoundaryOperator {
        &self.boundary
    }

    pub fn q(&self) -> &[Complex64] {
        &self.q
    }

    pub fn with_q(&self, q: Vec<Complex64>) -> Result<Self> {
        Self::new(Arc::clone(&self.system), self.boundary.clone(), q)
    }

    pub fn with_system(&self, system: Arc<LinearOdeSystem>) -> Result<Self> {
        Self::new(system, self.boundary.clone(), self.q.clone())
    }

    pub fn with_boundary(&self, boundary: BoundaryOperator) -> Result<Self> {
        Self::new(Arc::clone(&self.system), boundary, self.q.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub integrator: IntegratorOptions,
    pub quadrature: QuadratureOptions,
    /// Condition estimates above this count as singular.
    pub singular_threshold: f64,
}

impl SolveOptions {
    /// Threshold `1 / (100 max(eps, rtol))`: columns of `M` are only known to
    /// the integrator tolerance, so a resonant problem produces a condition
    /// number near `1 / rtol`, far below `1 / eps`.
    pub fn default_threshold(integrator: &IntegratorOptions) -> f64 {
        1.0 / (100.0 * f64::EPSILON.max(integrator.rtol))
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        let integrator = IntegratorOptions::default();
        Self {
            integrator,
            quadrature: QuadratureOptions::default(),
            singular_threshold: Self::default_threshold(&integrator),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BVPSolveRecord {
    pub solution: SolutionFunction,
    /// 1-norm condition number of `M`.
    pub condition: f64,
    /// Largest ODE residual over [`RESIDUAL_SAMPLES`] points.
    pub ode_residual: f64,
    /// `|B y - q|` (Euclidean).
    pub boundary_residual: f64,
}

struct Assembled {
    basis: SolutionFunction,
    images: CMatrix,
    lu: LuDecomposition,
    condition: f64,
}

fn assemble(p: &BVProblem, opts: &SolveOptions) -> Result<Assembled> {
    let basis = fundamental_with_particular(&p.system, &opts.integrator)?;
    let images = p.boundary.apply(&basis, opts.quadrature)?;
    let rm = p.system.state_dim();
    let m = CMatrix::from_fn(rm, rm, |i, j| images[(i, j)]);
    let lu = LuDecomposition::factor(&m)?;
    let condition = lu.condition_one();
    Ok(Assembled {
        basis,
        images,
        lu,
        condition,
    })
}

fn is_singular(asm: &Assembled, opts: &SolveOptions) -> bool {
    asm.lu.is_singular() || !asm.condition.is_finite() || asm.condition > opts.singular_threshold
}

/// Points in `[a, b]` from the golden-ratio sequence, endpoints included.
fn sample_points(a: f64, b: f64, count: usize) -> impl Iterator<Item = f64> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    (0..count).map(move |i| match i {
        0 => a,
        1 => b,
        _ => a + (b - a) * (i as f64 * PHI).fract(),
    })
}

pub fn solve_bvp(p: &BVProblem) -> Result<BVPSolveRecord> {
    solve_bvp_with(p, &SolveOptions::default())
}

pub fn solve_bvp_with(p: &BVProblem, opts: &SolveOptions) -> Result<BVPSolveRecord> {
    let asm = assemble(p, opts)?;
    if is_singular(&asm, opts) {
        return Err(Error::NotUniquelySolvable {
            condition: asm.condition,
        });
    }
    let rm = p.system.state_dim();
    let rhs: Vec<Complex64> = (0..rm).map(|i| p.q[i] - asm.images[(i, rm)]).collect();
    let c = asm.lu.solve(&rhs)?;
    let mut coeffs = c;
    coeffs.push(Complex64::new(1.0, 0.0));
    let solution = asm.basis.combine(&CMatrix::column(&coeffs))?;

    let by = p.boundary.apply(&solution, opts.quadrature)?;
    let boundary_residual = (0..rm)
        .map(|i| (by[(i, 0)] - p.q[i]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let (a, b) = p.system.domain();
    let mut ode_residual: f64 = 0.0;
    for t in sample_points(a, b, RESIDUAL_SAMPLES) {
        ode_residual = ode_residual.max(solution.residual_at(t)?);
    }
    Ok(BVPSolveRecord {
        solution,
        condition: asm.condition,
        ode_residual,
        boundary_residual,
    })
}

/// True iff `M` is numerically nonsingular, i.e. the homogeneous problem has
/// only the zero solution. Agrees with [`solve_bvp_with`] under the same options.
pub fn homogeneous_kernel_check(p: &BVProblem, opts: &SolveOptions) -> Result<bool> {
    let asm = assemble(p, opts)?;
    Ok(!is_singular(&asm, opts))
}
