//! Linear ODE systems `y^(r) + sum_{i<r} A_i(t) y^(i) = f(t)` on `[a, b]`,
//! their fundamental matrices and particular solutions.
//!
//! Integration runs on the first-order companion form of the state
//! `u = (y, y', ..., y^(r-1))` with an adaptive Dormand-Prince 5(4) pair. Dense
//! output is a quintic Hermite interpolant built from `u`, `u'` and `u''` at
//! every accepted step; all three are exact functions of the state because the
//! system is linear with piecewise-polynomial data.

mod integrator;
mod solution;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::nbv::PiecewisePolynomial;

pub use integrator::IntegratorOptions;
pub use solution::{cn_distance, cn_distance_to, cn_norm, cn_norm_with, SolutionFunction, CN_GRID};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance for the continuity check on coefficient data.
const CONTINUITY_TOL: f64 = 1e-9;

/// An `m x m` matrix of piecewise polynomials, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    dim: usize,
    entries: Vec<PiecewisePolynomial>,
}

impl PolyMatrix {
    pub fn new(dim: usize, entries: Vec<PiecewisePolynomial>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{dim}x{dim} coefficient matrix needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize, a: f64, b: f64) -> Self {
        Self {
            dim,
            entries: vec![PiecewisePolynomial::zero(a, b); dim * dim],
        }
    }

    /// Constant matrix.
    pub fn constant(a: f64, b: f64, values: &CMatrix) -> Self {
        let dim = values.nrows();
        let entries = values
            .as_slice()
            .iter()
            .map(|&v| PiecewisePolynomial::constant(a, b, v))
            .collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &PiecewisePolynomial {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[PiecewisePolynomial] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    pub fn map(&self, f: impl Fn(&PiecewisePolynomial) -> PiecewisePolynomial) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

/// `y^(r) + sum_{i=0}^{r-1} A_i(t) y^(i) = f(t)`, with solutions sought in
/// `C^(n)`. `coefficients[i]` multiplies `y^(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOdeSystem {
    a: f64,
    b: f64,
    order: usize,
    dim: usize,
    smoothness: usize,
    coefficients: Vec<PolyMatrix>,
    forcing: Vec<PiecewisePolynomial>,
    breakpoints: Vec<f64>,
}

impl LinearOdeSystem {
    pub fn new(
        order: usize,
        smoothness: usize,
        coefficients: Vec<PolyMatrix>,
        forcing: Vec<PiecewisePolynomial>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidInput("order r must be at least 1".into()));
        }
        if smoothness < order {
            return Err(Error::InvalidInput(format!(
                "smoothness n = {smoothness} must be at least the order r = {order}"
            )));
        }
        if coefficients.len() != order {
            return Err(Error::DimensionMismatch(format!(
                "order {order} needs {order} coefficient matrices, got {}",
                coefficients.len()
            )));
        }
        let dim = forcing.len();
        if dim == 0 {
            return Err(Error::InvalidInput("system dimension m must be at least 1".into()));
        }
        let (a, b) = forcing[0].domain();
        if !(a < b) {
            return Err(Error::InvalidInput(format!("interval [{a}, {b}] is empty")));
        }
        if let Some(c) = coefficients.iter().find(|c| c.dim != dim) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix is {0}x{0}, system dimension is {dim}",
                c.dim
            )));
        }
        let mut breakpoints = Vec::new();
        for p in coefficients.iter().flat_map(|c| &c.entries).chain(&forcing) {
            if p.domain() != (a, b) {
                return Err(Error::DimensionMismatch(format!(
                    "data on {:?} but the system lives on [{a}, {b}]",
                    p.domain()
                )));
            }
            p.check_continuity(smoothness - order, CONTINUITY_TOL)?;
            breakpoints.extend_from_slice(p.breakpoints());
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Self {
            a,
            b,
            order,
            dim,
            smoothness,
            coefficients,
            forcing,
            breakpoints,
        })
    }

    /// `y^(r) = f` with all coefficients zero.
    pub fn pure_derivative(order: usize, smoothness: usize, forcing: Vec<PiecewisePolynomial>) -> Result<Self> {
        let dim = forcing.len();
        let (a, b) = forcing
            .first()
            .map(|p| p.domain())
            .ok_or_else(|| Error::InvalidInput("system dimension m must be at least 1".into()))?;
        let coefficients = (0..order).map(|_| PolyMatrix::zeros(dim, a, b)).collect();
        Self::new(order, smoothness, coefficients, forcing)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    /// Size `rm` of the companion state.
    pub fn state_dim(&self) -> usize {
        self.order * self.dim
    }

    pub fn coefficients(&self) -> &[PolyMatrix] {
        &self.coefficients
    }

    pub fn forcing(&self) -> &[PiecewisePolynomial] {
        &self.forcing
    }

    /// Union of the breakpoints of all coefficient and forcing data.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Same coefficients, new right-hand side.
    pub fn with_forcing(&self, forcing: Vec<PiecewisePolynomial>) -> Result<Self> {
        Self::new(self.order, self.smoothness, self.coefficients.clone(), forcing)
    }

    /// Same right-hand side, new coefficients.
    pub fn with_coefficients(&self, coefficients: Vec<PolyMatrix>) -> Result<Self> {
        Self::new(self.order, self.smoothness, coefficients, self.forcing.clone())
    }

    /// `A_i^(s)(t)` for `i < r`, `s <= max_order`, indexed `[i][s]`.
    pub(crate) fn coefficient_jet(&self, t: f64, max_order: usize, left: bool) -> Vec<Vec<CMatrix>> {
        self.coefficients
            .iter()
            .map(|c| {
                let jets: Vec<Vec<Complex64>> = c
                    .entries
                    .iter()
                    .map(|p| p.eval_jet_side(t, max_order, left))
                    .collect();
                (0..=max_order)
                    .map(|s| CMatrix::from_fn(self.dim, self.dim, |i, j| jets[i * self.dim + j][s]))
                    .collect()
            })
            .collect()
    }

    /// `f^(s)(t)` for `s <= max_order`, indexed `[s][component]`.
    pub(crate) fn forcing_jet(&self, t: f64, max_order: usize, left: bool) -> Vec<Vec<Complex64>> {
        let jets: Vec<Vec<Complex64>> = self
            .forcing
            .iter()
            .map(|p| p.eval_jet_side(t, max_order, left))
            .collect();
        (0..=max_order)
            .map(|s| jets.iter().map(|j| j[s]).collect())
            .collect()
    }

    /// Companion right-hand side `U' = A~ U + e_r f w^T` and, when `second` is
    /// set, the time derivative `U'' = A~' U + A~ U' + e_r f' w^T`.
    pub(crate) fn companion_rhs(
        &self,
        t: f64,
        left: bool,
        u: &CMatrix,
        weights: &[Complex64],
        second: bool,
    ) -> (CMatrix, Option<CMatrix>) {
        let m = self.dim;
        let r = self.order;
        let w = u.ncols();
        let order = usize::from(second);
        let a_jet = self.coefficient_jet(t, order, left);
        let f_jet = self.forcing_jet(t, order, left);

        let build = |u: &CMatrix, du: Option<&CMatrix>, level: usize| {
            // level 0: A~ u + F; level 1: A~' u + A~ du + F'
            let mut out = CMatrix::zeros(r * m, w);
            let src = if level == 0 { u } else { du.unwrap() };
            for blk in 0..r - 1 {
                for i in 0..m {
                    for c in 0..w {
                        out[(blk * m + i, c)] = src[((blk + 1) * m + i, c)];
                    }
                }
            }
            let last = (r - 1) * m;
            for i in 0..m {
                for c in 0..w {
                    let mut acc = f_jet[level][i] * weights[c];
                    for (blk, jet) in a_jet.iter().enumerate() {
                        for j in 0..m {
                            if level == 0 {
                                acc -= jet[0][(i, j)] * u[(blk * m + j, c)];
                            } else {
                                acc -= jet[1][(i, j)] * u[(blk * m + j, c)]
                                    + jet[0][(i, j)] * src[(blk * m + j, c)];
                            }
                        }
                    }
                    out[(last + i, c)] = acc;
                }
            }
            out
        };

        let first = build(u, None, 0);
        let second = second.then(|| build(u, Some(&first), 1));
        (first, second)
    }
}

/// Fundamental matrix `U' = A~ U`, `U(a) = I` of the companion system.
pub fn fundamental_matrix(sys: &Arc<LinearOdeSystem>, opts: &IntegratorOptions) -> Result<SolutionFunction> {
    let dim = sys.state_dim();
    integrator::integrate(sys, CMatrix::identity(dim), vec![ZERO; dim], opts)
}

/// Solution of the forced system with zero initial state.
pub fn particular_solution(sys: &Arc<LinearOdeSystem>, opts: &IntegratorOptions) -> Result<SolutionFunction> {
    integrator::integrate(sys, CMatrix::zeros(sys.state_dim(), 1), vec![ONE], opts)
}

/// Fundamental columns followed by the particular solution, on one shared mesh.
pub fn fundamental_with_particular(
    sys: &Arc<LinearOdeSystem>,
    opts: &IntegratorOptions,
) -> Result<SolutionFunction> {
    let dim = sys.state_dim();
    let mut init = CMatrix::zeros(dim, dim + 1);
    for i in 0..dim {
        init[(i, i)] = ONE;
    }
    let mut weights = vec![ZERO; dim + 1];
    weights[dim] = ONE;
    integrator::integrate(sys, init, weights, opts)
}

/// Solution of the initial-value problem `u(a) = init` for the forced system.
pub fn initial_value_solution(
    sys: &Arc<LinearOdeSystem>,
    init: &[Complex64],
    opts: &IntegratorOptions,
) -> Result<SolutionFunction> {
    if init.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            init.len(),
            sys.state_dim()
        )));
    }
    integrator::integrate(sys, CMatrix::column(init), vec![ONE], opts)
}

/// Derivatives `y^(0..=lmax)(t)`, each an `m x w` matrix.
pub fn derivative_jet(sol: &SolutionFunction, t: f64, lmax: usize) -> Result<Vec<CMatrix>> {
    sol.jet(t, lmax)
}

#[cfg(test)]
mod tests;
