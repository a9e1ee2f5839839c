//! Normalized functions of bounded variation on `[a, b]` and their step-function
//! approximations.
//!
//! An [`NbvFunction`] is an absolutely continuous part, given by a piecewise
//! polynomial density, plus finitely many point masses. A [`StepFunction`] is the
//! pure point-mass case: the span of the indicators `1_(c, b]` and `1_{b}`.

mod piecewise;
pub mod quadrature;

use num_complex::Complex64;

pub use piecewise::PiecewisePolynomial;
pub use quadrature::QuadratureOptions;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Atoms closer than this are merged when step functions are recombined.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Default number of uniform samples used by [`sup_distance`].
pub const SUP_GRID: usize = 4096;

/// A point mass `mass` at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub mass: Complex64,
}

impl Atom {
    pub fn new(t: f64, mass: Complex64) -> Self {
        Self { t, mass }
    }
}

/// `g(t) = \int_a^t density + sum_{t_s < t} h_s`, with a mass at `b` counted only
/// at `t = b`. A mass at `a` is a Dirac measure at `a` and leaves `g(a) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NbvFunction {
    a: f64,
    b: f64,
    density: PiecewisePolynomial,
    cumulative: PiecewisePolynomial,
    jumps: Vec<Atom>,
}

impl NbvFunction {
    /// Jumps must lie in `[a, b]` at strictly increasing positions; zero jumps
    /// are discarded.
    pub fn new(density: PiecewisePolynomial, jumps: Vec<Atom>) -> Result<Self> {
        let (a, b) = density.domain();
        let jumps: Vec<Atom> = jumps.into_iter().filter(|j| j.mass != ZERO).collect();
        if jumps.iter().any(|j| !(a..=b).contains(&j.t)) {
            return Err(Error::InvalidInput(format!(
                "jump location outside [{a}, {b}]"
            )));
        }
        if jumps.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput(
                "jump locations must be strictly increasing".into(),
            ));
        }
        if jumps.iter().any(|j| !j.mass.re.is_finite() || !j.mass.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite jump".into()));
        }
        let cumulative = density.antiderivative();
        Ok(Self {
            a,
            b,
            density,
            cumulative,
            jumps,
        })
    }

    pub fn zero(a: f64, b: f64) -> Self {
        Self::from_density(PiecewisePolynomial::zero(a, b))
    }

    pub fn from_density(density: PiecewisePolynomial) -> Self {
        Self::new(density, Vec::new()).expect("no jumps to validate")
    }

    pub fn from_jumps(a: f64, b: f64, jumps: Vec<Atom>) -> Result<Self> {
        Self::new(PiecewisePolynomial::zero(a, b), jumps)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn density(&self) -> &PiecewisePolynomial {
        &self.density
    }

    pub fn jumps(&self) -> &[Atom] {
        &self.jumps
    }

    pub fn is_zero(&self) -> bool {
        self.jumps.is_empty() && self.density.is_zero()
    }

    pub fn has_density(&self) -> bool {
        !self.density.is_zero()
    }

    /// Real, with nonnegative density and positive jumps.
    pub fn is_increasing(&self) -> bool {
        self.density.is_real()
            && self.density.negative_part().is_zero()
            && self.jumps.iter().all(|j| j.mass.im == 0.0 && j.mass.re > 0.0)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        if t <= self.a {
            return ZERO;
        }
        let t = t.min(self.b);
        let mut v = self.cumulative.eval(t);
        for j in &self.jumps {
            if j.t < t || (t >= self.b && j.t >= self.b) {
                v += j.mass;
            }
        }
        v
    }

    /// `g(t+)`; at `b` this is `g(b)`.
    pub fn eval_right(&self, t: f64) -> Complex64 {
        if t >= self.b {
            return self.eval(self.b);
        }
        let t = t.max(self.a);
        let mut v = self.cumulative.eval(t);
        for j in &self.jumps {
            if j.t <= t {
                v += j.mass;
            }
        }
        v
    }

    /// `V(g, [a, b]) = \int |density| + sum |h_s|`.
    pub fn total_variation(&self) -> f64 {
        let jumps: f64 = self.jumps.iter().map(|j| j.mass.norm()).sum();
        let continuous = if self.density.is_zero() {
            0.0
        } else if self.density.is_real() {
            self.density.positive_part().integral().re + self.density.negative_part().integral().re
        } else {
            let bp = self.density.breakpoints();
            bp.windows(2)
                .map(|w| {
                    quadrature::integrate(
                        |t| Complex64::new(self.density.eval(t).norm(), 0.0),
                        w[0],
                        w[1],
                        QuadratureOptions {
                            max_subdivisions: 20_000,
                            ..QuadratureOptions::default()
                        },
                    )
                    .map(|z| z.re)
                    .unwrap_or_else(|_| midpoint_abs(&self.density, w[0], w[1]))
                })
                .sum()
        };
        continuous + jumps
    }

    /// The point masses as a step function, or `None` if there is a density.
    pub fn as_step_function(&self) -> Option<StepFunction> {
        if self.has_density() {
            return None;
        }
        Some(StepFunction {
            a: self.a,
            b: self.b,
            atoms: self.jumps.clone(),
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let jumps = self
            .jumps
            .iter()
            .map(|j| Atom::new(j.t, j.mass * factor))
            .collect();
        Self::new(self.density.scale(factor), jumps).expect("scaling preserves validity")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let density = self.density.add(&other.density)?;
        let atoms = merge_atoms(
            self.jumps.iter().chain(&other.jumps).copied().collect(),
            0.0,
        );
        Self::new(density, atoms)
    }
}

fn midpoint_abs(p: &PiecewisePolynomial, lo: f64, hi: f64) -> f64 {
    let n = 100_000;
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| p.eval(lo + (i as f64 + 0.5) * h).norm() * h).sum()
}

/// Finite combination of point masses at strictly increasing positions in
/// `[a, b]`. An atom at `c < b` stands for `mass * 1_(c, b]`, an atom at `b` for
/// `mass * 1_{b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    a: f64,
    b: f64,
    atoms: Vec<Atom>,
}

impl StepFunction {
    pub fn new(a: f64, b: f64, atoms: Vec<Atom>) -> Result<Self> {
        let g = NbvFunction::from_jumps(a, b, atoms)?;
        Ok(Self {
            a,
            b,
            atoms: g.jumps,
        })
    }

    pub fn empty(a: f64, b: f64) -> Self {
        Self {
            a,
            b,
            atoms: Vec::new(),
        }
    }

    /// Sorts atoms, merges those within `tol` of a cluster's first point and
    /// drops zero masses.
    pub fn from_unsorted(a: f64, b: f64, atoms: Vec<Atom>, tol: f64) -> Result<Self> {
        Self::new(a, b, merge_atoms(atoms, tol))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.atoms
            .iter()
            .filter(|at| at.t < t || (t >= self.b && at.t >= self.b))
            .map(|at| at.mass)
            .sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|at| at.mass.norm()).sum()
    }

    pub fn to_nbv(&self) -> NbvFunction {
        NbvFunction::from_jumps(self.a, self.b, self.atoms.clone())
            .expect("step function atoms are already validated")
    }

    /// `\int x dg = sum mass_j x(c_j)`.
    pub fn integrate<F>(&self, x: F) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        self.atoms.iter().map(|at| at.mass * x(at.t)).sum()
    }
}

fn merge_atoms(mut atoms: Vec<Atom>, tol: f64) -> Vec<Atom> {
    atoms.sort_by(|x, y| x.t.total_cmp(&y.t));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut anchor = f64::NEG_INFINITY;
    for at in atoms {
        match out.last_mut() {
            Some(last) if at.t - anchor <= tol => last.mass += at.mass,
            _ => {
                anchor = at.t;
                out.push(at);
            }
        }
    }
    out.retain(|at| at.mass != ZERO);
    out
}

/// Total variation of `g`.
pub fn total_variation(g: &NbvFunction) -> f64 {
    g.total_variation()
}

/// Splits `g = (p1 - p2) + i (p3 - p4)` into four increasing parts built from
/// the positive and negative parts of the real and imaginary densities and jumps.
pub fn jordan_split(g: &NbvFunction) -> [NbvFunction; 4] {
    let re = g.density.real_part();
    let im = g.density.imag_part();
    let densities = [
        re.positive_part(),
        re.negative_part(),
        im.positive_part(),
        im.negative_part(),
    ];
    let pick: [fn(Complex64) -> f64; 4] = [
        |h| h.re.max(0.0),
        |h| (-h.re).max(0.0),
        |h| h.im.max(0.0),
        |h| (-h.im).max(0.0),
    ];
    let mut parts = densities.into_iter().zip(pick).map(|(density, f)| {
        let jumps = g
            .jumps
            .iter()
            .map(|j| Atom::new(j.t, Complex64::new(f(j.mass), 0.0)))
            .collect();
        NbvFunction::new(density, jumps).expect("parts inherit valid jump positions")
    });
    [
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    ]
}

/// Separates the absolutely continuous part from the jump part.
pub fn continuous_jump_split(g: &NbvFunction) -> (NbvFunction, NbvFunction) {
    let cont = NbvFunction::from_density(g.density.clone());
    let jump = NbvFunction::from_jumps(g.a, g.b, g.jumps.clone())
        .expect("jumps were validated with g");
    (cont, jump)
}

fn check_quantile_input(g: &NbvFunction, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if !g.jumps.is_empty() {
        return Err(Error::InvalidInput(
            "quantile partition needs a continuous integrator".into(),
        ));
    }
    if !g.density.is_real() {
        return Err(Error::InvalidInput(
            "quantile partition needs a real increasing integrator".into(),
        ));
    }
    let total = g.eval(g.b).re;
    if !(total > 0.0) {
        return Err(Error::DegenerateIntegrator { a: g.a, b: g.b });
    }
    Ok(total)
}

/// `t_{k,s} = min { t : g(t) = s g(b) / (k + 1) }` for `s = 1..=k`.
///
/// Each point is located by bisection on the predicate `g(t) >= level`, so flat
/// stretches of `g` resolve to the left edge of the level set.
pub fn quantile_partition(g: &NbvFunction, k: usize) -> Result<Vec<f64>> {
    let total = check_quantile_input(g, k)?;
    // A few ulps of slack so that a plateau sitting exactly at a level is not
    // missed because of rounding in the antiderivative.
    let slack = 4.0 * f64::EPSILON * total;
    let mut out = Vec::with_capacity(k);
    let mut lo_start = g.a;
    for s in 1..=k {
        let level = s as f64 * total / (k as f64 + 1.0);
        let reached = |t: f64| g.cumulative.eval(t).re >= level - slack;
        let (mut lo, mut hi) = (lo_start, g.b);
        if reached(lo) {
            hi = lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 0.0 || mid <= lo || mid >= hi {
                break;
            }
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(hi);
        lo_start = hi;
    }
    Ok(out)
}

/// Equal masses `g(b) / (k + 1)` at the quantile points of `g`.
pub fn step_approximate_continuous(g: &NbvFunction, k: usize) -> Result<StepFunction> {
    let total = check_quantile_input(g, k)?;
    let mass = Complex64::new(total / (k as f64 + 1.0), 0.0);
    let atoms = quantile_partition(g, k)?
        .into_iter()
        .map(|t| Atom::new(t, mass))
        .collect();
    // Coincident quantiles (e.g. a density concentrated near one point) merge.
    StepFunction::from_unsorted(g.a, g.b, atoms, 0.0)
}

/// A jump function with finitely many jumps already lies in the step space, so
/// it is its own approximant for every `k`. Countable jump sets must be
/// truncated by the caller before reaching this point.
pub fn step_approximate_jump(g: &NbvFunction) -> StepFunction {
    StepFunction {
        a: g.a,
        b: g.b,
        atoms: g.jumps.clone(),
    }
}

/// Step approximant `g_k` of an arbitrary `g`: Jordan split, continuous/jump
/// split, quantile steps for the continuous parts, recombination with weights
/// `1, -1, i, -i`, and merging of coincident atoms.
pub fn step_approximate(g: &NbvFunction, k: usize) -> Result<StepFunction> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if !g.has_density() {
        return Ok(step_approximate_jump(g));
    }
    let weights = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), I, -I];
    let mut atoms = Vec::new();
    for (part, w) in jordan_split(g).iter().zip(weights) {
        let (cont, jump) = continuous_jump_split(part);
        let cont_atoms = match step_approximate_continuous(&cont, k) {
            Ok(s) => s.atoms,
            Err(Error::DegenerateIntegrator { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        atoms.extend(
            cont_atoms
                .into_iter()
                .chain(step_approximate_jump(&jump).atoms)
                .map(|at| Atom::new(at.t, at.mass * w)),
        );
    }
    StepFunction::from_unsorted(g.a, g.b, atoms, ATOM_MERGE_TOL)
}

/// `\int_a^b x(t) dg(t)` for a scalar integrand.
pub fn stieltjes_integral<F>(x: F, g: &NbvFunction) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    stieltjes_integral_vec(|t| vec![x(t)], 1, g, QuadratureOptions::default()).map(|v| v[0])
}

/// `\int_a^b x(t) dg(t)` for a row of `width` integrands sharing one integrator.
///
/// The density part is integrated piece by piece with adaptive Gauss-Kronrod;
/// point masses contribute `h_s x(t_s)`.
pub fn stieltjes_integral_vec<F>(
    x: F,
    width: usize,
    g: &NbvFunction,
    opts: QuadratureOptions,
) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let mut out = vec![ZERO; width];
    if g.has_density() {
        let bp = g.density.breakpoints();
        let pieces = g.density.pieces();
        for (i, w) in bp.windows(2).enumerate() {
            if pieces[i].iter().all(|c| *c == ZERO) {
                continue;
            }
            let part = quadrature::integrate_vec(
                |t| {
                    let rho = piecewise::horner(&pieces[i], t - w[0]);
                    x(t).into_iter().map(|v| v * rho).collect()
                },
                w[0],
                w[1],
                width,
                opts,
            )?;
            for (o, p) in out.iter_mut().zip(part) {
                *o += p;
            }
        }
    }
    for j in &g.jumps {
        let xv = x(j.t);
        if xv.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "integrand returned {} values, expected {width}",
                xv.len()
            )));
        }
        for (o, v) in out.iter_mut().zip(xv) {
            *o += j.mass * v;
        }
    }
    Ok(out)
}

/// `max |g1 - g2|` over `grid` uniform points plus every jump point of either
/// function, where both the value and the right limit are compared.
///
/// A lower bound on the true supremum.
pub fn sup_distance(g1: &NbvFunction, g2: &NbvFunction, grid: usize) -> Result<f64> {
    if g1.domain() != g2.domain() {
        return Err(Error::DimensionMismatch(format!(
            "functions on {:?} and {:?}",
            g1.domain(),
            g2.domain()
        )));
    }
    let (a, b) = g1.domain();
    let n = grid.max(2);
    let mut best: f64 = 0.0;
    for i in 0..n {
        let t = if i == n - 1 {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        };
        best = best.max((g1.eval(t) - g2.eval(t)).norm());
    }
    for j in g1.jumps.iter().chain(&g2.jumps) {
        best = best.max((g1.eval(j.t) - g2.eval(j.t)).norm());
        best = best.max((g1.eval_right(j.t) - g2.eval_right(j.t)).norm());
    }
    Ok(best)
}
