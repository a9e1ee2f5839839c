//! General boundary operators `B : (C^(n))^m -> C^(rm)` and their multipoint
//! discretizations.
//!
//! A [`GeneralBoundaryOperator`] is stored in the canonical form
//! `B y = sum_{l<n} alpha_l y^(l)(a) + \int_a^b dG(t) y^(n)(t)`. Replacing each
//! entry of `G` by a step function gives a [`MultipointBoundaryOperator`]
//! `B_k y = sum_j sum_{l<=n} beta^{j,l} y^(l)(t_j)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::nbv::{self, Atom, NbvFunction, PiecewisePolynomial, QuadratureOptions};
use crate::odecore::SolutionFunction;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nodes closer than this are identified when atom positions are unioned.
pub const NODE_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralBoundaryOperator {
    a: f64,
    b: f64,
    n: usize,
    r: usize,
    m: usize,
    alphas: Vec<CMatrix>,
    g: Vec<NbvFunction>,
}

/// One component's share of a canonical boundary row: point coefficients at
/// `a` for levels `0..n` and an integrator against `y^(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTerm {
    pub alphas: Vec<Complex64>,
    pub integrator: NbvFunction,
}

impl GeneralBoundaryOperator {
    /// `alphas[l]` is `rm x m` for `l < n`; `g` holds the `rm x m` integrator
    /// entries row-major.
    pub fn new(n: usize, r: usize, m: usize, alphas: Vec<CMatrix>, g: Vec<NbvFunction>) -> Result<Self> {
        if r == 0 || m == 0 || n < r {
            return Err(Error::InvalidInput(format!(
                "need n >= r >= 1 and m >= 1, got n = {n}, r = {r}, m = {m}"
            )));
        }
        let rows = r * m;
        if alphas.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} alpha matrices, got {}",
                alphas.len()
            )));
        }
        if let Some(al) = alphas.iter().find(|al| al.nrows() != rows || al.ncols() != m) {
            return Err(Error::DimensionMismatch(format!(
                "alpha matrix is {}x{}, expected {rows}x{m}",
                al.nrows(),
                al.ncols()
            )));
        }
        if g.len() != rows * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} integrator entries, got {}",
                rows * m,
                g.len()
            )));
        }
        let (a, b) = g[0].domain();
        if g.iter().any(|e| e.domain() != (a, b)) {
            return Err(Error::DimensionMismatch(
                "integrator entries live on different intervals".into(),
            ));
        }
        Ok(Self {
            a,
            b,
            n,
            r,
            m,
            alphas,
            g,
        })
    }

    /// Assembles an operator from per-row lists of `(component, term)` pairs;
    /// terms landing on the same entry are summed.
    pub fn from_terms(
        n: usize,
        r: usize,
        m: usize,
        (a, b): (f64, f64),
        rows: &[Vec<(usize, CanonicalTerm)>],
    ) -> Result<Self> {
        let nrows = r * m;
        if rows.len() != nrows {
            return Err(Error::DimensionMismatch(format!(
                "boundary operator needs r*m = {nrows} rows, got {}",
                rows.len()
            )));
        }
        let mut alphas = vec![CMatrix::zeros(nrows, m); n];
        let mut g = vec![NbvFunction::zero(a, b); nrows * m];
        for (lambda, row) in rows.iter().enumerate() {
            for (mu, term) in row {
                let mu = *mu;
                if mu >= m {
                    return Err(Error::DimensionMismatch(format!(
                        "row {lambda} refers to component {mu}, system has {m}"
                    )));
                }
                if term.alphas.len() > n {
                    return Err(Error::DimensionMismatch(format!(
                        "row {lambda} has {} point levels, only {n} allowed",
                        term.alphas.len()
                    )));
                }
                for (l, c) in term.alphas.iter().enumerate() {
                    alphas[l][(lambda, mu)] += c;
                }
                let slot = &mut g[lambda * m + mu];
                *slot = slot.add(&term.integrator)?;
            }
        }
        Self::new(n, r, m, alphas, g)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.r * self.m
    }

    pub fn alphas(&self) -> &[CMatrix] {
        &self.alphas
    }

    pub fn integrator(&self, lambda: usize, mu: usize) -> &NbvFunction {
        &self.g[lambda * self.m + mu]
    }

    pub fn integrators(&self) -> &[NbvFunction] {
        &self.g
    }

    /// True when every integrator entry is already a step function.
    pub fn is_multipoint(&self) -> bool {
        self.g.iter().all(|e| !e.has_density())
    }
}

/// `B_k y = sum_j sum_{l<=n} beta^{j,l} y^(l)(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipointBoundaryOperator {
    a: f64,
    b: f64,
    n: usize,
    r: usize,
    m: usize,
    nodes: Vec<f64>,
    betas: Vec<Vec<CMatrix>>,
}

impl MultipointBoundaryOperator {
    /// `betas[j][l]` is the `rm x m` coefficient of `y^(l)(nodes[j])`, `l <= n`.
    pub fn new(
        n: usize,
        r: usize,
        m: usize,
        (a, b): (f64, f64),
        nodes: Vec<f64>,
        betas: Vec<Vec<CMatrix>>,
    ) -> Result<Self> {
        if r == 0 || m == 0 || n < r {
            return Err(Error::InvalidInput(format!(
                "need n >= r >= 1 and m >= 1, got n = {n}, r = {r}, m = {m}"
            )));
        }
        if nodes.len() != betas.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodes but {} coefficient groups",
                nodes.len(),
                betas.len()
            )));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("nodes must be strictly increasing".into()));
        }
        if nodes.iter().any(|t| !(a..=b).contains(t)) {
            return Err(Error::InvalidInput(format!("node outside [{a}, {b}]")));
        }
        for group in &betas {
            if group.len() != n + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "each node needs {} coefficient matrices, got {}",
                    n + 1,
                    group.len()
                )));
            }
            if group.iter().any(|bm| bm.nrows() != r * m || bm.ncols() != m) {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient matrices must be {}x{m}",
                    r * m
                )));
            }
        }
        Ok(Self {
            a,
            b,
            n,
            r,
            m,
            nodes,
            betas,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.r * self.m
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `p_k`, the number of nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn beta(&self, node: usize, level: usize) -> &CMatrix {
        &self.betas[node][level]
    }
}

/// Either kind of boundary operator.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryOperator {
    General(GeneralBoundaryOperator),
    Multipoint(MultipointBoundaryOperator),
}

impl BoundaryOperator {
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            Self::General(b) => (b.n, b.r, b.m),
            Self::Multipoint(b) => (b.n, b.r, b.m),
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::General(b) => b.domain(),
            Self::Multipoint(b) => b.domain(),
        }
    }

    pub fn rows(&self) -> usize {
        let (_, r, m) = self.dims();
        r * m
    }

    /// `B Y` for every column of `y`: an `rm x width` matrix.
    pub fn apply(&self, y: &SolutionFunction, quad: QuadratureOptions) -> Result<CMatrix> {
        match self {
            Self::General(b) => apply_general_with(b, y, quad),
            Self::Multipoint(b) => apply_multipoint(b, y),
        }
    }
}

fn check_solution(domain: (f64, f64), r: usize, m: usize, y: &SolutionFunction) -> Result<()> {
    let sys = y.system();
    if sys.domain() != domain {
        return Err(Error::DimensionMismatch(format!(
            "solution on {:?}, boundary operator on {domain:?}",
            sys.domain()
        )));
    }
    if sys.order() != r || sys.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "solution has r = {}, m = {}; boundary operator expects r = {r}, m = {m}",
            sys.order(),
            sys.dim()
        )));
    }
    Ok(())
}

/// `B y` with default quadrature settings.
pub fn apply_general(b: &GeneralBoundaryOperator, y: &SolutionFunction) -> Result<CMatrix> {
    apply_general_with(b, y, QuadratureOptions::default())
}

/// `B y = sum_l alpha_l y^(l)(a) + \int dG y^(n)`, evaluated for every column of
/// `y`. Row `lambda` of the integral part is `sum_mu \int y^(n)_mu dg^{lambda,mu}`.
pub fn apply_general_with(
    b: &GeneralBoundaryOperator,
    y: &SolutionFunction,
    quad: QuadratureOptions,
) -> Result<CMatrix> {
    check_solution(b.domain(), b.r, b.m, y)?;
    let w = y.width();
    let mut out = CMatrix::zeros(b.rows(), w);
    let jet_a = y.jet(b.a, b.n - 1)?;
    for (alpha, yl) in b.alphas.iter().zip(&jet_a) {
        if alpha.is_zero() {
            continue;
        }
        out.add_scaled(&alpha.mul(yl)?, Complex64::new(1.0, 0.0))?;
    }
    for lambda in 0..b.rows() {
        for mu in 0..b.m {
            let g = b.integrator(lambda, mu);
            if g.is_zero() {
                continue;
            }
            let top = |t: f64| -> Vec<Complex64> {
                match y.jet(t, b.n) {
                    Ok(jet) => (0..w).map(|c| jet[b.n][(mu, c)]).collect(),
                    // Nodes lie inside [a, b]; keep the integrand total.
                    Err(_) => vec![ZERO; w],
                }
            };
            let vals = nbv::stieltjes_integral_vec(top, w, g, quad)?;
            for (c, v) in vals.into_iter().enumerate() {
                out[(lambda, c)] += v;
            }
        }
    }
    Ok(out)
}

/// `B_k y`, evaluated for every column of `y`.
pub fn apply_multipoint(bk: &MultipointBoundaryOperator, y: &SolutionFunction) -> Result<CMatrix> {
    check_solution(bk.domain(), bk.r, bk.m, y)?;
    let mut out = CMatrix::zeros(bk.rows(), y.width());
    for (t, group) in bk.nodes.iter().zip(&bk.betas) {
        let jet = y.jet(*t, bk.n)?;
        for (beta, yl) in group.iter().zip(&jet) {
            if beta.is_zero() {
                continue;
            }
            out.add_scaled(&beta.mul(yl)?, Complex64::new(1.0, 0.0))?;
        }
    }
    Ok(out)
}

/// Multipoint operator `B_k`: the alpha part is kept at node `a`, and each
/// integrator entry is replaced by its step approximant of index `k`, whose
/// atoms become level-`n` coefficients at the atom positions.
pub fn discretize_boundary(b: &GeneralBoundaryOperator, k: usize) -> Result<MultipointBoundaryOperator> {
    let steps = b
        .g
        .iter()
        .map(|g| nbv::step_approximate(g, k))
        .collect::<Result<Vec<_>>>()?;

    let mut points: Vec<f64> = std::iter::once(b.a)
        .chain(steps.iter().flat_map(|s| s.atoms().iter().map(|at| at.t)))
        .collect();
    points.sort_by(f64::total_cmp);
    let mut nodes: Vec<f64> = Vec::with_capacity(points.len());
    for t in points {
        match nodes.last() {
            Some(&last) if t - last <= NODE_MERGE_TOL => {}
            _ => nodes.push(t),
        }
    }
    let node_of = |t: f64| -> usize {
        let idx = nodes.partition_point(|&x| x <= t);
        idx.saturating_sub(1)
    };

    let zero = CMatrix::zeros(b.rows(), b.m);
    let mut betas = vec![vec![zero; b.n + 1]; nodes.len()];
    let a_node = node_of(b.a);
    for (l, alpha) in b.alphas.iter().enumerate() {
        betas[a_node][l] = alpha.clone();
    }
    for (idx, s) in steps.iter().enumerate() {
        let (lambda, mu) = (idx / b.m, idx % b.m);
        for Atom { t, mass } in s.atoms() {
            betas[node_of(*t)][b.n][(lambda, mu)] += mass;
        }
    }
    MultipointBoundaryOperator::new(b.n, b.r, b.m, (b.a, b.b), nodes, betas)
}

/// Euclidean norm of `B_k y - B y` (Frobenius over columns of `y`).
pub fn boundary_discrepancy(
    b: &GeneralBoundaryOperator,
    bk: &MultipointBoundaryOperator,
    y: &SolutionFunction,
) -> Result<f64> {
    let mut diff = apply_multipoint(bk, y)?;
    diff.add_scaled(&apply_general(b, y)?, Complex64::new(-1.0, 0.0))?;
    Ok(diff.as_slice().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// Canonical form of the functional `y -> \int_a^b y^(j) dmu` for `C^(n)`.
///
/// Taylor expansion of `y^(j)` about `a` with integral remainder gives
/// `alpha_{j+i} = \int (t-a)^i / i! dmu` for `i < n - j`, and the density
/// `K(s) = \int_s^b (t-s)^{n-j-1} / (n-j-1)! dmu(t)`, i.e. the `(n-j)`-fold
/// right antiderivative of the weight. For `j = n` the weight itself is the
/// integrator and may carry jumps.
pub fn canonicalize_integral_condition(order: usize, weight: &NbvFunction, n: usize) -> Result<CanonicalTerm> {
    if order > n {
        return Err(Error::InvalidInput(format!(
            "integral condition on y^({order}) exceeds the smoothness n = {n}"
        )));
    }
    if order == n {
        return Ok(CanonicalTerm {
            alphas: vec![ZERO; n],
            integrator: weight.clone(),
        });
    }
    if !weight.jumps().is_empty() {
        return Err(Error::UnsupportedWeight { order });
    }
    let (a, _) = weight.domain();
    let mut alphas = vec![ZERO; n];
    let mut iterated = weight.density().clone();
    for i in 0..n - order {
        iterated = iterated.right_antiderivative();
        alphas[order + i] = iterated.eval(a);
    }
    Ok(CanonicalTerm {
        alphas,
        integrator: NbvFunction::from_density(iterated),
    })
}

/// Canonical form of the point functional `y -> y^(level)(t)`.
///
/// For `level = n` this is a Dirac integrator at `t`; otherwise
/// `alpha_{level+i} = (t-a)^i / i!` and the density `(t-s)^{p-1} / (p-1)!` on
/// `[a, t)`, `p = n - level`.
pub fn canonicalize_point_condition(
    level: usize,
    t: f64,
    n: usize,
    (a, b): (f64, f64),
) -> Result<CanonicalTerm> {
    if level > n {
        return Err(Error::InvalidInput(format!(
            "point condition on y^({level}) exceeds the smoothness n = {n}"
        )));
    }
    if !(a..=b).contains(&t) {
        return Err(Error::OutOfDomain { t, a, b });
    }
    if level == n {
        return Ok(CanonicalTerm {
            alphas: vec![ZERO; n],
            integrator: NbvFunction::from_jumps(a, b, vec![Atom::new(t, Complex64::new(1.0, 0.0))])?,
        });
    }
    let p = n - level;
    let mut alphas = vec![ZERO; n];
    let mut fact = 1.0;
    for i in 0..p {
        if i > 0 {
            fact *= i as f64;
        }
        alphas[level + i] = Complex64::new((t - a).powi(i as i32) / fact, 0.0);
    }
    let integrator = if t == a {
        NbvFunction::zero(a, b)
    } else {
        // (t - a - x)^{p-1} / (p-1)! expanded in x = s - a
        let d = t - a;
        let fact_p: f64 = (1..p).map(|x| x as f64).product();
        let mut coeffs = Vec::with_capacity(p);
        let mut binom = 1.0;
        for k in 0..p {
            if k > 0 {
                binom = binom * (p - k) as f64 / k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs.push(Complex64::new(sign * binom * d.powi((p - 1 - k) as i32) / fact_p, 0.0));
        }
        let density = if t >= b {
            PiecewisePolynomial::new(vec![a, b], vec![coeffs])?
        } else {
            PiecewisePolynomial::new(vec![a, t, b], vec![coeffs, vec![ZERO]])?
        };
        NbvFunction::from_density(density)
    };
    Ok(CanonicalTerm { alphas, integrator })
}

#[cfg(test)]
mod tests;
