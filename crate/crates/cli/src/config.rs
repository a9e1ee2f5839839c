//! TOML problem descriptions.
//!
//! Complex numbers are written as `[re, im]` or as a plain real number.
//! Polynomials are either `{ global = [...] }` (monomial coefficients in `t`),
//! `{ breakpoints = [...], pieces = [[...], ...] }` (ascending coefficients in
//! the local variable `t - breakpoint` per piece) or a single constant.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use mpbvp::approx::{ApproximationSchedule, Perturbation};
use mpbvp::boundary::{
    canonicalize_integral_condition, canonicalize_point_condition, BoundaryOperator, CanonicalTerm,
    GeneralBoundaryOperator,
};
use mpbvp::bvpsolve::{BVProblem, SolveOptions};
use mpbvp::linalg::CMatrix;
use mpbvp::nbv::{Atom, NbvFunction, PiecewisePolynomial, QuadratureOptions};
use mpbvp::odecore::{IntegratorOptions, LinearOdeSystem, PolyMatrix, CN_GRID};
use num_complex::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Num> for Complex64 {
    fn from(n: Num) -> Self {
        match n {
            Num::Real(x) => Complex64::new(x, 0.0),
            Num::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

fn complex(v: &[Num]) -> Vec<Complex64> {
    v.iter().map(|&n| n.into()).collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Constant(Num),
    Global { global: Vec<Num> },
    Piecewise { breakpoints: Vec<f64>, pieces: Vec<Vec<Num>> },
}

impl PolySpec {
    pub fn build(&self, (a, b): (f64, f64), field: &str) -> Result<PiecewisePolynomial, CliError> {
        match self {
            Self::Constant(c) => Ok(PiecewisePolynomial::constant(a, b, (*c).into())),
            Self::Global { global } => Ok(PiecewisePolynomial::from_global(a, b, &complex(global))),
            Self::Piecewise { breakpoints, pieces } => {
                if breakpoints.first() != Some(&a) || breakpoints.last() != Some(&b) {
                    return Err(CliError::config(field, format!("breakpoints must run from {a} to {b}")));
                }
                PiecewisePolynomial::new(breakpoints.clone(), pieces.iter().map(|p| complex(p)).collect())
                    .map_err(|e| CliError::config(field, e))
            }
        }
    }
}

/// An NBV function: density plus jumps `[[t, mass], ...]`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub density: Option<PolySpec>,
    #[serde(default)]
    pub jumps: Vec<(f64, Num)>,
}

impl MeasureSpec {
    pub fn build(&self, domain: (f64, f64), field: &str) -> Result<NbvFunction, CliError> {
        let density = match &self.density {
            Some(d) => d.build(domain, &format!("{field}.density"))?,
            None => PiecewisePolynomial::zero(domain.0, domain.1),
        };
        let mut jumps: Vec<Atom> = self.jumps.iter().map(|&(t, m)| Atom::new(t, m.into())).collect();
        jumps.sort_by(|x, y| x.t.total_cmp(&y.t));
        NbvFunction::new(density, jumps).map_err(|e| CliError::config(&format!("{field}.jumps"), e))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TermSpec {
    /// `coefficient * y_component^(level)(t)`.
    Point {
        component: usize,
        level: usize,
        t: f64,
        coefficient: Option<Num>,
    },
    /// `coefficient * \int y_component^(order) dweight`.
    Integral {
        component: usize,
        order: usize,
        weight: MeasureSpec,
        coefficient: Option<Num>,
    },
    /// Canonical data: `sum_l alphas[l] y^(l)(a) + \int y^(n) dG`.
    Canonical {
        component: usize,
        #[serde(default)]
        alphas: Vec<Num>,
        #[serde(default)]
        integrator: MeasureSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// `i` in `A_i y^(i)`.
    pub order: usize,
    /// `m * m` entries, row-major.
    pub entries: Vec<PolySpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub k: Option<Vec<usize>>,
    #[serde(default)]
    pub coefficient_approximation: bool,
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub quad_rtol: Option<f64>,
    pub singular_threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub interval: [f64; 2],
    pub r: usize,
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub coefficients: Vec<CoefficientSpec>,
    pub f: Vec<PolySpec>,
    #[serde(default)]
    pub boundary: Vec<RowSpec>,
    pub q: Vec<Num>,
    /// Exact solution, one polynomial per component.
    pub exact: Option<Vec<PolySpec>>,
    /// Node table written by `approximate --dump-nodes`, used instead of the
    /// general boundary operator.
    pub multipoint: Option<MultipointImport>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Explicit perturbed right-hand sides `(f_k, q_k)` for `perturb`.
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub f: Vec<PolySpec>,
    pub q: Vec<Num>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipointImport {
    pub file: PathBuf,
    pub k: usize,
}

/// Command-line tolerance settings, applied after the environment and the
/// config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToleranceOverrides {
    pub rtol: Option<f64>,
}

pub const ENV_RTOL: &str = "MPBVP_RTOL";
pub const ENV_ATOL: &str = "MPBVP_ATOL";
pub const ENV_QUAD_RTOL: &str = "MPBVP_QUAD_RTOL";

fn env_f64(name: &str) -> Result<Option<f64>, CliError> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(name, format!("cannot parse {v:?} as a number"))),
        Err(_) => Ok(None),
    }
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(mp) = &mut cfg.multipoint {
            if mp.file.is_relative() {
                if let Some(dir) = path.parent() {
                    mp.file = dir.join(&mp.file);
                }
            }
        }
        Ok(cfg)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.interval[0], self.interval[1])
    }

    pub fn solve_options(&self, cli: ToleranceOverrides) -> Result<SolveOptions, CliError> {
        let mut integrator = IntegratorOptions::default();
        let mut quadrature = QuadratureOptions::default();
        if let Some(v) = env_f64(ENV_RTOL)? {
            integrator.rtol = v;
        }
        if let Some(v) = env_f64(ENV_ATOL)? {
            integrator.atol = v;
        }
        if let Some(v) = env_f64(ENV_QUAD_RTOL)? {
            quadrature.rel_tol = v;
        }
        let t = &self.tolerances;
        if let Some(v) = t.rtol {
            integrator.rtol = v;
        }
        if let Some(v) = t.atol {
            integrator.atol = v;
        }
        if let Some(v) = t.quad_rtol {
            quadrature.rel_tol = v;
        }
        if let Some(v) = cli.rtol {
            integrator.rtol = v;
        }
        for (name, v) in [("rtol", integrator.rtol), ("atol", integrator.atol), ("quad_rtol", quadrature.rel_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::config(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        let singular_threshold = t
            .singular_threshold
            .unwrap_or_else(|| SolveOptions::default_threshold(&integrator));
        Ok(SolveOptions {
            integrator,
            quadrature,
            singular_threshold,
        })
    }

    pub fn schedule(&self, grid: Option<usize>, opts: SolveOptions) -> Result<ApproximationSchedule, CliError> {
        let ks = self
            .schedule
            .k
            .clone()
            .ok_or_else(|| CliError::config("schedule.k", "missing"))?;
        let mut sched = ApproximationSchedule::new(ks).map_err(|e| CliError::config("schedule.k", e))?;
        sched.coefficient_approximation = self.schedule.coefficient_approximation;
        sched.grid = grid.unwrap_or(CN_GRID);
        sched.solve = opts;
        Ok(sched)
    }

    fn check_dims(&self) -> Result<(), CliError> {
        let [a, b] = self.interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(CliError::config("interval", format!("[{a}, {b}] is not a proper interval")));
        }
        if self.r == 0 {
            return Err(CliError::config("r", "must be at least 1"));
        }
        if self.n < self.r {
            return Err(CliError::config("n", format!("must be at least r = {}", self.r)));
        }
        if self.m == 0 {
            return Err(CliError::config("m", "must be at least 1"));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<LinearOdeSystem, CliError> {
        self.check_dims()?;
        let (m, r, d) = (self.m, self.r, self.domain());
        let mut coefficients = vec![PolyMatrix::zeros(m, d.0, d.1); r];
        let mut seen = vec![false; r];
        for (idx, c) in self.coefficients.iter().enumerate() {
            let field = format!("coefficients[{idx}]");
            if c.order >= r {
                return Err(CliError::config(&format!("{field}.order"), format!("must be below r = {r}")));
            }
            if std::mem::replace(&mut seen[c.order], true) {
                return Err(CliError::config(&format!("{field}.order"), "given twice"));
            }
            if c.entries.len() != m * m {
                return Err(CliError::config(
                    &format!("{field}.entries"),
                    format!("expected {} entries, got {}", m * m, c.entries.len()),
                ));
            }
            let entries = c
                .entries
                .iter()
                .enumerate()
                .map(|(j, e)| e.build(d, &format!("{field}.entries[{j}]")))
                .collect::<Result<Vec<_>, _>>()?;
            coefficients[c.order] = PolyMatrix::new(m, entries).map_err(|e| CliError::config(&field, e))?;
        }
        if self.f.len() != m {
            return Err(CliError::config("f", format!("expected {m} components, got {}", self.f.len())));
        }
        let forcing = self
            .f
            .iter()
            .enumerate()
            .map(|(j, p)| p.build(d, &format!("f[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        LinearOdeSystem::new(r, self.n, coefficients, forcing).map_err(|e| CliError::config("coefficients", e))
    }

    fn term(&self, spec: &TermSpec, field: &str) -> Result<(usize, CanonicalTerm), CliError> {
        let (n, d) = (self.n, self.domain());
        let scale = |t: CanonicalTerm, c: &Option<Num>| {
            let c: Complex64 = c.map_or(Complex64::new(1.0, 0.0), Into::into);
            CanonicalTerm {
                alphas: t.alphas.iter().map(|z| z * c).collect(),
                integrator: t.integrator.scale(c),
            }
        };
        let (component, term) = match spec {
            TermSpec::Point {
                component,
                level,
                t,
                coefficient,
            } => {
                let term = canonicalize_point_condition(*level, *t, n, d).map_err(|e| CliError::config(field, e))?;
                (*component, scale(term, coefficient))
            }
            TermSpec::Integral {
                component,
                order,
                weight,
                coefficient,
            } => {
                let w = weight.build(d, &format!("{field}.weight"))?;
                let term = canonicalize_integral_condition(*order, &w, n).map_err(|e| CliError::config(field, e))?;
                (*component, scale(term, coefficient))
            }
            TermSpec::Canonical {
                component,
                alphas,
                integrator,
            } => {
                if alphas.len() > n {
                    return Err(CliError::config(
                        &format!("{field}.alphas"),
                        format!("at most n = {n} levels, got {}", alphas.len()),
                    ));
                }
                let mut a = complex(alphas);
                a.resize(n, Complex64::new(0.0, 0.0));
                let g = integrator.build(d, &format!("{field}.integrator"))?;
                (*component, CanonicalTerm { alphas: a, integrator: g })
            }
        };
        if component >= self.m {
            return Err(CliError::config(
                &format!("{field}.component"),
                format!("must be below m = {}", self.m),
            ));
        }
        Ok((component, term))
    }

    pub fn general_boundary(&self) -> Result<GeneralBoundaryOperator, CliError> {
        self.check_dims()?;
        let rows = self.r * self.m;
        if self.boundary.len() != rows {
            return Err(CliError::config(
                "boundary",
                format!("expected r*m = {rows} rows, got {}", self.boundary.len()),
            ));
        }
        let terms = self
            .boundary
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.terms
                    .iter()
                    .enumerate()
                    .map(|(j, t)| self.term(t, &format!("boundary[{i}].terms[{j}]")))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        GeneralBoundaryOperator::from_terms(self.n, self.r, self.m, self.domain(), &terms)
            .map_err(|e| CliError::config("boundary", e))
    }

    pub fn q(&self) -> Result<Vec<Complex64>, CliError> {
        if self.q.len() != self.r * self.m {
            return Err(CliError::config(
                "q",
                format!("expected r*m = {} values, got {}", self.r * self.m, self.q.len()),
            ));
        }
        Ok(complex(&self.q))
    }

    /// The problem with its general boundary operator.
    pub fn problem(&self) -> Result<BVProblem, CliError> {
        let sys = Arc::new(self.system()?);
        let b = self.general_boundary()?;
        BVProblem::new(sys, BoundaryOperator::General(b), self.q()?).map_err(|e| CliError::config("boundary", e))
    }

    /// The problem with the imported multipoint operator, if one is configured.
    pub fn imported_problem(&self) -> Result<Option<BVProblem>, CliError> {
        let Some(mp) = &self.multipoint else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(&mp.file)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", mp.file.display())))?;
        let op = crate::output::parse_node_table(&text, mp.k, self.n, self.r, self.m, self.domain())?;
        let sys = Arc::new(self.system()?);
        BVProblem::new(sys, BoundaryOperator::Multipoint(op), self.q()?)
            .map(Some)
            .map_err(|e| CliError::config("multipoint", e))
    }

    pub fn perturbation(&self) -> Result<Option<Perturbation>, CliError> {
        let Some(spec) = &self.perturbation else {
            return Ok(None);
        };
        if spec.f.len() != self.m || spec.q.len() != self.r * self.m {
            return Err(CliError::config(
                "perturbation",
                format!("expected {} forcing components and {} q values", self.m, self.r * self.m),
            ));
        }
        let forcing = spec
            .f
            .iter()
            .enumerate()
            .map(|(j, p)| p.build(self.domain(), &format!("perturbation.f[{j}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(Perturbation {
            forcing,
            q: complex(&spec.q),
        }))
    }

    /// Exact solution jets `y^(0..=n)(t)`, if given.
    pub fn exact(&self) -> Result<Option<Vec<PiecewisePolynomial>>, CliError> {
        let Some(ex) = &self.exact else {
            return Ok(None);
        };
        if ex.len() != self.m {
            return Err(CliError::config("exact", format!("expected {} components, got {}", self.m, ex.len())));
        }
        ex.iter()
            .enumerate()
            .map(|(j, p)| p.build(self.domain(), &format!("exact[{j}]")))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

/// Jets of an exact polynomial solution as `m x 1` matrices.
pub fn exact_jet(exact: &[PiecewisePolynomial], t: f64, lmax: usize) -> Vec<CMatrix> {
    let jets: Vec<Vec<Complex64>> = exact.iter().map(|p| p.eval_jet(t, lmax)).collect();
    (0..=lmax)
        .map(|l| CMatrix::from_fn(exact.len(), 1, |i, _| jets[i][l]))
        .collect()
}

/// Config with only an interval and a measure, for `nbv-approx`.
#[derive(Debug, Clone, Deserialize)]
pub struct MeasureConfig {
    pub interval: [f64; 2],
    pub measure: MeasureSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
}

impl MeasureConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn measure(&self) -> Result<NbvFunction, CliError> {
        let [a, b] = self.interval;
        if !(a < b) {
            return Err(CliError::config("interval", format!("[{a}, {b}] is not a proper interval")));
        }
        self.measure.build((a, b), "measure")
    }

    pub fn ks(&self) -> Result<Vec<usize>, CliError> {
        let ks = self.schedule.k.clone().ok_or_else(|| CliError::config("schedule.k", "missing"))?;
        if ks.is_empty() || ks.contains(&0) {
            return Err(CliError::config("schedule.k", "values must be positive"));
        }
        Ok(ks)
    }
}
