use std::sync::Arc;

use num_complex::Complex64;

use super::LinearOdeSystem;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Default number of uniform samples for C^(n) norms (mesh nodes are added).
pub const CN_GRID: usize = 2048;

/// One accepted step with the Hermite data at both ends.
#[derive(Debug, Clone)]
pub(super) struct Interval {
    pub t0: f64,
    pub t1: f64,
    pub u0: CMatrix,
    pub du0: CMatrix,
    pub ddu0: CMatrix,
    pub u1: CMatrix,
    pub du1: CMatrix,
    pub ddu1: CMatrix,
}

/// Dense-output solution of a [`LinearOdeSystem`] with `width` columns.
///
/// Column `c` solves `L y = w_c f`, where `w_c` is its forcing weight: zero for
/// fundamental columns, one for a particular solution, and arbitrary after
/// [`SolutionFunction::combine`].
#[derive(Debug, Clone)]
pub struct SolutionFunction {
    system: Arc<LinearOdeSystem>,
    intervals: Vec<Interval>,
    weights: Vec<Complex64>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl SolutionFunction {
    pub(super) fn from_parts(system: Arc<LinearOdeSystem>, intervals: Vec<Interval>, weights: Vec<Complex64>) -> Self {
        Self {
            system,
            intervals,
            weights,
        }
    }

    pub fn system(&self) -> &Arc<LinearOdeSystem> {
        &self.system
    }

    pub fn width(&self) -> usize {
        self.weights.len()
    }

    pub fn forcing_weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn domain(&self) -> (f64, f64) {
        self.system.domain()
    }

    /// Accepted step endpoints, including `a` and `b`.
    pub fn mesh(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.intervals.iter().map(|iv| iv.t0).collect();
        if let Some(last) = self.intervals.last() {
            out.push(last.t1);
        }
        out.dedup();
        out
    }

    pub fn step_count(&self) -> usize {
        self.intervals.len()
    }

    fn locate(&self, t: f64) -> Result<(&Interval, f64)> {
        let (a, b) = self.domain();
        let slack = 1e-12 * (b - a);
        if !(t >= a - slack && t <= b + slack) {
            return Err(Error::OutOfDomain { t, a, b });
        }
        let t = t.clamp(a, b);
        let idx = self
            .intervals
            .partition_point(|iv| iv.t1 < t)
            .min(self.intervals.len() - 1);
        Ok((&self.intervals[idx], t))
    }

    /// Companion state and its derivative at `t` from the quintic Hermite
    /// interpolant of the containing step.
    fn hermite(&self, t: f64, derivative: bool) -> Result<CMatrix> {
        let (iv, t) = self.locate(t)?;
        let h = iv.t1 - iv.t0;
        let s = (t - iv.t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let basis = if !derivative {
            [
                1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
                h * (s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5),
                h * h * 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
                10.0 * s3 - 15.0 * s4 + 6.0 * s5,
                h * (-4.0 * s3 + 7.0 * s4 - 3.0 * s5),
                h * h * 0.5 * (s3 - 2.0 * s4 + s5),
            ]
        } else {
            [
                (-30.0 * s2 + 60.0 * s3 - 30.0 * s4) / h,
                1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
                h * 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4),
                (30.0 * s2 - 60.0 * s3 + 30.0 * s4) / h,
                -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
                h * 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4),
            ]
        };
        let data = [&iv.u0, &iv.du0, &iv.ddu0, &iv.u1, &iv.du1, &iv.ddu1];
        let mut out = CMatrix::zeros(iv.u0.nrows(), iv.u0.ncols());
        for (w, m) in basis.iter().zip(data) {
            out.add_scaled(m, Complex64::new(*w, 0.0))?;
        }
        Ok(out)
    }

    /// Companion state `(y, y', ..., y^(r-1))` at `t`, `rm x width`.
    pub fn state(&self, t: f64) -> Result<CMatrix> {
        self.hermite(t, false)
    }

    /// `y^(0..=lmax)(t)`, each `m x width`.
    ///
    /// Orders below `r` come from the dense output; higher orders from the
    /// Leibniz-differentiated equation
    /// `y^(r+j) = w f^(j) - sum_i sum_{s<=j} C(j,s) A_i^(s) y^(i+j-s)`.
    pub fn jet(&self, t: f64, lmax: usize) -> Result<Vec<CMatrix>> {
        let u = self.state(t)?;
        let (_, b) = self.domain();
        let t = t.min(b);
        let sys = &*self.system;
        let (m, r, w) = (sys.dim(), sys.order(), self.width());
        let mut jet: Vec<CMatrix> = (0..r.min(lmax + 1))
            .map(|i| CMatrix::from_fn(m, w, |row, col| u[(i * m + row, col)]))
            .collect();
        if lmax < r {
            return Ok(jet);
        }
        let extra = lmax - r;
        let left = t >= b;
        let a_jet = sys.coefficient_jet(t, extra, left);
        let f_jet = sys.forcing_jet(t, extra, left);
        for j in 0..=extra {
            let mut next = CMatrix::from_fn(m, w, |row, col| f_jet[j][row] * self.weights[col]);
            for (i, ai) in a_jet.iter().enumerate() {
                for s in 0..=j {
                    let c = binom(j, s);
                    if ai[s].is_zero() {
                        continue;
                    }
                    let term = ai[s].mul(&jet[i + j - s])?;
                    next.add_scaled(&term, Complex64::new(-c, 0.0))?;
                }
            }
            jet.push(next);
        }
        Ok(jet)
    }

    /// Largest entry of `|y^(r) - (w f - sum A_i y^(i))|` at `t`, where `y^(r)` is
    /// the derivative of the dense output.
    pub fn residual_at(&self, t: f64) -> Result<f64> {
        let du = self.hermite(t, true)?;
        let sys = &*self.system;
        let (m, r) = (sys.dim(), sys.order());
        let jet = self.jet(t, r)?;
        let mut worst: f64 = 0.0;
        for row in 0..m {
            for col in 0..self.width() {
                let interp = du[((r - 1) * m + row, col)];
                worst = worst.max((interp - jet[r][(row, col)]).norm());
            }
        }
        Ok(worst)
    }

    /// Linear combination of columns: the result has columns `self * coeffs`.
    pub fn combine(&self, coeffs: &CMatrix) -> Result<SolutionFunction> {
        if coeffs.nrows() != self.width() {
            return Err(Error::DimensionMismatch(format!(
                "combination matrix has {} rows, solution has {} columns",
                coeffs.nrows(),
                self.width()
            )));
        }
        let intervals = self
            .intervals
            .iter()
            .map(|iv| {
                Ok(Interval {
                    t0: iv.t0,
                    t1: iv.t1,
                    u0: iv.u0.mul(coeffs)?,
                    du0: iv.du0.mul(coeffs)?,
                    ddu0: iv.ddu0.mul(coeffs)?,
                    u1: iv.u1.mul(coeffs)?,
                    du1: iv.du1.mul(coeffs)?,
                    ddu1: iv.ddu1.mul(coeffs)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = (0..coeffs.ncols())
            .map(|j| (0..coeffs.nrows()).map(|i| self.weights[i] * coeffs[(i, j)]).sum())
            .collect();
        Ok(Self {
            system: Arc::clone(&self.system),
            intervals,
            weights,
        })
    }

    pub fn column(&self, j: usize) -> Result<SolutionFunction> {
        if j >= self.width() {
            return Err(Error::DimensionMismatch(format!(
                "column {j} of a {}-column solution",
                self.width()
            )));
        }
        let sel = CMatrix::from_fn(self.width(), 1, |i, _| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        self.combine(&sel)
    }
}

fn uniform(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| {
        if i == n - 1 {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    })
}

/// `sum_{j<=l} sum_entries max_t |x^(j)(t)|` over `samples`, where `jet(t)`
/// returns the derivative matrices `x^(0..=l)(t)`.
pub fn cn_norm_with<F>(l: usize, samples: impl IntoIterator<Item = f64>, jet: F) -> Result<f64>
where
    F: Fn(f64) -> Result<Vec<CMatrix>>,
{
    let mut maxima: Vec<Vec<f64>> = Vec::new();
    for t in samples {
        let values = jet(t)?;
        if values.len() < l + 1 {
            return Err(Error::DimensionMismatch(format!(
                "jet has {} orders, need {}",
                values.len(),
                l + 1
            )));
        }
        if maxima.is_empty() {
            maxima = values[..=l].iter().map(|m| vec![0.0; m.as_slice().len()]).collect();
        }
        for (mx, v) in maxima.iter_mut().zip(&values[..=l]) {
            for (slot, z) in mx.iter_mut().zip(v.as_slice()) {
                *slot = slot.max(z.norm());
            }
        }
    }
    Ok(maxima.iter().flatten().sum())
}

/// Grid approximation of `|y|_(l)`: uniform samples plus the mesh nodes.
pub fn cn_norm(sol: &SolutionFunction, l: usize, grid: usize) -> f64 {
    let (a, b) = sol.domain();
    let samples = uniform(a, b, grid).chain(sol.mesh());
    cn_norm_with(l, samples, |t| sol.jet(t, l)).expect("samples lie in the domain")
}

/// Grid approximation of `|y1 - y2|_(l)`, sampling both meshes.
pub fn cn_distance(s1: &SolutionFunction, s2: &SolutionFunction, l: usize, grid: usize) -> Result<f64> {
    if s1.domain() != s2.domain() || s1.width() != s2.width() {
        return Err(Error::DimensionMismatch(
            "solutions live on different intervals or have different widths".into(),
        ));
    }
    let (a, b) = s1.domain();
    let samples = uniform(a, b, grid).chain(s1.mesh()).chain(s2.mesh());
    cn_norm_with(l, samples, |t| {
        let j1 = s1.jet(t, l)?;
        let j2 = s2.jet(t, l)?;
        j1.into_iter()
            .zip(j2)
            .map(|(mut x, y)| {
                x.add_scaled(&y, Complex64::new(-1.0, 0.0))?;
                Ok(x)
            })
            .collect()
    })
}

/// Grid approximation of `|y - reference|_(l)` for an analytic reference jet.
pub fn cn_distance_to<F>(sol: &SolutionFunction, l: usize, grid: usize, reference: F) -> Result<f64>
where
    F: Fn(f64) -> Vec<CMatrix>,
{
    let (a, b) = sol.domain();
    let samples = uniform(a, b, grid).chain(sol.mesh());
    cn_norm_with(l, samples, |t| {
        let j = sol.jet(t, l)?;
        let r = reference(t);
        j.into_iter()
            .zip(r)
            .map(|(mut x, y)| {
                x.add_scaled(&y, Complex64::new(-1.0, 0.0))?;
                Ok(x)
            })
            .collect()
    })
}
