//! Piecewise polynomials with complex coefficients.
//!
//! Each piece `i` is stored in its local variable `s = t - breakpoints[i]`, with
//! coefficients in ascending order. Evaluation is right-continuous at interior
//! breakpoints and the last piece is closed at `b`.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<Complex64>>,
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<Complex64>>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidInput(
                "piecewise polynomial needs at least two breakpoints".into(),
            ));
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints require {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if pieces.iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        let pieces = pieces
            .into_iter()
            .map(|mut c| {
                if c.is_empty() {
                    c.push(ZERO);
                }
                c
            })
            .collect();
        Ok(Self { breakpoints, pieces })
    }

    pub fn zero(a: f64, b: f64) -> Self {
        Self::constant(a, b, ZERO)
    }

    pub fn constant(a: f64, b: f64, value: Complex64) -> Self {
        Self {
            breakpoints: vec![a, b],
            pieces: vec![vec![value]],
        }
    }

    /// A single polynomial given by ascending coefficients in `t` itself
    /// (not in `t - a`).
    pub fn from_global(a: f64, b: f64, coeffs: &[Complex64]) -> Self {
        let mut c = coeffs.to_vec();
        if c.is_empty() {
            c.push(ZERO);
        }
        Self {
            breakpoints: vec![a, b],
            pieces: vec![taylor_shift(&c, a)],
        }
    }

    /// Real-coefficient convenience wrapper around [`Self::from_global`].
    pub fn from_global_real(a: f64, b: f64, coeffs: &[f64]) -> Self {
        let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_global(a, b, &c)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<Complex64>] {
        &self.pieces
    }

    pub fn degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|c| c.iter().rposition(|z| *z != ZERO).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().flatten().all(|z| *z == ZERO)
    }

    pub fn is_real(&self) -> bool {
        self.pieces.iter().flatten().all(|z| z.im == 0.0)
    }

    fn piece_index(&self, t: f64) -> usize {
        let n = self.pieces.len();
        let idx = self.breakpoints.partition_point(|&x| x <= t);
        idx.saturating_sub(1).min(n - 1)
    }

    fn piece_index_left(&self, t: f64) -> usize {
        let n = self.pieces.len();
        let idx = self.breakpoints.partition_point(|&x| x < t);
        idx.saturating_sub(1).min(n - 1)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let i = self.piece_index(t);
        horner(&self.pieces[i], t - self.breakpoints[i])
    }

    /// Value using the piece to the left of `t` at interior breakpoints.
    pub fn eval_left(&self, t: f64) -> Complex64 {
        let i = self.piece_index_left(t);
        horner(&self.pieces[i], t - self.breakpoints[i])
    }

    /// `order`-th derivative at `t`, right-continuous at breakpoints.
    pub fn eval_derivative(&self, t: f64, order: usize) -> Complex64 {
        let i = self.piece_index(t);
        horner_derivative(&self.pieces[i], t - self.breakpoints[i], order)
    }

    /// All derivatives `0..=max_order` at `t`.
    pub fn eval_jet(&self, t: f64, max_order: usize) -> Vec<Complex64> {
        let i = self.piece_index(t);
        let s = t - self.breakpoints[i];
        (0..=max_order)
            .map(|k| horner_derivative(&self.pieces[i], s, k))
            .collect()
    }

    /// Like [`Self::eval_jet`], but at interior breakpoints uses the piece to
    /// the left when `left` is set.
    pub fn eval_jet_side(&self, t: f64, max_order: usize, left: bool) -> Vec<Complex64> {
        let i = if left {
            self.piece_index_left(t)
        } else {
            self.piece_index(t)
        };
        let s = t - self.breakpoints[i];
        (0..=max_order)
            .map(|k| horner_derivative(&self.pieces[i], s, k))
            .collect()
    }

    pub fn derivative(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|c| poly_derivative(c)).collect(),
        }
    }

    /// The antiderivative vanishing at `a`; continuous across breakpoints.
    pub fn antiderivative(&self) -> Self {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut acc = ZERO;
        for (i, c) in self.pieces.iter().enumerate() {
            let mut p = Vec::with_capacity(c.len() + 1);
            p.push(acc);
            for (k, z) in c.iter().enumerate() {
                p.push(z / (k as f64 + 1.0));
            }
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            acc = horner(&p, h);
            pieces.push(p);
        }
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    /// `s -> \int_s^b p(t) dt`.
    pub fn right_antiderivative(&self) -> Self {
        let anti = self.antiderivative();
        let total = anti.eval(self.domain().1);
        let mut out = anti.scale(Complex64::new(-1.0, 0.0));
        for p in &mut out.pieces {
            p[0] += total;
        }
        out
    }

    pub fn integral(&self) -> Complex64 {
        let mut total = ZERO;
        for (i, c) in self.pieces.iter().enumerate() {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            let mut hp = h;
            for (k, z) in c.iter().enumerate() {
                total += z * (hp / (k as f64 + 1.0));
                hp *= h;
            }
        }
        total
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|c| c.iter().map(|z| z * factor).collect())
                .collect(),
        }
    }

    pub fn map_coefficients(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|c| c.iter().map(|&z| f(z)).collect())
                .collect(),
        }
    }

    pub fn real_part(&self) -> Self {
        self.map_coefficients(|z| Complex64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> Self {
        self.map_coefficients(|z| Complex64::new(z.im, 0.0))
    }

    /// Re-expresses the function on the union of its breakpoints and `extra`
    /// (points outside the open domain are ignored).
    pub fn refine(&self, extra: &[f64]) -> Self {
        let (a, b) = self.domain();
        let mut pts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .chain(extra.iter().copied().filter(|&t| t > a && t < b))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() == self.breakpoints.len() {
            return self.clone();
        }
        let pieces = pts
            .windows(2)
            .map(|w| {
                let i = self.piece_index(w[0]);
                taylor_shift(&self.pieces[i], w[0] - self.breakpoints[i])
            })
            .collect();
        Self {
            breakpoints: pts,
            pieces,
        }
    }

    fn check_same_domain(&self, other: &Self) -> Result<()> {
        let (a1, b1) = self.domain();
        let (a2, b2) = other.domain();
        if a1 != a2 || b1 != b2 {
            return Err(Error::DimensionMismatch(format!(
                "piecewise polynomials on [{a1}, {b1}] and [{a2}, {b2}]"
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        let lhs = self.refine(&other.breakpoints);
        let rhs = other.refine(&self.breakpoints);
        let pieces = lhs
            .pieces
            .iter()
            .zip(&rhs.pieces)
            .map(|(p, q)| {
                let n = p.len().max(q.len());
                (0..n)
                    .map(|k| p.get(k).copied().unwrap_or(ZERO) + q.get(k).copied().unwrap_or(ZERO))
                    .collect()
            })
            .collect();
        Ok(Self {
            breakpoints: lhs.breakpoints,
            pieces,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise `max(Re p, 0)` as a real piecewise polynomial; pieces are split
    /// at the sign changes of the real part.
    pub fn positive_part(&self) -> Self {
        self.clipped(1.0)
    }

    /// Pointwise `max(-Re p, 0)`.
    pub fn negative_part(&self) -> Self {
        self.clipped(-1.0)
    }

    fn clipped(&self, sign: f64) -> Self {
        let mut breakpoints = vec![self.breakpoints[0]];
        let mut pieces = Vec::new();
        for (i, c) in self.pieces.iter().enumerate() {
            let re: Vec<f64> = c.iter().map(|z| sign * z.re).collect();
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            let mut cuts = vec![0.0];
            for root in sign_changes(&re, 0.0, h) {
                if root - cuts.last().unwrap() > 1e-14 * h.max(1.0) && h - root > 1e-14 * h.max(1.0)
                {
                    cuts.push(root);
                }
            }
            cuts.push(h);
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let keep = horner_real(&re, mid) > 0.0;
                let piece = if keep {
                    taylor_shift(
                        &re.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
                        w[0],
                    )
                } else {
                    vec![ZERO]
                };
                pieces.push(piece);
                breakpoints.push(self.breakpoints[i] + w[1]);
            }
            *breakpoints.last_mut().unwrap() = self.breakpoints[i + 1];
        }
        Self { breakpoints, pieces }
    }

    /// Verifies that derivatives `0..=order` match across interior breakpoints
    /// to `tol` (relative to the local magnitude, floored at 1).
    pub fn check_continuity(&self, order: usize, tol: f64) -> Result<()> {
        for i in 1..self.breakpoints.len() - 1 {
            let h = self.breakpoints[i] - self.breakpoints[i - 1];
            for k in 0..=order {
                let left = horner_derivative(&self.pieces[i - 1], h, k);
                let right = horner_derivative(&self.pieces[i], 0.0, k);
                let scale = left.norm().max(right.norm()).max(1.0);
                if (left - right).norm() > tol * scale {
                    return Err(Error::InvalidInput(format!(
                        "derivative of order {k} jumps by {:e} at breakpoint t = {}",
                        (left - right).norm(),
                        self.breakpoints[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn horner(c: &[Complex64], s: f64) -> Complex64 {
    c.iter().rev().fold(ZERO, |acc, z| acc * s + z)
}

fn horner_real(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, z| acc * s + z)
}

fn horner_derivative(c: &[Complex64], s: f64, order: usize) -> Complex64 {
    if order >= c.len() {
        return ZERO;
    }
    let mut acc = ZERO;
    for k in (order..c.len()).rev() {
        let falling: f64 = ((k - order + 1)..=k).map(|x| x as f64).product();
        acc = acc * s + c[k] * falling;
    }
    acc
}

fn poly_derivative(c: &[Complex64]) -> Vec<Complex64> {
    if c.len() <= 1 {
        return vec![ZERO];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, z)| z * k as f64)
        .collect()
}

/// Coefficients of `p(s + shift)` given those of `p(s)`.
pub(crate) fn taylor_shift(c: &[Complex64], shift: f64) -> Vec<Complex64> {
    let mut out = c.to_vec();
    if shift == 0.0 {
        return out;
    }
    let n = out.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let carry = out[j + 1] * shift;
            out[j] += carry;
        }
    }
    out
}

/// Points in `(lo, hi)` where the real polynomial changes sign.
///
/// Extrema come from the sign changes of the derivative (recursively); the
/// polynomial is monotone between consecutive extrema, so each bracket holds at
/// most one crossing, located by bisection.
pub(crate) fn sign_changes(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let deg = match c.iter().rposition(|&x| x != 0.0) {
        Some(d) => d,
        None => return Vec::new(),
    };
    if deg == 0 {
        return Vec::new();
    }
    let c = &c[..=deg];
    let dc: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, x)| x * k as f64).collect();
    let mut knots = vec![lo];
    knots.extend(sign_changes(&dc, lo, hi));
    knots.push(hi);

    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut l, mut r) = (w[0], w[1]);
        let (fl, fr) = (horner_real(c, l), horner_real(c, r));
        if fl == 0.0 || fr == 0.0 || fl.signum() == fr.signum() {
            continue;
        }
        let sl = fl.signum();
        for _ in 0..200 {
            let mid = 0.5 * (l + r);
            if mid <= l || mid >= r {
                break;
            }
            let fm = horner_real(c, mid);
            if fm == 0.0 {
                l = mid;
                r = mid;
                break;
            }
            if fm.signum() == sl {
                l = mid;
            } else {
                r = mid;
            }
        }
        roots.push(0.5 * (l + r));
    }
    // Exact zeros at interior knots (odd multiplicity through an extremum of
    // the derivative) are crossings too.
    for w in knots.windows(3) {
        let t = w[1];
        if horner_real(c, t) == 0.0 {
            let before = horner_real(c, 0.5 * (w[0] + t));
            let after = horner_real(c, 0.5 * (t + w[2]));
            if before.signum() != after.signum() && before != 0.0 && after != 0.0 {
                roots.push(t);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}
