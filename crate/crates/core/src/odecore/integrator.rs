//! Dormand-Prince 5(4) with step-size control, restarted at every breakpoint of
//! the coefficient data.

use std::sync::Arc;

use num_complex::Complex64;

use super::solution::{Interval, SolutionFunction};
use super::LinearOdeSystem;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn combine(base: &CMatrix, h: f64, coeffs: &[f64], ks: &[CMatrix]) -> CMatrix {
    let mut out = base.clone();
    for (c, k) in coeffs.iter().zip(ks) {
        if *c != 0.0 {
            out.add_scaled(k, Complex64::new(h * c, 0.0))
                .expect("stage shapes agree");
        }
    }
    out
}

fn error_norm(err: &CMatrix, u0: &CMatrix, u1: &CMatrix, opts: &IntegratorOptions) -> f64 {
    let n = err.as_slice().len().max(1);
    let sum: f64 = err
        .as_slice()
        .iter()
        .zip(u0.as_slice().iter().zip(u1.as_slice()))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn scaled_norm(x: &CMatrix, u: &CMatrix, opts: &IntegratorOptions) -> f64 {
    let n = x.as_slice().len().max(1);
    let sum: f64 = x
        .as_slice()
        .iter()
        .zip(u.as_slice())
        .map(|(v, s)| (v.norm() / (opts.atol + opts.rtol * s.norm())).powi(2))
        .sum();
    (sum / n as f64).sqrt()
}

/// Starting step after Hairer, Norsett and Wanner (II.4).
fn initial_step(
    sys: &LinearOdeSystem,
    t: f64,
    u: &CMatrix,
    f0: &CMatrix,
    weights: &[Complex64],
    span: f64,
    opts: &IntegratorOptions,
) -> f64 {
    let d0 = scaled_norm(u, u, opts);
    let d1 = scaled_norm(f0, u, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    }
    .min(span);
    let u1 = combine(u, h0, &[1.0], std::slice::from_ref(f0));
    let (f1, _) = sys.companion_rhs(t + h0, false, &u1, weights, false);
    let mut diff = f1;
    diff.add_scaled(f0, Complex64::new(-1.0, 0.0)).unwrap();
    let d2 = scaled_norm(&diff, u, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (1e-6 * span).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

pub(super) fn integrate(
    sys: &Arc<LinearOdeSystem>,
    init: CMatrix,
    weights: Vec<Complex64>,
    opts: &IntegratorOptions,
) -> Result<SolutionFunction> {
    if init.nrows() != sys.state_dim() || init.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "initial state is {}x{} with {} forcing weights, state dimension is {}",
            init.nrows(),
            init.ncols(),
            weights.len(),
            sys.state_dim()
        )));
    }
    let (a, b) = sys.domain();
    let mut intervals = Vec::new();
    let mut u = init;
    let mut h_prev: Option<f64> = None;
    let mut steps = 0usize;

    for seg in sys.breakpoints().windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let span = hi - lo;
        let mut t = lo;
        let (mut k1, mut dd1) = {
            let (f, d) = sys.companion_rhs(t, false, &u, &weights, true);
            (f, d.unwrap())
        };
        let mut h = match h_prev {
            Some(h) => h.min(span),
            None => initial_step(sys, t, &u, &k1, &weights, span, opts),
        };

        while t < hi {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("exceeded {} steps", opts.max_steps),
                });
            }
            let mut last = false;
            if t + h >= hi - 1e-13 * span {
                h = hi - t;
                last = true;
            }
            if h <= 1e-14 * (b - a).max(t.abs()) {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }

            let mut ks: Vec<CMatrix> = Vec::with_capacity(7);
            ks.push(k1.clone());
            for s in 1..7 {
                let ts = if C[s] == 1.0 && last { hi } else { t + C[s] * h };
                let us = combine(&u, h, &A[s][..s], &ks);
                let (k, _) = sys.companion_rhs(ts, C[s] == 1.0 && last, &us, &weights, false);
                ks.push(k);
            }
            // Row 7 of A holds the fifth-order weights, so stage 7 was taken at
            // the new solution (FSAL).
            let u_new = combine(&u, h, &A[6], &ks);
            let err = combine(&CMatrix::zeros(u.nrows(), u.ncols()), h, &E, &ks);
            let err_norm = error_norm(&err, &u, &u_new, opts);

            if !err_norm.is_finite() || u_new.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: "non-finite state".into(),
                });
            }

            if err_norm <= 1.0 {
                let t_new = if last { hi } else { t + h };
                let (du_new, dd_new) = {
                    let (f, d) = sys.companion_rhs(t_new, last, &u_new, &weights, true);
                    (f, d.unwrap())
                };
                intervals.push(Interval {
                    t0: t,
                    t1: t_new,
                    u0: u.clone(),
                    du0: k1.clone(),
                    ddu0: dd1.clone(),
                    u1: u_new.clone(),
                    du1: du_new.clone(),
                    ddu1: dd_new.clone(),
                });
                let fac = if err_norm == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                if !last || h_prev.is_none() {
                    h_prev = Some(h * fac);
                }
                let h_next = h * fac;
                t = t_new;
                u = u_new;
                k1 = du_new;
                dd1 = dd_new;
                h = h_next;
                if last {
                    break;
                }
            } else {
                h *= (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, 1.0);
            }
        }
    }

    Ok(SolutionFunction::from_parts(Arc::clone(sys), intervals, weights))
}
