//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex vector-valued
//! integrands.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and work budget for [`integrate_vec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Relative to the integral of the modulus of the integrand.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-15,
            max_subdivisions: 4000,
        }
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    value: Vec<Complex64>,
    abs_value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &F, lo: f64, hi: f64, width: usize) -> Segment
where
    F: Fn(f64) -> Vec<Complex64>,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kron = vec![Complex64::new(0.0, 0.0); width];
    let mut gauss = vec![Complex64::new(0.0, 0.0); width];
    let mut abs_value = 0.0;

    let mut accumulate = |vals: &[Complex64], wk: f64, wg: Option<f64>, kron: &mut [Complex64]| {
        for (j, v) in vals.iter().enumerate() {
            kron[j] += v * wk;
            if let Some(w) = wg {
                gauss[j] += v * w;
            }
            abs_value += wk * v.norm();
        }
    };

    let fc = f(center);
    accumulate(&fc, WGK[7], Some(WG[3]), &mut kron);
    for i in 0..7 {
        let dx = half * XGK[i];
        let wg = if i % 2 == 1 { Some(WG[i / 2]) } else { None };
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        accumulate(&f1, WGK[i], wg, &mut kron);
        accumulate(&f2, WGK[i], wg, &mut kron);
    }

    let error = kron
        .iter()
        .zip(&gauss)
        .map(|(k, g)| ((k - g) * half).norm())
        .fold(0.0, f64::max);
    Segment {
        lo,
        hi,
        value: kron.into_iter().map(|k| k * half).collect(),
        abs_value: abs_value * half.abs(),
        error,
    }
}

/// Integrates a `width`-component complex integrand over `[lo, hi]`.
///
/// Converges when the summed error estimate drops below
/// `max(abs_tol, rel_tol * \int |f|)`.
pub fn integrate_vec<F>(f: F, lo: f64, hi: f64, width: usize, opts: QuadratureOptions) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> Vec<Complex64>,
{
    if width == 0 || lo == hi {
        return Ok(vec![Complex64::new(0.0, 0.0); width]);
    }
    let mut heap = BinaryHeap::new();
    heap.push(kronrod(&f, lo, hi, width));
    let mut subdivisions = 0;
    loop {
        let total_error: f64 = heap.iter().map(|s| s.error).sum();
        let total_abs: f64 = heap.iter().map(|s| s.abs_value).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total_abs);
        if total_error <= tol {
            break;
        }
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::QuadratureFailure {
                subdivisions,
                estimate: total_error,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval cannot be split further in floating point; accept it.
            heap.push(Segment { error: 0.0, ..worst });
            subdivisions += 1;
            continue;
        }
        heap.push(kronrod(&f, worst.lo, mid, width));
        heap.push(kronrod(&f, mid, worst.hi, width));
        subdivisions += 1;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); width];
    for s in heap.iter() {
        for (o, v) in out.iter_mut().zip(&s.value) {
            *o += v;
        }
    }
    Ok(out)
}

pub fn integrate<F>(f: F, lo: f64, hi: f64, opts: QuadratureOptions) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    integrate_vec(|t| vec![f(t)], lo, hi, 1, opts).map(|v| v[0])
}
