use std::f64::consts::{E, FRAC_PI_2};
use std::sync::Arc;

use approx::assert_abs_diff_eq;

use super::*;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn scalar_system(order: usize, smoothness: usize, a: f64, b: f64, coeffs: &[f64], f: &[f64]) -> Arc<LinearOdeSystem> {
    let coefficients = coeffs
        .iter()
        .map(|&c| PolyMatrix::constant(a, b, &CMatrix::from_fn(1, 1, |_, _| re(c))))
        .collect();
    let forcing = vec![PiecewisePolynomial::from_global_real(a, b, f)];
    Arc::new(LinearOdeSystem::new(order, smoothness, coefficients, forcing).unwrap())
}

fn opts() -> IntegratorOptions {
    IntegratorOptions::default()
}

#[test]
fn rejects_inconsistent_systems() {
    let f = vec![PiecewisePolynomial::zero(0.0, 1.0)];
    assert!(LinearOdeSystem::new(0, 1, vec![], f.clone()).is_err());
    assert!(LinearOdeSystem::new(2, 1, vec![PolyMatrix::zeros(1, 0.0, 1.0); 2], f.clone()).is_err());
    assert!(LinearOdeSystem::new(2, 2, vec![PolyMatrix::zeros(1, 0.0, 1.0)], f.clone()).is_err());
    assert!(LinearOdeSystem::new(1, 1, vec![PolyMatrix::zeros(2, 0.0, 1.0)], f.clone()).is_err());
    assert!(LinearOdeSystem::new(1, 1, vec![PolyMatrix::zeros(1, 0.0, 2.0)], f.clone()).is_err());
    // coefficient with a jump cannot be C^0
    let jumpy = PiecewisePolynomial::new(vec![0.0, 0.5, 1.0], vec![vec![re(0.0)], vec![re(1.0)]]).unwrap();
    let c = PolyMatrix::new(1, vec![jumpy]).unwrap();
    assert!(LinearOdeSystem::new(1, 1, vec![c], f).is_err());
}

#[test]
fn fundamental_matrix_of_free_particle() {
    let sys = scalar_system(2, 2, 0.0, 1.0, &[0.0, 0.0], &[0.0]);
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    for &t in &[0.0, 0.13, 0.5, 0.77, 1.0] {
        let s = u.state(t).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(0, 1)].re, t, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(1, 0)].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[(1, 1)].re, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn fundamental_matrix_of_oscillator() {
    // y'' + y = 0: A_0 = 1, A_1 = 0
    let sys = scalar_system(2, 2, 0.0, FRAC_PI_2, &[1.0, 0.0], &[0.0]);
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    for i in 0..=37 {
        let t = FRAC_PI_2 * i as f64 / 37.0;
        let s = u.state(t).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, t.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(s[(0, 1)].re, t.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(s[(1, 0)].re, -t.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(s[(1, 1)].re, t.cos(), epsilon = 1e-9);
    }
}

#[test]
fn fundamental_matrix_of_growth() {
    // y' = y means A_0 = -1
    let sys = scalar_system(1, 1, 0.0, 1.0, &[-1.0], &[0.0]);
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        assert_abs_diff_eq!(u.state(t).unwrap()[(0, 0)].re, t.exp(), epsilon = 1e-9);
    }
}

#[test]
fn particular_solutions() {
    let zero = scalar_system(2, 2, 0.0, 1.0, &[3.0, -1.0], &[0.0]);
    let yp = particular_solution(&zero, &opts()).unwrap();
    assert_eq!(cn_norm(&yp, 2, 256), 0.0);

    let sq = scalar_system(2, 2, 0.0, 1.0, &[0.0, 0.0], &[2.0]);
    let yp = particular_solution(&sq, &opts()).unwrap();
    for &t in &[0.0, 0.3, 1.0] {
        assert_abs_diff_eq!(yp.jet(t, 0).unwrap()[0][(0, 0)].re, t * t, epsilon = 1e-12);
    }

    // y' - y = 1, y(0) = 0: e^t - 1
    let growth = scalar_system(1, 1, 0.0, 1.0, &[-1.0], &[1.0]);
    let yp = particular_solution(&growth, &opts()).unwrap();
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        assert_abs_diff_eq!(yp.jet(t, 0).unwrap()[0][(0, 0)].re, t.exp() - 1.0, epsilon = 1e-9);
    }
}

#[test]
fn derivative_jet_examples() {
    let free = scalar_system(2, 2, 0.0, 1.0, &[0.0, 0.0], &[0.0]);
    let y = fundamental_matrix(&free, &opts()).unwrap().column(1).unwrap();
    let jet = derivative_jet(&y, 0.5, 2).unwrap();
    assert_abs_diff_eq!(jet[0][(0, 0)].re, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!(jet[1][(0, 0)].re, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(jet[2][(0, 0)].re, 0.0, epsilon = 1e-12);

    // sin solves y'' + y = 0; order 3 needs the differentiated equation
    let osc = scalar_system(2, 3, 0.0, FRAC_PI_2, &[1.0, 0.0], &[0.0]);
    let y = fundamental_matrix(&osc, &opts()).unwrap().column(1).unwrap();
    let jet = derivative_jet(&y, 0.0, 3).unwrap();
    let expect = [0.0, 1.0, 0.0, -1.0];
    for (j, e) in jet.iter().zip(expect) {
        assert_abs_diff_eq!(j[(0, 0)].re, e, epsilon = 1e-12);
    }

    let growth = scalar_system(1, 2, 0.0, 1.0, &[-1.0], &[0.0]);
    let y = fundamental_matrix(&growth, &opts()).unwrap();
    let jet = derivative_jet(&y, 1.0, 2).unwrap();
    for j in &jet {
        assert_abs_diff_eq!(j[(0, 0)].re, E, epsilon = 1e-9);
    }

    assert!(matches!(derivative_jet(&y, 1.5, 1), Err(Error::OutOfDomain { .. })));
}

#[test]
fn cn_norm_examples() {
    let osc = scalar_system(2, 2, 0.0, FRAC_PI_2, &[1.0, 0.0], &[0.0]);
    let sine = fundamental_matrix(&osc, &opts()).unwrap().column(1).unwrap();
    assert_abs_diff_eq!(cn_norm(&sine, 2, CN_GRID), 3.0, epsilon = 1e-9);

    let zero = particular_solution(&scalar_system(2, 2, 0.0, 1.0, &[0.0, 0.0], &[0.0]), &opts()).unwrap();
    assert_eq!(cn_norm(&zero, 2, CN_GRID), 0.0);

    let growth = scalar_system(1, 1, 0.0, 1.0, &[-1.0], &[0.0]);
    let exp = fundamental_matrix(&growth, &opts()).unwrap();
    assert_abs_diff_eq!(cn_norm(&exp, 1, CN_GRID), 2.0 * E, epsilon = 1e-9);
}

/// 2x2 system of order 2 with polynomial coefficients spanning two pieces.
fn mixed_system() -> Arc<LinearOdeSystem> {
    let (a, b) = (0.0, 1.5);
    let p = |c: &[f64]| PiecewisePolynomial::from_global_real(a, b, c);
    // A_0 continuous across t = 0.7 together with its first derivative.
    let kinked = PiecewisePolynomial::from_global_real(a, b, &[1.0, 0.5, 0.2])
        .refine(&[0.7]);
    let a0 = PolyMatrix::new(2, vec![kinked, p(&[0.0, 1.0]), p(&[-0.5]), p(&[2.0, 0.0, -1.0])]).unwrap();
    let a1 = PolyMatrix::new(2, vec![p(&[0.1]), p(&[0.0]), p(&[0.3, 0.2]), p(&[-0.2])]).unwrap();
    let f = vec![p(&[1.0, -1.0, 0.5]), p(&[0.0, 2.0])];
    Arc::new(LinearOdeSystem::new(2, 3, vec![a0, a1], f).unwrap())
}

#[test]
fn liouville_log_det_matches_trace_integral() {
    let sys = mixed_system();
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    // trace of the companion matrix is -tr A_1
    let tr = |t: f64| -(sys.coefficients()[1].entry(0, 0).eval(t) + sys.coefficients()[1].entry(1, 1).eval(t));
    let steps = 4000;
    let mut integral = re(0.0);
    let b = 1.5;
    for i in 0..steps {
        let t0 = b * i as f64 / steps as f64;
        let t1 = b * (i + 1) as f64 / steps as f64;
        integral += (tr(t0) + 4.0 * tr(0.5 * (t0 + t1)) + tr(t1)) * ((t1 - t0) / 6.0);
    }
    let state = u.state(b).unwrap();
    let det = determinant(&state);
    assert!((det.ln() - integral).norm() < 1e-6, "log det {} vs {}", det.ln(), integral);
}

fn determinant(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = re(1.0);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm())).unwrap();
        if p != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = tmp;
            }
            det = -det;
        }
        det *= a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                let d = f * a[(k, j)];
                a[(i, j)] -= d;
            }
        }
    }
    det
}

#[test]
fn residuals_stay_small_at_random_points() {
    let sys = mixed_system();
    let y = particular_solution(&sys, &opts()).unwrap();
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    // fixed pseudo-random points
    let mut x = 0.123_456_789f64;
    for _ in 0..100 {
        x = (x * 9301.0 + 49297.0) % 233280.0 / 233280.0;
        let t = 1.5 * x;
        assert!(y.residual_at(t).unwrap() <= 1e-7);
        assert!(u.residual_at(t).unwrap() <= 1e-7);
    }
}

#[test]
fn low_order_jet_matches_finite_differences() {
    let sys = mixed_system();
    let y = particular_solution(&sys, &opts()).unwrap();
    let h = 1e-5;
    for &t in &[0.2, 0.65, 0.9, 1.3] {
        let jet = y.jet(t, 1).unwrap();
        let plus = y.jet(t + h, 0).unwrap();
        let minus = y.jet(t - h, 0).unwrap();
        for i in 0..2 {
            let fd = (plus[0][(i, 0)] - minus[0][(i, 0)]) / (2.0 * h);
            assert!((fd - jet[1][(i, 0)]).norm() < 1e-5);
        }
    }
}

#[test]
fn higher_jet_matches_differences_of_lower() {
    // y^(3) from the recurrence against a centered difference of y^(2)
    let sys = mixed_system();
    let y = particular_solution(&sys, &opts()).unwrap();
    let h = 1e-5;
    for &t in &[0.3, 1.1] {
        let jet = y.jet(t, 3).unwrap();
        let plus = y.jet(t + h, 2).unwrap();
        let minus = y.jet(t - h, 2).unwrap();
        for i in 0..2 {
            let fd = (plus[2][(i, 0)] - minus[2][(i, 0)]) / (2.0 * h);
            assert!((fd - jet[3][(i, 0)]).norm() < 1e-5);
        }
    }
}

#[test]
fn combined_integration_matches_separate_runs() {
    let sys = mixed_system();
    let both = fundamental_with_particular(&sys, &opts()).unwrap();
    let yp = particular_solution(&sys, &opts()).unwrap();
    let last = both.column(sys.state_dim()).unwrap();
    assert!(cn_distance(&last, &yp, 2, 256).unwrap() < 1e-8);
}

#[test]
fn cn_norm_is_a_seminorm_on_samples() {
    let sys = mixed_system();
    let u = fundamental_matrix(&sys, &opts()).unwrap();
    let y1 = u.column(0).unwrap();
    let y2 = u.column(3).unwrap();
    let c = Complex64::new(-1.5, 0.25);
    let sum = u.combine(&CMatrix::from_fn(4, 1, |i, _| match i {
        0 => re(1.0),
        3 => re(1.0),
        _ => re(0.0),
    }))
    .unwrap();
    let scaled = y1.combine(&CMatrix::from_fn(1, 1, |_, _| c)).unwrap();
    let n1 = cn_norm(&y1, 2, 512);
    let n2 = cn_norm(&y2, 2, 512);
    assert!(cn_norm(&sum, 2, 512) <= n1 + n2 + 1e-12);
    assert_abs_diff_eq!(cn_norm(&scaled, 2, 512), c.norm() * n1, epsilon = 1e-12 * n1);
}
