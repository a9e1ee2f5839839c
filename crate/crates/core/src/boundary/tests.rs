use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::odecore::{fundamental_with_particular, initial_value_solution, IntegratorOptions, LinearOdeSystem};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn poly_derivative(c: &[f64], order: usize) -> Vec<f64> {
    let mut c = c.to_vec();
    for _ in 0..order {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c = c.iter().enumerate().skip(1).map(|(k, x)| k as f64 * x).collect();
    }
    c
}

/// Exact `\int_a^b p q` for monomial-coefficient polynomials.
fn poly_product_integral(p: &[f64], q: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for (i, x) in p.iter().enumerate() {
        for (j, y) in q.iter().enumerate() {
            let e = (i + j + 1) as i32;
            total += x * y * (b.powi(e) - a.powi(e)) / e as f64;
        }
    }
    total
}

/// Scalar solution `y = p` of `y^(r) = p^(r)` with smoothness `n`.
fn polynomial_solution(p: &[f64], r: usize, n: usize, a: f64, b: f64) -> SolutionFunction {
    let forcing = vec![PiecewisePolynomial::from_global_real(a, b, &poly_derivative(p, r))];
    let sys = Arc::new(LinearOdeSystem::pure_derivative(r, n, forcing).unwrap());
    let init: Vec<Complex64> = (0..r).map(|i| re(poly_eval(&poly_derivative(p, i), a))).collect();
    initial_value_solution(&sys, &init, &IntegratorOptions::default()).unwrap()
}

fn single_row(n: usize, term: CanonicalTerm, a: f64, b: f64) -> GeneralBoundaryOperator {
    GeneralBoundaryOperator::from_terms(n, 1, 1, (a, b), &[vec![(0, term)]]).unwrap()
}

#[test]
fn integral_condition_on_the_function() {
    // \int_0^1 y dt with y = t^3 + t
    let w = NbvFunction::from_density(PiecewisePolynomial::constant(0.0, 1.0, re(1.0)));
    let term = canonicalize_integral_condition(0, &w, 2).unwrap();
    assert_abs_diff_eq!(term.alphas[0].re, 1.0, epsilon = 1e-14);
    assert_abs_diff_eq!(term.alphas[1].re, 0.5, epsilon = 1e-14);
    let op = single_row(2, term, 0.0, 1.0);
    let y = polynomial_solution(&[0.0, 1.0, 0.0, 1.0], 1, 2, 0.0, 1.0);
    let val = apply_general(&op, &y).unwrap();
    assert_abs_diff_eq!(val[(0, 0)].re, 0.75, epsilon = 1e-10);
}

#[test]
fn point_conditions_reproduce_values() {
    let p = [0.3, -1.0, 0.5, 2.0];
    let y = polynomial_solution(&p, 2, 3, -1.0, 1.0);
    for &t in &[-1.0, -0.4, 0.0, 0.6, 1.0] {
        for level in 0..=3 {
            let term = canonicalize_point_condition(level, t, 3, (-1.0, 1.0)).unwrap();
            let op = GeneralBoundaryOperator::from_terms(3, 2, 1, (-1.0, 1.0), &[vec![(0, term.clone())], vec![(0, term)]])
                .unwrap();
            let val = apply_general(&op, &y).unwrap();
            let exact = poly_eval(&poly_derivative(&p, level), t);
            assert_abs_diff_eq!(val[(0, 0)].re, exact, epsilon = 1e-9);
        }
    }
}

#[test]
fn top_level_conditions_keep_their_integrator() {
    let mu = NbvFunction::new(
        PiecewisePolynomial::from_global_real(0.0, 1.0, &[1.0, 1.0]),
        vec![Atom::new(0.5, re(2.0))],
    )
    .unwrap();
    let term = canonicalize_integral_condition(2, &mu, 2).unwrap();
    assert!(term.alphas.iter().all(|z| z.norm() == 0.0));
    assert_eq!(term.integrator, mu);
    assert_eq!(
        canonicalize_integral_condition(1, &mu, 2),
        Err(Error::UnsupportedWeight { order: 1 })
    );
    assert!(canonicalize_integral_condition(3, &mu, 2).is_err());
}

#[test]
fn step_integrators_are_discretized_exactly() {
    let g = NbvFunction::from_jumps(
        0.0,
        1.0,
        vec![Atom::new(0.0, re(1.0)), Atom::new(0.25, re(-0.5)), Atom::new(1.0, Complex64::new(0.0, 2.0))],
    )
    .unwrap();
    let alphas = vec![CMatrix::from_fn(1, 1, |_, _| re(0.7))];
    let op = GeneralBoundaryOperator::new(1, 1, 1, alphas, vec![g]).unwrap();
    assert!(op.is_multipoint());
    let y = polynomial_solution(&[1.0, -2.0, 3.0], 1, 1, 0.0, 1.0);
    for k in [1, 3, 17] {
        let bk = discretize_boundary(&op, k).unwrap();
        assert_eq!(bk.nodes(), &[0.0, 0.25, 1.0]);
        assert!(boundary_discrepancy(&op, &bk, &y).unwrap() < 1e-12);
    }
}

#[test]
fn alpha_part_sits_at_the_left_node() {
    let w = NbvFunction::from_density(PiecewisePolynomial::from_global_real(0.0, 2.0, &[1.0, -0.5]));
    let term = canonicalize_integral_condition(0, &w, 1).unwrap();
    let op = single_row(1, term.clone(), 0.0, 2.0);
    let bk = discretize_boundary(&op, 4).unwrap();
    assert_eq!(bk.nodes()[0], 0.0);
    assert_eq!(bk.beta(0, 0)[(0, 0)], term.alphas[0]);
    // k equal masses g(b)/(k+1) for an increasing integrator
    let total: Complex64 = (0..bk.node_count()).map(|j| bk.beta(j, 1)[(0, 0)]).sum();
    assert_abs_diff_eq!(total.re, 0.8 * term.integrator.eval(2.0).re, epsilon = 1e-12);
}

#[test]
fn discrepancy_shrinks_with_the_index() {
    // \int_0^1 y cos(3t) with y = e^t-like data: use a cubic
    let w = NbvFunction::from_density(PiecewisePolynomial::from_global_real(0.0, 1.0, &[1.0, -4.5, 0.0, 4.5]));
    let term = canonicalize_integral_condition(0, &w, 1).unwrap();
    let op = single_row(1, term, 0.0, 1.0);
    let y = polynomial_solution(&[0.2, 1.0, -1.0, 0.5], 1, 1, 0.0, 1.0);
    let errs: Vec<f64> = [4, 16, 64, 256]
        .iter()
        .map(|&k| boundary_discrepancy(&op, &discretize_boundary(&op, k).unwrap(), &y).unwrap())
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    assert!(errs[3] < 1e-2);
}

#[test]
fn apply_is_columnwise() {
    let a0 = CMatrix::from_fn(1, 1, |_, _| re(1.0));
    let sys = Arc::new(
        LinearOdeSystem::new(
            2,
            2,
            vec![
                crate::odecore::PolyMatrix::constant(0.0, 1.0, &a0),
                crate::odecore::PolyMatrix::zeros(1, 0.0, 1.0),
            ],
            vec![PiecewisePolynomial::from_global_real(0.0, 1.0, &[1.0, 2.0])],
        )
        .unwrap(),
    );
    let y = fundamental_with_particular(&sys, &IntegratorOptions::default()).unwrap();
    let w = NbvFunction::from_density(PiecewisePolynomial::from_global_real(0.0, 1.0, &[0.0, 1.0]));
    let rows = vec![
        vec![(0, canonicalize_point_condition(0, 0.0, 2, (0.0, 1.0)).unwrap())],
        vec![(0, canonicalize_integral_condition(1, &w, 2).unwrap())],
    ];
    let op = GeneralBoundaryOperator::from_terms(2, 2, 1, (0.0, 1.0), &rows).unwrap();
    let all = apply_general(&op, &y).unwrap();
    let mix = CMatrix::from_fn(3, 1, |i, _| re([0.5, -2.0, 1.0][i]));
    let combined = apply_general(&op, &y.combine(&mix).unwrap()).unwrap();
    let expected = all.mul(&mix).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(combined[(i, 0)].re, expected[(i, 0)].re, epsilon = 1e-10);
    }
    let bk = discretize_boundary(&op, 8).unwrap();
    let m_all = apply_multipoint(&bk, &y).unwrap();
    let m_comb = apply_multipoint(&bk, &y.combine(&mix).unwrap()).unwrap();
    let m_exp = m_all.mul(&mix).unwrap();
    for i in 0..2 {
        assert_abs_diff_eq!(m_comb[(i, 0)].re, m_exp[(i, 0)].re, epsilon = 1e-10);
    }
}

#[test]
fn dimension_checks() {
    let y = polynomial_solution(&[1.0], 1, 1, 0.0, 1.0);
    let op = GeneralBoundaryOperator::new(
        2,
        2,
        1,
        vec![CMatrix::zeros(2, 1); 2],
        vec![NbvFunction::zero(0.0, 1.0); 2],
    )
    .unwrap();
    assert!(matches!(apply_general(&op, &y), Err(Error::DimensionMismatch(_))));
    assert!(GeneralBoundaryOperator::new(2, 2, 1, vec![CMatrix::zeros(2, 1)], vec![NbvFunction::zero(0.0, 1.0); 2]).is_err());
    assert!(MultipointBoundaryOperator::new(1, 1, 1, (0.0, 1.0), vec![0.5, 0.2], vec![vec![CMatrix::zeros(1, 1); 2]; 2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn canonical_integral_matches_direct_integral(
        wc in prop::collection::vec(-2.0f64..2.0, 1..4),
        pc in prop::collection::vec(-2.0f64..2.0, 1..6),
        order in 0usize..3,
    ) {
        let (a, b) = (-0.5, 1.0);
        let n = 3;
        let w = NbvFunction::from_density(PiecewisePolynomial::from_global_real(a, b, &wc));
        let term = canonicalize_integral_condition(order, &w, n).unwrap();
        let op = single_row(n, term, a, b);
        let y = polynomial_solution(&pc, 1, n, a, b);
        let val = apply_general(&op, &y).unwrap()[(0, 0)].re;
        let exact = poly_product_integral(&poly_derivative(&pc, order), &wc, a, b);
        prop_assert!((val - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{val} vs {exact}");
    }

    #[test]
    fn discrepancy_is_bounded_by_variation_times_oscillation(
        wc in prop::collection::vec(-2.0f64..2.0, 1..4),
        k in 1usize..40,
    ) {
        // |B_k y - B y| <= V(G - G_k) osc(y^(n)) <= 2 V(G) osc(y^(n)), and the
        // step error sup|G - G_k| <= 4 V(G) / (k + 1) bounds it through parts.
        let (a, b) = (0.0, 1.0);
        let w = NbvFunction::from_density(PiecewisePolynomial::from_global_real(a, b, &wc));
        let term = canonicalize_integral_condition(1, &w, 1).unwrap();
        let op = single_row(1, term, a, b);
        let y = polynomial_solution(&[0.0, 1.0, 1.0, -1.0], 1, 1, a, b);
        let bk = discretize_boundary(&op, k).unwrap();
        let d = boundary_discrepancy(&op, &bk, &y).unwrap();
        // y' = 1 + 2t - 3t^2: total variation of y' on [0,1] is 4/3 + 1/3
        let v = op.integrator(0, 0).total_variation();
        let bound = 4.0 * v / (k as f64 + 1.0) * (1.0 + 5.0 / 3.0);
        prop_assert!(d <= bound + 1e-10, "{d} > {bound}");
    }
}
