use deformed_sine::classical_pv::{series_seed, sigma_form_residual};
use deformed_sine::fredholm::{log_det, unwrap_branch, weight_determinant, DetConfig};
use deformed_sine::operators::{
    build_conjugated_operator, default_conjugated_panels, sine_kernel_value,
};
use deformed_sine::pde_lab::snap_rational;
use deformed_sine::quadrature::{gauss_legendre, integrate_real, pv_integrate};
use deformed_sine::weights::{ProfileSpec, Weight, WeightSpec};
use deformed_sine::zs::{
    compute_u1_calibrated, solve_fields, verify_trace_identities, zs_lambda_grid,
};
use deformed_sine::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn builtin(kind: u8, p: f64) -> WeightSpec {
    match kind % 4 {
        0 => WeightSpec::fermi(p).unwrap(),
        1 => WeightSpec::gaussian_square(),
        2 => WeightSpec::erf_window(p).unwrap(),
        _ => WeightSpec::smoothed_indicator(0.02 + 0.1 * p / 10.0).unwrap(),
    }
}

proptest! {
    #[test]
    fn sine_kernel_is_symmetric_and_bounded(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let a = sine_kernel_value(x, y);
        prop_assert_eq!(a, sine_kernel_value(y, x));
        prop_assert!(a.abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn gauss_legendre_is_exact_for_low_degree(
        coef in prop::collection::vec(-1.0f64..1.0, 1..12),
        a in -2.0f64..0.0,
        b in 0.1f64..2.0,
    ) {
        // order 6 integrates degree ≤ 11 exactly
        let g = gauss_legendre(6, a, b, 1).unwrap();
        let p = |x: f64| coef.iter().rev().fold(0.0, |acc, &k| acc * x + k);
        let anti = |x: f64| coef.iter().enumerate().map(|(k, &ck)| ck * x.powi(k as i32 + 1) / (k as f64 + 1.0)).sum::<f64>();
        let got = integrate_real(p, &g).unwrap();
        let r = a.abs().max(b.abs());
        let scale = coef.iter().enumerate().map(|(k, &ck)| ck.abs() * r.powi(k as i32 + 1)).sum::<f64>();
        prop_assert!((got - (anti(b) - anti(a))).abs() <= 1e-13 * (1.0 + scale));
    }

    #[test]
    fn principal_value_is_linear(
        ka in -3.0f64..3.0, kb in -3.0f64..3.0, at in -0.9f64..0.9,
    ) {
        prop_assume!((at * 8.0).fract().abs() > 1e-3);
        let g = gauss_legendre(16, -1.0, 1.0, 4).unwrap();
        let h1 = |u: f64| c(u.cos());
        let h2 = |u: f64| Complex64::new(u * u, u.sin());
        let lhs = pv_integrate(|u| h1(u) * ka + h2(u) * kb, &g, at).unwrap();
        let rhs = pv_integrate(h1, &g, at).unwrap() * ka + pv_integrate(h2, &g, at).unwrap() * kb;
        // subtraction loses ~ε|h|/|u - c| near a node
        let cond: f64 = g.nodes.iter().zip(&g.weights).map(|(u, w)| w / (u - at).abs()).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + (ka.abs() + kb.abs()) * cond));
    }

    #[test]
    fn builtin_weights_are_even_and_in_unit_interval(kind in 0u8..4, p in 0.2f64..10.0, u in -4.0f64..4.0) {
        let w = builtin(kind, p);
        let v = w.eval(u);
        prop_assert!(v.im == 0.0 && (0.0..=1.0).contains(&v.re));
        prop_assert!((v - w.eval(-u)).norm() <= 1e-15);
        prop_assert!((w.derivative(u) + w.derivative(-u)).norm() <= 1e-13 * (1.0 + w.derivative(u).norm()));
    }

    #[test]
    fn unwrapped_log_stays_on_the_same_exponential(
        re in -5.0f64..5.0, prev in -20.0f64..20.0, cur in -PI..PI,
    ) {
        let u = unwrap_branch(Complex64::new(0.0, prev), Complex64::new(re, cur));
        let k = (u.im - cur) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() <= 1e-9);
        prop_assert!((u.im - prev).abs() <= PI + 1e-9);
    }

    #[test]
    fn snapping_recovers_small_rationals(n in -12i64..12, d in 1i64..=4, noise in -1e-4f64..1e-4) {
        let x = n as f64 / d as f64 + noise;
        let (r, dist) = snap_rational(c(x), 1e-3);
        let (rn, rd) = r.unwrap();
        prop_assert!((rn as f64 / rd as f64 - n as f64 / d as f64).abs() <= 1e-12);
        prop_assert!(dist <= noise.abs() + 1e-12);
    }

    #[test]
    fn series_seed_solves_the_sigma_form(ell in 0.0f64..1.0, x in 1e-4f64..1e-3) {
        let [nu, d1, d2, _] = series_seed(c(ell), x);
        // the first neglected term enters at x⁹
        prop_assert!(sigma_form_residual(x, nu, d1, d2).norm() <= 1e-18);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn determinant_of_unit_range_weight_lies_in_unit_interval(kind in 0u8..4, p in 0.2f64..10.0, s in 0.05f64..6.0) {
        let w: Arc<dyn Weight> = Arc::new(builtin(kind, p));
        let r = weight_determinant(w, s, &DetConfig::default()).unwrap();
        prop_assert!(r.det.re > 0.0 && r.det.re <= 1.0 && r.det.im.abs() <= 1e-15, "{:?}", r.det);
    }

    #[test]
    fn determinant_decreases_with_s(alpha in 0.2f64..5.0, s in 0.1f64..4.0) {
        let w: Arc<dyn Weight> = Arc::new(WeightSpec::fermi(alpha).unwrap());
        let cfg = DetConfig::default();
        let a = weight_determinant(w.clone(), s, &cfg).unwrap().log_det.re;
        let b = weight_determinant(w, s * 1.1, &cfg).unwrap().log_det.re;
        prop_assert!(b < a);
    }

    #[test]
    fn profile_shift_matches_fermi_alpha(y in -1.5f64..1.5, s in 0.2f64..3.0) {
        // W(u² - y) = 1/(e^{-4y} e^{4u²} + 1)
        let p: Arc<dyn Weight> = Arc::new(ProfileSpec::fermi_factor(y).unwrap());
        let w: Arc<dyn Weight> = Arc::new(WeightSpec::fermi((-4.0 * y).exp()).unwrap());
        let n = default_conjugated_panels(p.as_ref(), s, 16).unwrap();
        let a = log_det(&build_conjugated_operator(p, s, 16, n).unwrap()).log_det;
        let b = log_det(&build_conjugated_operator(w, s, 16, n).unwrap()).log_det;
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trace_identities_hold_for_random_fermi(alpha in 0.3f64..3.0, s in 0.3f64..2.5) {
        let w: Arc<dyn Weight> = Arc::new(WeightSpec::fermi(alpha).unwrap());
        let grid = zs_lambda_grid(w.as_ref(), s, 16).unwrap();
        let f = solve_fields(w, s, &grid).unwrap();
        let u = compute_u1_calibrated(&f).unwrap();
        let r = verify_trace_identities(&f, &u).unwrap();
        prop_assert!(r.max() <= 1e-6, "{:?}", r);
    }
}
