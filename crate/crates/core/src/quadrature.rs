//! Composite Gauss–Legendre quadrature and Cauchy principal values.
//!
//! Every integral in the crate goes through a [`Grid`]: semi-infinite
//! integrals are truncated at the weight's truncation radius first, then
//! integrated panel by panel. Rules are deterministic; no adaptivity.

use crate::{Complex64, Error, Result};
use std::f64::consts::PI;

/// A composite Gauss–Legendre rule on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: (f64, f64),
    pub panel_count: usize,
    pub order: usize,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same rule with every coordinate multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Grid {
        Grid {
            nodes: self.nodes.iter().map(|x| x * factor).collect(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            interval: (self.interval.0 * factor, self.interval.1 * factor),
            panel_count: self.panel_count,
            order: self.order,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`,
/// ascending. Newton iteration on the three-term recurrence.
pub fn legendre_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
pub fn gauss_legendre(order: usize, a: f64, b: f64, panels: usize) -> Result<Grid> {
    if order < 2 {
        return Err(Error::Config(format!(
            "quadrature order must be >= 2, got {order}"
        )));
    }
    if panels == 0 {
        return Err(Error::Config("panel count must be positive".into()));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "empty or invalid interval [{a}, {b}]"
        )));
    }
    let (ref_nodes, ref_weights) = legendre_rule(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        for (x, w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    Ok(Grid {
        nodes,
        weights,
        interval: (a, b),
        panel_count: panels,
        order,
    })
}

/// Rule on `[a, b]` whose mean node spacing does not exceed `spacing`.
pub fn gauss_legendre_spaced(order: usize, a: f64, b: f64, spacing: f64) -> Result<Grid> {
    if !(spacing > 0.0) {
        return Err(Error::Config(format!(
            "node spacing must be positive, got {spacing}"
        )));
    }
    let panels = ((b - a) / (spacing * order as f64)).ceil().max(1.0) as usize;
    gauss_legendre(order, a, b, panels)
}

/// `Σ ωᵢ f(uᵢ)`.
pub fn integrate<F>(f: F, grid: &Grid) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for (u, w) in grid.iter() {
        let v = f(u);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Evaluation {
                node: u,
                value: v.to_string(),
            });
        }
        acc += v * w;
    }
    Ok(acc)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, grid: &Grid) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|u| Complex64::new(f(u), 0.0), grid).map(|z| z.re)
}

/// Principal value `p.v. ∫ h(u)/(u - c) du` over the grid interval, by
/// singularity subtraction:
/// `∫ (h(u) - h(c))/(u - c) du + h(c) ln((b - c)/(c - a))`.
pub fn pv_integrate<H>(h: H, grid: &Grid, c: f64) -> Result<Complex64>
where
    H: Fn(f64) -> Complex64,
{
    let values: Vec<Complex64> = grid.nodes.iter().map(|&u| h(u)).collect();
    pv_integrate_tabulated(&values, h(c), grid, c)
}

/// [`pv_integrate`] with `h` given at the grid nodes plus its value at `c`.
pub fn pv_integrate_tabulated(
    values: &[Complex64],
    h_at_c: Complex64,
    grid: &Grid,
    c: f64,
) -> Result<Complex64> {
    let (a, b) = grid.interval;
    if !(c > a && c < b) {
        return Err(Error::Domain(format!(
            "principal-value point {c} must lie strictly inside ({a}, {b})"
        )));
    }
    debug_assert_eq!(values.len(), grid.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&u, &w), &hu) in grid.nodes.iter().zip(&grid.weights).zip(values) {
        let d = u - c;
        if d == 0.0 {
            // removable point; see pv_integrate_at_node
            continue;
        }
        let q = (hu - h_at_c) / d;
        if !(q.re.is_finite() && q.im.is_finite()) {
            return Err(Error::Evaluation {
                node: u,
                value: q.to_string(),
            });
        }
        acc += q * w;
    }
    Ok(acc + h_at_c * ((b - c) / (c - a)).ln())
}

/// Derivative at node `k` of the polynomial interpolating `values` on the
/// Gauss–Legendre panel that contains `k` (barycentric differentiation).
pub fn panel_derivative(values: &[Complex64], grid: &Grid, k: usize) -> Complex64 {
    let start = (k / grid.order) * grid.order;
    let xs = &grid.nodes[start..start + grid.order];
    let vs = &values[start..start + grid.order];
    let bary: Vec<f64> = (0..xs.len())
        .map(|j| {
            1.0 / (0..xs.len())
                .filter(|&m| m != j)
                .map(|m| xs[j] - xs[m])
                .product::<f64>()
        })
        .collect();
    let kk = k - start;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..xs.len() {
        if j != kk {
            let d = (bary[j] / bary[kk]) / (xs[kk] - xs[j]);
            acc += (vs[j] - vs[kk]) * d;
        }
    }
    acc
}

/// [`pv_integrate_tabulated`] with the singular point at node `k` of the grid;
/// the removable node uses the panel-interpolated derivative `h'(c)`.
pub fn pv_integrate_at_node(values: &[Complex64], grid: &Grid, k: usize) -> Result<Complex64> {
    let c = grid.nodes[k];
    let h_c = values[k];
    let base = pv_integrate_tabulated(values, h_c, grid, c)?;
    Ok(base + panel_derivative(values, grid, k) * grid.weights[k])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn two_point_rule() {
        let g = gauss_legendre(2, -1.0, 1.0, 1).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(g.nodes[0], -r, epsilon = 1e-15);
        assert_abs_diff_eq!(g.nodes[1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[1], 1.0, epsilon = 1e-15);
        let v = integrate_real(|x| x * x, &g).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_and_nodes_inside() {
        for &(order, panels) in &[(3, 1), (16, 5), (31, 2), (64, 1)] {
            let g = gauss_legendre(order, -0.3, 2.2, panels).unwrap();
            let sum: f64 = g.weights.iter().sum();
            assert!((sum - 2.5).abs() <= 1e-13 * 2.5, "order {order}: {sum}");
            assert!(g.nodes.iter().all(|&x| x > -0.3 && x < 2.2));
            assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for order in [2usize, 5, 16, 24] {
            let g = gauss_legendre(order, 0.0, 1.0, 1).unwrap();
            for k in 0..(2 * order) {
                let v = integrate_real(|x| x.powi(k as i32), &g).unwrap();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!((v - exact).abs() <= 1e-13 * exact, "order {order} k {k}");
            }
        }
    }

    #[test]
    fn gaussian_integral() {
        let g = gauss_legendre(16, -6.0, 6.0, 12).unwrap();
        let v = integrate_real(|u| (-u * u).exp(), &g).unwrap();
        assert_abs_diff_eq!(v, PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn constant_integral() {
        let g = gauss_legendre(4, 0.0, 2.0, 3).unwrap();
        assert_abs_diff_eq!(integrate(|_| c(1.0), &g).unwrap().re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn fermi_integral_matches_refined_rule() {
        let fermi = |u: f64| 1.0 / ((4.0 * u * u).exp() + 1.0);
        let coarse = gauss_legendre(20, 0.0, 3.1, 4).unwrap();
        let fine = gauss_legendre(20, 0.0, 3.1, 40).unwrap();
        let a = integrate_real(fermi, &coarse).unwrap();
        let b = integrate_real(fermi, &fine).unwrap();
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }

    #[test]
    fn non_finite_values_name_the_node() {
        let g = gauss_legendre(4, -1.0, 1.0, 1).unwrap();
        let err = integrate(|u| c(1.0 / (u - g.nodes[2])), &g).unwrap_err();
        match err {
            Error::Evaluation { node, .. } => assert_eq!(node, g.nodes[2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_interval_rejected() {
        assert!(matches!(
            gauss_legendre(4, 1.0, 1.0, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            gauss_legendre(1, 0.0, 1.0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn principal_value_closed_forms() {
        let g = gauss_legendre(16, -1.0, 1.0, 2).unwrap();
        let one = pv_integrate(|_| c(1.0), &g, 0.0).unwrap();
        assert_abs_diff_eq!(one.norm(), 0.0, epsilon = 1e-15);
        let off = pv_integrate(|_| c(1.0), &g, 0.5).unwrap();
        assert_abs_diff_eq!(off.re, (1.0f64 / 3.0).ln(), epsilon = 1e-15);
        let lin = pv_integrate(c, &g, 0.0).unwrap();
        assert_abs_diff_eq!(lin.re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn principal_value_rejects_boundary_points() {
        let g = gauss_legendre(8, -1.0, 1.0, 1).unwrap();
        assert!(matches!(
            pv_integrate(|_| c(1.0), &g, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            pv_integrate(|_| c(1.0), &g, -2.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn principal_value_is_stable_under_refinement() {
        let g16 = gauss_legendre(16, -1.0, 1.0, 4).unwrap();
        let g32 = gauss_legendre(16, -1.0, 1.0, 8).unwrap();
        let h = |u: f64| c(u.cos());
        let a = pv_integrate(h, &g16, 0.3).unwrap();
        let b = pv_integrate(h, &g32, 0.3).unwrap();
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn refinement_differences_decrease() {
        let f = |u: f64| (-(u * u * u * u)).exp() * (3.0 * u).cos();
        let mut prev: Option<f64> = None;
        let mut deltas = Vec::new();
        for panels in [1usize, 2, 4, 8] {
            let g = gauss_legendre(16, -3.0, 3.0, panels).unwrap();
            let v = integrate_real(f, &g).unwrap();
            if let Some(p) = prev {
                deltas.push((v - p).abs());
            }
            prev = Some(v);
        }
        assert!(
            deltas.windows(2).all(|d| d[1] <= d[0] || d[1] < 1e-14),
            "{deltas:?}"
        );
        assert!(*deltas.last().unwrap() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pv_is_linear_and_removes_factor(
                cpt in -0.9f64..0.9, a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, k in 0.1f64..3.0
            ) {
                let grid = gauss_legendre(16, -1.0, 1.0, 4).unwrap();
                let g = |u: f64| c(a0 + a1 * (k * u).sin());
                let lhs = pv_integrate(|u| (u - cpt) * g(u), &grid, cpt).unwrap();
                let rhs = integrate(g, &grid).unwrap();
                prop_assert!((lhs - rhs).norm() < 1e-12);

                let h1 = |u: f64| c((k * u).cos());
                let h2 = |u: f64| c(u * u);
                let sum = pv_integrate(|u| h1(u) * a0 + h2(u) * a1, &grid, cpt).unwrap();
                let sep = pv_integrate(h1, &grid, cpt).unwrap() * a0
                    + pv_integrate(h2, &grid, cpt).unwrap() * a1;
                // subtraction loses ~ε|h|/|u - c| near a node
                let cond: f64 = grid.nodes.iter().zip(&grid.weights).map(|(u, w)| w / (u - cpt).abs()).sum();
                prop_assert!((sum - sep).norm() < 1e-13 * (1.0 + (a0.abs() + a1.abs()) * cond));
            }
        }
    }

    #[test]
    fn principal_value_at_a_node() {
        let grid = gauss_legendre(16, -1.0, 2.0, 3).unwrap();
        let h = |u: f64| Complex64::new((0.7 * u).exp(), u.sin());
        let values: Vec<Complex64> = grid.nodes.iter().map(|&u| h(u)).collect();
        for k in [0, 5, 16, 23, 47] {
            let c = grid.nodes[k];
            // reference: the same principal value on a grid that avoids c
            let other = gauss_legendre(20, -1.0, 2.0, 7).unwrap();
            let reference = pv_integrate(h, &other, c).unwrap();
            let at_node = pv_integrate_at_node(&values, &grid, k).unwrap();
            assert!(
                (at_node - reference).norm() < 1e-11,
                "node {k}: {at_node} vs {reference}"
            );
        }
    }

    #[test]
    fn panel_derivative_is_spectral() {
        let grid = gauss_legendre(16, 0.0, 3.0, 2).unwrap();
        let values: Vec<Complex64> = grid
            .nodes
            .iter()
            .map(|&u| Complex64::new(u.cos(), 0.0))
            .collect();
        for k in 0..grid.len() {
            let d = panel_derivative(&values, &grid, k);
            assert!((d.re + grid.nodes[k].sin()).abs() < 1e-11);
        }
    }
}
