//! Kernels and their Nyström matrices.
//!
//! Two discretizations of the same determinant are provided. The *interval*
//! form works with `K_w(x,y) = ∫ e^{2πi(x-y)u} w(u) du` on `[-s/2π, s/2π]`; the
//! *conjugated* form works with `√w_s K^sin √w_s` on `[-X, X]`, `w_s(ζ) = w(πζ/s)`.
//! Matrices are stored in the symmetric Nyström scaling `√ωᵢ k(xᵢ,xⱼ) √ωⱼ`.

use crate::quadrature::{gauss_legendre, Grid};
use crate::weights::Weight;
use crate::{Complex64, Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// Default Gauss–Legendre order for every discretization.
pub const DEFAULT_ORDER: usize = 16;

/// Relative margin added to the conjugated domain beyond `sΛ/π`.
pub const DOMAIN_MARGIN: f64 = 0.1;

/// Largest ζ-panel width; 16-point panels resolve `K^sin` (exponential type π) at this width.
pub const MAX_ZETA_PANEL: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Representation {
    IntervalDeformed,
    Conjugated,
    ClassicalThinned { ell: Complex64 },
}

#[derive(Debug, Clone)]
pub enum IntervalKernel {
    Deformed(Arc<dyn Weight>),
    Classical(Complex64),
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: DMatrix<Complex64>,
    /// Nyström nodes: `x` for the interval form, `ζ` for the conjugated form.
    pub grid: Grid,
    pub representation: Representation,
    pub s: f64,
    pub weight: Option<Arc<dyn Weight>>,
    /// `√w_s` at the nodes (conjugated form only; ones otherwise).
    pub sqrt_w: Vec<Complex64>,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// `λ = πζ/s` for each conjugated node.
    pub fn lambda_nodes(&self) -> Vec<f64> {
        self.grid.nodes.iter().map(|z| PI * z / self.s).collect()
    }
}

/// `sin(π(x-y)) / (π(x-y))`.
pub fn sine_kernel_value(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d.abs() < 1e-6 {
        let t = PI * d;
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        (PI * d).sin() / (PI * d)
    }
}

/// `K_w(x,y)` by quadrature of the Fourier integral over `quad`.
pub fn deformed_kernel_value(w: &dyn Weight, x: f64, y: f64, quad: &Grid) -> Result<Complex64> {
    let d = x - y;
    if w.is_even() {
        // the cosine form is real by construction
        let re = crate::quadrature::integrate(|u| w.eval(u) * (2.0 * PI * d * u).cos(), quad)?;
        Ok(Complex64::new(re.re, 0.0))
    } else {
        crate::quadrature::integrate(
            |u| w.eval(u) * Complex64::from_polar(1.0, 2.0 * PI * d * u),
            quad,
        )
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Config(format!(
            "s must be positive and finite, got {s}"
        )));
    }
    Ok(())
}

/// Truncation radius used for grids; the zero weight gets a nominal unit support.
pub fn support_radius(w: &dyn Weight) -> Result<f64> {
    if w.is_zero() {
        return Ok(1.0);
    }
    Ok(w.truncation_radius(w.truncation_tol())?.max(0.25))
}

/// Panel count for the interval representation on `[-s/2π, s/2π]`.
pub fn default_interval_panels(kernel: &IntervalKernel, s: f64) -> Result<usize> {
    let bandwidth = match kernel {
        IntervalKernel::Classical(_) => 0.5,
        IntervalKernel::Deformed(w) => support_radius(w.as_ref())?,
    };
    // K_w has exponential type 2πΛ in x; a panel of width 2/Λ matches the sine-kernel rule
    let width = 2.0 / bandwidth;
    Ok(((s / PI) / width).ceil().max(1.0) as usize)
}

/// Fourier-integral rule in `u` for the deformed kernel at scale `s`.
pub fn fourier_grid(w: &dyn Weight, s: f64) -> Result<Grid> {
    let lam = support_radius(w)?;
    let width = (1.2 * w.length_scale()).min(2.0 * PI / s).min(lam);
    let (a, panels) = if w.is_even() {
        (0.0, (lam / width).ceil() as usize)
    } else {
        (-lam, (2.0 * lam / width).ceil() as usize)
    };
    let g = gauss_legendre(20, a, lam, panels.max(1))?;
    if w.is_even() {
        // fold the symmetric half back to the full line
        Ok(Grid {
            weights: g.weights.iter().map(|x| 2.0 * x).collect(),
            ..g
        })
    } else {
        Ok(g)
    }
}

/// Nyström matrix of `ℓK^sin` or `K_w` on `[-s/2π, s/2π]`.
pub fn build_interval_operator(
    kernel: &IntervalKernel,
    s: f64,
    order: usize,
    panels: usize,
) -> Result<DiscreteOperator> {
    check_s(s)?;
    let half = s / (2.0 * PI);
    let grid = gauss_legendre(order, -half, half, panels)?;
    let n = grid.len();
    let sq: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let (matrix, representation, weight) = match kernel {
        IntervalKernel::Classical(ell) => {
            let m = DMatrix::from_fn(n, n, |i, j| {
                *ell * (sq[i] * sine_kernel_value(grid.nodes[i], grid.nodes[j]) * sq[j])
            });
            (m, Representation::ClassicalThinned { ell: *ell }, None)
        }
        IntervalKernel::Deformed(w) => {
            let m = if w.is_zero() {
                DMatrix::zeros(n, n)
            } else {
                deformed_matrix(w.as_ref(), &grid, &sq, s)?
            };
            (m, Representation::IntervalDeformed, Some(w.clone()))
        }
    };
    Ok(DiscreteOperator {
        matrix,
        grid,
        representation,
        s,
        weight,
        sqrt_w: vec![Complex64::new(1.0, 0.0); n],
    })
}

fn deformed_matrix(w: &dyn Weight, grid: &Grid, sq: &[f64], s: f64) -> Result<DMatrix<Complex64>> {
    let quad = fourier_grid(w, s)?;
    let wu: Vec<Complex64> = quad.iter().map(|(u, om)| w.eval(u) * om).collect();
    if let Some(k) = wu.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            node: quad.nodes[k],
            value: format!("{}", wu[k]),
        });
    }
    let n = grid.len();
    let even = w.is_even();
    // K_w depends on x - y only; tabulate on the distinct differences row by row
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = grid.nodes[i] - grid.nodes[j];
                    let k: Complex64 = if even {
                        let re: f64 = quad
                            .nodes
                            .iter()
                            .zip(&wu)
                            .map(|(u, c)| c.re * (2.0 * PI * d * u).cos())
                            .sum();
                        Complex64::new(re, 0.0)
                    } else {
                        quad.nodes
                            .iter()
                            .zip(&wu)
                            .map(|(u, c)| c * Complex64::from_polar(1.0, 2.0 * PI * d * u))
                            .sum()
                    };
                    k * (sq[i] * sq[j])
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Default λ-grid for the conjugated form: covers `[-X', X']` in `λ`, with
/// `X' = (1 + margin)Λ`, panels no wider than the weight's resolution scale in
/// `λ` and no wider than [`MAX_ZETA_PANEL`] in `ζ` for every `s ≤ s_max`.
pub fn default_lambda_grid(w: &dyn Weight, s_max: f64, order: usize) -> Result<Grid> {
    check_s(s_max)?;
    let lam = support_radius(w)? * (1.0 + DOMAIN_MARGIN);
    let width = (2.0 * w.length_scale()).min(MAX_ZETA_PANEL * PI / s_max);
    let panels = (2.0 * lam / width).ceil().max(2.0) as usize;
    gauss_legendre(order, -lam, lam, panels)
}

/// Nyström matrix of `√w_s K^sin √w_s` on the default grid.
pub fn build_conjugated_operator(
    w: Arc<dyn Weight>,
    s: f64,
    order: usize,
    panels: usize,
) -> Result<DiscreteOperator> {
    check_s(s)?;
    let lam = support_radius(w.as_ref())? * (1.0 + DOMAIN_MARGIN);
    let grid = gauss_legendre(order, -lam, lam, panels)?;
    build_conjugated_on_lambda_grid(w, s, &grid)
}

/// Panel count for [`build_conjugated_operator`] at scale `s`.
pub fn default_conjugated_panels(w: &dyn Weight, s: f64, order: usize) -> Result<usize> {
    Ok(default_lambda_grid(w, s, order)?.panel_count)
}

/// Conjugated operator whose ζ-nodes are the image `ζ = sλ/π` of a λ-grid.
/// Sharing one λ-grid across `(y, s)` keeps σ a smooth function of both.
pub fn build_conjugated_on_lambda_grid(
    w: Arc<dyn Weight>,
    s: f64,
    lambda_grid: &Grid,
) -> Result<DiscreteOperator> {
    check_s(s)?;
    let grid = lambda_grid.scaled(s / PI);
    let n = grid.len();
    let mut sqrt_w = Vec::with_capacity(n);
    for &l in &lambda_grid.nodes {
        let v = w.eval(l);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                node: l,
                value: format!("{v}"),
            });
        }
        sqrt_w.push(v.sqrt());
    }
    let a: Vec<Complex64> = sqrt_w
        .iter()
        .zip(&grid.weights)
        .map(|(r, om)| r * om.sqrt())
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        a[i] * sine_kernel_value(grid.nodes[i], grid.nodes[j]) * a[j]
    });
    Ok(DiscreteOperator {
        matrix,
        grid,
        representation: Representation::Conjugated,
        s,
        weight: Some(w),
        sqrt_w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_spaced;
    use crate::weights::{ProfileSpec, WeightSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn fermi() -> Arc<dyn Weight> {
        Arc::new(WeightSpec::fermi(1.0).unwrap())
    }

    fn trace(m: &DMatrix<Complex64>) -> Complex64 {
        (0..m.nrows()).map(|i| m[(i, i)]).sum()
    }

    fn real_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
        let re = m.map(|z| z.re);
        SymmetricEigen::new(re)
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    #[test]
    fn sine_kernel_values() {
        assert_eq!(sine_kernel_value(0.3, 0.3), 1.0);
        assert_abs_diff_eq!(sine_kernel_value(0.5, 0.0), 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(sine_kernel_value(1.0, 0.0), 0.0, epsilon = 1e-15);
        // series branch joins the closed form continuously
        let d = 1.0000001e-6;
        let direct = (PI * d).sin() / (PI * d);
        assert_abs_diff_eq!(sine_kernel_value(d, 0.0), direct, epsilon = 1e-15);
    }

    #[test]
    fn deformed_kernel_diagonal_is_total_mass() {
        let w = fermi();
        let quad = fourier_grid(w.as_ref(), 1.0).unwrap();
        let k = deformed_kernel_value(w.as_ref(), 0.2, 0.2, &quad).unwrap();
        let lam = w.truncation_radius(1e-16).unwrap();
        let fine = gauss_legendre_spaced(24, 0.0, lam, 0.005).unwrap();
        let mass = 2.0 * crate::quadrature::integrate_real(|u| w.eval(u).re, &fine).unwrap();
        assert_abs_diff_eq!(k.re, mass, epsilon = 1e-13);
        assert_eq!(k.im, 0.0);
    }

    #[test]
    fn deformed_kernel_approaches_sine_kernel_for_sharp_indicator() {
        let target = sine_kernel_value(0.5, 0.0);
        let mut last = f64::INFINITY;
        for &eps in &[0.1, 0.05, 0.025, 0.0125] {
            let w = WeightSpec::smoothed_indicator(eps).unwrap();
            let quad = fourier_grid(&w, 1.0).unwrap();
            let k = deformed_kernel_value(&w, 0.5, 0.0, &quad).unwrap();
            assert_eq!(k.im, 0.0);
            let err = (k.re - target).abs();
            assert!(err < last, "eps {eps}: {err} !< {last}");
            last = err;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn classical_traces_and_zero() {
        let zero = build_interval_operator(
            &IntervalKernel::Classical(Complex64::new(0.0, 0.0)),
            1.0,
            16,
            1,
        )
        .unwrap();
        assert!(zero.matrix.iter().all(|z| z.norm() == 0.0));
        for &(ell, s) in &[(1.0, 1.0), (0.5, 3.0), (0.9, 7.5)] {
            let op = build_interval_operator(
                &IntervalKernel::Classical(Complex64::new(ell, 0.0)),
                s,
                16,
                2,
            )
            .unwrap();
            assert_abs_diff_eq!(trace(&op.matrix).re, ell * s / PI, epsilon = 1e-13);
        }
    }

    #[test]
    fn interval_and_conjugated_traces_agree_with_mass() {
        let w = fermi();
        let s = 1.0;
        let mass = w.total_mass().unwrap().re;
        let kernel = IntervalKernel::Deformed(w.clone());
        let panels = default_interval_panels(&kernel, s).unwrap();
        let a = build_interval_operator(&kernel, s, 16, panels).unwrap();
        let b = build_conjugated_operator(
            w.clone(),
            s,
            16,
            default_conjugated_panels(w.as_ref(), s, 16).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(trace(&a.matrix).re, s / PI * mass, epsilon = 1e-10);
        assert_abs_diff_eq!(trace(&b.matrix).re, s / PI * mass, epsilon = 1e-10);
    }

    #[test]
    fn zero_weight_gives_zero_matrix() {
        let w: Arc<dyn Weight> = Arc::new(WeightSpec::zero());
        let op = build_conjugated_operator(w.clone(), 1.0, 16, 4).unwrap();
        assert!(op.matrix.iter().all(|z| z.norm() == 0.0));
        let op = build_interval_operator(&IntervalKernel::Deformed(w), 1.0, 16, 1).unwrap();
        assert!(op.matrix.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn symmetry_and_spectrum_of_range01_weights() {
        let weights: Vec<Arc<dyn Weight>> = vec![
            fermi(),
            Arc::new(WeightSpec::gaussian_square()),
            Arc::new(ProfileSpec::fermi_factor(2.0).unwrap()),
            Arc::new(WeightSpec::erf_window(2.0).unwrap()),
        ];
        for w in weights {
            for &s in &[0.5, 1.0, 5.0] {
                let kernel = IntervalKernel::Deformed(w.clone());
                let a = build_interval_operator(
                    &kernel,
                    s,
                    16,
                    default_interval_panels(&kernel, s).unwrap(),
                )
                .unwrap();
                let b = build_conjugated_operator(
                    w.clone(),
                    s,
                    16,
                    default_conjugated_panels(w.as_ref(), s, 16).unwrap(),
                )
                .unwrap();
                for op in [&a, &b] {
                    let n = op.dim();
                    for i in 0..n {
                        for j in 0..n {
                            assert!((op.matrix[(i, j)] - op.matrix[(j, i)]).norm() <= 1e-14);
                            assert_eq!(op.matrix[(i, j)].im, 0.0);
                        }
                    }
                    let ev = real_eigenvalues(&op.matrix);
                    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert!(
                        lo >= -1e-10 && hi <= 1.0 - 1e-10,
                        "{w:?} s={s}: [{lo}, {hi}]"
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_s_is_rejected() {
        assert!(matches!(
            build_conjugated_operator(fermi(), 0.0, 16, 4),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_interval_operator(
                &IntervalKernel::Classical(Complex64::new(1.0, 0.0)),
                -1.0,
                16,
                1
            ),
            Err(Error::Config(_))
        ));
    }
}
