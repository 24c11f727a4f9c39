//! The undeformed benchmark: `ν(x; ℓ) = x ∂ₓ log det(1 - ℓK^sin)` on
//! `[-x/2π, x/2π]` from the σ-form Painlevé V equation
//! `(xν″)² + 4(xν′ - ν)(xν′ - ν + ν′²) = 0`, `ν = -(ℓ/π)x + O(x²)`.
//!
//! The quadratic is differentiated once and integrated as the third-order
//! equation
//! `x²ν‴ = -xν″ - 2x(xν′ - ν + ν′²) - 2(xν′ - ν)(x + 2ν′)`,
//! which follows the seeded branch through turning points of `ν″`.

use crate::fredholm::{classical_determinant, weight_determinant, DetConfig, DetMethod, DetResult};
use crate::ode::{dopri5, OdeOptions};
use crate::weights::{Weight, WeightSpec};
use crate::{Complex64, Error, Result};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Seeding abscissa.
pub const X0: f64 = 1e-3;
/// Highest power kept in the seeding series.
pub const SERIES_ORDER: usize = 8;

/// Coefficients `c₁ … c₈` of `ν = Σ cₖ xᵏ`, from substituting the series.
pub fn series_coefficients(ell: Complex64) -> [Complex64; SERIES_ORDER] {
    let l = ell;
    let (l2, l3) = (l * l, l * l * l);
    let (l4, l6) = (l2 * l2, l2 * l2 * l2);
    let (p2, p4, p6) = (PI * PI, PI.powi(4), PI.powi(6));
    [
        -l / PI,
        -l2 / p2,
        -l3 / PI.powi(3),
        -l2 * (9.0 * l2 - p2) / (9.0 * p4),
        -l3 * (36.0 * l2 - 5.0 * p2) / (36.0 * PI.powi(5)),
        -l2 * (450.0 * l4 - 75.0 * p2 * l2 + 4.0 * p4) / (450.0 * p6),
        -l3 * (2700.0 * l4 - 525.0 * p2 * l2 + 28.0 * p4) / (2700.0 * PI.powi(7)),
        -l2 * (396900.0 * l6 - 88200.0 * p2 * l4 + 5929.0 * p4 * l2 - 180.0 * p6)
            / (396900.0 * PI.powi(8)),
    ]
}

/// `(ν, ν′, ν″, ∫₀ˣ ν/t dt)` from the series.
pub fn series_seed(ell: Complex64, x: f64) -> [Complex64; 4] {
    let c = series_coefficients(ell);
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (i, ck) in c.iter().enumerate() {
        let k = (i + 1) as i32;
        let kf = k as f64;
        out[0] += ck * x.powi(k);
        out[1] += ck * (kf * x.powi(k - 1));
        if k >= 2 {
            out[2] += ck * (kf * (kf - 1.0) * x.powi(k - 2));
        }
        out[3] += ck * (x.powi(k) / kf);
    }
    out
}

/// `(xν″)² + 4(xν′ - ν)(xν′ - ν + ν′²)`.
pub fn sigma_form_residual(x: f64, nu: Complex64, d1: Complex64, d2: Complex64) -> Complex64 {
    let a = d1 * x - nu;
    (d2 * x).powi(2) + 4.0 * a * (a + d1 * d1)
}

#[derive(Debug, Clone, Serialize)]
pub struct PVSolution {
    pub ell: Complex64,
    pub x_grid: Vec<f64>,
    pub nu: Vec<Complex64>,
    pub nu_prime: Vec<Complex64>,
    pub nu_second: Vec<Complex64>,
    /// `∫₀ˣ ν(t)/t dt`, which equals `log F(x; ℓ)`.
    pub int_nu_over_x: Vec<Complex64>,
    pub series_order: usize,
    pub tol: f64,
    /// Max of the quadratic σ-form residual over accepted steps.
    pub ode_residual: f64,
    pub stopped: Option<(f64, String)>,
}

/// Integrate from the series seed at [`X0`] through the ascending `x_grid`.
pub fn solve_sigma_pv_on(ell: Complex64, x_grid: &[f64], tol: f64) -> Result<PVSolution> {
    if ell.norm() > 1.0 + 1e-12 {
        return Err(Error::Config(format!("|ℓ| must not exceed 1, got {ell}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if x_grid.iter().any(|&x| !(x > X0)) || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "x grid must be ascending and exceed {X0}"
        )));
    }
    let seed = series_seed(ell, X0);
    let opts = OdeOptions {
        atol: tol,
        rtol: tol,
        ..OdeOptions::default()
    };
    let sol = dopri5(
        |x, y, dy| {
            let (nu, d1, d2) = (y[0], y[1], y[2]);
            let a = d1 * x - nu;
            dy[0] = d1;
            dy[1] = d2;
            dy[2] = (-d2 * x - 2.0 * x * (a + d1 * d1) - 2.0 * a * (d1 * 2.0 + x)) / (x * x);
            dy[3] = nu / x;
        },
        X0,
        &seed,
        x_grid,
        &opts,
    );
    let ode_residual = sol
        .steps
        .iter()
        .map(|(x, y)| sigma_form_residual(*x, y[0], y[1], y[2]).norm())
        .fold(0.0, f64::max);
    let n = sol.xs.len();
    Ok(PVSolution {
        ell,
        x_grid: sol.xs,
        nu: sol.ys.iter().map(|y| y[0]).collect(),
        nu_prime: sol.ys.iter().map(|y| y[1]).collect(),
        nu_second: sol.ys.iter().map(|y| y[2]).collect(),
        int_nu_over_x: sol.ys.iter().map(|y| y[3]).collect(),
        series_order: SERIES_ORDER,
        tol,
        ode_residual,
        stopped: sol
            .stopped
            .or_else(|| (n < x_grid.len()).then(|| (X0, "incomplete".into()))),
    })
}

/// [`solve_sigma_pv_on`] on `x = 0.01, 0.02, …, x_max`.
pub fn solve_sigma_pv(ell: Complex64, x_max: f64, tol: f64) -> Result<PVSolution> {
    if !(x_max > 0.01) {
        return Err(Error::Config(format!(
            "x_max must exceed 0.01, got {x_max}"
        )));
    }
    let n = (x_max / 0.01).round() as usize;
    let grid: Vec<f64> = (1..=n).map(|k| 0.01 * k as f64).collect();
    solve_sigma_pv_on(ell, &grid, tol)
}

/// `det(1 - ℓK^sin)` on `[-s/2π, s/2π]`.
pub fn thinned_gap_determinant(ell: Complex64, s: f64) -> Result<DetResult> {
    classical_determinant(
        ell,
        s,
        &DetConfig {
            method: DetMethod::Interval,
            ..DetConfig::default()
        },
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassicalRow {
    pub s: f64,
    pub nu: Complex64,
    pub nu_prime: Complex64,
    pub log_f: Complex64,
    /// `s ∂ₛ log F`.
    pub s_dlog_f: Complex64,
    /// `∂ₛ(s ∂ₛ log F)`.
    pub d_s_dlog_f: Complex64,
    pub residual1: f64,
    pub residual2: f64,
    /// `|log F - ∫₀ˢ ν/x dx|`.
    pub residual_log: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReport {
    pub ell: Complex64,
    pub rows: Vec<ClassicalRow>,
    pub max_residual1: f64,
    pub max_residual2: f64,
    pub max_residual_log: f64,
    pub ode_tol: f64,
    pub ode_residual: f64,
}

/// Step of the five-point stencils used on `log F`.
pub const DIFF_STEP: f64 = 1e-2;

/// Compare `s∂ₛ log F` with `ν`, `∂ₛ(s∂ₛ log F)` with `ν′`, and `log F` with
/// `∫ν/x`, differentiating determinants with fourth-order centered stencils.
pub fn compare_classical(ell: Complex64, s_grid: &[f64], tol: f64) -> Result<ClassicalReport> {
    let h = DIFF_STEP;
    if s_grid.iter().any(|&s| s - 2.0 * h <= 0.0) {
        return Err(Error::Config(format!("every s must exceed {}", 2.0 * h)));
    }
    let pv = solve_sigma_pv_on(ell, s_grid, tol)?;
    if let Some((x, why)) = &pv.stopped {
        return Err(Error::Ode {
            x: *x,
            reason: why.clone(),
        });
    }
    let log_f = |s: f64| -> Result<Complex64> {
        let r = thinned_gap_determinant(ell, s)?;
        if r.is_zero() {
            return Err(Error::DeterminantZero { s });
        }
        Ok(r.log_det)
    };
    let mut rows = Vec::with_capacity(s_grid.len());
    for (k, &s) in s_grid.iter().enumerate() {
        let v: Vec<Complex64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&j| log_f(s + j * h))
            .collect::<Result<_>>()?;
        let d1 = (v[0] - 8.0 * v[1] + 8.0 * v[3] - v[4]) / (12.0 * h);
        let d2 = (-v[0] + 16.0 * v[1] - 30.0 * v[2] + 16.0 * v[3] - v[4]) / (12.0 * h * h);
        let s_d = d1 * s;
        let d_sd = d1 + d2 * s;
        rows.push(ClassicalRow {
            s,
            nu: pv.nu[k],
            nu_prime: pv.nu_prime[k],
            log_f: v[2],
            s_dlog_f: s_d,
            d_s_dlog_f: d_sd,
            residual1: (s_d - pv.nu[k]).norm(),
            residual2: (d_sd - pv.nu_prime[k]).norm(),
            residual_log: (v[2] - pv.int_nu_over_x[k]).norm(),
        });
    }
    let max = |f: fn(&ClassicalRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(ClassicalReport {
        ell,
        max_residual1: max(|r| r.residual1),
        max_residual2: max(|r| r.residual2),
        max_residual_log: max(|r| r.residual_log),
        rows,
        ode_tol: tol,
        ode_residual: pv.ode_residual,
    })
}

/// `|log F_{w_ε}(s) - log F(s; 1)|` for each `ε`, with `w_ε` the smoothed
/// indicator of `[-1/2, 1/2]`.
pub fn smoothed_indicator_gaps(s: f64, epsilons: &[f64]) -> Result<Vec<f64>> {
    let exact = thinned_gap_determinant(Complex64::new(1.0, 0.0), s)?.log_det;
    let cfg = DetConfig::default();
    epsilons
        .iter()
        .map(|&e| {
            let w: Arc<dyn Weight> = Arc::new(WeightSpec::smoothed_indicator(e)?);
            Ok((weight_determinant(w, s, &cfg)?.log_det - exact).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_ell_is_trivial() {
        let sol = solve_sigma_pv(c(0.0), 1.0, 1e-12).unwrap();
        assert!(sol.nu.iter().all(|v| v.norm() == 0.0));
        let rep = compare_classical(c(0.0), &[0.5, 1.0], 1e-12).unwrap();
        assert_eq!(rep.max_residual1, 0.0);
        assert_eq!(rep.max_residual2, 0.0);
        let d = thinned_gap_determinant(c(0.0), 2.0).unwrap();
        assert_eq!(d.det, c(1.0));
    }

    #[test]
    fn series_satisfies_the_quadratic_to_high_order() {
        // residual of the truncated series is O(x⁹)
        for ell in [c(1.0), c(0.5), Complex64::new(0.3, 0.4)] {
            let r = |x: f64| {
                let s = series_seed(ell, x);
                sigma_form_residual(x, s[0], s[1], s[2]).norm()
            };
            let ratio = r(0.1) / r(0.05);
            assert!((ratio.log2() - 9.0).abs() < 0.3, "ratio {ratio}");
            // at the seed only rounding remains
            assert!(r(X0) < 1e-18, "{}", r(X0));
        }
    }

    #[test]
    fn series_matches_fredholm_expansion() {
        // log F = -ℓ tr K - ℓ²/2 tr K² - …; tr K = s/π, tr K² = s²/π² + O(s⁴)
        let ell = c(0.7);
        let s = 1e-2;
        let j = series_seed(ell, s)[3];
        let d = thinned_gap_determinant(ell, s).unwrap().log_det;
        assert!((j - d).norm() < 1e-14);
    }

    #[test]
    fn linear_small_x_law() {
        let sol = solve_sigma_pv_on(c(1.0), &[0.002, 0.004, 0.008], 1e-13).unwrap();
        let e: Vec<f64> = sol
            .nu
            .iter()
            .zip(&sol.x_grid)
            .map(|(n, x)| (n / *x + 1.0 / PI).norm())
            .collect();
        assert!((e[1] / e[0] - 2.0).abs() < 0.01);
        assert!((e[2] / e[1] - 2.0).abs() < 0.01);
    }

    #[test]
    fn fitted_second_coefficient() {
        // least squares of (ν + x/π)/x² on [1e-3, 1e-2] against c₂ + c₃x
        let xs: Vec<f64> = (1..=10).map(|k| 1e-3 * k as f64 + 1e-4).collect();
        let sol = solve_sigma_pv_on(c(1.0), &xs, 1e-13).unwrap();
        let ys: Vec<f64> = sol
            .nu
            .iter()
            .zip(&xs)
            .map(|(n, x)| (n.re + x / PI) / (x * x))
            .collect();
        let n = xs.len() as f64;
        let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let c2 = (sy - slope * sx) / n;
        assert!((c2 + 1.0 / (PI * PI)).abs() < 1e-5, "{c2}");
    }

    #[test]
    fn ode_keeps_the_quadratic_invariant() {
        let sol = solve_sigma_pv(c(1.0), 5.0, 1e-12).unwrap();
        assert!(sol.stopped.is_none());
        assert!(sol.ode_residual < 1e-9, "{}", sol.ode_residual);
    }

    #[test]
    fn determinant_matches_painleve() {
        for ell in [c(1.0), c(0.5)] {
            let grid: Vec<f64> = (1..=10).map(|k| 0.5 * k as f64).collect();
            let rep = compare_classical(ell, &grid, 1e-12).unwrap();
            assert!(rep.max_residual1 <= 1e-6, "{}", rep.max_residual1);
            assert!(rep.max_residual2 <= 1e-5, "{}", rep.max_residual2);
            assert!(rep.max_residual_log <= 1e-6, "{}", rep.max_residual_log);
        }
    }

    #[test]
    fn thinned_determinant_in_unit_interval() {
        for ell in [0.2, 0.7, 1.0] {
            for s in [0.3, 2.0, 6.0] {
                let d = thinned_gap_determinant(c(ell), s).unwrap().det;
                assert!(d.re > 0.0 && d.re < 1.0 && d.im == 0.0);
            }
        }
    }

    #[test]
    fn smoothed_indicator_approaches_the_classical_gap() {
        let g = smoothed_indicator_gaps(2.0, &[0.1, 0.05, 0.025]).unwrap();
        assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(solve_sigma_pv(c(1.5), 1.0, 1e-12).is_err());
        assert!(solve_sigma_pv_on(c(1.0), &[0.5, 0.2], 1e-12).is_err());
        assert!(compare_classical(c(1.0), &[0.01], 1e-12).is_err());
    }
}
