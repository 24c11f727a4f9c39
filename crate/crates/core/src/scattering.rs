//! The direct map from initial data `f` to a profile `W`,
//! `W(r) = -2 ∫_0^∞ f'(-u² - r) du`, and its round trip through the
//! small-`s` limit `σ_W(y,s)/s → f(y)`.

use crate::fredholm::{weight_determinant, DetConfig};
use crate::pde_lab::{pde_convergence, SurfaceConfig, Q_THRESHOLD};
use crate::quadrature::{gauss_legendre, gauss_legendre_spaced, integrate_real};
use crate::weights::{ProfileFamily, ProfileSpec, Weight};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

/// Initial data with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialDatum {
    Zero,
    /// `f(y) = A e^{-(y-c)²}`.
    Gaussian {
        amp: f64,
        center: f64,
    },
}

impl InitialDatum {
    pub fn gaussian(amp: f64, center: f64) -> Result<Self> {
        if !(amp.is_finite() && center.is_finite()) {
            return Err(Error::Config(
                "gaussian amplitude and center must be finite".into(),
            ));
        }
        Ok(InitialDatum::Gaussian { amp, center })
    }

    pub fn scaled(&self, k: f64) -> Self {
        match *self {
            InitialDatum::Zero => InitialDatum::Zero,
            InitialDatum::Gaussian { amp, center } => InitialDatum::Gaussian {
                amp: k * amp,
                center,
            },
        }
    }

    /// `f^{(k)}(y)` for `k ≤ 3`.
    pub fn derivative(&self, k: u32, y: f64) -> f64 {
        match *self {
            InitialDatum::Zero => 0.0,
            InitialDatum::Gaussian { amp, center } => {
                let t = y - center;
                let e = amp * (-t * t).exp();
                match k {
                    0 => e,
                    1 => -2.0 * t * e,
                    2 => (4.0 * t * t - 2.0) * e,
                    3 => (-8.0 * t * t * t + 12.0 * t) * e,
                    _ => panic!("derivative order {k} not available"),
                }
            }
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        self.derivative(0, y)
    }

    fn is_zero(&self) -> bool {
        match *self {
            InitialDatum::Zero => true,
            InitialDatum::Gaussian { amp, .. } => amp == 0.0,
        }
    }

    fn center(&self) -> f64 {
        match *self {
            InitialDatum::Zero => 0.0,
            InitialDatum::Gaussian { center, .. } => center,
        }
    }
}

/// `(-1)^{k+1} 2 ∫_0^∞ f^{(k+1)}(-u² - r) du`, i.e. `W^{(k)}(r)`.
fn w_derivative_by_quadrature(f: &InitialDatum, k: u32, r: f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    // the Gaussian tail e^{-t²} is below 1e-21 once |t - c| ≥ 7
    let reach = 7.0 - r - f.center();
    if reach <= -7.0 {
        return Ok(0.0);
    }
    let upper = (reach.max(0.0) + 7.0).sqrt();
    let grid = gauss_legendre_spaced(20, 0.0, upper, 0.005)?;
    let sign = if k % 2 == 0 { -2.0 } else { 2.0 };
    let v = integrate_real(|u| f.derivative(k + 1, -u * u - r), &grid)?;
    Ok(sign * v)
}

/// `W(r)` at a single point by direct quadrature.
pub fn w_value(f: &InitialDatum, r: f64) -> Result<f64> {
    w_derivative_by_quadrature(f, 0, r)
}

/// `W` tabulated on a uniform r-grid, interpolated by cubic Hermite segments.
#[derive(Debug, Clone, Serialize)]
pub struct TabulatedProfile {
    pub datum: InitialDatum,
    pub r0: f64,
    pub dr: f64,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    pub d2w: Vec<f64>,
    /// `W ≡ 0` is returned for `r ≥ r_tail`.
    pub r_tail: f64,
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

impl TabulatedProfile {
    pub fn build(datum: InitialDatum, r_min: f64, dr: f64, tail_tol: f64) -> Result<Self> {
        if !(dr > 0.0 && r_min.is_finite()) {
            return Err(Error::Config(format!(
                "invalid table: r_min = {r_min}, dr = {dr}"
            )));
        }
        let r_tail = Self::tail_point(&datum, r_min, tail_tol)?;
        let n = ((r_tail - r_min) / dr).ceil() as usize + 1;
        let nodes: Vec<f64> = (0..n).map(|i| r_min + dr * i as f64).collect();
        let rows: Vec<Result<[f64; 3]>> = nodes
            .par_iter()
            .map(|&r| {
                Ok([
                    w_derivative_by_quadrature(&datum, 0, r)?,
                    w_derivative_by_quadrature(&datum, 1, r)?,
                    w_derivative_by_quadrature(&datum, 2, r)?,
                ])
            })
            .collect();
        let mut w = Vec::with_capacity(n);
        let mut dw = Vec::with_capacity(n);
        let mut d2w = Vec::with_capacity(n);
        for (row, r) in rows.into_iter().zip(&nodes) {
            let [a, b, c] = row.map_err(|e| match e {
                Error::Evaluation { value, .. } => Error::Evaluation { node: *r, value },
                other => other,
            })?;
            w.push(a);
            dw.push(b);
            d2w.push(c);
        }
        Ok(TabulatedProfile {
            datum,
            r0: r_min,
            dr,
            w,
            dw,
            d2w,
            r_tail: r_min + dr * (n - 1) as f64,
        })
    }

    /// First point past which `|W|`, `|W'|` stay below `tol`.
    fn tail_point(datum: &InitialDatum, r_min: f64, tol: f64) -> Result<f64> {
        if datum.is_zero() {
            return Ok(r_min + 1.0);
        }
        let mut r = r_min.max(-datum.center());
        let mut guard = 0;
        loop {
            let big = (0..3).any(|k| {
                w_derivative_by_quadrature(datum, k, r)
                    .map(|v| v.abs() > tol)
                    .unwrap_or(true)
            });
            if !big {
                return Ok(r);
            }
            r += 0.25;
            guard += 1;
            if guard > 400 {
                return Err(Error::UnsupportedWeight(
                    "scattering profile does not decay".into(),
                ));
            }
        }
    }

    pub fn r_min(&self) -> f64 {
        self.r0
    }

    fn locate(&self, r: f64) -> (usize, f64) {
        let x = (r - self.r0) / self.dr;
        let i = (x.floor() as usize).min(self.w.len() - 2);
        (i, x - i as f64)
    }

    pub fn value(&self, r: f64) -> f64 {
        if r >= self.r_tail {
            return 0.0;
        }
        if r < self.r0 {
            return w_derivative_by_quadrature(&self.datum, 0, r).unwrap_or(f64::NAN);
        }
        let (i, t) = self.locate(r);
        hermite(
            self.w[i],
            self.w[i + 1],
            self.dw[i],
            self.dw[i + 1],
            self.dr,
            t,
        )
    }

    pub fn derivative(&self, r: f64) -> f64 {
        if r >= self.r_tail {
            return 0.0;
        }
        if r < self.r0 {
            return w_derivative_by_quadrature(&self.datum, 1, r).unwrap_or(f64::NAN);
        }
        let (i, t) = self.locate(r);
        hermite(
            self.dw[i],
            self.dw[i + 1],
            self.d2w[i],
            self.d2w[i + 1],
            self.dr,
            t,
        )
    }
}

/// A datum together with its tabulated profile.
#[derive(Debug, Clone)]
pub struct ScatteringPair {
    pub f: InitialDatum,
    pub table: Arc<TabulatedProfile>,
    pub roundtrip_error: Option<f64>,
}

impl ScatteringPair {
    pub fn profile(&self, y: f64) -> Result<ProfileSpec> {
        ProfileSpec::new(ProfileFamily::ScatteringDerived(self.table.clone()), y)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TableConfig {
    /// Largest `|y|` that will be probed; the table starts at `-y_max - 1`.
    pub y_max: f64,
    pub dr: f64,
    pub tail_tol: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            y_max: 2.0,
            dr: 2e-3,
            tail_tol: 1e-17,
        }
    }
}

#[allow(non_snake_case)]
pub fn W_from_f(f: InitialDatum, cfg: &TableConfig) -> Result<ScatteringPair> {
    let table = TabulatedProfile::build(f, -cfg.y_max - 1.0, cfg.dr, cfg.tail_tol)?;
    Ok(ScatteringPair {
        f,
        table: Arc::new(table),
        roundtrip_error: None,
    })
}

/// Result of the small-`s` extrapolation of `σ_W(y,s)/s`.
#[derive(Debug, Clone, Serialize)]
pub struct InitialDataEstimate {
    pub y: f64,
    pub s_values: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Richardson value, or `None` when the sequence was not monotone.
    pub extrapolated: Option<f64>,
}

impl InitialDataEstimate {
    /// Extrapolated value, falling back to the ratio at the smallest `s`.
    pub fn best(&self) -> f64 {
        self.extrapolated
            .unwrap_or_else(|| *self.ratios.last().unwrap_or(&f64::NAN))
    }
}

/// Two-point elimination of the `a₁s` term from `g(s) = a₀ + a₁s + …`.
pub fn richardson_first_order(s_a: f64, g_a: f64, s_b: f64, g_b: f64) -> f64 {
    (s_a * g_b - s_b * g_a) / (s_a - s_b)
}

/// Extrapolate `σ_W(y,s)/s` to `s = 0` along a descending `s`-sequence.
pub fn small_s_initial_data(
    profile: &ProfileSpec,
    s_sequence: &[f64],
    cfg: &DetConfig,
) -> Result<InitialDataEstimate> {
    if s_sequence.len() < 2 {
        return Err(Error::Config("need at least two s values".into()));
    }
    if s_sequence.windows(2).any(|p| p[1] >= p[0]) || s_sequence.iter().any(|&s| s < 1e-3) {
        return Err(Error::Config(
            "s sequence must be descending with s ≥ 1e-3".into(),
        ));
    }
    let w: Arc<dyn Weight> = Arc::new(profile.clone());
    let mut ratios = Vec::with_capacity(s_sequence.len());
    for &s in s_sequence {
        let r = weight_determinant(w.clone(), s, cfg)?;
        if r.is_zero() {
            return Err(Error::DeterminantZero { s });
        }
        ratios.push(r.log_det.re / s);
    }
    let diffs: Vec<f64> = ratios.windows(2).map(|p| p[1] - p[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    let n = ratios.len();
    let extrapolated = monotone.then(|| {
        richardson_first_order(
            s_sequence[n - 2],
            ratios[n - 2],
            s_sequence[n - 1],
            ratios[n - 1],
        )
    });
    Ok(InitialDataEstimate {
        y: profile.y,
        s_values: s_sequence.to_vec(),
        ratios,
        extrapolated,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripRow {
    pub y: f64,
    pub f: f64,
    pub reconstructed: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub rows: Vec<RoundtripRow>,
    pub sup_error: f64,
    pub w_at_zero: f64,
    /// σ-form check of the surface built from `W`, when requested.
    pub pde: Option<PdeCheck>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdeCheck {
    pub order_sigma_form: f64,
    pub coarse_max: f64,
    pub fine_max: f64,
    pub fine_max_normalized: f64,
}

/// Default patch for the σ-form check of a scattering-derived surface.
pub fn default_pde_patch() -> SurfaceConfig {
    SurfaceConfig {
        y_min: -1.0,
        y_max: 1.0,
        h_y: 0.1,
        s_min: 0.5,
        s_max: 1.5,
        h_s: 0.05,
        order: 16,
    }
}

/// σ-form residual order of the surface `σ_W` on `patch` under `h → h/2`.
pub fn pde_check(pair: &ScatteringPair, patch: &SurfaceConfig) -> Result<PdeCheck> {
    let study = pde_convergence(&pair.profile(0.0)?, patch, Q_THRESHOLD)?;
    Ok(PdeCheck {
        order_sigma_form: study.order_sigma_form,
        coarse_max: study.coarse.sigma_form.max,
        fine_max: study.fine.sigma_form.max,
        fine_max_normalized: study.fine.sigma_form.max_normalized,
    })
}

/// [`roundtrip_check`] followed by [`pde_check`] on `patch`.
pub fn roundtrip_with_pde(
    pair: &ScatteringPair,
    y_grid: &[f64],
    s_sequence: &[f64],
    cfg: &DetConfig,
    patch: &SurfaceConfig,
) -> Result<RoundtripReport> {
    let mut r = roundtrip_check(pair, y_grid, s_sequence, cfg)?;
    r.pde = Some(pde_check(pair, patch)?);
    Ok(r)
}

/// `sup_y |extrapolated σ_W(y,s)/s - f(y)|` over `y_grid`.
pub fn roundtrip_check(
    pair: &ScatteringPair,
    y_grid: &[f64],
    s_sequence: &[f64],
    cfg: &DetConfig,
) -> Result<RoundtripReport> {
    let rows: Vec<Result<RoundtripRow>> = y_grid
        .par_iter()
        .map(|&y| {
            let f = pair.f.value(y);
            let est = small_s_initial_data(&pair.profile(y)?, s_sequence, cfg)?;
            let reconstructed = est.best();
            Ok(RoundtripRow {
                y,
                f,
                reconstructed,
                abs_error: (reconstructed - f).abs(),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sup_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    Ok(RoundtripReport {
        rows,
        sup_error,
        w_at_zero: pair.table.value(0.0),
        pde: None,
    })
}

/// `(4/π) ∫_0^∞∫_0^∞ f'(-u² - λ² + y) du dλ`, which equals `f(y)`.
pub fn polar_identity(f: &InitialDatum, y: f64) -> Result<f64> {
    let reach = (7.0 + y - f.center()).max(0.0) + 7.0;
    let upper = reach.sqrt();
    let grid = gauss_legendre(20, 0.0, upper, (upper / 0.1).ceil() as usize)?;
    let inner = |l: f64| integrate_real(|u| f.derivative(1, -u * u - l * l + y), &grid);
    let mut acc = 0.0;
    for (l, om) in grid.iter() {
        acc += om * inner(l)?;
    }
    Ok(4.0 / PI * acc)
}
