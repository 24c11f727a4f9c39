//! σ(y, s) = log Q_W(y, s) tabulated on a (y, s) grid, the potentials `p`, `q`
//! read off by finite differences, and residuals of the σ-form, q-form and
//! coupled PDEs.

use crate::fredholm::sweep_on_lambda_grid;
use crate::operators::{support_radius, DOMAIN_MARGIN, MAX_ZETA_PANEL};
use crate::quadrature::{gauss_legendre, Grid};
use crate::weights::{ProfileFamily, ProfileSpec, Weight};
use crate::zs::{
    assemble_fields, compute_u1, compute_u1_calibrated, dy_u1_norm, mat_norm, zs_lambda_grid,
};
use crate::{Complex64, Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default `|q|` below which the q-form residual is masked.
pub const Q_THRESHOLD: f64 = 1e-3;

/// The q-form stacks five difference quotients, so rounding noise `δσ` in σ
/// shows up as roughly `δσ / (q² h_s⁴ h_y)`. This bound on `|q|` keeps that
/// below the truncation error on the default grids.
pub const Q_THRESHOLD_CONDITIONED: f64 = 5e-2;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SurfaceConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub h_y: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub h_s: f64,
    pub order: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            y_min: -2.0,
            y_max: 2.0,
            h_y: 0.05,
            s_min: 0.2,
            s_max: 3.0,
            h_s: 0.02,
            order: 16,
        }
    }
}

fn uniform(a: f64, b: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Config(format!("bad range [{a}, {b}] with step {h}")));
    }
    let n = ((b - a) / h).round() as usize;
    Ok((0..=n).map(|k| a + h * k as f64).collect())
}

impl SurfaceConfig {
    pub fn y_grid(&self) -> Result<Vec<f64>> {
        uniform(self.y_min, self.y_max, self.h_y)
    }

    pub fn s_grid(&self) -> Result<Vec<f64>> {
        if !(self.s_min > 0.0) {
            return Err(Error::Config(format!(
                "s_min must be positive, got {}",
                self.s_min
            )));
        }
        uniform(self.s_min, self.s_max, self.h_s)
    }

    /// Same ranges, both steps halved.
    pub fn refined(&self) -> Self {
        SurfaceConfig {
            h_y: self.h_y / 2.0,
            h_s: self.h_s / 2.0,
            ..*self
        }
    }
}

/// One λ-grid resolving the profile at every `y` in `[y_min, y_max]` and every `s ≤ s_max`.
pub fn surface_lambda_grid(
    profile: &ProfileSpec,
    y_min: f64,
    y_max: f64,
    s_max: f64,
    order: usize,
) -> Result<Grid> {
    let mut probes = vec![y_min, y_max];
    if y_min < 0.0 && y_max > 0.0 {
        probes.push(0.0);
    }
    let mut lam: f64 = 0.0;
    let mut scale = f64::INFINITY;
    for y in probes {
        let p = profile.at(y);
        lam = lam.max(support_radius(&p)?);
        scale = scale.min(p.length_scale());
    }
    let lam = lam * (1.0 + DOMAIN_MARGIN);
    let width = (2.0 * scale).min(MAX_ZETA_PANEL * PI / s_max);
    let panels = (2.0 * lam / width).ceil().max(2.0) as usize;
    gauss_legendre(order, -lam, lam, panels)
}

/// A tabulated σ with its finite-difference potentials. Arrays are indexed `[iy][is]`.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaSurface {
    pub profile: String,
    pub y_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub sigma: Vec<Vec<Complex64>>,
    pub q_det: Vec<Vec<Complex64>>,
    /// `false` where `Q = 0`.
    pub valid: Vec<Vec<bool>>,
    pub p: Vec<Vec<Option<Complex64>>>,
    pub q: Vec<Vec<Option<Complex64>>>,
    pub h_s: f64,
    pub h_y: f64,
    pub nodes: usize,
}

/// σ on the grid of `cfg`, one branch-continuous `s`-sweep per `y`.
pub fn build_sigma_surface(profile: &ProfileSpec, cfg: &SurfaceConfig) -> Result<SigmaSurface> {
    let y_grid = cfg.y_grid()?;
    let s_grid = cfg.s_grid()?;
    let grid = surface_lambda_grid(profile, cfg.y_min, cfg.y_max, cfg.s_max, cfg.order)?;
    let rows: Vec<_> = y_grid
        .par_iter()
        .map(|&y| {
            let w: Arc<dyn Weight> = Arc::new(profile.at(y));
            sweep_on_lambda_grid(w, &s_grid, &grid)
        })
        .collect::<Result<_>>()?;
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut sigma = Vec::with_capacity(rows.len());
    let mut q_det = Vec::with_capacity(rows.len());
    let mut valid = Vec::with_capacity(rows.len());
    for row in rows {
        valid.push(row.iter().map(|r| !r.is_zero()).collect());
        sigma.push(
            row.iter()
                .map(|r| if r.is_zero() { nan } else { r.log_det })
                .collect(),
        );
        q_det.push(row.iter().map(|r| r.det).collect());
    }
    Ok(SigmaSurface::from_values(
        profile.family.name().to_string(),
        y_grid,
        s_grid,
        sigma,
        q_det,
        valid,
        cfg.h_y,
        cfg.h_s,
        grid.len(),
    ))
}

impl SigmaSurface {
    /// Wrap precomputed σ values (for synthetic surfaces or external data).
    #[allow(clippy::too_many_arguments)]
    pub fn from_values(
        profile: String,
        y_grid: Vec<f64>,
        s_grid: Vec<f64>,
        sigma: Vec<Vec<Complex64>>,
        q_det: Vec<Vec<Complex64>>,
        valid: Vec<Vec<bool>>,
        h_y: f64,
        h_s: f64,
        nodes: usize,
    ) -> Self {
        let mut surf = SigmaSurface {
            profile,
            y_grid,
            s_grid,
            sigma,
            q_det,
            valid,
            p: Vec::new(),
            q: Vec::new(),
            h_s,
            h_y,
            nodes,
        };
        let (p, q) = extract_p_q(&surf);
        surf.p = p;
        surf.q = q;
        surf
    }

    /// Synthetic surface `σ(y, s) = f(y, s)` on uniform grids.
    pub fn synthetic<F: Fn(f64, f64) -> Complex64>(
        y_grid: Vec<f64>,
        s_grid: Vec<f64>,
        f: F,
    ) -> Self {
        let h_y = if y_grid.len() > 1 {
            y_grid[1] - y_grid[0]
        } else {
            1.0
        };
        let h_s = if s_grid.len() > 1 {
            s_grid[1] - s_grid[0]
        } else {
            1.0
        };
        let sigma: Vec<Vec<Complex64>> = y_grid
            .iter()
            .map(|&y| s_grid.iter().map(|&s| f(y, s)).collect())
            .collect();
        let q_det = sigma
            .iter()
            .map(|r| r.iter().map(|v| v.exp()).collect())
            .collect();
        let valid = sigma.iter().map(|r| vec![true; r.len()]).collect();
        Self::from_values(
            "synthetic".into(),
            y_grid,
            s_grid,
            sigma,
            q_det,
            valid,
            h_y,
            h_s,
            0,
        )
    }

    pub fn ny(&self) -> usize {
        self.y_grid.len()
    }

    pub fn ns(&self) -> usize {
        self.s_grid.len()
    }

    fn at(&self, iy: isize, is: isize) -> Option<Complex64> {
        if iy < 0 || is < 0 || iy as usize >= self.ny() || is as usize >= self.ns() {
            return None;
        }
        let (a, b) = (iy as usize, is as usize);
        self.valid[a][b].then(|| self.sigma[a][b])
    }

    fn d_s(&self, iy: isize, is: isize) -> Option<Complex64> {
        Some((self.at(iy, is + 1)? - self.at(iy, is - 1)?) / (2.0 * self.h_s))
    }

    fn d_ss(&self, iy: isize, is: isize) -> Option<Complex64> {
        Some(
            (self.at(iy, is + 1)? - 2.0 * self.at(iy, is)? + self.at(iy, is - 1)?)
                / (self.h_s * self.h_s),
        )
    }

    fn d_y(&self, iy: isize, is: isize) -> Option<Complex64> {
        Some((self.at(iy + 1, is)? - self.at(iy - 1, is)?) / (2.0 * self.h_y))
    }

    fn d_sy(&self, iy: isize, is: isize) -> Option<Complex64> {
        Some((self.d_s(iy + 1, is)? - self.d_s(iy - 1, is)?) / (2.0 * self.h_y))
    }

    fn d_ssy(&self, iy: isize, is: isize) -> Option<Complex64> {
        Some((self.d_ss(iy + 1, is)? - self.d_ss(iy - 1, is)?) / (2.0 * self.h_y))
    }

    fn q_at(&self, iy: isize, is: isize) -> Option<Complex64> {
        if iy < 0 || is < 0 || iy as usize >= self.ny() || is as usize >= self.ns() {
            return None;
        }
        self.q[iy as usize][is as usize]
    }

    /// σ and its stencil derivatives at a node: `(σ_s, σ_ss, σ_y, σ_sy, σ_ssy)`.
    pub fn derivatives(&self, iy: usize, is: usize) -> Option<[Complex64; 5]> {
        let (a, b) = (iy as isize, is as isize);
        Some([
            self.d_s(a, b)?,
            self.d_ss(a, b)?,
            self.d_y(a, b)?,
            self.d_sy(a, b)?,
            self.d_ssy(a, b)?,
        ])
    }

    /// Nearest grid indices to `(y, s)`.
    pub fn nearest(&self, y: f64, s: f64) -> (usize, usize) {
        let near = |g: &[f64], v: f64| {
            g.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        (near(&self.y_grid, y), near(&self.s_grid, s))
    }
}

/// `p = -∂ₛσ` and `q = √(-∂ₛ²σ)` (principal root, then sign-continuous
/// along `y` on the first available column and along `s` in every row).
#[allow(clippy::type_complexity)]
pub fn extract_p_q(
    surface: &SigmaSurface,
) -> (Vec<Vec<Option<Complex64>>>, Vec<Vec<Option<Complex64>>>) {
    let (ny, ns) = (surface.ny(), surface.ns());
    let mut p = vec![vec![None; ns]; ny];
    let mut q = vec![vec![None; ns]; ny];
    for iy in 0..ny {
        for is in 0..ns {
            let (a, b) = (iy as isize, is as isize);
            p[iy][is] = surface.d_s(a, b).map(|d| -d);
            q[iy][is] = surface.d_ss(a, b).map(|d| (-d).sqrt());
        }
    }
    // anchor: align rows at their first defined entry with the row above
    let mut prev_anchor: Option<Complex64> = None;
    for row in q.iter_mut() {
        if let Some(first) = row.iter().position(|v| v.is_some()) {
            let a = row[first].unwrap();
            if let Some(pa) = prev_anchor {
                if (a * pa.conj()).re < 0.0 {
                    for v in row.iter_mut().flatten() {
                        *v = -*v;
                    }
                }
            }
            prev_anchor = row[first];
        }
        let mut last: Option<Complex64> = None;
        for v in row.iter_mut() {
            if let Some(x) = v {
                if let Some(l) = last {
                    if (*x * l.conj()).re < 0.0 {
                        *x = -*x;
                    }
                }
                last = Some(*x);
            }
        }
    }
    (p, q)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NodeResidual {
    pub iy: usize,
    pub is: usize,
    pub y: f64,
    pub s: f64,
    pub sigma_form: Option<f64>,
    pub sigma_form_normalized: Option<f64>,
    pub q_form: Option<f64>,
    pub q_form_normalized: Option<f64>,
    pub coupled: Option<f64>,
    pub coupled_normalized: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ResidualStats {
    pub count: usize,
    pub max: f64,
    pub median: f64,
    pub max_normalized: f64,
    pub median_normalized: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl ResidualStats {
    fn collect(raw: Vec<f64>, norm: Vec<f64>) -> Self {
        ResidualStats {
            count: raw.len(),
            max: raw.iter().cloned().fold(0.0, f64::max),
            median: median(raw),
            max_normalized: norm.iter().cloned().fold(0.0, f64::max),
            median_normalized: median(norm),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeResidualReport {
    pub nodes: Vec<NodeResidual>,
    pub sigma_form: ResidualStats,
    pub q_form: ResidualStats,
    pub coupled: ResidualStats,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Residuals at one node; `None` where a stencil leaves the valid region.
pub fn node_residual(
    surface: &SigmaSurface,
    iy: usize,
    is: usize,
    q_threshold: f64,
) -> NodeResidual {
    let (a, b) = (iy as isize, is as isize);
    let s = surface.s_grid[is];
    let mut r = NodeResidual {
        iy,
        is,
        y: surface.y_grid[iy],
        s,
        sigma_form: None,
        sigma_form_normalized: None,
        q_form: None,
        q_form_normalized: None,
        coupled: None,
        coupled_normalized: None,
    };
    let Some([_, s_ss, s_y, s_sy, s_ssy]) = surface.derivatives(iy, is) else {
        return r;
    };
    let inner = -2.0 * s * s_sy + 2.0 * s_y - s_sy * s_sy;
    let res = s_ssy * s_ssy - 4.0 * s_ss * inner;
    let scale = s_ssy.norm_sqr()
        + 4.0 * s_ss.norm() * (2.0 * s * s_sy.norm() + 2.0 * s_y.norm() + s_sy.norm_sqr());
    r.sigma_form = Some(res.norm());
    r.sigma_form_normalized = Some(ratio(res.norm(), scale));

    let q_s = |iy: isize, is: isize| {
        Some((surface.q_at(iy, is + 1)? - surface.q_at(iy, is - 1)?) / (2.0 * surface.h_s))
    };
    let q_sy =
        |iy: isize, is: isize| Some((q_s(iy + 1, is)? - q_s(iy - 1, is)?) / (2.0 * surface.h_y));
    if let (Some(q), Some(qsy)) = (surface.q_at(a, b), q_sy(a, b)) {
        let res = qsy + 2.0 * q * (s + s_sy);
        let scale = qsy.norm() + 2.0 * q.norm() * (s + s_sy.norm());
        r.coupled = Some(res.norm());
        r.coupled_normalized = Some(ratio(res.norm(), scale));
    }

    let small = |v: Option<Complex64>| v.map_or(true, |q| q.norm() < q_threshold);
    if small(surface.q_at(a, b)) || small(surface.q_at(a, b - 1)) || small(surface.q_at(a, b + 1)) {
        return r;
    }
    let ratio_at = |is: isize| Some(q_sy(a, is)? / (2.0 * surface.q_at(a, is)?));
    let q2 = |iy: isize| Some(surface.q_at(iy, b)?.powi(2));
    let lhs = (|| Some((ratio_at(b + 1)? - ratio_at(b - 1)?) / (2.0 * surface.h_s)))();
    let dyq2 = (|| Some((q2(a + 1)? - q2(a - 1)?) / (2.0 * surface.h_y)))();
    if let (Some(lhs), Some(dyq2)) = (lhs, dyq2) {
        let res = lhs - (dyq2 - 1.0);
        r.q_form = Some(res.norm());
        r.q_form_normalized = Some(ratio(res.norm(), lhs.norm() + dyq2.norm() + 1.0));
    }
    r
}

/// Residuals of the σ-form, q-form and coupled relations at every interior node;
/// the q-form is masked where `|q| < q_threshold` on its stencil.
pub fn pde_residuals(surface: &SigmaSurface, q_threshold: f64) -> PdeResidualReport {
    let mut nodes = Vec::new();
    for iy in 0..surface.ny() {
        for is in 0..surface.ns() {
            nodes.push(node_residual(surface, iy, is, q_threshold));
        }
    }
    summarize(nodes)
}

fn summarize(nodes: Vec<NodeResidual>) -> PdeResidualReport {
    let pick = |f: &dyn Fn(&NodeResidual) -> (Option<f64>, Option<f64>)| {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for n in &nodes {
            if let (Some(x), Some(y)) = f(n) {
                a.push(x);
                b.push(y);
            }
        }
        ResidualStats::collect(a, b)
    };
    let sigma_form = pick(&|n| (n.sigma_form, n.sigma_form_normalized));
    let q_form = pick(&|n| (n.q_form, n.q_form_normalized));
    let coupled = pick(&|n| (n.coupled, n.coupled_normalized));
    PdeResidualReport {
        nodes,
        sigma_form,
        q_form,
        coupled,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub coarse: PdeResidualReport,
    pub fine: PdeResidualReport,
    pub order_sigma_form: f64,
    pub order_q_form: f64,
    pub order_coupled: f64,
    pub determinants: usize,
}

/// `log₂` of the coarse/fine ratio of max residuals.
pub fn empirical_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Residuals of a surface and of its `h → h/2` refinement, compared on the
/// coarse nodes where both stencils are available.
pub fn convergence_study(
    coarse: &SigmaSurface,
    fine: &SigmaSurface,
    q_threshold: f64,
) -> Result<ConvergenceStudy> {
    let fy = (coarse.h_y / fine.h_y).round() as usize;
    let fs = (coarse.h_s / fine.h_s).round() as usize;
    if fy != 2 || fs != 2 {
        return Err(Error::Config("fine surface must halve both steps".into()));
    }
    let (mut c_nodes, mut f_nodes) = (Vec::new(), Vec::new());
    for iy in 0..coarse.ny() {
        for is in 0..coarse.ns() {
            let (jy, js) = (2 * iy, 2 * is);
            if jy >= fine.ny() || js >= fine.ns() {
                continue;
            }
            if (fine.y_grid[jy] - coarse.y_grid[iy]).abs() > 1e-9
                || (fine.s_grid[js] - coarse.s_grid[is]).abs() > 1e-9
            {
                return Err(Error::Config("surfaces do not share nodes".into()));
            }
            let mut c = node_residual(coarse, iy, is, q_threshold);
            let mut f = node_residual(fine, jy, js, q_threshold);
            // compare like with like
            macro_rules! both {
                ($a:ident, $b:ident) => {
                    if c.$a.is_none() || f.$a.is_none() {
                        c.$a = None;
                        f.$a = None;
                        c.$b = None;
                        f.$b = None;
                    }
                };
            }
            both!(sigma_form, sigma_form_normalized);
            both!(q_form, q_form_normalized);
            both!(coupled, coupled_normalized);
            c_nodes.push(c);
            f_nodes.push(f);
        }
    }
    let coarse_r = summarize(c_nodes);
    let fine_r = summarize(f_nodes);
    Ok(ConvergenceStudy {
        order_sigma_form: empirical_order(coarse_r.sigma_form.max, fine_r.sigma_form.max),
        order_q_form: empirical_order(coarse_r.q_form.max, fine_r.q_form.max),
        order_coupled: empirical_order(coarse_r.coupled.max, fine_r.coupled.max),
        coarse: coarse_r,
        fine: fine_r,
        determinants: coarse.ny() * coarse.ns() + fine.ny() * fine.ns(),
    })
}

/// Build both surfaces and run [`convergence_study`].
pub fn pde_convergence(
    profile: &ProfileSpec,
    cfg: &SurfaceConfig,
    q_threshold: f64,
) -> Result<ConvergenceStudy> {
    let coarse = build_sigma_surface(profile, cfg)?;
    let fine = build_sigma_surface(profile, &cfg.refined())?;
    convergence_study(&coarse, &fine, q_threshold)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantFit {
    /// Relation `lhs = c · rhs`.
    pub relation: String,
    pub value: Complex64,
    /// `(numerator, denominator)` within tolerance, denominator ≤ 4.
    pub rational: Option<(i64, i64)>,
    pub distance: f64,
    /// `max |lhs - c·rhs| / max |lhs|` over the samples.
    pub misfit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub samples: Vec<(f64, f64)>,
    pub fits: Vec<ConstantFit>,
    pub all_rational: bool,
    /// `max |p_surface - p_U₁|` over the samples.
    pub p_crosscheck: f64,
}

/// Nearest rational `n/d` with `d ≤ 4`, if within `tol` of a real `c`.
pub fn snap_rational(c: Complex64, tol: f64) -> (Option<(i64, i64)>, f64) {
    let mut best = (None, f64::INFINITY);
    for d in 1..=4i64 {
        let n = (c.re * d as f64).round() as i64;
        let dist = (c - Complex64::new(n as f64 / d as f64, 0.0)).norm();
        if dist < best.1 - 1e-15 {
            best = (Some((n, d)), dist);
        }
    }
    if best.1 <= tol {
        best
    } else {
        (None, best.1)
    }
}

/// Least squares `c = Σ conj(x) y / Σ |x|²` for `y ≈ c x`.
pub fn fit_constant(relation: &str, x: &[Complex64], y: &[Complex64], tol: f64) -> ConstantFit {
    let num: Complex64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = x.iter().map(|a| a.norm_sqr()).sum();
    let value = if den > 0.0 {
        num / den
    } else {
        Complex64::new(0.0, 0.0)
    };
    let scale = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let misfit = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - value * a).norm())
        .fold(0.0, f64::max);
    let (rational, distance) = snap_rational(value, tol);
    ConstantFit {
        relation: relation.into(),
        value,
        rational,
        distance,
        misfit: ratio(misfit, scale),
    }
}

/// Fit the prefactors relating surface quantities to `U₁`-derived ones at the
/// sample points `(y, s)` (snapped to the nearest grid node).
pub fn calibrate_constants(
    surface: &SigmaSurface,
    profile: &ProfileSpec,
    samples: &[(f64, f64)],
) -> Result<CalibrationReport> {
    let mut used = Vec::new();
    let (mut xq, mut yq) = (Vec::new(), Vec::new());
    let (mut xqm, mut yqm) = (Vec::new(), Vec::new());
    let (mut xss, mut yss) = (Vec::new(), Vec::new());
    let (mut xa, mut ya) = (Vec::new(), Vec::new());
    let (mut xp, mut yp) = (Vec::new(), Vec::new());
    let mut cross: f64 = 0.0;
    for &(y0, s0) in samples {
        let (iy, is) = surface.nearest(y0, s0);
        let (Some(d), Some(qv)) = (surface.derivatives(iy, is), surface.q[iy][is]) else {
            continue;
        };
        let (y, s) = (surface.y_grid[iy], surface.s_grid[is]);
        let w: Arc<dyn Weight> = Arc::new(profile.at(y));
        let h = 1e-3 * s;
        let grid = zs_lambda_grid(w.as_ref(), s + h, 16)?;
        let mid = assemble_fields(w.clone(), s, &grid)?;
        let u = compute_u1_calibrated(&mid)?;
        let up = compute_u1(&assemble_fields(w.clone(), s + h, &grid)?, u.sign);
        let dn = compute_u1(&assemble_fields(w, s - h, &grid)?, u.sign);
        let dalpha = (up.alpha_rh - dn.alpha_rh) / (2.0 * h);
        xq.push(I * u.gamma);
        yq.push(qv);
        xqm.push(I * u.U1[(1, 0)]);
        yqm.push(qv);
        xss.push(u.gamma * u.gamma);
        yss.push(d[1]);
        xa.push(I * u.gamma * u.gamma);
        ya.push(dalpha);
        xp.push(u.p);
        yp.push(d[0]);
        cross = cross.max((-d[0] - u.p).norm());
        used.push((y, s));
    }
    if used.is_empty() {
        return Err(Error::Config(
            "no sample point has a complete stencil".into(),
        ));
    }
    let tol = 1e-3;
    let fits = vec![
        fit_constant("q = c·iγ", &xq, &yq, tol),
        fit_constant("q = c·i[U₁]₂₁", &xqm, &yqm, tol),
        fit_constant("∂ₛ²σ = c·γ²", &xss, &yss, tol),
        fit_constant("∂ₛα = c·iγ²", &xa, &ya, tol),
        fit_constant("∂ₛσ = c·p", &xp, &yp, tol),
    ];
    let all_rational = fits.iter().all(|f| f.rational.is_some());
    Ok(CalibrationReport {
        samples: used,
        fits,
        all_rational,
        p_crosscheck: cross,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmallSLimit {
    pub y: f64,
    pub s: f64,
    pub s_dsigma: f64,
    pub dy_sigma: f64,
    pub s_u1_norm: f64,
    pub dy_u1_norm: f64,
}

/// `|s∂ₛσ|`, `|∂_yσ|`, `s‖U₁‖` and `‖∂_yU₁‖` at each `s`, by centered
/// differences with steps `1e-3·s` and `h_y`.
pub fn small_s_limits(
    profile: &ProfileSpec,
    s_values: &[f64],
    h_y: f64,
) -> Result<Vec<SmallSLimit>> {
    let y = profile.y;
    let s_top = s_values.iter().cloned().fold(0.0, f64::max) * 1.01;
    let grid = surface_lambda_grid(profile, y - h_y, y + h_y, s_top, 16)?;
    let sigma = |yy: f64, s: f64| -> Result<Complex64> {
        let w: Arc<dyn Weight> = Arc::new(profile.at(yy));
        let r = sweep_on_lambda_grid(w, &[s], &grid)?;
        if r[0].is_zero() {
            return Err(Error::DeterminantZero { s });
        }
        Ok(r[0].log_det)
    };
    let mut out = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let hs = 1e-3 * s;
        let ds = (sigma(y, s + hs)? - sigma(y, s - hs)?) / (2.0 * hs);
        let dy = (sigma(y + h_y, s)? - sigma(y - h_y, s)?) / (2.0 * h_y);
        let w: Arc<dyn Weight> = Arc::new(profile.at(y));
        let fields = assemble_fields(w, s, &grid)?;
        let u = compute_u1(&fields, 1.0);
        out.push(SmallSLimit {
            y,
            s,
            s_dsigma: (ds * s).norm(),
            dy_sigma: dy.norm(),
            s_u1_norm: s * mat_norm(&u.U1),
            dy_u1_norm: dy_u1_norm(profile, s, h_y, &grid, 1.0)?,
        });
    }
    Ok(out)
}

/// The built-in profile families usable for surfaces.
pub fn profile_by_name(name: &str) -> Result<ProfileSpec> {
    ProfileSpec::new(ProfileFamily::from_name(name)?, 0.0)
}
