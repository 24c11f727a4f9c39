//! Resolvent fields of the integrable kernel, Riemann–Hilbert boundary values,
//! and the Zakharov–Shabat / Lax identities built on them.
//!
//! The conjugated kernel `√w_s(ζ) K^sin(ζ,η) √w_s(η)` is integrable with
//! `f(ζ) = √w_s/(2πi)·(e^{iπζ}, e^{-iπζ})` and `g(η) = √w_s·(e^{-iπη}, -e^{iπη})`.
//! `F = (1-K)^{-1} f` and `G = (1-K)^{-1} g` are solved at the Nyström nodes and
//! extended off the nodes by Nyström interpolation. Everything downstream
//! (`Y₊`, `U₊`, `φ`, `ψ`, `U₁`) is assembled from them.
//!
//! Potentials are read off `U₁` as `α = 2[U₁]₁₁`, `β = 2[U₁]₁₂`, `γ = 2[U₁]₂₁`
//! and `p = iα`, `q = iγ`. With this normalization `∂ₛ log Q = -p`,
//! `∂ₛ² log Q = -q²` and `∂ₛα = iγ²` hold simultaneously.

use crate::fredholm::{log_det, resolvent_solve};
use crate::operators::{
    build_conjugated_on_lambda_grid, sine_kernel_value, support_radius, DOMAIN_MARGIN,
};
use crate::quadrature::{gauss_legendre, pv_integrate_tabulated, Grid};
use crate::weights::{ProfileSpec, Weight};
use crate::{Complex64, Error, Result};
use nalgebra::{DVector, Matrix2};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
#[cfg(test)]
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub type Vec2 = [Complex64; 2];
pub type Mat2 = Matrix2<Complex64>;

fn outer(a: &Vec2, b: &Vec2) -> Mat2 {
    Mat2::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

fn apply(m: &Mat2, v: &Vec2) -> Vec2 {
    [
        m[(0, 0)] * v[0] + m[(0, 1)] * v[1],
        m[(1, 0)] * v[0] + m[(1, 1)] * v[1],
    ]
}

fn norm2(v: &Vec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Frobenius norm of a 2×2 complex matrix.
pub fn mat_norm(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `f(ζ)` for a given `√w_s(ζ)`.
pub fn f_vector(r: Complex64, zeta: f64) -> Vec2 {
    let e = Complex64::from_polar(1.0, PI * zeta);
    let c = r / (2.0 * PI * I);
    [c * e, c / e]
}

/// `g(ζ)` for a given `√w_s(ζ)`.
pub fn g_vector(r: Complex64, zeta: f64) -> Vec2 {
    let e = Complex64::from_polar(1.0, PI * zeta);
    [r / e, -r * e]
}

/// λ-grid for field reconstruction: covers the conjugated domain and
/// `[-Λ_{w'} - 2, Λ_{w'} + 2]`, with panel widths as in the determinant grid.
pub fn zs_lambda_grid(w: &dyn Weight, s_max: f64, order: usize) -> Result<Grid> {
    if !(s_max > 0.0) {
        return Err(Error::Config(format!("s must be positive, got {s_max}")));
    }
    let lam_w = support_radius(w)?;
    let lam_dw = if w.is_zero() {
        1.0
    } else {
        w.derivative_truncation_radius(w.truncation_tol())?
    };
    let half = (lam_w * (1.0 + DOMAIN_MARGIN)).max(lam_dw + 2.0);
    let width = (2.0 * w.length_scale()).min(4.0 * PI / s_max);
    let panels = (2.0 * half / width).ceil().max(2.0) as usize;
    gauss_legendre(order, -half, half, panels)
}

struct CauchyTable {
    grid: Grid,
    h: Vec<Mat2>,
}

#[derive(Debug, Clone)]
pub struct ZSFieldSet {
    pub s: f64,
    pub weight: Arc<dyn Weight>,
    pub lambda_grid: Grid,
    pub zeta_grid: Grid,
    /// `√w_s` at the nodes.
    pub sqrt_w: Vec<Complex64>,
    pub f_vec: Vec<Vec2>,
    pub g_vec: Vec<Vec2>,
    pub big_f: Vec<Vec2>,
    pub big_g: Vec<Vec2>,
    pub log_det: Complex64,
    pub yplus: Vec<Mat2>,
    /// Orientation `κ` in `Y = I + κ∫ F gᵀ/(u - ζ) du`, fixed by calibration.
    pub cauchy_sign: Option<f64>,
    /// `max_k ‖F(u_k) - Y₊(u_k) f(u_k)‖` after calibration.
    pub yplus_residual: f64,
    pub uplus: Vec<Mat2>,
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
}

/// Resolve `F` and `G` on the Nyström nodes of the conjugated operator.
pub fn assemble_fields(w: Arc<dyn Weight>, s: f64, lambda_grid: &Grid) -> Result<ZSFieldSet> {
    let op = build_conjugated_on_lambda_grid(w.clone(), s, lambda_grid)?;
    let det = log_det(&op);
    if det.is_zero() {
        return Err(Error::DeterminantZero { s });
    }
    let zeta = op.grid.clone();
    let n = zeta.len();
    let f_vec: Vec<Vec2> = (0..n)
        .map(|j| f_vector(op.sqrt_w[j], zeta.nodes[j]))
        .collect();
    let g_vec: Vec<Vec2> = (0..n)
        .map(|j| g_vector(op.sqrt_w[j], zeta.nodes[j]))
        .collect();
    let sq: Vec<f64> = zeta.weights.iter().map(|x| x.sqrt()).collect();
    let mut rhs = Vec::with_capacity(4);
    for c in 0..2 {
        rhs.push(DVector::from_fn(n, |j, _| f_vec[j][c] * sq[j]));
    }
    for c in 0..2 {
        rhs.push(DVector::from_fn(n, |j, _| g_vec[j][c] * sq[j]));
    }
    let x = resolvent_solve(&op, &rhs)?;
    let big_f = (0..n).map(|j| [x[0][j] / sq[j], x[1][j] / sq[j]]).collect();
    let big_g = (0..n).map(|j| [x[2][j] / sq[j], x[3][j] / sq[j]]).collect();
    Ok(ZSFieldSet {
        s,
        weight: w,
        lambda_grid: lambda_grid.clone(),
        zeta_grid: zeta,
        sqrt_w: op.sqrt_w,
        f_vec,
        g_vec,
        big_f,
        big_g,
        log_det: det.log_det,
        yplus: Vec::new(),
        cauchy_sign: None,
        yplus_residual: f64::NAN,
        uplus: Vec::new(),
        phi: Vec::new(),
        psi: Vec::new(),
    })
}

impl ZSFieldSet {
    pub fn len(&self) -> usize {
        self.zeta_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta_grid.is_empty()
    }

    fn sqrt_w_at(&self, zeta: f64) -> Complex64 {
        self.weight.eval(PI * zeta / self.s).sqrt()
    }

    /// `Σⱼ ωⱼ K^sin(ζ, uⱼ) √w_s(uⱼ) v(uⱼ)` for `v = F` or `G`.
    fn smoothing_sum(&self, zeta: f64, v: &[Vec2]) -> Vec2 {
        let mut acc = [ZERO; 2];
        for j in 0..self.len() {
            let k = self.zeta_grid.weights[j] * sine_kernel_value(zeta, self.zeta_grid.nodes[j]);
            let c = self.sqrt_w[j] * k;
            acc[0] += c * v[j][0];
            acc[1] += c * v[j][1];
        }
        acc
    }

    /// Nyström interpolant `F(ζ) = f(ζ) + √w_s(ζ) Σⱼ ωⱼ K^sin(ζ,uⱼ) √w_s(uⱼ) F(uⱼ)`.
    pub fn big_f_at(&self, zeta: f64) -> Vec2 {
        let r = self.sqrt_w_at(zeta);
        let f = f_vector(r, zeta);
        let acc = self.smoothing_sum(zeta, &self.big_f);
        [f[0] + r * acc[0], f[1] + r * acc[1]]
    }

    pub fn big_g_at(&self, zeta: f64) -> Vec2 {
        let r = self.sqrt_w_at(zeta);
        let g = g_vector(r, zeta);
        let acc = self.smoothing_sum(zeta, &self.big_g);
        [g[0] + r * acc[0], g[1] + r * acc[1]]
    }

    /// `(φ(λ), ψ(λ))` directly from the resolvent, without `Y₊`:
    /// `φ = e^{isλ} + 2πi Σⱼ ωⱼ K^sin(sλ/π, uⱼ) √w_s(uⱼ) F₁(uⱼ)`, likewise `ψ` with `F₂`.
    pub fn phi_psi_direct(&self, lambda: f64) -> (Complex64, Complex64) {
        let zeta = self.s * lambda / PI;
        let acc = self.smoothing_sum(zeta, &self.big_f);
        let e = Complex64::from_polar(1.0, self.s * lambda);
        (e + 2.0 * PI * I * acc[0], 1.0 / e + 2.0 * PI * I * acc[1])
    }

    /// `F gᵀ` tabulated on a fourfold refinement of the ζ-grid, for Cauchy integrals.
    fn cauchy_table(&self) -> Result<CauchyTable> {
        let z = &self.zeta_grid;
        let (a, b) = z.interval;
        let grid = gauss_legendre(z.order, a, b, 4 * z.panel_count)?;
        let h = grid
            .nodes
            .iter()
            .map(|&u| outer(&self.big_f_at(u), &self.g_at(u)))
            .collect();
        Ok(CauchyTable { grid, h })
    }

    /// `(p.v.) ∫ F(u) g(u)ᵀ/(u - c) du` over the ζ-domain, and `F(c) g(c)ᵀ`.
    fn cauchy_parts(&self, t: &CauchyTable, c: f64, h_c: Mat2) -> Result<(Mat2, Mat2)> {
        let (a, b) = t.grid.interval;
        let mut pv = Mat2::zeros();
        for r in 0..2 {
            for col in 0..2 {
                let values: Vec<Complex64> = t.h.iter().map(|m| m[(r, col)]).collect();
                pv[(r, col)] = if c > a && c < b {
                    pv_integrate_tabulated(&values, h_c[(r, col)], &t.grid, c)?
                } else {
                    values
                        .iter()
                        .zip(&t.grid.nodes)
                        .zip(&t.grid.weights)
                        .map(|((v, u), om)| v * (om / (u - c)))
                        .sum()
                };
            }
        }
        Ok((pv, h_c))
    }

    fn g_at(&self, c: f64) -> Vec2 {
        g_vector(self.sqrt_w_at(c), c)
    }

    /// Boundary value `Y_±(c) = I + κ (p.v.∫ F gᵀ/(u - c) du ± iπ F(c) g(c)ᵀ)`.
    pub fn y_boundary_at(&self, c: f64, plus: bool, kappa: f64) -> Result<Mat2> {
        let t = self.cauchy_table()?;
        let hc = outer(&self.big_f_at(c), &self.g_at(c));
        self.y_from_parts(&t, c, hc, plus, kappa)
    }

    fn y_from_parts(
        &self,
        t: &CauchyTable,
        c: f64,
        hc: Mat2,
        plus: bool,
        kappa: f64,
    ) -> Result<Mat2> {
        let (pv, hc) = self.cauchy_parts(t, c, hc)?;
        let side = if plus { I * PI } else { -I * PI };
        Ok(Mat2::identity() + (pv + hc * side) * Complex64::new(kappa, 0.0))
    }

    fn y_at_node(&self, t: &CauchyTable, k: usize, plus: bool, kappa: f64) -> Result<Mat2> {
        let hc = outer(&self.big_f[k], &self.g_vec[k]);
        self.y_from_parts(t, self.zeta_grid.nodes[k], hc, plus, kappa)
    }

    /// `Φ(λ) = [[e^{isλ}, e^{isλ}], [e^{-isλ}, 0]]`.
    pub fn phase_matrix(&self, lambda: f64) -> Mat2 {
        let e = Complex64::from_polar(1.0, self.s * lambda);
        Mat2::new(e, e, 1.0 / e, ZERO)
    }
}

/// Fill in `Y₊` at every node. The orientation `κ ∈ {+1, -1}` is the one for
/// which `F = Y₊ f` holds at three interior test nodes.
pub fn reconstruct_yplus(mut fields: ZSFieldSet) -> Result<ZSFieldSet> {
    let n = fields.len();
    if n < 4 {
        return Err(Error::Config("too few nodes for Y₊ reconstruction".into()));
    }
    let t = fields.cauchy_table()?;
    let scale = fields
        .big_f
        .iter()
        .map(norm2)
        .fold(0.0, f64::max)
        .max(1e-300);
    let tests = [n / 2, n / 2 - n / 8, n / 2 + n / 8];
    let mut diagnostics = Vec::new();
    let mut chosen = None;
    for kappa in [1.0, -1.0] {
        let mut worst = 0.0f64;
        for &k in &tests {
            let y = fields.y_at_node(&t, k, true, kappa)?;
            let fy = apply(&y, &fields.f_vec[k]);
            let d = [fy[0] - fields.big_f[k][0], fy[1] - fields.big_f[k][1]];
            worst = worst.max(norm2(&d) / scale);
        }
        diagnostics.push(format!("κ = {kappa:+}: relative residual {worst:.3e}"));
        if worst <= 1e-6 && chosen.is_none() {
            chosen = Some(kappa);
        }
    }
    let all_zero =
        fields.big_f.iter().all(|v| norm2(v) == 0.0) || t.h.iter().all(|m| mat_norm(m) == 0.0);
    let kappa = match chosen {
        Some(k) => k,
        None if all_zero => -1.0,
        None => {
            return Err(Error::Convention(format!(
                "no Cauchy orientation reproduces F = Y₊ f: {}",
                diagnostics.join("; ")
            )))
        }
    };
    let mut yplus = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for k in 0..n {
        let y = fields.y_at_node(&t, k, true, kappa)?;
        let fy = apply(&y, &fields.f_vec[k]);
        let d = [fy[0] - fields.big_f[k][0], fy[1] - fields.big_f[k][1]];
        worst = worst.max(norm2(&d));
        yplus.push(y);
    }
    fields.yplus = yplus;
    fields.cauchy_sign = Some(kappa);
    fields.yplus_residual = worst;
    Ok(fields)
}

/// `U₊ = Y₊(sλ/π)·Φ(λ)`, `φ = [U₊]₁₁`, `ψ = [U₊]₂₁`.
pub fn compute_phi_psi(mut fields: ZSFieldSet) -> Result<ZSFieldSet> {
    if fields.yplus.len() != fields.len() {
        fields = reconstruct_yplus(fields)?;
    }
    let lambdas = fields.lambda_grid.nodes.clone();
    fields.uplus = fields
        .yplus
        .iter()
        .zip(&lambdas)
        .map(|(y, &l)| y * fields.phase_matrix(l))
        .collect();
    fields.phi = fields.uplus.iter().map(|u| u[(0, 0)]).collect();
    fields.psi = fields.uplus.iter().map(|u| u[(1, 0)]).collect();
    Ok(fields)
}

/// Fields, `Y₊` and `U₊` in one call.
pub fn solve_fields(w: Arc<dyn Weight>, s: f64, lambda_grid: &Grid) -> Result<ZSFieldSet> {
    compute_phi_psi(reconstruct_yplus(assemble_fields(w, s, lambda_grid)?)?)
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, Serialize)]
pub struct U1Coefficients {
    #[serde(serialize_with = "ser_mat2")]
    pub U1: Mat2,
    pub p: Complex64,
    pub q: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub alpha_rh: Complex64,
    /// The sign `c` in `U₁ = c·(π/s)∫ F gᵀ du`.
    pub sign: f64,
}

fn ser_mat2<S: serde::Serializer>(m: &Mat2, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(4))?;
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        seq.serialize_element(&[m[(r, c)].re, m[(r, c)].im])?;
    }
    seq.end()
}

impl U1Coefficients {
    /// The matrix-level readings `i[U₁]₁₁` and `i[U₁]₂₁`.
    pub fn matrix_level_p_q(&self) -> (Complex64, Complex64) {
        (I * self.U1[(0, 0)], I * self.U1[(1, 0)])
    }
}

/// `(π/s) ∫ F(u) g(u)ᵀ du` over the ζ-grid.
pub fn first_moment(fields: &ZSFieldSet) -> Mat2 {
    let mut m = Mat2::zeros();
    for j in 0..fields.len() {
        m += outer(&fields.big_f[j], &fields.g_vec[j])
            * Complex64::new(fields.zeta_grid.weights[j], 0.0);
    }
    m * Complex64::new(PI / fields.s, 0.0)
}

/// `U₁` and its potentials for a given sign `c`.
pub fn compute_u1(fields: &ZSFieldSet, sign: f64) -> U1Coefficients {
    let u1 = first_moment(fields) * Complex64::new(sign, 0.0);
    let alpha_rh = 2.0 * u1[(0, 0)];
    let beta = 2.0 * u1[(0, 1)];
    let gamma = 2.0 * u1[(1, 0)];
    U1Coefficients {
        U1: u1,
        p: I * alpha_rh,
        q: I * gamma,
        beta,
        gamma,
        alpha_rh,
        sign,
    }
}

/// `∂ₛ log det` on a fixed λ-grid by a centered difference of step `h`.
pub fn d_log_det_ds(w: &Arc<dyn Weight>, s: f64, h: f64, lambda_grid: &Grid) -> Result<Complex64> {
    let lp = log_det(&build_conjugated_on_lambda_grid(
        w.clone(),
        s + h,
        lambda_grid,
    )?);
    let lm = log_det(&build_conjugated_on_lambda_grid(
        w.clone(),
        s - h,
        lambda_grid,
    )?);
    if lp.is_zero() || lm.is_zero() {
        return Err(Error::DeterminantZero { s });
    }
    let lm_log = crate::fredholm::unwrap_branch(lp.log_det, lm.log_det);
    Ok((lp.log_det - lm_log) / (2.0 * h))
}

/// Choose `c ∈ {+1, -1}` so that `p = -∂ₛ log F` to `tol`.
pub fn calibrate_u1_sign(
    fields: &ZSFieldSet,
    dlog_ds: Complex64,
    tol: f64,
) -> Result<U1Coefficients> {
    let mut diag = Vec::new();
    for sign in [1.0, -1.0] {
        let u = compute_u1(fields, sign);
        let r = (u.p + dlog_ds).norm();
        diag.push(format!("c = {sign:+}: |p + ∂ₛlog F| = {r:.3e}"));
        if r <= tol {
            return Ok(u);
        }
    }
    let u = compute_u1(fields, 1.0);
    let (pm, _) = u.matrix_level_p_q();
    diag.push(format!(
        "matrix-level i[U₁]₁₁: |p + ∂ₛlog F| = {:.3e}",
        (pm + dlog_ds).norm()
    ));
    Err(Error::Convention(diag.join("; ")))
}

/// `compute_U1` with the sign calibrated against a centered difference of `log det`.
pub fn compute_u1_calibrated(fields: &ZSFieldSet) -> Result<U1Coefficients> {
    if fields.big_f.iter().zip(&fields.f_vec).all(|(a, b)| a == b)
        && first_moment(fields) == Mat2::zeros()
    {
        return Ok(compute_u1(fields, 1.0));
    }
    let h = 1e-3 * fields.s;
    let d = d_log_det_ds(&fields.weight, fields.s, h, &fields.lambda_grid)?;
    calibrate_u1_sign(fields, d, 1e-6)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceReport {
    pub s: f64,
    /// `|∫ φψ w'| / N`.
    pub orthogonality: f64,
    /// `|β + (1/2πs)∫ φ² w'| / N`.
    pub beta: f64,
    /// `|γ + (1/2πs)∫ ψ² w'| / N`.
    pub gamma: f64,
    /// `|γ - (1/2πs)∫ φ² w'| / N` (even weights).
    pub gamma_even: Option<f64>,
    /// `N = ∫ |φ|² |w'|`.
    pub normalization: f64,
}

impl TraceReport {
    pub fn max(&self) -> f64 {
        self.orthogonality
            .max(self.beta)
            .max(self.gamma)
            .max(self.gamma_even.unwrap_or(0.0))
    }
}

/// Orthogonality and the β, γ trace formulas on the λ-grid.
pub fn verify_trace_identities(fields: &ZSFieldSet, u1: &U1Coefficients) -> Result<TraceReport> {
    if fields.phi.len() != fields.len() {
        return Err(Error::Config("φ, ψ not populated".into()));
    }
    let mut phipsi = ZERO;
    let mut phi2 = ZERO;
    let mut psi2 = ZERO;
    let mut norm = 0.0;
    for (j, (&l, &om)) in fields
        .lambda_grid
        .nodes
        .iter()
        .zip(&fields.lambda_grid.weights)
        .enumerate()
    {
        let dw = fields.weight.derivative(l);
        let (ph, ps) = (fields.phi[j], fields.psi[j]);
        phipsi += ph * ps * dw * om;
        phi2 += ph * ph * dw * om;
        psi2 += ps * ps * dw * om;
        norm += ph.norm_sqr() * dw.norm() * om;
    }
    let s = fields.s;
    let c = 1.0 / (2.0 * PI * s);
    let n = if norm > 0.0 { norm } else { 1.0 };
    Ok(TraceReport {
        s,
        orthogonality: phipsi.norm() / n,
        beta: (u1.beta + phi2 * c).norm() / n,
        gamma: (u1.gamma + psi2 * c).norm() / n,
        gamma_even: fields
            .weight
            .is_even()
            .then(|| (u1.gamma - phi2 * c).norm() / n),
        normalization: norm,
    })
}

/// The Lax matrix `M(λ) = i(λ, -β; γ, -λ)` of the `s`-flow.
pub fn lax_m(u1: &U1Coefficients, lambda: f64) -> Mat2 {
    let l = Complex64::new(lambda, 0.0);
    Mat2::new(I * l, -I * u1.beta, I * u1.gamma, -I * l)
}

/// The Lax matrix `L = (is - i∂_y p, i∂_y q; -i∂_y q, -is + i∂_y p)` of `∂_λ + 2λ∂_y`.
pub fn lax_l(s: f64, dyp: Complex64, dyq: Complex64) -> Mat2 {
    let is = I * s;
    Mat2::new(is - I * dyp, I * dyq, -I * dyq, -is + I * dyp)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaxPair {
    pub s: f64,
    pub beta: Complex64,
    pub gamma: Complex64,
    pub dyp: Complex64,
    pub dyq: Complex64,
}

impl LaxPair {
    #[allow(non_snake_case)]
    pub fn M_of(&self, lambda: f64) -> Mat2 {
        let l = Complex64::new(lambda, 0.0);
        Mat2::new(I * l, -I * self.beta, I * self.gamma, -I * l)
    }

    #[allow(non_snake_case)]
    pub fn L(&self) -> Mat2 {
        lax_l(self.s, self.dyp, self.dyq)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZsFlowResidual {
    pub s: f64,
    pub h: f64,
    /// `max_λ |∂ₛφ - iλφ + iβψ|`.
    pub phi: f64,
    /// `max_λ |∂ₛψ - iγφ + iλψ|`.
    pub psi: f64,
}

/// Centered-difference residual of the `s`-flow at the λ-grid nodes.
pub fn zs_flow_residual(
    w: Arc<dyn Weight>,
    s: f64,
    h: f64,
    lambda_grid: &Grid,
) -> Result<ZsFlowResidual> {
    if !(h > 0.0 && h < s) {
        return Err(Error::Config(format!("step h = {h} must lie in (0, s)")));
    }
    let mid = solve_fields(w.clone(), s, lambda_grid)?;
    let plus = solve_fields(w.clone(), s + h, lambda_grid)?;
    let minus = solve_fields(w, s - h, lambda_grid)?;
    let u1 = compute_u1_calibrated(&mid)?;
    let mut rphi = 0.0f64;
    let mut rpsi = 0.0f64;
    for (j, &l) in lambda_grid.nodes.iter().enumerate() {
        let l = Complex64::new(l, 0.0);
        let dphi = (plus.phi[j] - minus.phi[j]) / (2.0 * h);
        let dpsi = (plus.psi[j] - minus.psi[j]) / (2.0 * h);
        rphi = rphi.max((dphi - I * l * mid.phi[j] + I * u1.beta * mid.psi[j]).norm());
        rpsi = rpsi.max((dpsi - I * u1.gamma * mid.phi[j] + I * l * mid.psi[j]).norm());
    }
    Ok(ZsFlowResidual {
        s,
        h,
        phi: rphi,
        psi: rpsi,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondLogDerivative {
    pub s: f64,
    /// `∂ₛ(s∂ₛ log F)` by differencing determinants.
    pub from_determinant: f64,
    /// `(1/π) ∫ λ w'(λ) φ(λ) ψ(λ) dλ`.
    pub from_fields: f64,
    pub residual: f64,
}

/// Both sides of the second-log-derivative identity.
pub fn second_log_derivative(fields: &ZSFieldSet, h: f64) -> Result<SecondLogDerivative> {
    let s = fields.s;
    let at = |t: f64| -> Result<f64> {
        let r = log_det(&build_conjugated_on_lambda_grid(
            fields.weight.clone(),
            t,
            &fields.lambda_grid,
        )?);
        if r.is_zero() {
            return Err(Error::DeterminantZero { s: t });
        }
        Ok(r.log_det.re)
    };
    let (lm, l0, lp) = (at(s - h)?, at(s)?, at(s + h)?);
    let d1 = (lp - lm) / (2.0 * h);
    let d2 = (lp - 2.0 * l0 + lm) / (h * h);
    let lhs = d1 + s * d2;
    let mut rhs = ZERO;
    for (j, (&l, &om)) in fields
        .lambda_grid
        .nodes
        .iter()
        .zip(&fields.lambda_grid.weights)
        .enumerate()
    {
        rhs += fields.weight.derivative(l) * fields.phi[j] * fields.psi[j] * (l * om);
    }
    let rhs = rhs / PI;
    Ok(SecondLogDerivative {
        s,
        from_determinant: lhs,
        from_fields: rhs.re,
        residual: (lhs - rhs).norm(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaxLResidual {
    pub y: f64,
    pub s: f64,
    pub h_lambda: f64,
    pub h_y: f64,
    pub residual: f64,
    pub pair: LaxPair,
}

/// First-column residual of `(∂_λ + 2λ∂_y) U = L U` at the sample points `lambdas`.
pub fn lax_l_residual(
    profile: &ProfileSpec,
    s: f64,
    h_lambda: f64,
    h_y: f64,
    lambda_grid: &Grid,
    lambdas: &[f64],
) -> Result<LaxLResidual> {
    let y = profile.y;
    let build = |yy: f64| -> Result<ZSFieldSet> {
        let w: Arc<dyn Weight> = Arc::new(profile.at(yy));
        assemble_fields(w, s, lambda_grid)
    };
    let mid = build(y)?;
    let up = build(y + h_y)?;
    let dn = build(y - h_y)?;
    let u_mid = compute_u1_calibrated(&mid)?;
    let u_up = compute_u1(&up, u_mid.sign);
    let u_dn = compute_u1(&dn, u_mid.sign);
    let dyp = (u_up.p - u_dn.p) / (2.0 * h_y);
    let dyq = (u_up.q - u_dn.q) / (2.0 * h_y);
    let l_mat = lax_l(s, dyp, dyq);
    let mut worst = 0.0f64;
    for &l in lambdas {
        let (phi, psi) = mid.phi_psi_direct(l);
        let dlam = (mid.phi_psi_direct(l + h_lambda).0 - mid.phi_psi_direct(l - h_lambda).0)
            / (2.0 * h_lambda);
        let dy = (up.phi_psi_direct(l).0 - dn.phi_psi_direct(l).0) / (2.0 * h_y);
        let lhs = dlam + dy * (2.0 * l);
        let rhs = l_mat[(0, 0)] * phi + l_mat[(0, 1)] * psi;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(LaxLResidual {
        y,
        s,
        h_lambda,
        h_y,
        residual: worst,
        pair: LaxPair {
            s,
            beta: u_mid.beta,
            gamma: u_mid.gamma,
            dyp,
            dyq,
        },
    })
}

/// `‖U₁(y + h) - U₁(y - h)‖ / 2h`.
pub fn dy_u1_norm(
    profile: &ProfileSpec,
    s: f64,
    h_y: f64,
    lambda_grid: &Grid,
    sign: f64,
) -> Result<f64> {
    let at = |yy: f64| -> Result<Mat2> {
        let w: Arc<dyn Weight> = Arc::new(profile.at(yy));
        Ok(compute_u1(&assemble_fields(w, s, lambda_grid)?, sign).U1)
    };
    let d = (at(profile.y + h_y)? - at(profile.y - h_y)?) / Complex64::new(2.0 * h_y, 0.0);
    Ok(mat_norm(&d))
}
