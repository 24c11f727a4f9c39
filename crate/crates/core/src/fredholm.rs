//! Log-determinants, traces and resolvent solves for Nyström matrices.

use crate::operators::{
    build_conjugated_on_lambda_grid, build_conjugated_operator, build_interval_operator,
    default_conjugated_panels, default_interval_panels, DiscreteOperator, IntervalKernel,
    DEFAULT_ORDER,
};
use crate::quadrature::Grid;
use crate::weights::Weight;
use crate::{Complex64, Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetResult {
    /// `log det(I - M)`; real part `-∞` when the determinant vanishes.
    pub log_det: Complex64,
    pub det: Complex64,
    pub trace: Complex64,
    pub s: f64,
    pub y: Option<f64>,
    pub converged: bool,
    pub est_error: f64,
    pub nodes: usize,
}

impl DetResult {
    pub fn is_zero(&self) -> bool {
        self.det == Complex64::new(0.0, 0.0)
    }

    pub fn with_y(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }
}

/// `Σ Mᵢᵢ`.
pub fn trace(op: &DiscreteOperator) -> Complex64 {
    (0..op.dim()).map(|i| op.matrix[(i, i)]).sum()
}

fn is_real(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// `log det(A)` for a square matrix, or `None` if `A` is singular.
///
/// Real symmetric positive-definite input goes through Cholesky; everything
/// else through LU with partial pivoting.
pub fn log_det_of(a: &DMatrix<Complex64>) -> Option<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Some(Complex64::new(0.0, 0.0));
    }
    if is_real(a) {
        let r = a.map(|z| z.re);
        let symmetric = (0..n).all(|i| (0..i).all(|j| r[(i, j)] == r[(j, i)]));
        if symmetric {
            if let Some(ch) = r.clone().cholesky() {
                let l = ch.l_dirty();
                let s: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
                return Some(Complex64::new(2.0 * s, 0.0));
            }
        }
        let lu = r.lu();
        let u = lu.u();
        let mut sign = lu.p().determinant::<f64>();
        let mut acc = 0.0;
        for i in 0..n {
            let d = u[(i, i)];
            if d == 0.0 || !d.is_finite() {
                return None;
            }
            acc += d.abs().ln();
            sign *= d.signum();
        }
        return Some(Complex64::new(acc, if sign < 0.0 { PI } else { 0.0 }));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let d = u[(i, i)];
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        acc += Complex64::new(0.0, PI);
    }
    Some(Complex64::new(acc.re, wrap_phase(acc.im)))
}

fn wrap_phase(t: f64) -> f64 {
    let r = (t + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Shift the imaginary part of `current` by a multiple of `2π` so that it lies
/// within `π` of `previous`.
pub fn unwrap_branch(previous: Complex64, current: Complex64) -> Complex64 {
    if !current.im.is_finite() || !previous.im.is_finite() {
        return current;
    }
    let k = ((previous.im - current.im) / (2.0 * PI)).round();
    Complex64::new(current.re, current.im + 2.0 * PI * k)
}

/// `log det(I - M)` for real symmetric `M` with `I - M` positive definite.
///
/// Cholesky written in terms of the pivot deficits `δⱼ = 1 - lⱼⱼ²
/// = mⱼⱼ + Σₖ lⱼₖ²`, a sum of nonnegative terms, so `Σ log1p(-δⱼ)` keeps
/// relative accuracy when `M` is small. `None` if a pivot is not positive.
pub fn log_det_identity_minus_symmetric(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut l = vec![0.0f64; n * n];
    let mut acc = 0.0;
    for j in 0..n {
        let tail = &mut l[j * n..];
        let row_j = &mut tail[..n];
        let delta = m[(j, j)] + row_j[..j].iter().map(|x| x * x).sum::<f64>();
        if !(delta < 1.0) || !delta.is_finite() {
            return None;
        }
        let ljj = (1.0 - delta).sqrt();
        row_j[j] = ljj;
        acc += (-delta).ln_1p();
        let (row_j, rows_below) = tail.split_at_mut(n);
        let row_j: &[f64] = &row_j[..j];
        for (r, row_i) in rows_below.chunks_exact_mut(n).enumerate() {
            let i = j + 1 + r;
            let dot: f64 = row_i[..j].iter().zip(row_j).map(|(a, b)| a * b).sum();
            row_i[j] = (-m[(i, j)] - dot) / ljj;
        }
    }
    Some(acc)
}

/// `log det(I - M)` of a discretized operator.
pub fn log_det(op: &DiscreteOperator) -> DetResult {
    let n = op.dim();
    let tr = trace(op);
    if is_real(&op.matrix) {
        let r = op.matrix.map(|z| z.re);
        // assembly order can break exact symmetry at the rounding level
        let tol = 1e-13 * r.amax();
        let symmetric = (0..n).all(|i| (0..i).all(|j| (r[(i, j)] - r[(j, i)]).abs() <= tol));
        if symmetric {
            if let Some(l) = log_det_identity_minus_symmetric(&r) {
                return DetResult {
                    log_det: Complex64::new(l, 0.0),
                    det: Complex64::new(l.exp(), 0.0),
                    trace: tr,
                    s: op.s,
                    y: None,
                    converged: false,
                    est_error: f64::NAN,
                    nodes: n,
                };
            }
        }
    }
    let a = DMatrix::<Complex64>::identity(n, n) - &op.matrix;
    let (log_det, det) = match log_det_of(&a) {
        Some(l) => (l, l.exp()),
        None => (
            Complex64::new(f64::NEG_INFINITY, 0.0),
            Complex64::new(0.0, 0.0),
        ),
    };
    DetResult {
        log_det,
        det,
        trace: tr,
        s: op.s,
        y: None,
        converged: false,
        est_error: f64::NAN,
        nodes: n,
    }
}

/// Solve `(I - M) X = rhs` for each right-hand side.
pub fn resolvent_solve(
    op: &DiscreteOperator,
    rhs: &[DVector<Complex64>],
) -> Result<Vec<DVector<Complex64>>> {
    let n = op.dim();
    for r in rhs {
        if r.len() != n {
            return Err(Error::Config(format!(
                "right-hand side has length {}, expected {n}",
                r.len()
            )));
        }
    }
    let a = DMatrix::<Complex64>::identity(n, n) - &op.matrix;
    let lu = a.lu();
    if (0..n).any(|i| lu.u()[(i, i)].norm() == 0.0) {
        return Err(Error::DeterminantZero { s: op.s });
    }
    rhs.iter()
        .map(|r| lu.solve(r).ok_or(Error::DeterminantZero { s: op.s }))
        .collect()
}

/// Double the panel count until two successive changes of `log det` are below `tol`.
pub fn refine_until_converged<B>(
    builder: B,
    order: usize,
    start_panels: usize,
    tol: f64,
    max_levels: usize,
) -> Result<DetResult>
where
    B: Fn(usize, usize) -> Result<DiscreteOperator>,
{
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut panels = start_panels.max(1);
    let op = builder(order, panels)?;
    let mut prev = log_det(&op);
    if op.matrix.iter().all(|z| z.norm() == 0.0) {
        return Ok(DetResult {
            converged: true,
            est_error: 0.0,
            ..prev
        });
    }
    let mut deltas = Vec::new();
    for _ in 0..max_levels {
        panels *= 2;
        let cur = log_det(&builder(order, panels)?);
        let cur_log = unwrap_branch(prev.log_det, cur.log_det);
        let delta = (cur_log - prev.log_det).norm();
        deltas.push(delta);
        let cur = DetResult {
            log_det: cur_log,
            ..cur
        };
        let n = deltas.len();
        if cur.is_zero() && prev.is_zero() {
            return Ok(DetResult {
                converged: true,
                est_error: 0.0,
                ..cur
            });
        }
        if n >= 2 && deltas[n - 1] < tol && deltas[n - 2] < tol {
            return Ok(DetResult {
                converged: true,
                est_error: delta,
                ..cur
            });
        }
        prev = cur;
    }
    Err(Error::NonConvergence { deltas })
}

/// Which determinant representation to discretize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DetMethod {
    Interval,
    Conjugated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetConfig {
    pub order: usize,
    pub tol: f64,
    pub max_levels: usize,
    pub method: DetMethod,
    /// Panel count of the first level; `None` picks the default for the weight.
    pub panels: Option<usize>,
}

impl Default for DetConfig {
    fn default() -> Self {
        DetConfig {
            order: DEFAULT_ORDER,
            tol: 1e-12,
            max_levels: 5,
            method: DetMethod::Conjugated,
            panels: None,
        }
    }
}

/// Converged `det(1 - K_w)` on `[-s/2π, s/2π]`.
pub fn weight_determinant(w: Arc<dyn Weight>, s: f64, cfg: &DetConfig) -> Result<DetResult> {
    match cfg.method {
        DetMethod::Conjugated => {
            let start = match cfg.panels {
                Some(p) => p,
                None => default_conjugated_panels(w.as_ref(), s, cfg.order)?,
            };
            refine_until_converged(
                |order, panels| build_conjugated_operator(w.clone(), s, order, panels),
                cfg.order,
                start,
                cfg.tol,
                cfg.max_levels,
            )
        }
        DetMethod::Interval => {
            let kernel = IntervalKernel::Deformed(w);
            let start = match cfg.panels {
                Some(p) => p,
                None => default_interval_panels(&kernel, s)?,
            };
            refine_until_converged(
                |order, panels| build_interval_operator(&kernel, s, order, panels),
                cfg.order,
                start,
                cfg.tol,
                cfg.max_levels,
            )
        }
    }
}

/// Converged `det(1 - ℓK^sin)` on `[-s/2π, s/2π]`.
pub fn classical_determinant(ell: Complex64, s: f64, cfg: &DetConfig) -> Result<DetResult> {
    let kernel = IntervalKernel::Classical(ell);
    let start = match cfg.panels {
        Some(p) => p,
        None => default_interval_panels(&kernel, s)?,
    };
    refine_until_converged(
        |order, panels| build_interval_operator(&kernel, s, order, panels),
        cfg.order,
        start,
        cfg.tol,
        cfg.max_levels,
    )
}

/// `log det` on a fixed λ-grid for each `s` (ascending), with the branch carried
/// continuously from `s → 0` where the determinant tends to 1.
pub fn sweep_on_lambda_grid(
    w: Arc<dyn Weight>,
    s_values: &[f64],
    lambda_grid: &Grid,
) -> Result<Vec<DetResult>> {
    let mut prev = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let op = build_conjugated_on_lambda_grid(w.clone(), s, lambda_grid)?;
        let mut r = log_det(&op);
        if !r.is_zero() {
            r.log_det = unwrap_branch(prev, r.log_det);
            prev = r.log_det;
        }
        out.push(r);
    }
    Ok(out)
}
