//! Dormand–Prince 5(4) with step-size control, on complex state vectors.

use crate::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            atol: 1e-12,
            rtol: 1e-12,
            h_init: 1e-4,
            h_max: 0.05,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    /// Requested output abscissae that were reached.
    pub xs: Vec<f64>,
    pub ys: Vec<Vec<Complex64>>,
    /// Every accepted step `(x, y)`, starting with the initial point.
    pub steps: Vec<(f64, Vec<Complex64>)>,
    pub rejected: usize,
    /// `(last good x, reason)` when integration stopped early.
    pub stopped: Option<(f64, String)>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])], out: &mut [Complex64]) {
    for i in 0..y.len() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrate `y' = f(x, y)` from `x0` through the ascending `outputs`.
pub fn dopri5<F>(
    mut f: F,
    x0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    opts: &OdeOptions,
) -> OdeSolution
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len();
    let mut sol = OdeSolution {
        xs: Vec::new(),
        ys: Vec::new(),
        steps: vec![(x0, y0.to_vec())],
        rejected: 0,
        stopped: None,
    };
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut h = opts.h_init.min(opts.h_max);
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut y_new = vec![Complex64::new(0.0, 0.0); n];
    f(x, &y, &mut k[0]);
    let mut steps = 0usize;
    for &target in outputs {
        if target < x {
            sol.stopped = Some((
                x,
                format!("output point {target} lies behind the current position"),
            ));
            return sol;
        }
        while x < target {
            steps += 1;
            if steps > opts.max_steps {
                sol.stopped = Some((x, "maximum number of steps exceeded".into()));
                return sol;
            }
            let last = x + h >= target;
            let hh = if last { target - x } else { h };
            let (k1, rest) = k.split_first_mut().unwrap();
            let (k2, rest) = rest.split_first_mut().unwrap();
            let (k3, rest) = rest.split_first_mut().unwrap();
            let (k4, rest) = rest.split_first_mut().unwrap();
            let (k5, rest) = rest.split_first_mut().unwrap();
            let (k6, rest) = rest.split_first_mut().unwrap();
            let k7 = &mut rest[0];
            axpy(&y, hh, &[(A21, k1)], &mut tmp);
            f(x + C2 * hh, &tmp, k2);
            axpy(&y, hh, &[(A31, k1), (A32, k2)], &mut tmp);
            f(x + C3 * hh, &tmp, k3);
            axpy(&y, hh, &[(A41, k1), (A42, k2), (A43, k3)], &mut tmp);
            f(x + C4 * hh, &tmp, k4);
            axpy(
                &y,
                hh,
                &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)],
                &mut tmp,
            );
            f(x + C5 * hh, &tmp, k5);
            axpy(
                &y,
                hh,
                &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
                &mut tmp,
            );
            f(x + hh, &tmp, k6);
            axpy(
                &y,
                hh,
                &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
                &mut y_new,
            );
            f(x + hh, &y_new, k7);
            let mut err = 0.0f64;
            for i in 0..n {
                let e =
                    (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                        * hh;
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / sc);
            }
            let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();
            if finite && err <= 1.0 {
                x = if last { target } else { x + hh };
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                sol.steps.push((x, y.clone()));
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h = (hh * fac).min(opts.h_max);
                }
            } else {
                sol.rejected += 1;
                let fac = if finite {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                h = hh * fac;
                if h < opts.h_min {
                    sol.stopped = Some((
                        x,
                        if finite {
                            "step size underflow".into()
                        } else {
                            "solution blew up".into()
                        },
                    ));
                    return sol;
                }
            }
        }
        sol.xs.push(target);
        sol.ys.push(y.clone());
    }
    sol
}
