//! Weights `w` and profiles `W`.
//!
//! A [`WeightSpec`] is a one-dimensional weight used directly in the deformed
//! kernel; a [`ProfileSpec`] is a profile `W` together with a shift `y`, inducing
//! the even weight `w(u) = W(u² - y)`. Both implement [`Weight`], which is all the
//! operator code needs. Derivatives are closed-form for every family.

use crate::scattering::TabulatedProfile;
use crate::{Complex64, Error, Result};
use libm::erfc;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

/// Default tail tolerance used when a truncation radius is not requested explicitly.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-16;

/// A weight function on the real line.
pub trait Weight: Send + Sync + Debug {
    fn eval(&self, u: f64) -> Complex64;

    /// Closed-form `w'(u)`.
    fn derivative(&self, u: f64) -> Complex64;

    fn is_even(&self) -> bool;

    /// `true` when `w` maps into `[0, 1]`.
    fn range01(&self) -> bool;

    /// Distance from the real axis to the nearest singularity of `w` (or a
    /// comparable resolution scale for entire weights). Sets panel widths.
    fn length_scale(&self) -> f64 {
        0.5
    }

    /// `true` for the identically-zero weight.
    fn is_zero(&self) -> bool {
        false
    }

    fn truncation_tol(&self) -> f64 {
        DEFAULT_TRUNCATION_TOL
    }

    /// Smallest `Λ` (to bisection accuracy) with `|w(u)| <= tol` for `|u| >= Λ`.
    fn truncation_radius(&self, tol: f64) -> Result<f64> {
        tail_radius(
            |u| self.eval(u).norm().max(self.eval(-u).norm()),
            tol,
            self.is_zero(),
        )
    }

    /// Same as [`Weight::truncation_radius`] for `|w'|`.
    fn derivative_truncation_radius(&self, tol: f64) -> Result<f64> {
        tail_radius(
            |u| self.derivative(u).norm().max(self.derivative(-u).norm()),
            tol,
            self.is_zero(),
        )
    }

    /// `∫_ℝ w(u) du` by Gauss–Legendre on the truncated support.
    fn total_mass(&self) -> Result<Complex64> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let lam = self.truncation_radius(self.truncation_tol())?;
        let grid = crate::quadrature::gauss_legendre_spaced(16, -lam, lam, 0.02)?;
        crate::quadrature::integrate(|u| self.eval(u), &grid)
    }
}

/// Monotone-tail search: grow the radius until the tail is below `tol`, then
/// bisect the crossing.
fn tail_radius<F: Fn(f64) -> f64>(abs_value: F, tol: f64, zero: bool) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!(
            "truncation tolerance must lie in (0,1), got {tol}"
        )));
    }
    if zero {
        return Ok(0.0);
    }
    let below = |u: f64| {
        // a short look-ahead guards against a single lucky zero crossing
        (0..8).all(|k| abs_value(u * (1.0 + 0.125 * k as f64)) <= tol)
    };
    let mut hi = 0.5;
    while !below(hi) {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::UnsupportedWeight(format!(
                "weight does not decay below {tol} within |u| <= 1e4"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(hi)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Logistic `1/(e^{x}+1)` and its complement, both without cancellation.
fn logistic_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        let e = (-x).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = x.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    }
}

/// Nearest pole of `u ↦ 1/(e^{4(u²-y)}+1)`: `u² = y + iπ/4`.
fn fermi_pole_distance(y: f64) -> f64 {
    Complex64::new(y, PI / 4.0).sqrt().im.min(0.75)
}

fn scattering_length_scale(y: f64) -> f64 {
    0.25 / (1.0 + y.abs()).sqrt()
}

fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

#[derive(Debug, Clone)]
pub enum WeightFamily {
    /// `w ≡ 0`.
    Zero,
    /// `w(u) = 1/(α e^{4u²} + 1)`.
    Fermi { alpha: f64 },
    /// `w(u) = e^{-u⁴}`.
    GaussianSquare,
    /// `w(u) = Φ(α(u+1)) - Φ(α(u-1))`, `Φ(z) = π^{-1/2} ∫_{-∞}^z e^{-t²} dt`.
    ErfWindow { alpha: f64 },
    /// `w(u) = ½[tanh((u+½)/ε) - tanh((u-½)/ε)]`.
    SmoothedIndicator { epsilon: f64 },
    /// `w(u) = W(u² - y)` for a tabulated scattering profile.
    ScatteringDerived {
        profile: Arc<TabulatedProfile>,
        y: f64,
    },
}

#[derive(Debug, Clone)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub truncation_tol: f64,
}

impl WeightSpec {
    pub fn new(family: WeightFamily) -> Result<Self> {
        let spec = WeightSpec {
            family,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero() -> Self {
        WeightSpec {
            family: WeightFamily::Zero,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }

    pub fn fermi(alpha: f64) -> Result<Self> {
        Self::new(WeightFamily::Fermi { alpha })
    }

    pub fn gaussian_square() -> Self {
        WeightSpec {
            family: WeightFamily::GaussianSquare,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }

    pub fn erf_window(alpha: f64) -> Result<Self> {
        Self::new(WeightFamily::ErfWindow { alpha })
    }

    pub fn smoothed_indicator(epsilon: f64) -> Result<Self> {
        Self::new(WeightFamily::SmoothedIndicator { epsilon })
    }

    /// Look a family up by its configuration name.
    pub fn from_name(name: &str, alpha: Option<f64>, epsilon: Option<f64>) -> Result<Self> {
        match name {
            "none" | "zero" => Ok(Self::zero()),
            "fermi" => Self::fermi(alpha.unwrap_or(1.0)),
            "gaussian_square" => Ok(Self::gaussian_square()),
            "erf_window" => Self::erf_window(alpha.unwrap_or(1.0)),
            "smoothed_indicator" => Self::smoothed_indicator(epsilon.unwrap_or(0.05)),
            other => Err(Error::Config(format!("unknown weight family '{other}'"))),
        }
    }

    pub fn with_truncation_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Config(format!(
                "truncation tolerance must lie in (0,1), got {tol}"
            )));
        }
        self.truncation_tol = tol;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        match &self.family {
            WeightFamily::Fermi { alpha } | WeightFamily::ErfWindow { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Config(format!(
                        "alpha must be positive, got {alpha}"
                    )));
                }
            }
            WeightFamily::SmoothedIndicator { epsilon } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::Config(format!(
                        "epsilon must be positive, got {epsilon}"
                    )));
                }
            }
            WeightFamily::ScatteringDerived { y, .. } => {
                if !y.is_finite() {
                    return Err(Error::Config("shift y must be finite".into()));
                }
            }
            WeightFamily::Zero | WeightFamily::GaussianSquare => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            WeightFamily::Zero => "none",
            WeightFamily::Fermi { .. } => "fermi",
            WeightFamily::GaussianSquare => "gaussian_square",
            WeightFamily::ErfWindow { .. } => "erf_window",
            WeightFamily::SmoothedIndicator { .. } => "smoothed_indicator",
            WeightFamily::ScatteringDerived { .. } => "scattering_derived",
        }
    }
}

impl Weight for WeightSpec {
    fn length_scale(&self) -> f64 {
        match &self.family {
            WeightFamily::Zero | WeightFamily::GaussianSquare => 0.5,
            WeightFamily::Fermi { alpha } => fermi_pole_distance(-alpha.ln() / 4.0),
            WeightFamily::ErfWindow { alpha } => (1.0 / alpha).min(0.5),
            WeightFamily::SmoothedIndicator { epsilon } => (PI * epsilon / 2.0).min(0.5),
            WeightFamily::ScatteringDerived { y, .. } => scattering_length_scale(*y),
        }
    }

    fn eval(&self, u: f64) -> Complex64 {
        real(match &self.family {
            WeightFamily::Zero => 0.0,
            WeightFamily::Fermi { alpha } => {
                // 1/(α e^{4u²} + 1) = logistic(4u² + ln α)
                logistic_pair(4.0 * u * u + alpha.ln()).0
            }
            WeightFamily::GaussianSquare => (-(u * u) * (u * u)).exp(),
            WeightFamily::ErfWindow { alpha } => {
                let a = u.abs();
                0.5 * (erfc(alpha * (a - 1.0)) - erfc(alpha * (a + 1.0)))
            }
            WeightFamily::SmoothedIndicator { epsilon } => {
                let a = u.abs();
                let (lo, _) = logistic_pair(2.0 * (a - 0.5) / epsilon);
                let (hi, _) = logistic_pair(2.0 * (a + 0.5) / epsilon);
                lo - hi
            }
            WeightFamily::ScatteringDerived { profile, y } => profile.value(u * u - y),
        })
    }

    fn derivative(&self, u: f64) -> Complex64 {
        real(match &self.family {
            WeightFamily::Zero => 0.0,
            WeightFamily::Fermi { alpha } => {
                let (w, one_minus_w) = logistic_pair(4.0 * u * u + alpha.ln());
                -8.0 * u * w * one_minus_w
            }
            WeightFamily::GaussianSquare => -4.0 * u * u * u * (-(u * u) * (u * u)).exp(),
            WeightFamily::ErfWindow { alpha } => {
                let a = u.abs();
                let d = alpha / PI.sqrt()
                    * ((-(alpha * (a + 1.0)).powi(2)).exp() - (-(alpha * (a - 1.0)).powi(2)).exp());
                if u == 0.0 {
                    0.0
                } else {
                    d * u.signum()
                }
            }
            WeightFamily::SmoothedIndicator { epsilon } => {
                let a = u.abs();
                let d = (sech2((a + 0.5) / epsilon) - sech2((a - 0.5) / epsilon)) / (2.0 * epsilon);
                if u == 0.0 {
                    0.0
                } else {
                    d * u.signum()
                }
            }
            WeightFamily::ScatteringDerived { profile, y } => {
                2.0 * u * profile.derivative(u * u - y)
            }
        })
    }

    fn is_even(&self) -> bool {
        !matches!(self.family, WeightFamily::ScatteringDerived { .. })
    }

    fn range01(&self) -> bool {
        !matches!(self.family, WeightFamily::ScatteringDerived { .. })
    }

    fn is_zero(&self) -> bool {
        matches!(self.family, WeightFamily::Zero)
    }

    fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }
}

#[derive(Debug, Clone)]
pub enum ProfileFamily {
    Zero,
    /// `W(r) = 1/(e^{4r} + 1)`.
    FermiFactor,
    /// `W(r) = e^{-r²}`.
    GaussianSquare,
    ScatteringDerived(Arc<TabulatedProfile>),
}

impl ProfileFamily {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "none" | "zero" => Ok(ProfileFamily::Zero),
            "fermi_factor" | "fermi" => Ok(ProfileFamily::FermiFactor),
            "gaussian_square" => Ok(ProfileFamily::GaussianSquare),
            other => Err(Error::Config(format!("unknown profile family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProfileFamily::Zero => "none",
            ProfileFamily::FermiFactor => "fermi_factor",
            ProfileFamily::GaussianSquare => "gaussian_square",
            ProfileFamily::ScatteringDerived(_) => "scattering_derived",
        }
    }

    /// `W(r)`.
    pub fn profile_value(&self, r: f64) -> f64 {
        match self {
            ProfileFamily::Zero => 0.0,
            ProfileFamily::FermiFactor => logistic_pair(4.0 * r).0,
            ProfileFamily::GaussianSquare => (-r * r).exp(),
            ProfileFamily::ScatteringDerived(t) => t.value(r),
        }
    }

    /// `W'(r)`.
    pub fn profile_derivative(&self, r: f64) -> f64 {
        match self {
            ProfileFamily::Zero => 0.0,
            ProfileFamily::FermiFactor => {
                let (w, c) = logistic_pair(4.0 * r);
                -4.0 * w * c
            }
            ProfileFamily::GaussianSquare => -2.0 * r * (-r * r).exp(),
            ProfileFamily::ScatteringDerived(t) => t.derivative(r),
        }
    }
}

/// A profile `W` at a fixed shift `y`: the weight `u ↦ W(u² - y)`.
#[derive(Debug, Clone)]
pub struct ProfileSpec {
    pub family: ProfileFamily,
    pub y: f64,
    pub truncation_tol: f64,
}

impl ProfileSpec {
    pub fn new(family: ProfileFamily, y: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::Config(format!("shift y must be finite, got {y}")));
        }
        Ok(ProfileSpec {
            family,
            y,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        })
    }

    pub fn fermi_factor(y: f64) -> Result<Self> {
        Self::new(ProfileFamily::FermiFactor, y)
    }

    pub fn gaussian_square(y: f64) -> Result<Self> {
        Self::new(ProfileFamily::GaussianSquare, y)
    }

    pub fn at(&self, y: f64) -> ProfileSpec {
        ProfileSpec {
            family: self.family.clone(),
            y,
            truncation_tol: self.truncation_tol,
        }
    }

    /// `∫_0^∞ W(λ² - y) dλ`, the constant in the small-`s` law.
    pub fn half_line_mass(&self) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let lam = self.truncation_radius(self.truncation_tol)?;
        let grid = crate::quadrature::gauss_legendre_spaced(20, 0.0, lam, 0.02)?;
        crate::quadrature::integrate_real(|l| self.family.profile_value(l * l - self.y), &grid)
    }
}

impl Weight for ProfileSpec {
    fn length_scale(&self) -> f64 {
        match &self.family {
            ProfileFamily::Zero => 0.5,
            ProfileFamily::FermiFactor => fermi_pole_distance(self.y),
            ProfileFamily::GaussianSquare => 0.5 / (1.0 + self.y.max(0.0)).sqrt(),
            ProfileFamily::ScatteringDerived(_) => scattering_length_scale(self.y),
        }
    }

    fn eval(&self, u: f64) -> Complex64 {
        real(self.family.profile_value(u * u - self.y))
    }

    fn derivative(&self, u: f64) -> Complex64 {
        real(2.0 * u * self.family.profile_derivative(u * u - self.y))
    }

    fn is_even(&self) -> bool {
        !matches!(self.family, ProfileFamily::ScatteringDerived(_))
    }

    fn range01(&self) -> bool {
        !matches!(self.family, ProfileFamily::ScatteringDerived(_))
    }

    fn is_zero(&self) -> bool {
        matches!(self.family, ProfileFamily::Zero)
    }

    fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }
}

/// `eval_weight` for either kind of spec.
pub fn eval_weight(spec: &dyn Weight, u: f64) -> Complex64 {
    spec.eval(u)
}

pub fn eval_weight_derivative(spec: &dyn Weight, u: f64) -> Complex64 {
    spec.derivative(u)
}

pub fn truncation_radius(spec: &dyn Weight, tol: f64) -> Result<f64> {
    spec.truncation_radius(tol)
}
