//! Scalar C-infinity building blocks.
//!
//! Everything downstream (the isomorphism path, the tube, the bumps, the
//! deleting maps) is assembled from a handful of one-dimensional gadgets
//! defined here. Each one comes with a closed-form derivative, and the
//! plateau cutoff additionally with a closed-form antiderivative, so the
//! vector-valued constructions never need numerical differentiation or
//! quadrature on their hot paths. The adaptive quadrature in this module
//! exists to cross-check those closed forms, not to replace them.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq_space::SparseVec;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothKitError {
    #[error("{what} is undefined at t = {t}")]
    OutsideDomain { what: &'static str, t: f64 },
    #[error("{what} has no closed-form antiderivative")]
    NoAntiderivative { what: &'static str },
}

/// `exp(-1/t)` for positive `t`, identically zero otherwise. The basic
/// flat-at-zero germ everything else is built from.
fn exp_flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, strictly increasing in
/// between and symmetric about `(1/2, 1/2)`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = exp_flat(t);
        let b = exp_flat(1.0 - t);
        a / (a + b)
    }
}

/// Derivative of [`smoothstep`]. Peaks at exactly 2 in the middle.
pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = exp_flat(t);
        let b = exp_flat(1.0 - t);
        let s = a + b;
        a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / (s * s)
    }
}

/// Width of the mollified edges of the ramp's speed window.
const DELTA: f64 = 0.1;
/// Total mass of the speed window; equals `1 - DELTA` exactly because the
/// two smoothstep edges each integrate to `DELTA / 2`.
const RAMP_MASS: f64 = 1.0 - DELTA;

/// Speed window of the unit ramp: a plateau at 1 on `[DELTA, 1 - DELTA]`
/// with flat C-infinity drops to 0 at both ends.
fn ramp_window(u: f64) -> f64 {
    smoothstep(u / DELTA) * smoothstep((1.0 - u) / DELTA)
}

/// Monotone C-infinity ramp from `(0, 0)` to `(1, 1)`, flat outside, with
/// the exact symmetry `unit_ramp(u) + unit_ramp(1 - u) = 1`.
pub fn unit_ramp(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else if u <= DELTA {
        DELTA * i1(u / DELTA) / RAMP_MASS
    } else if u <= 1.0 - DELTA {
        (u - DELTA / 2.0) / RAMP_MASS
    } else {
        1.0 - unit_ramp(1.0 - u)
    }
}

/// Derivative of [`unit_ramp`]; bounded by `1 / (1 - DELTA)`.
pub fn unit_ramp_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        ramp_window(u) / RAMP_MASS
    }
}

/// Antiderivative of [`unit_ramp`] vanishing at 0. Piecewise closed form;
/// the quadrature only enters through the cached boundary-layer integral.
pub fn unit_ramp_antideriv(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        0.5 + (s - 1.0)
    } else if s <= DELTA {
        DELTA * DELTA * i2(s / DELTA) / RAMP_MASS
    } else if s <= 1.0 - DELTA {
        antideriv_at_delta() + s * (s - DELTA) / (2.0 * RAMP_MASS)
    } else {
        // reflect: ramp(u) = 1 - ramp(1 - u) on the top layer
        (1.0 - DELTA) * (1.0 - 2.0 * DELTA) / (2.0 * RAMP_MASS)
            + (s - 1.0 + DELTA)
            + unit_ramp_antideriv(1.0 - s)
    }
}

fn antideriv_at_delta() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| DELTA * DELTA * i2(1.0) / RAMP_MASS)
}

/// `int_0^x smoothstep`.
fn i1(x: f64) -> f64 {
    gl2(smoothstep, 0.0, x)
}

/// `int_0^x (x - v) smoothstep(v) dv`, the second antiderivative of the
/// smoothstep expressed as a single integral.
fn i2(x: f64) -> f64 {
    gl2(|v| (x - v) * smoothstep(v), 0.0, x)
}

/// Plateau cutoff: 0 outside `(-1/2, 1)`, 1 on `[0, 1/2]`, monotone ramps
/// in between. Its integer translates form a partition of unity.
pub fn theta(t: f64) -> f64 {
    if t <= -0.5 || t >= 1.0 {
        0.0
    } else if t < 0.0 {
        unit_ramp(2.0 * t + 1.0)
    } else if t <= 0.5 {
        1.0
    } else {
        1.0 - unit_ramp(2.0 * t - 1.0)
    }
}

pub fn theta_deriv(t: f64) -> f64 {
    if t <= -0.5 || t >= 1.0 || (0.0..=0.5).contains(&t) {
        0.0
    } else if t < 0.0 {
        2.0 * unit_ramp_deriv(2.0 * t + 1.0)
    } else {
        -2.0 * unit_ramp_deriv(2.0 * t - 1.0)
    }
}

/// `int_{-inf}^u theta`, in closed form. Saturates at the total mass 1;
/// `theta_antideriv(0) = 1/4` exactly.
pub fn theta_antideriv(u: f64) -> f64 {
    if u <= -0.5 {
        0.0
    } else if u < 0.0 {
        unit_ramp_antideriv(2.0 * u + 1.0) / 2.0
    } else if u <= 0.5 {
        0.25 + u
    } else if u < 1.0 {
        0.25 + u - unit_ramp_antideriv(2.0 * u - 1.0) / 2.0
    } else {
        1.0
    }
}

/// Integral of [`theta`] over `[a, b]` by adaptive quadrature. This is the
/// independent route used to validate [`theta_antideriv`].
pub fn theta_integral(a: f64, b: f64, tol: f64) -> f64 {
    integrate_adaptive(theta, a, b, tol)
}

/// Time factor that wakes up after `t = 1`: zero before, then
/// `exp(-1/(t-1)) / 2`, strictly increasing toward (but never reaching)
/// `1/2`, with derivative tending to 0 at infinity.
pub fn mu(t: f64) -> f64 {
    0.5 * exp_flat(t - 1.0)
}

pub fn mu_deriv(t: f64) -> f64 {
    if t <= 1.0 {
        0.0
    } else {
        let d = t - 1.0;
        mu(t) / (d * d)
    }
}

/// Homotopy clock: 0 up to `t = 1/4`, 1 from `t = 3/4` on.
pub fn zeta(t: f64) -> f64 {
    smoothstep(2.0 * t - 0.5)
}

pub fn zeta_deriv(t: f64) -> f64 {
    2.0 * smoothstep_deriv(2.0 * t - 0.5)
}

/// Flat-at-zero increasing ramp `exp(-1/t)`, zero for `t <= 0`.
pub fn alpha_ramp(t: f64) -> f64 {
    exp_flat(t)
}

pub fn alpha_ramp_deriv(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        exp_flat(t) / (t * t)
    }
}

/// Strictly decreasing reparametrization on `(1/2, 1)` that blows up to
/// `+inf` at `1/2` and glues flatly to 0 at 1 (and stays 0 beyond).
/// Undefined at and below `1/2`: the deleted core of a channel.
pub fn try_blowup_cutoff(t: f64) -> Result<f64, SmoothKitError> {
    if t <= 0.5 {
        Err(SmoothKitError::OutsideDomain { what: "blowup_cutoff", t })
    } else if t >= 1.0 {
        Ok(0.0)
    } else {
        Ok(smoothstep(2.0 * (1.0 - t)) * (1.0 / (t - 0.5) - 2.0))
    }
}

/// Panicking version of [`try_blowup_cutoff`] for callers that have
/// already established `t > 1/2`.
pub fn blowup_cutoff(t: f64) -> f64 {
    try_blowup_cutoff(t).expect("blowup_cutoff needs t > 1/2")
}

pub fn try_blowup_cutoff_deriv(t: f64) -> Result<f64, SmoothKitError> {
    if t <= 0.5 {
        Err(SmoothKitError::OutsideDomain { what: "blowup_cutoff", t })
    } else if t >= 1.0 {
        Ok(0.0)
    } else {
        let d = t - 0.5;
        Ok(-2.0 * smoothstep_deriv(2.0 * (1.0 - t)) * (1.0 / d - 2.0)
            - smoothstep(2.0 * (1.0 - t)) / (d * d))
    }
}

pub fn blowup_cutoff_deriv(t: f64) -> f64 {
    try_blowup_cutoff_deriv(t).expect("blowup_cutoff needs t > 1/2")
}

/// Even bump with support exactly `[-1, 1]`, value 1 at the origin,
/// strictly decreasing on `(0, 1)`.
pub fn support_cutoff(t: f64) -> f64 {
    smoothstep(1.0 - t * t)
}

pub fn support_cutoff_deriv(t: f64) -> f64 {
    -2.0 * t * smoothstep_deriv(1.0 - t * t)
}

/// Even plateau-free cutoff with support `(-1, 1)`, value 1 at 0, whose
/// integer translates sum to 1 exactly: `partition_cutoff(t) +
/// partition_cutoff(t - 1) = 1` on `[0, 1]`.
pub fn partition_cutoff(t: f64) -> f64 {
    if t < 0.0 {
        unit_ramp(t + 1.0)
    } else {
        1.0 - unit_ramp(t)
    }
}

pub fn partition_cutoff_deriv(t: f64) -> f64 {
    if t < 0.0 {
        unit_ramp_deriv(t + 1.0)
    } else {
        -unit_ramp_deriv(t)
    }
}

/// Flat radial profile on the unit of squared distance: value
/// `exp(1 - 1/(1 - w))` for `w < 1`, zero beyond. Equals 1 at `w = 0` and
/// expects `w >= 0` (callers feed it squared distances).
pub fn cap_profile(w: f64) -> f64 {
    if w >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - w)).exp()
    }
}

pub fn cap_profile_deriv(w: f64) -> f64 {
    if w >= 1.0 {
        0.0
    } else {
        let d = 1.0 - w;
        -cap_profile(w) / (d * d)
    }
}

/// Smooth bump supported on the closed ball of the given radius around
/// `center`: value `cap_profile(|x - c|^2 / r^2)`, gradient in the radial
/// direction. Positive exactly on the open ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialBump {
    center: SparseVec,
    radius: f64,
}

impl RadialBump {
    pub fn new(center: SparseVec, radius: f64) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        RadialBump { center, radius }
    }

    pub fn center(&self) -> &SparseVec {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn value(&self, x: &SparseVec) -> f64 {
        let w = x.sub(&self.center).norm_sq() / (self.radius * self.radius);
        cap_profile(w)
    }

    pub fn gradient(&self, x: &SparseVec) -> SparseVec {
        let d = x.sub(&self.center);
        let r2 = self.radius * self.radius;
        let w = d.norm_sq() / r2;
        d.scale(2.0 * cap_profile_deriv(w) / r2)
    }
}

/// The one-dimensional gadgets behind one tag, for configuration and for
/// table-driven verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothFn1D {
    Theta,
    ThetaShifted { n: u32 },
    Mu,
    Zeta,
    AlphaRamp,
    ThetaBlowup,
    ThetaSupport,
    ThetaPartition,
    /// Radial profile as a function of squared distance.
    RadialProfile { radius: f64 },
}

impl SmoothFn1D {
    pub fn try_eval(&self, t: f64) -> Result<f64, SmoothKitError> {
        match *self {
            SmoothFn1D::Theta => Ok(theta(t)),
            SmoothFn1D::ThetaShifted { n } => Ok(theta(t - n as f64)),
            SmoothFn1D::Mu => Ok(mu(t)),
            SmoothFn1D::Zeta => Ok(zeta(t)),
            SmoothFn1D::AlphaRamp => Ok(alpha_ramp(t)),
            SmoothFn1D::ThetaBlowup => try_blowup_cutoff(t),
            SmoothFn1D::ThetaSupport => Ok(support_cutoff(t)),
            SmoothFn1D::ThetaPartition => Ok(partition_cutoff(t)),
            SmoothFn1D::RadialProfile { radius } => Ok(cap_profile(t / (radius * radius))),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.try_eval(t).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn try_deriv(&self, t: f64) -> Result<f64, SmoothKitError> {
        match *self {
            SmoothFn1D::Theta => Ok(theta_deriv(t)),
            SmoothFn1D::ThetaShifted { n } => Ok(theta_deriv(t - n as f64)),
            SmoothFn1D::Mu => Ok(mu_deriv(t)),
            SmoothFn1D::Zeta => Ok(zeta_deriv(t)),
            SmoothFn1D::AlphaRamp => Ok(alpha_ramp_deriv(t)),
            SmoothFn1D::ThetaBlowup => try_blowup_cutoff_deriv(t),
            SmoothFn1D::ThetaSupport => Ok(support_cutoff_deriv(t)),
            SmoothFn1D::ThetaPartition => Ok(partition_cutoff_deriv(t)),
            SmoothFn1D::RadialProfile { radius } => {
                let r2 = radius * radius;
                Ok(cap_profile_deriv(t / r2) / r2)
            }
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.try_deriv(t).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Closed-form `int_{-inf}^t`, available for the plateau cutoff and
    /// its shifts only.
    pub fn integral_to(&self, t: f64) -> Result<f64, SmoothKitError> {
        match *self {
            SmoothFn1D::Theta => Ok(theta_antideriv(t)),
            SmoothFn1D::ThetaShifted { n } => Ok(theta_antideriv(t - n as f64)),
            SmoothFn1D::Mu => Err(SmoothKitError::NoAntiderivative { what: "mu" }),
            SmoothFn1D::Zeta => Err(SmoothKitError::NoAntiderivative { what: "zeta" }),
            SmoothFn1D::AlphaRamp => Err(SmoothKitError::NoAntiderivative { what: "alpha_ramp" }),
            SmoothFn1D::ThetaBlowup => {
                Err(SmoothKitError::NoAntiderivative { what: "blowup_cutoff" })
            }
            SmoothFn1D::ThetaSupport => {
                Err(SmoothKitError::NoAntiderivative { what: "support_cutoff" })
            }
            SmoothFn1D::ThetaPartition => {
                Err(SmoothKitError::NoAntiderivative { what: "partition_cutoff" })
            }
            SmoothFn1D::RadialProfile { .. } => {
                Err(SmoothKitError::NoAntiderivative { what: "cap_profile" })
            }
        }
    }
}

/// Adaptive Simpson quadrature with Richardson correction. `tol` is an
/// absolute target; recursion splits the budget and caps at depth 40.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (flo, fm, fhi) = (f(lo), f(m), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    sign * adaptive_step(&f, lo, hi, flo, fm, fhi, whole, tol.max(1e-13), 0)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= 40 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
    }
}

/// 32-point Gauss-Legendre rule on `[-1, 1]`, nodes found by Newton from
/// the Chebyshev initial guesses. Exact through polynomial degree 63.
fn gauss_legendre_32() -> &'static ([f64; 32], [f64; 32]) {
    static RULE: OnceLock<([f64; 32], [f64; 32])> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 32;
        let mut xs = [0.0; N];
        let mut ws = [0.0; N];
        for (i, (x_out, w_out)) in xs.iter_mut().zip(ws.iter_mut()).enumerate() {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            for _ in 0..60 {
                let (p, dp) = legendre_with_deriv(N, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_deriv(N, x);
            *x_out = x;
            *w_out = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (xs, ws)
    })
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (xs, ws) = gauss_legendre_32();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&x, &w) in xs.iter().zip(ws.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Two-panel composite Gauss-Legendre; plenty for the C-infinity
/// integrands in this module.
fn gl2<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    gl_panel(&f, a, mid) + gl_panel(&f, mid, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn richardson_fd(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    fn check_deriv_on_grid(
        f: &dyn Fn(f64) -> f64,
        df: &dyn Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        steps: usize,
    ) {
        for k in 0..=steps {
            let t = lo + (hi - lo) * k as f64 / steps as f64;
            let fd = richardson_fd(f, t, 1e-4);
            let an = df(t);
            assert!(
                (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                "derivative mismatch at t = {t}: analytic {an}, fd {fd}"
            );
        }
    }

    #[test]
    fn smoothstep_shape() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert_eq!(smoothstep(0.5), 0.5);
        let mut prev = 0.0;
        for k in 1..100 {
            let v = smoothstep(k as f64 / 100.0);
            assert!(v >= prev, "not monotone at {k}");
            prev = v;
        }
    }

    #[test]
    fn smoothstep_symmetry_and_peak_slope() {
        for k in 0..=50 {
            let t = k as f64 / 50.0;
            assert!((smoothstep(t) + smoothstep(1.0 - t) - 1.0).abs() < 1e-15);
        }
        assert!((smoothstep_deriv(0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_rule_is_exact_on_polynomials() {
        for k in [3usize, 17, 40] {
            let got = gl_panel(&|v: f64| v.powi(k as i32), 0.0, 1.0);
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "degree {k}: {got} vs {want}");
        }
    }

    #[test]
    fn smoothstep_integral_is_half() {
        // symmetry forces int_0^1 smoothstep = 1/2; checks the quadrature
        assert!((i1(1.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn ramp_shape_symmetry_slope() {
        assert_eq!(unit_ramp(0.0), 0.0);
        assert_eq!(unit_ramp(1.0), 1.0);
        assert_eq!(unit_ramp(-3.0), 0.0);
        assert_eq!(unit_ramp(2.0), 1.0);
        for k in 0..=100 {
            let u = k as f64 / 100.0;
            assert!((unit_ramp(u) + unit_ramp(1.0 - u) - 1.0).abs() < 1e-12);
        }
        // slope tops out at 1/RAMP_MASS on the plateau of the window
        assert!((unit_ramp_deriv(0.5) - 1.0 / RAMP_MASS).abs() < 1e-13);
        let max_slope = (0..=1000)
            .map(|k| unit_ramp_deriv(k as f64 / 1000.0))
            .fold(0.0, f64::max);
        assert!(max_slope <= 1.0 / RAMP_MASS + 1e-12);
    }

    #[test]
    fn ramp_antideriv_matches_quadrature() {
        for s in [0.03, 0.1, 0.37, 0.5, 0.82, 0.95, 1.0, 1.7] {
            let closed = unit_ramp_antideriv(s);
            let adaptive = integrate_adaptive(unit_ramp, 0.0, s, 1e-12);
            assert!(
                (closed - adaptive).abs() < 1e-10,
                "s = {s}: closed {closed}, adaptive {adaptive}"
            );
        }
        assert!((unit_ramp_antideriv(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn theta_plateau_and_support() {
        assert_eq!(theta(-0.5), 0.0);
        assert_eq!(theta(1.0), 0.0);
        assert_eq!(theta(17.0), 0.0);
        assert_eq!(theta(0.0), 1.0);
        assert_eq!(theta(0.25), 1.0);
        assert_eq!(theta(0.5), 1.0);
        assert!(theta(-0.49) > 0.0);
        assert!(theta(0.99) > 0.0);
        for k in 0..=300 {
            let t = -0.6 + 1.7 * k as f64 / 300.0;
            let v = theta(t);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn theta_translates_partition_unity() {
        for k in 0..=600 {
            let t = -2.0 + 6.0 * k as f64 / 600.0;
            let sum: f64 = (-4..=8).map(|n| theta(t - n as f64)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "partition fails at t = {t}: {sum}");
        }
    }

    #[test]
    fn theta_slope_bound() {
        let max_slope = (0..=4000)
            .map(|k| theta_deriv(-0.6 + 1.7 * k as f64 / 4000.0).abs())
            .fold(0.0, f64::max);
        assert!(max_slope <= 4.0, "slope {max_slope} out of bound");
        // and the bound is not vacuous: the true peak is 2/RAMP_MASS
        assert!(max_slope > 2.0 / RAMP_MASS - 1e-3);
    }

    #[test]
    fn theta_antideriv_key_values() {
        assert_eq!(theta_antideriv(-0.5), 0.0);
        assert_eq!(theta_antideriv(0.0), 0.25);
        assert_eq!(theta_antideriv(2.0), 1.0);
        assert!((theta_antideriv(1.0) - 1.0).abs() < 1e-12);
        assert!((theta_integral(-1.0, 1.5, 1e-10) - 1.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn theta_antideriv_matches_adaptive_quadrature(
            a in -2.0f64..3.0,
            b in -2.0f64..3.0,
        ) {
            let closed = theta_antideriv(b) - theta_antideriv(a);
            let adaptive = theta_integral(a, b, 1e-10);
            prop_assert!((closed - adaptive).abs() < 1e-9,
                "[{a}, {b}]: closed {closed}, adaptive {adaptive}");
        }

        #[test]
        fn cap_profile_stays_in_unit_interval(w in 0.0f64..3.0) {
            let v = cap_profile(w);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        check_deriv_on_grid(&theta, &theta_deriv, -0.7, 1.2, 190);
        check_deriv_on_grid(&mu, &mu_deriv, 0.3, 4.0, 170);
        check_deriv_on_grid(&zeta, &zeta_deriv, -0.2, 1.1, 130);
        check_deriv_on_grid(&alpha_ramp, &alpha_ramp_deriv, -0.5, 2.0, 150);
        check_deriv_on_grid(&blowup_cutoff, &blowup_cutoff_deriv, 0.62, 1.3, 170);
        check_deriv_on_grid(&support_cutoff, &support_cutoff_deriv, -1.2, 1.2, 240);
        check_deriv_on_grid(&partition_cutoff, &partition_cutoff_deriv, -1.2, 1.2, 240);
        check_deriv_on_grid(&unit_ramp, &unit_ramp_deriv, -0.2, 1.2, 140);
        check_deriv_on_grid(&|w| cap_profile(w), &cap_profile_deriv, -0.2, 0.95, 115);
    }

    #[test]
    fn mu_range_and_slope() {
        assert_eq!(mu(1.0), 0.0);
        assert_eq!(mu(0.0), 0.0);
        let mut prev = 0.0;
        let mut max_slope = 0.0f64;
        for k in 1..=4000 {
            let t = 1.0 + 9.0 * k as f64 / 4000.0;
            let v = mu(t);
            assert!(v > prev && v < 0.5, "mu out of range at {t}");
            prev = v;
            max_slope = max_slope.max(mu_deriv(t));
        }
        // true peak slope is 2 e^{-2}
        assert!(max_slope < 0.271 && max_slope > 0.2705 - 1e-3);
        // slope dies off at infinity
        assert!(mu_deriv(1000.0) < 1e-5);
    }

    #[test]
    fn zeta_clock() {
        assert_eq!(zeta(0.25), 0.0);
        assert_eq!(zeta(-1.0), 0.0);
        assert_eq!(zeta(0.75), 1.0);
        assert_eq!(zeta(5.0), 1.0);
        assert!(zeta(0.5) > 0.0 && zeta(0.5) < 1.0);
    }

    #[test]
    fn blowup_cutoff_contract() {
        assert!(matches!(
            try_blowup_cutoff(0.5),
            Err(SmoothKitError::OutsideDomain { .. })
        ));
        assert!(try_blowup_cutoff(0.4).is_err());
        assert_eq!(blowup_cutoff(1.0), 0.0);
        assert_eq!(blowup_cutoff(3.0), 0.0);
        assert!(blowup_cutoff(0.5 + 1e-6) > 1e5);
        let mut prev = f64::INFINITY;
        for k in 1..=500 {
            let t = 0.5 + 0.5 * k as f64 / 501.0;
            let v = blowup_cutoff(t);
            assert!(v < prev, "not strictly decreasing at {t}");
            assert!(blowup_cutoff_deriv(t) < 0.0);
            prev = v;
        }
    }

    #[test]
    fn support_cutoff_contract() {
        assert_eq!(support_cutoff(1.0), 0.0);
        assert_eq!(support_cutoff(-1.0), 0.0);
        assert_eq!(support_cutoff(1.5), 0.0);
        assert_eq!(support_cutoff(0.0), 1.0);
        assert!(support_cutoff(0.999) > 0.0);
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert_eq!(support_cutoff(t), support_cutoff(-t));
        }
        // strictly decreasing away from the flat tails (the extreme tails
        // underflow below double precision)
        for k in 0..=200 {
            let t = 0.05 + 0.94 * k as f64 / 200.0;
            assert!(support_cutoff_deriv(t) < 0.0, "flat at {t}");
        }
    }

    #[test]
    fn partition_cutoff_contract() {
        assert_eq!(partition_cutoff(0.0), 1.0);
        assert_eq!(partition_cutoff(1.0), 0.0);
        assert_eq!(partition_cutoff(-1.0), 0.0);
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            assert!((partition_cutoff(t) + partition_cutoff(t - 1.0) - 1.0).abs() < 1e-12);
            assert!((partition_cutoff(t) - partition_cutoff(-t)).abs() < 1e-12);
        }
        for k in 1..200 {
            let t = k as f64 / 200.0;
            assert!(partition_cutoff_deriv(t) < 0.0);
        }
    }

    #[test]
    fn radial_bump_geometry() {
        let c = SparseVec::from_pairs([(2, 1.0), (5, -1.0)]);
        let bump = RadialBump::new(c.clone(), 0.5);
        assert_eq!(bump.value(&c), 1.0);
        assert!(bump.gradient(&c).is_zero());
        let far = c.add_scaled(0.6, &SparseVec::basis(9));
        assert_eq!(bump.value(&far), 0.0);
        assert!(bump.gradient(&far).is_zero());
        let edge = c.add_scaled(0.5, &SparseVec::basis(9));
        assert_eq!(bump.value(&edge), 0.0);
        let inside = c.add_scaled(0.3, &SparseVec::basis(9));
        assert!(bump.value(&inside) > 0.0);
    }

    #[test]
    fn radial_bump_gradient_matches_fd() {
        let bump = RadialBump::new(SparseVec::basis(1), 0.8);
        let x = SparseVec::from_pairs([(0, 0.2), (1, 0.7), (4, -0.3)]);
        let grad = bump.gradient(&x);
        for i in [0usize, 1, 4, 6] {
            let e = SparseVec::basis(i);
            let h = 1e-5;
            let fd = (bump.value(&x.add_scaled(h, &e)) - bump.value(&x.add_scaled(-h, &e)))
                / (2.0 * h);
            assert!(
                (fd - grad.get(i)).abs() < 1e-6,
                "coordinate {i}: fd {fd} vs {}",
                grad.get(i)
            );
        }
    }

    #[test]
    fn enum_dispatch_agrees_with_free_functions() {
        let cases: Vec<(SmoothFn1D, fn(f64) -> f64)> = vec![
            (SmoothFn1D::Theta, theta),
            (SmoothFn1D::Mu, mu),
            (SmoothFn1D::Zeta, zeta),
            (SmoothFn1D::AlphaRamp, alpha_ramp),
            (SmoothFn1D::ThetaSupport, support_cutoff),
            (SmoothFn1D::ThetaPartition, partition_cutoff),
        ];
        for (f, free) in cases {
            for k in 0..=40 {
                let t = -1.0 + 3.0 * k as f64 / 40.0;
                assert_eq!(f.eval(t), free(t), "{f:?} at {t}");
            }
        }
        let sh = SmoothFn1D::ThetaShifted { n: 2 };
        assert_eq!(sh.eval(2.25), 1.0);
        assert_eq!(sh.integral_to(1.5).unwrap(), 0.0);
        assert_eq!(sh.integral_to(4.0).unwrap(), 1.0);
        assert!(SmoothFn1D::ThetaBlowup.try_eval(0.3).is_err());
        assert!(SmoothFn1D::Mu.integral_to(2.0).is_err());
        let rp = SmoothFn1D::RadialProfile { radius: 2.0 };
        assert_eq!(rp.eval(0.0), 1.0);
        assert_eq!(rp.eval(4.0), 0.0);
        assert!(rp.eval(3.9) > 0.0);
    }

    #[test]
    fn smooth_fn_serde_roundtrip() {
        let fns = [
            SmoothFn1D::Theta,
            SmoothFn1D::ThetaShifted { n: 7 },
            SmoothFn1D::RadialProfile { radius: 0.25 },
        ];
        for f in fns {
            let s = serde_json::to_string(&f).unwrap();
            let back: SmoothFn1D = serde_json::from_str(&s).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn adaptive_quadrature_known_integrals() {
        let quartic = integrate_adaptive(|x| x * x * x * x, 0.0, 1.0, 1e-12);
        assert!((quartic - 0.2).abs() < 1e-11);
        let sine = integrate_adaptive(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert!((sine - 2.0).abs() < 1e-10);
        // orientation flip
        let back = integrate_adaptive(f64::sin, std::f64::consts::PI, 0.0, 1e-12);
        assert!((back + 2.0).abs() < 1e-10);
    }
}
