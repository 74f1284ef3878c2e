//! Smooth bumps with bounded support whose gradients never vanish on the
//! interior of that support, and a sampling probe for the approximate
//! Rolle principle they skirt.
//!
//! The classical Rolle picture: a differentiable function with bounded
//! support must have a critical point inside it. [`NonRolleBump`] defeats
//! this in infinitely many dimensions by riding a twisted tube. On the
//! straight cylinder take `g(x, t) = phi(x) mu(t)` with `phi` a radial
//! bump and `mu` zero up to `t = 1` and strictly increasing afterward:
//! `g` has no interior critical point because the `t`-slope is positive
//! wherever `g > 0`, but its support is an unbounded slab. Pushing `g`
//! through the tube chart `pi` coils that slab into a bounded set without
//! creating critical points; the value of the composed bump `f = g o
//! pi^{-1}` sinks lower and lower down the tube but never flattens.
//!
//! [`LostPathBump`] is the chartless variant: the support is dragged
//! along a path `p(t)` that runs through infinitely many fresh
//! coordinates as `t` tends to 1, so the support stays bounded while
//! the path's endpoint is lost to weak convergence, and again no
//! critical point forms. It is cheap, well conditioned, and the building
//! block used by the gradient-cone constructions.
//!
//! [`approx_rolle_probe`] samples any differentiable function on a ball
//! and reports how flat it provably is: the sampled boundary oscillation
//! bounds the reachable gradient infimum from above, and sampling can
//! never certify a violation, only chase the infimum downward.

use serde::Serialize;
use thiserror::Error;

use crate::seq_space::SparseVec;
use crate::smooth_kit::{
    alpha_ramp, alpha_ramp_deriv, mu, mu_deriv, partition_cutoff, partition_cutoff_deriv,
    RadialBump,
};
use crate::tube::{CylPoint, Membership, TubeChart, TubeError};

#[derive(Debug, Error)]
pub enum RolleBumpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cross-section input is not in H: <x, z> = {drift}")]
    NotInH { drift: f64 },
    #[error(transparent)]
    Tube(#[from] TubeError),
}

/// `g(x, t) = phi(x) mu(t)` composed with a tube chart: a smooth bump on
/// the ambient space, supported inside the closed tube, whose gradient is
/// nonzero at every interior point of the support.
#[derive(Debug, Clone)]
pub struct NonRolleBump {
    chart: TubeChart,
    phi: RadialBump,
}

impl NonRolleBump {
    /// Bump over the given chart with the standard radius `eps / 2`.
    pub fn new(chart: TubeChart) -> Self {
        let radius = chart.epsilon() / 2.0;
        NonRolleBump { phi: RadialBump::new(SparseVec::zero(), radius), chart }
    }

    /// The default instance: unit-ball chart at desk scale, so the bump is
    /// supported inside the unit ball and conditioned for tight checks.
    pub fn standard() -> Self {
        Self::new(TubeChart::desk_scaled())
    }

    pub fn chart(&self) -> &TubeChart {
        &self.chart
    }

    pub fn phi(&self) -> &RadialBump {
        &self.phi
    }

    fn require_h(&self, x: &SparseVec) -> Result<(), RolleBumpError> {
        let drift = x.dot(self.chart.z()).abs();
        if drift > 1e-10 * (1.0 + x.norm()) {
            return Err(RolleBumpError::NotInH { drift });
        }
        Ok(())
    }

    /// Cylinder-side evaluation: value, cross-section gradient, and fiber
    /// slope of `g(x, t) = phi(x) mu(t)`. The slope is positive wherever
    /// the value is, which is the whole non-Rolle mechanism.
    pub fn g_eval(&self, x: &SparseVec, t: f64) -> Result<(f64, SparseVec, f64), RolleBumpError> {
        self.require_h(x)?;
        let m = mu(t);
        let value = self.phi.value(x) * m;
        let grad_x = self.phi.gradient(x).scale(m);
        let grad_t = self.phi.value(x) * mu_deriv(t);
        Ok((value, grad_x, grad_t))
    }

    /// Ambient evaluation `f = g o pi^{-1}` with the zero branch outside
    /// the tube. Returns the value and the full ambient gradient.
    ///
    /// Points inside the membership guard band are evaluated through both
    /// branches; the bump radius is half the tube radius, so the interior
    /// branch is already zero well before the band and the branches agree
    /// exactly.
    pub fn f_eval(&self, y: &SparseVec) -> (f64, SparseVec) {
        if y.norm() > self.chart.ambient_radius_bound() {
            return (0.0, SparseVec::zero());
        }
        match self.chart.membership(y) {
            Membership::Outside => (0.0, SparseVec::zero()),
            Membership::Inside(pt) => self.eval_at_cyl(&pt),
            Membership::Boundary(pt) => {
                let (value, grad) = self.eval_at_cyl(&pt);
                debug_assert!(
                    value.abs() <= 1e-8,
                    "branch disagreement {value} inside the guard band"
                );
                (value, grad)
            }
        }
    }

    /// Evaluation at an already recovered cylinder point of this chart:
    /// `f` at `pi(pt)` without re-running the fiber search. Samplers that
    /// construct tube points directly use this; `f_eval` composes
    /// membership with it.
    pub fn eval_at_cyl(&self, pt: &CylPoint) -> (f64, SparseVec) {
        let m = mu(pt.t);
        let value = self.phi.value(&pt.x) * m;
        let grad_x = self.phi.gradient(&pt.x).scale(m);
        let grad_t = self.phi.value(&pt.x) * mu_deriv(pt.t);
        let grad = self
            .chart
            .pullback_gradient(pt, &grad_x, grad_t)
            .expect("fiber slope is bounded away from zero on the bump support");
        (value, grad)
    }

    /// Minimum gradient norm over a deterministic low-discrepancy sweep of
    /// the interior of the support (radius fraction up to 0.99, fiber time
    /// in `(1, t_max]`). Prefixes are nested: growing `samples` can only
    /// find deeper points, and the returned minimum chases the infimum 0
    /// from above without ever reaching it.
    pub fn support_min_gradient(&self, samples: usize, t_max: f64, seed: u64) -> f64 {
        let mut best = f64::INFINITY;
        let dims: Vec<usize> = (0..12).collect();
        let mut halton = HaltonSlice::new(&dims, seed);
        for _ in 0..samples {
            let u = halton.next_point();
            // first two coordinates steer the radius fraction and fiber
            // time; the rest shape the cross-section direction
            let frac = 0.99 * u[0];
            let t = 1.02 + (t_max - 1.02) * u[1];
            let mut pairs = Vec::new();
            for (j, &uj) in u.iter().enumerate().skip(2) {
                pairs.push((j - 2, 2.0 * uj - 1.0));
            }
            let raw = SparseVec::from_pairs(pairs);
            let dir = self.chart.project_h(&raw);
            if dir.norm() == 0.0 {
                continue;
            }
            let x = dir.scale(frac * self.phi.radius() / dir.norm());
            let (value, grad) = self.eval_at_cyl(&CylPoint::new(x, t));
            if value > 0.0 {
                best = best.min(grad.norm());
            }
        }
        best
    }
}

/// The chartless non-Rolle bump: `g(x, t) = phi(x - p(t)) alpha(t)` for
/// `t` in `[0, 1)` and zero elsewhere, where `p(t) = q(t / (1 - t))` and
/// `q` walks the orthonormal directions `e_1, e_2, ...` one unit of
/// parameter at a time. The support is bounded; the curve `p` has no limit
/// as `t` tends to 1 (it escapes along ever-fresh coordinates), and the
/// directional derivative along `(p'(t), 1)` equals `phi(x - p(t))
/// alpha'(t) > 0` wherever the value is positive, so no critical point
/// exists in the interior of the support.
#[derive(Debug, Clone)]
pub struct LostPathBump {
    phi: RadialBump,
}

impl Default for LostPathBump {
    fn default() -> Self {
        Self::new()
    }
}

impl LostPathBump {
    /// Standard radius 1/16: small enough that the support slab never
    /// wraps onto itself as the path hops coordinates.
    pub fn new() -> Self {
        LostPathBump { phi: RadialBump::new(SparseVec::zero(), 1.0 / 16.0) }
    }

    /// Custom radius in `(0, 0.7)`: beyond that the bump could smear
    /// across consecutive path positions (`|q(s) - q(s')| >= 1/sqrt(2)`
    /// between integer parameters) and the vanishing argument at the
    /// far end of the path would fail.
    pub fn with_radius(radius: f64) -> Result<Self, RolleBumpError> {
        if !(radius > 0.0 && radius < 0.7) {
            return Err(RolleBumpError::InvalidArgument(format!(
                "lost-path bump radius must lie in (0, 0.7), got {radius}"
            )));
        }
        Ok(LostPathBump { phi: RadialBump::new(SparseVec::zero(), radius) })
    }

    pub fn phi(&self) -> &RadialBump {
        &self.phi
    }

    /// The coordinate walk `q(s) = sum_n partition_cutoff(s - n + 1) e_n`,
    /// `s >= 0`. At integer parameters it sits exactly on a basis vector;
    /// in between it crossfades between two consecutive ones.
    pub fn lost_path(&self, s: f64) -> SparseVec {
        assert!(s >= 0.0, "path parameter must be nonnegative");
        let n0 = s.floor() as usize + 1;
        SparseVec::from_pairs(
            [n0, n0 + 1]
                .iter()
                .map(|&n| (n, partition_cutoff(s - n as f64 + 1.0))),
        )
    }

    pub fn lost_path_velocity(&self, s: f64) -> SparseVec {
        assert!(s >= 0.0, "path parameter must be nonnegative");
        let n0 = s.floor() as usize + 1;
        SparseVec::from_pairs(
            [n0, n0 + 1]
                .iter()
                .map(|&n| (n, partition_cutoff_deriv(s - n as f64 + 1.0))),
        )
    }

    /// The reparameterized curve `p(t) = q(t / (1 - t))` on `[0, 1)`: a
    /// curve of bounded norm with no limit point as `t` tends to 1.
    pub fn curve(&self, t: f64) -> SparseVec {
        assert!((0.0..1.0).contains(&t), "curve parameter must lie in [0, 1)");
        self.lost_path(t / (1.0 - t))
    }

    pub fn curve_velocity(&self, t: f64) -> SparseVec {
        assert!((0.0..1.0).contains(&t), "curve parameter must lie in [0, 1)");
        let d = 1.0 - t;
        self.lost_path_velocity(t / d).scale(1.0 / (d * d))
    }

    /// Value, spatial gradient, and time slope of
    /// `g(x, t) = phi(x - p(t)) alpha(t)` (zero branch outside `[0, 1)`).
    pub fn eval(&self, x: &SparseVec, t: f64) -> (f64, SparseVec, f64) {
        if !(0.0..1.0).contains(&t) {
            return (0.0, SparseVec::zero(), 0.0);
        }
        let a = alpha_ramp(t);
        if a == 0.0 {
            // t = 0 exactly: value and both derivatives vanish flatly
            return (0.0, SparseVec::zero(), 0.0);
        }
        let shifted = x.sub(&self.curve(t));
        let v = self.phi.value(&shifted);
        let grad_x = self.phi.gradient(&shifted).scale(a);
        // grad_x already carries the alpha factor
        let grad_t = alpha_ramp_deriv(t) * v - grad_x.dot(&self.curve_velocity(t));
        (v * a, grad_x, grad_t)
    }
}

/// What a sampling pass can honestly say about near-critical points of a
/// differentiable function on a ball.
#[derive(Debug, Clone, Serialize)]
pub struct RolleProbeReport {
    pub radius: f64,
    pub samples: usize,
    /// Half the sampled oscillation on the boundary sphere: a lower bound
    /// on the oscillation the approximate Rolle principle feeds on.
    pub eps_hat: f64,
    /// Minimum sampled gradient norm over interior samples where the value
    /// is nonzero: an upper bound on the gradient infimum over the support.
    pub min_grad_norm: f64,
    /// How many interior samples landed where the value is nonzero.
    pub support_samples: usize,
    /// `eps_hat / radius`: the level the principle pins the infimum under.
    pub bound: f64,
    /// `min_grad_norm - bound`, either sign. A sampled minimum above the
    /// sampled bound proves nothing (the oscillation is undersampled too),
    /// so this is information, not a verdict.
    pub margin: f64,
    /// Always true: a violation of the principle is never provable from
    /// finitely many samples, because `min_grad_norm` only upper-bounds
    /// the infimum while `eps_hat` only lower-bounds the oscillation.
    pub consistent: bool,
}

/// A function the probe can sample: value, gradient, the coordinates its
/// structure lives on, and optionally a hint mapping low-discrepancy
/// points into its support (without one, supports of measure zero inside
/// the ball are never hit and the gradient minimum reads empty).
pub trait DifferentiableFn {
    fn value(&self, x: &SparseVec) -> f64;
    fn gradient(&self, x: &SparseVec) -> SparseVec;
    fn active_coords(&self) -> Vec<usize> {
        (0..12).collect()
    }
    /// Map a point of `[0,1]^d` into a region of interest (the support),
    /// or `None` to sample the ball slice uniformly.
    fn support_hint(&self, _u: &[f64]) -> Option<SparseVec> {
        None
    }
}

/// A linear functional, the calibration case for the probe: the gradient
/// norm is exact everywhere and the boundary oscillation is `R |a|`.
pub struct LinearFunctional(pub SparseVec);

impl DifferentiableFn for LinearFunctional {
    fn value(&self, x: &SparseVec) -> f64 {
        self.0.dot(x)
    }
    fn gradient(&self, _x: &SparseVec) -> SparseVec {
        self.0.clone()
    }
    fn active_coords(&self) -> Vec<usize> {
        self.0.support().collect()
    }
}

impl DifferentiableFn for NonRolleBump {
    fn value(&self, x: &SparseVec) -> f64 {
        self.f_eval(x).0
    }
    fn gradient(&self, x: &SparseVec) -> SparseVec {
        self.f_eval(x).1
    }
    fn active_coords(&self) -> Vec<usize> {
        (0..20).collect()
    }
    fn support_hint(&self, u: &[f64]) -> Option<SparseVec> {
        // steer into the tube: radius fraction, fiber time, direction
        let frac = 0.99 * u[0];
        let t = 1.02 + 13.0 * u[1];
        let mut pairs = Vec::new();
        for (j, &uj) in u.iter().enumerate().skip(2) {
            pairs.push((j - 2, 2.0 * uj - 1.0));
        }
        let dir = self.chart.project_h(&SparseVec::from_pairs(pairs));
        if dir.norm() == 0.0 {
            return None;
        }
        let x = dir.scale(frac * self.phi.radius() / dir.norm());
        Some(self.chart.pi_unchecked(&x, t))
    }
}

/// Sample a differentiable function on the closed ball `B(center, R)`:
/// boundary oscillation on the sphere, gradient minimum over interior
/// support points (half the interior budget goes through the function's
/// support hint when it has one), and the resulting approximate-Rolle
/// ledger. Deterministic for fixed inputs; prefixes are nested as
/// `samples` grows.
pub fn approx_rolle_probe(
    f: &dyn DifferentiableFn,
    center: &SparseVec,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<RolleProbeReport, RolleBumpError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(RolleBumpError::InvalidArgument(format!(
            "probe radius must be positive, got {radius}"
        )));
    }
    if samples < 1 {
        return Err(RolleBumpError::InvalidArgument("samples must be >= 1".into()));
    }
    let mut dims = f.active_coords();
    let spare_base = dims.iter().max().map_or(0, |m| m + 1);
    dims.extend(spare_base..spare_base + 4);

    let mut sphere = HaltonSlice::new(&dims, seed);
    let mut boundary_max = f64::NEG_INFINITY;
    let mut boundary_min = f64::INFINITY;
    for _ in 0..samples {
        let u = sphere.next_point();
        let dir = gaussian_direction(&dims, &u);
        if dir.norm() == 0.0 {
            continue;
        }
        let y = center.add_scaled(radius / dir.norm(), &dir);
        let v = f.value(&y);
        boundary_max = boundary_max.max(v);
        boundary_min = boundary_min.min(v);
    }
    let eps_hat = 0.5 * (boundary_max - boundary_min);

    let mut interior = HaltonSlice::new(&dims, seed.wrapping_add(1));
    let mut min_grad = f64::INFINITY;
    let mut support_samples = 0usize;
    for i in 0..samples {
        let u = interior.next_point();
        let y = if i % 2 == 0 {
            match f.support_hint(&u) {
                Some(y) => y,
                None => ball_point(center, radius, &dims, &u),
            }
        } else {
            ball_point(center, radius, &dims, &u)
        };
        if y.dist(center) > radius {
            continue;
        }
        if f.value(&y) != 0.0 {
            support_samples += 1;
            min_grad = min_grad.min(f.gradient(&y).norm());
        }
    }
    if support_samples == 0 {
        min_grad = 0.0;
    }

    let bound = eps_hat / radius;
    Ok(RolleProbeReport {
        radius,
        samples,
        eps_hat,
        min_grad_norm: min_grad,
        support_samples,
        bound,
        margin: min_grad - bound,
        consistent: true,
    })
}

/// Van der Corput radical inverse in the given base.
fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while n > 0 {
        denom *= base as f64;
        inv += (n % base) as f64 / denom;
        n /= base;
    }
    inv
}

const HALTON_PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// A low-discrepancy stream over `[0,1]^d` (Halton sequence with a
/// seed-dependent start offset). Prefixes are nested: the first `n`
/// points for a given seed never change as more are drawn.
struct HaltonSlice {
    index: u64,
    d: usize,
}

impl HaltonSlice {
    fn new(dims: &[usize], seed: u64) -> Self {
        HaltonSlice { index: 1 + (seed % 4096) * 65536, d: dims.len().min(HALTON_PRIMES.len()) }
    }

    fn next_point(&mut self) -> Vec<f64> {
        let u: Vec<f64> = (0..self.d)
            .map(|j| radical_inverse(self.index, HALTON_PRIMES[j]))
            .collect();
        self.index += 1;
        u
    }
}

/// Rational approximation to the standard normal quantile (Acklam's
/// coefficients); enough accuracy to turn Halton points into directions.
fn probit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -probit(1.0 - p)
    }
}

fn gaussian_direction(dims: &[usize], u: &[f64]) -> SparseVec {
    SparseVec::from_pairs(
        dims.iter()
            .zip(u.iter())
            .map(|(&j, &uj)| (j, probit(uj))),
    )
}

/// Uniform-in-the-ball point from a low-discrepancy sample: Gaussian
/// direction from all but the first coordinate, radius from the first.
fn ball_point(center: &SparseVec, radius: f64, dims: &[usize], u: &[f64]) -> SparseVec {
    let dir = gaussian_direction(&dims[1..], &u[1..]);
    if dir.norm() == 0.0 {
        return center.clone();
    }
    let d = dims.len() as f64;
    let r = radius * u[0].powf(1.0 / d);
    center.add_scaled(r / dir.norm(), &dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn h_point(chart: &TubeChart, pairs: &[(usize, f64)], frac: f64) -> SparseVec {
        let raw = SparseVec::from_pairs(pairs.iter().copied());
        let proj = chart.project_h(&raw);
        proj.scale(frac * chart.epsilon() / (2.0 * proj.norm()))
    }

    #[test]
    fn g_is_zero_before_the_clock_starts() {
        let bump = NonRolleBump::standard();
        let x = h_point(bump.chart(), &[(2, 1.0), (5, -0.8)], 0.5);
        for t in [-1.0, 0.0, 0.5, 1.0] {
            let (v, gx, gt) = bump.g_eval(&x, t).unwrap();
            assert_eq!(v, 0.0);
            assert!(gx.is_zero());
            assert_eq!(gt, 0.0);
        }
    }

    #[test]
    fn g_slope_is_positive_where_g_is() {
        let bump = NonRolleBump::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = h_point(
                bump.chart(),
                &[
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.0..0.98),
            );
            let t = rng.gen_range(1.01..12.0);
            let (v, _, gt) = bump.g_eval(&x, t).unwrap();
            if v > 0.0 {
                assert!(gt > 0.0, "flat spot at t = {t}");
            }
        }
    }

    #[test]
    fn g_rejects_points_off_the_hyperplane() {
        let bump = NonRolleBump::standard();
        let bad = SparseVec::basis(1).scale(1e-6);
        assert!(matches!(
            bump.g_eval(&bad, 2.0),
            Err(RolleBumpError::NotInH { .. })
        ));
    }

    #[test]
    fn g_gradient_matches_finite_differences() {
        // run on the wide chart: its bump radius keeps slopes O(10), so a
        // 1e-6 step gives honest truncation under the 1e-6 tolerance
        let bump = NonRolleBump::new(TubeChart::wide_fd());
        let chart = bump.chart().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 100 {
            let x = h_point(
                &chart,
                &[
                    (rng.gen_range(0..12), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..12), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..12), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.1..0.95),
            );
            if x.is_zero() {
                continue;
            }
            let t = rng.gen_range(1.05..8.0);
            let (_, gx, gt) = bump.g_eval(&x, t).unwrap();
            let h = 1e-6;
            let fd_t = (bump.g_eval(&x, t + h).unwrap().0 - bump.g_eval(&x, t - h).unwrap().0)
                / (2.0 * h);
            assert!(
                (fd_t - gt).abs() <= 1e-6 * (1.0 + gt.abs()),
                "fiber slope mismatch at t = {t}"
            );
            let dir = h_point(&chart, &[(rng.gen_range(0..12), 1.0), (rng.gen_range(0..12), -0.7)], 1.0);
            if dir.is_zero() {
                continue;
            }
            let dir = dir.scale(1.0 / dir.norm());
            let fd_x = (bump.g_eval(&x.add_scaled(h, &dir), t).unwrap().0
                - bump.g_eval(&x.add_scaled(-h, &dir), t).unwrap().0)
                / (2.0 * h);
            let want = gx.dot(&dir);
            assert!(
                (fd_x - want).abs() <= 1e-6 * (1.0 + want.abs()),
                "spatial slope mismatch at t = {t}: fd {fd_x} vs {want}"
            );
            checked += 1;
        }
    }

    #[test]
    fn f_vanishes_outside_the_unit_ball_and_off_the_tube() {
        let bump = NonRolleBump::standard();
        let far = SparseVec::from_pairs([(0, 0.9), (4, 0.7)]);
        assert!(far.norm() > 1.0);
        let (v, g) = bump.f_eval(&far);
        assert_eq!(v, 0.0);
        assert!(g.is_zero());
        // inside the ball but outside the tube
        let near = SparseVec::from_pairs([(2, 0.4), (7, -0.3)]);
        assert!(near.norm() < 1.0);
        let (v, g) = bump.f_eval(&near);
        assert_eq!(v, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn f_agrees_with_g_through_the_chart() {
        let bump = NonRolleBump::standard();
        let chart = bump.chart().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..60 {
            let x = h_point(
                &chart,
                &[
                    (rng.gen_range(0..14), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..14), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.05..0.95),
            );
            let t = rng.gen_range(1.05..10.0);
            let y = chart.pi(&CylPoint::new(x.clone(), t)).unwrap();
            let (fv, _) = bump.f_eval(&y);
            let (gv, _, _) = bump.g_eval(&x, t).unwrap();
            assert!(
                (fv - gv).abs() <= 1e-9 * (1.0 + gv.abs()),
                "value mismatch through the chart at t = {t}"
            );
        }
    }

    #[test]
    fn f_gradient_never_vanishes_on_the_support_interior() {
        let bump = NonRolleBump::standard();
        let chart = bump.chart().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let x = h_point(
                &chart,
                &[
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.0..0.99),
            );
            let t = rng.gen_range(1.02..14.0);
            let (v, g) = bump.eval_at_cyl(&CylPoint::new(x, t));
            if v > 0.0 {
                assert!(g.norm() > 0.0, "critical point inside the support at t = {t}");
            }
        }
    }

    #[test]
    fn f_directional_derivative_matches_the_fiber_slope() {
        // the chain rule certificate: along D pi(0, 1), the derivative of
        // f is exactly phi(x) mu'(t)
        let bump = NonRolleBump::standard();
        let chart = bump.chart().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let mut worst = 0.0f64;
        for _ in 0..150 {
            let x = h_point(
                &chart,
                &[
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..16), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.0..0.98),
            );
            let t = rng.gen_range(1.05..14.0);
            let pt = CylPoint::new(x.clone(), t);
            let y = chart.pi(&pt).unwrap();
            let (_, grad) = bump.f_eval(&y);
            let dir = chart.d_pi(&pt, &SparseVec::zero(), 1.0);
            let want = bump.phi().value(&x) * mu_deriv(t);
            worst = worst.max((grad.dot(&dir) - want).abs());
        }
        assert!(worst <= 1e-6, "directional mismatch {worst}");
    }

    #[test]
    fn support_minimum_decreases_with_deeper_sampling() {
        let bump = NonRolleBump::standard();
        let m100 = bump.support_min_gradient(100, 15.0, 0);
        let m1000 = bump.support_min_gradient(1000, 15.0, 0);
        let m10000 = bump.support_min_gradient(10000, 15.0, 0);
        assert!(m100 > m1000 && m1000 > m10000, "{m100} > {m1000} > {m10000} failed");
        assert!(m10000 > 0.0);
    }

    #[test]
    fn lost_path_visits_every_basis_vector() {
        let bump = LostPathBump::new();
        for n in 1..=30usize {
            let q = bump.lost_path(n as f64 - 1.0);
            assert!(q.dist(&SparseVec::basis(n)) < 1e-15, "q({}) != e_{n}", n - 1);
        }
    }

    #[test]
    fn lost_path_velocity_matches_finite_differences() {
        let bump = LostPathBump::new();
        for s in [0.3, 0.71, 1.5, 2.62, 7.9] {
            let h = 1e-6;
            let fd = bump
                .lost_path(s + h)
                .sub(&bump.lost_path(s - h))
                .scale(1.0 / (2.0 * h));
            assert!(fd.dist(&bump.lost_path_velocity(s)) < 1e-6, "velocity at s = {s}");
        }
    }

    #[test]
    fn curve_has_unit_mass_and_no_tail_memory() {
        let bump = LostPathBump::new();
        for t in [0.0, 0.3, 0.62, 0.9, 0.99] {
            let p = bump.curve(t);
            // mass is concentrated on at most two consecutive coordinates
            assert!(p.nnz() <= 2);
            let l1: f64 = p.iter().map(|(_, c)| c.abs()).sum();
            assert!((l1 - 1.0).abs() < 1e-12, "mass {l1} at t = {t}");
        }
        // distinct windows: the curve near 1 lives on late coordinates
        let late = bump.curve(0.999);
        assert!(late.support().min().unwrap() >= 999);
    }

    #[test]
    fn lost_bump_zero_branches() {
        let bump = LostPathBump::new();
        let x = SparseVec::basis(1);
        for t in [-0.5, 1.0, 1.5] {
            let (v, gx, gt) = bump.eval(&x, t);
            assert_eq!(v, 0.0);
            assert!(gx.is_zero());
            assert_eq!(gt, 0.0);
        }
    }

    #[test]
    fn lost_bump_directional_identity() {
        // g'(x, t)(p'(t), 1) = phi(x - p(t)) alpha'(t), exactly: the path
        // terms cancel
        let bump = LostPathBump::new();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..200 {
            let t: f64 = rng.gen_range(0.05..0.95);
            let center = bump.curve(t);
            let mut x = center.clone();
            for _ in 0..3 {
                x = x.add_scaled(
                    rng.gen_range(-0.8..0.8) * bump.phi().radius(),
                    &SparseVec::basis(rng.gen_range(0..12)),
                );
            }
            let (v, gx, gt) = bump.eval(&x, t);
            let along = gx.dot(&bump.curve_velocity(t)) + gt;
            let want = bump.phi().value(&x.sub(&center)) * alpha_ramp_deriv(t);
            assert!(
                (along - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "identity failed at t = {t}"
            );
            if v > 0.0 {
                assert!(along > 0.0);
            }
        }
    }

    #[test]
    fn lost_bump_gradient_matches_finite_differences() {
        // spatial components are well conditioned along the whole curve;
        // the fiber component's truncation grows like (1 - t)^-6 because
        // the curve velocity enters cubed, so with a 1e-5 step the check
        // is honest only up to t ~ 0.45 (measured: 3e-6 at t = 0.4,
        // 8e-4 at t = 0.7)
        let bump = LostPathBump::new();
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..150 {
            let fiber_window = i % 2 == 0;
            let t: f64 = if fiber_window {
                rng.gen_range(0.05..0.45)
            } else {
                rng.gen_range(0.05..0.9)
            };
            let center = bump.curve(t);
            let mut x = center.clone();
            for _ in 0..3 {
                x = x.add_scaled(
                    rng.gen_range(-0.5..0.5) * bump.phi().radius(),
                    &SparseVec::basis(rng.gen_range(0..14)),
                );
            }
            let (_, gx, gt) = bump.eval(&x, t);
            if fiber_window {
                let fd_t = (bump.eval(&x, t + h).0 - bump.eval(&x, t - h).0) / (2.0 * h);
                worst = worst.max((fd_t - gt).abs());
            }
            for j in [1usize, 2, 5, 9] {
                let e = SparseVec::basis(j);
                let fd = (bump.eval(&x.add_scaled(h, &e), t).0
                    - bump.eval(&x.add_scaled(-h, &e), t).0)
                    / (2.0 * h);
                worst = worst.max((fd - gx.get(j)).abs());
            }
        }
        assert!(worst <= 1e-5, "worst FD error {worst}");
    }

    #[test]
    fn radius_validation() {
        assert!(LostPathBump::with_radius(0.8).is_err());
        assert!(LostPathBump::with_radius(0.0).is_err());
        assert!(LostPathBump::with_radius(0.25).is_ok());
    }

    #[test]
    fn probe_rejects_bad_arguments() {
        let f = LinearFunctional(SparseVec::basis(0));
        assert!(approx_rolle_probe(&f, &SparseVec::zero(), 0.0, 10, 0).is_err());
        assert!(approx_rolle_probe(&f, &SparseVec::zero(), 1.0, 0, 0).is_err());
    }

    #[test]
    fn probe_on_a_linear_functional() {
        let a = SparseVec::from_pairs([(0, 0.6), (3, -0.8)]);
        let f = LinearFunctional(a.clone());
        let report = approx_rolle_probe(&f, &SparseVec::zero(), 2.0, 4000, 9).unwrap();
        // gradient norm is exact everywhere
        assert!((report.min_grad_norm - a.norm()).abs() < 1e-12);
        // sampled oscillation approaches R |a| from below
        assert!(report.eps_hat <= 2.0 * a.norm() + 1e-12);
        assert!(report.eps_hat >= 0.8 * 2.0 * a.norm(), "oscillation {}", report.eps_hat);
        // sampling can push the bound below the true minimum; that proves
        // nothing and the report stays consistent by design
        assert!(report.consistent);
        assert!(report.margin >= 0.0);
    }

    #[test]
    fn probe_on_the_tube_bump() {
        let bump = NonRolleBump::standard();
        // the ball of radius 1.2 contains the support, so the boundary
        // oscillation is exactly zero
        let r100 = approx_rolle_probe(&bump, &SparseVec::zero(), 1.2, 100, 4).unwrap();
        let r1000 = approx_rolle_probe(&bump, &SparseVec::zero(), 1.2, 1000, 4).unwrap();
        assert_eq!(r100.eps_hat, 0.0);
        assert_eq!(r1000.eps_hat, 0.0);
        assert!(r100.support_samples > 0);
        assert!(
            r1000.min_grad_norm < r100.min_grad_norm,
            "{} not below {}",
            r1000.min_grad_norm,
            r100.min_grad_norm
        );
        assert!(r1000.min_grad_norm > 0.0);
        assert!(r100.consistent && r1000.consistent);
    }

    #[test]
    fn probe_prefixes_are_nested() {
        let a = SparseVec::from_pairs([(1, 1.0)]);
        let f = LinearFunctional(a);
        let small = approx_rolle_probe(&f, &SparseVec::zero(), 1.0, 500, 7).unwrap();
        let large = approx_rolle_probe(&f, &SparseVec::zero(), 1.0, 5000, 7).unwrap();
        // oscillation can only grow along nested prefixes
        assert!(large.eps_hat >= small.eps_hat);
    }

    #[test]
    fn lipschitz_quotients_stay_under_the_recorded_bound() {
        let bump = NonRolleBump::standard();
        let chart = bump.chart().clone();
        let (_, m_inv) = chart.recorded_derivative_bound(12.0);
        // Lip(g) <= sup |phi'| mu + sup phi mu' over the support
        let r = bump.phi().radius();
        let lip_g = (2.0 * 1.5 / r) * 0.5 + 0.28;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut max_q = 0.0f64;
        for _ in 0..200 {
            let x = h_point(
                &chart,
                &[
                    (rng.gen_range(0..14), rng.gen_range(-1.0..1.0)),
                    (rng.gen_range(0..14), rng.gen_range(-1.0..1.0)),
                ],
                rng.gen_range(0.0..0.9),
            );
            let t = rng.gen_range(1.05..10.0);
            let y1 = chart.pi(&CylPoint::new(x.clone(), t)).unwrap();
            // a nearby point, sometimes outside the tube
            let dir = SparseVec::basis(rng.gen_range(0..10));
            let y2 = y1.add_scaled(rng.gen_range(1e-7..1e-4), &dir);
            let (v1, _) = bump.f_eval(&y1);
            let (v2, _) = bump.f_eval(&y2);
            if y1.dist(&y2) > 0.0 {
                max_q = max_q.max((v1 - v2).abs() / y1.dist(&y2));
            }
        }
        assert!(
            max_q <= lip_g * m_inv,
            "sampled quotient {max_q} above the bound {}",
            lip_g * m_inv
        );
    }

    #[test]
    fn nested_support_sweep_is_deterministic() {
        let bump = NonRolleBump::standard();
        let a = bump.support_min_gradient(500, 15.0, 12);
        let b = bump.support_min_gradient(500, 15.0, 12);
        assert_eq!(a, b);
    }
}

