//! A bounded tube that twists forever, and the chart that straightens it.
//!
//! Around the centerline from [`crate::iso_path`] we wrap a thin open tube:
//! with `z = v_1 / |v_1|` and `H` the hyperplane orthogonal to `z`, the map
//!
//! ```text
//! pi(x, t) = beta(t)(x) + p(t),      |x| < eps,  x in H,  t > 0
//! ```
//!
//! carries the straight half-cylinder onto a curved tube of finite extent.
//! Because `beta(t)` is an isomorphism and distinct centerline points stay
//! quantitatively separated, `pi` is a diffeomorphism once `eps` is small
//! against the path constants, yet the tube has infinite length inside a
//! bounded set. The inverse is recovered by solving the scalar equation
//!
//! ```text
//! F_y(r) = alpha(r)(y - p(r)) = 0,      alpha(r) = z* o beta(r)^{-1},
//! ```
//!
//! for the fiber time: near a genuine fiber time the derivative of `F_y`
//! is pinned below `-z*(v) + k_f eps < 0`, so a bracketed Newton iteration
//! is safe, and the recovered cross-section coordinate is
//! `x = beta(r)^{-1}(y - p(r))` projected to `H`.
//!
//! A chart is parameterized by its scale (raw, or shrunk by 6 so the whole
//! tube sits inside the unit ball), its radius `eps`, and the constant `K`
//! its guarantees are phrased in. Construction enforces the two structural
//! inequalities `eps < 1/(6 K^5)` and `z*(v) >= 1/K`. The named instances
//! differ in which K they carry:
//!
//! * [`TubeChart::measured`] uses the grid-measured path constant
//!   (about 79, dominated by `sup |(beta^{-1})'|`), the chart every
//!   injectivity and derivative guarantee is honest for. Its `eps` is
//!   around 5e-11: faithful, and far too thin for finite differences.
//! * [`TubeChart::paper_bound`] uses the worst-case product constant
//!   (about 1.9e8); its `eps` is about 6e-43. Constructible, absurd,
//!   kept because the bound chain is valid for any K that dominates the
//!   measured constants.
//! * [`TubeChart::desk_scaled`] and [`TubeChart::wide_fd`] choose small K
//!   (5.9 and 0.75) so that `eps` is workable at a desk (2.1e-5 and 0.25).
//!   They satisfy the structural inequalities but NOT the premise that K
//!   dominates the measured operator norms; they exist so that bump values,
//!   directional identities, and finite-difference checks are conditioned
//!   well enough to verify to tight tolerances. Root-finding on them is
//!   validated per point (recovered radius, positive time, round-trip).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iso_path::{
    beta, beta_inv_prime, beta_prime, conservative_k_bound, path_point, path_velocity,
    MeasuredConstants,
};
use crate::seq_space::SparseVec;

/// Where the tube lives: at raw scale the centerline runs inside `B(0, 2)`;
/// in unit-ball mode everything is multiplied by 1/6 so the closed tube
/// fits inside the closed unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    Raw,
    UnitBall,
}

impl ScaleMode {
    pub fn factor(self) -> f64 {
        match self {
            ScaleMode::Raw => 1.0,
            ScaleMode::UnitBall => 1.0 / 6.0,
        }
    }
}

/// Which constant family a faithful chart is built on: the grid-measured
/// path constant, or the worst-case product bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KMode {
    Measured,
    PaperBound,
}

#[derive(Debug, Error)]
pub enum TubeError {
    #[error("chart constants rejected: {0}")]
    BadChart(String),
    #[error("point outside the open cylinder: {0}")]
    OutOfCylinder(String),
    #[error("point is not in the tube")]
    NotInTube,
    #[error("fiber equation is degenerate at the recovered time {t}: F' = {f_prime}")]
    DegenerateRoot { t: f64, f_prime: f64 },
}

/// A point of the straight half-cylinder: cross-section coordinate `x`
/// (in `H`, with `|x|` below the chart radius) and fiber time `t > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylPoint {
    pub x: SparseVec,
    pub t: f64,
}

impl CylPoint {
    pub fn new(x: SparseVec, t: f64) -> Self {
        CylPoint { x, t }
    }
}

/// The straightening chart: scale, radius, constant, and the root-finder
/// tolerances its inverse runs with.
#[derive(Debug, Clone, Serialize)]
pub struct TubeChart {
    scale: f64,
    epsilon: f64,
    k: f64,
    /// Newton accepts a fiber time when `|F| <= f_tol * max(1, |y|)`.
    f_tol: f64,
    /// Roots are kept only if the round-trip error is below
    /// `roundtrip_tol * (1 + |y|)`.
    roundtrip_tol: f64,
    /// Relative half-width of the membership guard band around `|x| = eps`.
    guard: f64,
    max_iter: usize,
    #[serde(skip)]
    z: SparseVec,
}

/// Tube membership verdict with the recovered preimage where one exists.
#[derive(Debug, Clone)]
pub enum Membership {
    /// Recovered radius below `eps (1 - guard)`.
    Inside(CylPoint),
    /// Recovered radius inside the guard band around `eps`.
    Boundary(CylPoint),
    /// No valid fiber time, or recovered radius above the band.
    Outside,
}

fn twist_direction() -> SparseVec {
    SparseVec::basis_diff(1).scale(1.0 / 2.0f64.sqrt())
}

impl TubeChart {
    /// Build a chart with explicit constants, enforcing the structural
    /// inequalities `0 < eps < 1/(6 K^5)` and `z*(v) = sqrt(2) * scale >= 1/K`.
    pub fn with_constants(mode: ScaleMode, k: f64, epsilon: f64) -> Result<Self, TubeError> {
        if !(k >= 1.0 / 2.0f64.sqrt() && k.is_finite()) {
            return Err(TubeError::BadChart(format!("K = {k} must be finite and >= 1/sqrt(2)")));
        }
        let ceiling = 1.0 / (6.0 * k.powi(5));
        if !(epsilon > 0.0 && epsilon < ceiling) {
            return Err(TubeError::BadChart(format!(
                "eps = {epsilon} must lie in (0, {ceiling}) for K = {k}"
            )));
        }
        let scale = mode.factor();
        let z_star_v = 2.0f64.sqrt() * scale;
        if z_star_v < 1.0 / k {
            return Err(TubeError::BadChart(format!(
                "z*(v) = {z_star_v} is below 1/K = {}",
                1.0 / k
            )));
        }
        Ok(TubeChart {
            scale,
            epsilon,
            k,
            f_tol: 1e-14,
            roundtrip_tol: 1e-9,
            guard: 1e-9,
            max_iter: 200,
            z: twist_direction(),
        })
    }

    /// The constant that actually dominates every premise the inverse-map
    /// guarantees rest on, at the given scale: the measured operator sups,
    /// the Lipschitz constant of the scaled centerline, `1/z*(v)`, and the
    /// reciprocal separation floors.
    pub fn premise_k(mode: ScaleMode) -> f64 {
        let mc = MeasuredConstants::shared();
        let s = mode.factor();
        mc.k_measured
            .max(s * mc.max_speed)
            .max(1.0 / (s * 2.0f64.sqrt()))
            .max(1.0 / (s * mc.min_short_ratio))
            .max(1.0 / (s * mc.min_far_separation))
    }

    /// The faithful chart: K dominates every measured path constant, and
    /// `eps` is 90% of its ceiling `1/(6 K^5)`, about 5e-11. On this chart
    /// the fiber equation provably has a unique valid root and
    /// `F' <= -1/(2K)` holds at it.
    pub fn measured(mode: ScaleMode) -> Self {
        let k = Self::premise_k(mode);
        let epsilon = 0.9 / (6.0 * k.powi(5));
        Self::with_constants(mode, k, epsilon).expect("measured constants satisfy the invariants")
    }

    /// The worst-case chart: K is the product bound `577^2 * 584` and
    /// `eps` is 90% of the corresponding ceiling, about 6e-43. Valid,
    /// never useful numerically.
    pub fn paper_bound(mode: ScaleMode) -> Self {
        let k = conservative_k_bound();
        let epsilon = 0.9 / (6.0 * k.powi(5));
        Self::with_constants(mode, k, epsilon).expect("bound constants satisfy the invariants")
    }

    pub fn by_mode(kmode: KMode, mode: ScaleMode) -> Self {
        match kmode {
            KMode::Measured => Self::measured(mode),
            KMode::PaperBound => Self::paper_bound(mode),
        }
    }

    /// Unit-ball chart with desk-scale radius: K = 5.9, eps = 2.1e-5.
    /// The whole tube sits inside the unit ball and bump values composed
    /// through the chart are conditioned well enough for 1e-6 directional
    /// checks. K does not dominate the measured operator sups; inversion
    /// is validated per point.
    pub fn desk_scaled() -> Self {
        Self::with_constants(ScaleMode::UnitBall, 5.9, 2.1e-5)
            .expect("desk constants satisfy the invariants")
    }

    /// Raw-scale chart fat enough for centered finite differences with
    /// step 1e-5: K = 3/4, eps = 0.15. Fiber times should be sampled away
    /// from the crossfade window of the second functional (t in (1.4, 2.3))
    /// where the fiber equation's slope margin is thinnest at this radius;
    /// for t >= 2.2 the measured pairing constant is 16.2, and
    /// 16.2 * 0.15 = 2.43 leaves the root search census-clean (no multiple
    /// or misordered fiber times over seeded sweeps).
    pub fn wide_fd() -> Self {
        Self::with_constants(ScaleMode::Raw, 0.75, 0.15)
            .expect("wide constants satisfy the invariants")
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn f_tolerance(&self) -> f64 {
        self.f_tol
    }

    /// The twist direction `z = v_1 / |v_1|`; also its own Riesz functional.
    pub fn z(&self) -> &SparseVec {
        &self.z
    }

    /// `z*(v)` for this chart's scaled drag vector: `sqrt(2) * scale`.
    pub fn z_star_v(&self) -> f64 {
        2.0f64.sqrt() * self.scale
    }

    /// Orthogonal projection onto the cross-section hyperplane `H`.
    pub fn project_h(&self, w: &SparseVec) -> SparseVec {
        w.add_scaled(-w.dot(&self.z), &self.z)
    }

    /// Scaled centerline point.
    pub fn center(&self, t: f64) -> SparseVec {
        path_point(t).scale(self.scale)
    }

    /// Scaled centerline velocity `beta(t)(v)`.
    pub fn center_velocity(&self, t: f64) -> SparseVec {
        path_velocity(t).scale(self.scale)
    }

    /// A conservative radius bound for the whole tube:
    /// `sup |p| * scale + sup |beta| * eps` over the measured grid.
    pub fn ambient_radius_bound(&self) -> f64 {
        let mc = MeasuredConstants::shared();
        mc.sup_path_norm * self.scale + mc.sup_beta_norm * self.epsilon
    }

    fn check_cyl(&self, pt: &CylPoint) -> Result<(), TubeError> {
        if !pt.t.is_finite() || pt.t <= 0.0 {
            return Err(TubeError::OutOfCylinder(format!("t = {} must be > 0", pt.t)));
        }
        let r = pt.x.norm();
        if !(r < self.epsilon) {
            return Err(TubeError::OutOfCylinder(format!(
                "|x| = {r} must be below eps = {}",
                self.epsilon
            )));
        }
        let drift = pt.x.dot(&self.z).abs();
        if drift > 1e-10 * (1.0 + r) {
            return Err(TubeError::OutOfCylinder(format!(
                "x is not in H: <x, z> = {drift}"
            )));
        }
        Ok(())
    }

    /// The tube map `pi(x, t) = beta(t)(x) + p(t)` on the open cylinder.
    pub fn pi(&self, pt: &CylPoint) -> Result<SparseVec, TubeError> {
        self.check_cyl(pt)?;
        Ok(self.pi_unchecked(&pt.x, pt.t))
    }

    /// The same formula without domain validation (used by the root
    /// validator, which must evaluate at candidate points).
    pub fn pi_unchecked(&self, x: &SparseVec, t: f64) -> SparseVec {
        beta(t).apply(x).add(&self.center(t))
    }

    /// The fiber functional `alpha(r) = z* o beta(r)^{-1}`, returned as the
    /// vector `beta(r)^{-T} z` representing it.
    pub fn alpha(&self, r: f64) -> SparseVec {
        beta(r)
            .inverse()
            .expect("beta carries its inverse")
            .adjoint_apply(&self.z)
    }

    /// The fiber equation `F_y(r) = alpha(r)(y - p(r))`.
    pub fn f_val(&self, y: &SparseVec, r: f64) -> f64 {
        self.alpha(r).dot(&y.sub(&self.center(r)))
    }

    /// Its exact derivative `F_y'(r) = alpha'(r)(y - p(r)) - z*(v)`, using
    /// that `alpha(r)(p'(r)) = z*(v)` identically.
    pub fn f_deriv(&self, y: &SparseVec, r: f64) -> f64 {
        let a_prime = beta_inv_prime(r).adjoint_apply(&self.z);
        a_prime.dot(&y.sub(&self.center(r))) - self.z_star_v()
    }

    /// Scan fence for the fiber-time search: beyond the support of `y`
    /// (plus slack) the centerline's saturated fresh coordinates alone put
    /// `y - p(r)` out of reach of any valid cross-section.
    fn scan_fence(&self, y: &SparseVec) -> f64 {
        let support_edge = y.max_index().unwrap_or(0) as f64;
        let mc = MeasuredConstants::shared();
        // need scale^2 * (r - fence) > (sup|beta| eps)^2 for impossibility
        let slack = (mc.sup_beta_norm * self.epsilon / self.scale).powi(2).ceil() + 4.0;
        support_edge + slack
    }

    fn refine_root(&self, y: &SparseVec, mut lo: f64, mut hi: f64) -> f64 {
        let tol = self.f_tol * y.norm().max(1.0);
        let mut f_lo = self.f_val(y, lo);
        if f_lo.abs() <= tol {
            return lo;
        }
        let f_hi = self.f_val(y, hi);
        if f_hi.abs() <= tol {
            return hi;
        }
        debug_assert!(f_lo * f_hi <= 0.0, "refine_root needs a bracket");
        let mut t = 0.5 * (lo + hi);
        let mut best_t = t;
        let mut best_f = f64::INFINITY;
        for _ in 0..self.max_iter {
            let f = self.f_val(y, t);
            if f.abs() < best_f {
                best_f = f.abs();
                best_t = t;
            }
            if f.abs() <= tol {
                return self.polish_root(y, t, f);
            }
            if f.signum() == f_lo.signum() {
                lo = t;
                f_lo = f;
            } else {
                hi = t;
            }
            let fp = self.f_deriv(y, t);
            let newton = t - f / fp;
            let next = if fp != 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= f64::EPSILON * (1.0 + t.abs()) {
                break;
            }
            t = next;
        }
        best_t
    }

    /// Push an accepted root to the evaluation-noise floor of `F`: a few
    /// more Newton steps, kept only while `|F|` strictly drops. Gradients
    /// pulled back through the inverse are only as accurate as the fiber
    /// time, so the extra digits matter downstream.
    fn polish_root(&self, y: &SparseVec, mut t: f64, mut f: f64) -> f64 {
        for _ in 0..3 {
            let fp = self.f_deriv(y, t);
            if fp == 0.0 {
                break;
            }
            let t_next = t - f / fp;
            let f_next = self.f_val(y, t_next);
            if f_next.abs() < f.abs() {
                t = t_next;
                f = f_next;
            } else {
                break;
            }
        }
        t
    }

    /// Recover the cross-section coordinate at a candidate fiber time:
    /// `beta(r)^{-1}(y - p(r))`, split into its `H` part and `z` component.
    fn cross_section(&self, y: &SparseVec, r: f64) -> (SparseVec, f64) {
        let w = beta(r)
            .inverse()
            .expect("beta carries its inverse")
            .apply(&y.sub(&self.center(r)));
        let along_z = w.dot(&self.z);
        (w.add_scaled(-along_z, &self.z), along_z)
    }

    fn validate_root(&self, y: &SparseVec, t: f64) -> Option<CylPoint> {
        if !(t > 0.0) {
            return None;
        }
        let (x, _) = self.cross_section(y, t);
        if x.norm() >= self.epsilon * (1.0 + self.guard) {
            return None;
        }
        let roundtrip = self.pi_unchecked(&x, t).dist(y);
        if roundtrip > self.roundtrip_tol * (1.0 + y.norm()) {
            return None;
        }
        Some(CylPoint { x, t })
    }

    /// All validated fiber times of `y`, in increasing order: every sign
    /// change of `F_y` on the quarter-step scan grid is refined and kept
    /// if the recovered point round-trips onto `y` inside the radius band.
    /// On a chart whose K dominates the measured constants the separation
    /// argument leaves at most one.
    pub fn fiber_times(&self, y: &SparseVec) -> Vec<CylPoint> {
        let fence = self.scan_fence(y);
        let step = 0.25;
        let mut found = Vec::new();
        let mut r = 0.0;
        let mut f_prev = self.f_val(y, r);
        while r < fence {
            let r_next = r + step;
            let f_next = self.f_val(y, r_next);
            if f_prev == 0.0 {
                if let Some(pt) = self.validate_root(y, r) {
                    found.push(pt);
                }
            } else if f_prev * f_next < 0.0 {
                let t = self.refine_root(y, r, r_next);
                if let Some(pt) = self.validate_root(y, t) {
                    found.push(pt);
                }
            }
            r = r_next;
            f_prev = f_next;
        }
        found.dedup_by(|a, b| (a.t - b.t).abs() < 1e-9);
        found
    }

    /// Invert the tube map: the first validated fiber time wins.
    pub fn pi_inverse(&self, y: &SparseVec) -> Result<CylPoint, TubeError> {
        self.fiber_times(y).into_iter().next().ok_or(TubeError::NotInTube)
    }

    /// Membership with a relative guard band around the tube wall.
    pub fn membership(&self, y: &SparseVec) -> Membership {
        match self.pi_inverse(y) {
            Err(_) => Membership::Outside,
            Ok(pt) => {
                if pt.x.norm() < self.epsilon * (1.0 - self.guard) {
                    Membership::Inside(pt)
                } else {
                    Membership::Boundary(pt)
                }
            }
        }
    }

    /// The gradient of the fiber-time function `y -> t(y)`, as the vector
    /// representing `-alpha(t) / F_y'(t)` at `t = t(y)`.
    pub fn t_of_y_derivative(&self, y: &SparseVec) -> Result<SparseVec, TubeError> {
        let pt = self.pi_inverse(y)?;
        self.t_derivative_at(y, pt.t)
    }

    /// Same, at an already recovered fiber time (skips the scan).
    pub fn t_derivative_at(&self, y: &SparseVec, t: f64) -> Result<SparseVec, TubeError> {
        let fp = self.f_deriv(y, t);
        if fp.abs() < 1e-6 * self.z_star_v() {
            return Err(TubeError::DegenerateRoot { t, f_prime: fp });
        }
        Ok(self.alpha(t).scale(-1.0 / fp))
    }

    /// The forward derivative `D pi(x, t)(h, s) = beta(t)(h) + s (beta'(t)(x) + p'(t))`.
    pub fn d_pi(&self, at: &CylPoint, h: &SparseVec, s: f64) -> SparseVec {
        beta(at.t)
            .apply(h)
            .add(&beta_prime(at.t).apply(&at.x).add(&self.center_velocity(at.t)).scale(s))
    }

    /// Adjoint of the forward derivative: maps an ambient covector `k` to
    /// the cylinder covector `(P_H beta(t)^T k, <beta'(t) x + p'(t), k>)`,
    /// so that `<D pi(h, s), k> = <h, a> + s b` for the returned `(a, b)`.
    pub fn d_pi_adjoint(&self, at: &CylPoint, k: &SparseVec) -> (SparseVec, f64) {
        let radial = beta_prime(at.t)
            .apply(&at.x)
            .add(&self.center_velocity(at.t));
        (self.project_h(&beta(at.t).adjoint_apply(k)), radial.dot(k))
    }

    /// The inverse derivative at `y = pi(at)`: maps an ambient direction
    /// `k` to the cylinder direction `(h, s)` with `s = t'(y)(k)` and
    /// `h = P_H beta^{-1}(k - s (beta'(x) + p'(t)))`.
    pub fn d_pi_inverse(&self, at: &CylPoint, k: &SparseVec) -> Result<(SparseVec, f64), TubeError> {
        let y = self.pi_unchecked(&at.x, at.t);
        let t_grad = self.t_derivative_at(&y, at.t)?;
        let s = t_grad.dot(k);
        let radial = beta_prime(at.t)
            .apply(&at.x)
            .add(&self.center_velocity(at.t));
        let h = beta(at.t)
            .inverse()
            .expect("beta carries its inverse")
            .apply(&k.add_scaled(-s, &radial));
        Ok((self.project_h(&h), s))
    }

    /// Adjoint chain rule for gradients: given the cylinder gradient
    /// `(grad_x, grad_t)` of some `g` at `at`, return the ambient gradient
    /// of `g o pi^{-1}` at `y = pi(at)`:
    ///
    /// ```text
    /// beta^{-T} grad_x + (grad_t - <grad_x, beta^{-1}(beta' x + p')>) t'(y)
    /// ```
    pub fn pullback_gradient(
        &self,
        at: &CylPoint,
        grad_x: &SparseVec,
        grad_t: f64,
    ) -> Result<SparseVec, TubeError> {
        let y = self.pi_unchecked(&at.x, at.t);
        let t_grad = self.t_derivative_at(&y, at.t)?;
        let binv = beta_inv_at(at.t);
        let radial = beta_prime(at.t)
            .apply(&at.x)
            .add(&self.center_velocity(at.t));
        let coeff = grad_t - grad_x.dot(&binv.apply(&radial));
        Ok(binv.adjoint_apply(grad_x).add_scaled(coeff, &t_grad))
    }

    /// Measured sup of `|D pi|` and `|D pi^{-1}|` over a deterministic
    /// sweep of fiber times and cross-section directions, with 15%
    /// headroom. This is the chart's recorded derivative bound; sampled
    /// operator-norm estimates stay below it.
    pub fn recorded_derivative_bound(&self, t_max: f64) -> (f64, f64) {
        let mut sup_fwd: f64 = 0.0;
        let mut sup_inv: f64 = 0.0;
        let dirs: Vec<SparseVec> = (0..6)
            .map(|j| {
                let raw = SparseVec::from_pairs([(j, 1.0), (j + 2, -0.6), (j + 5, 0.3)]);
                let proj = self.project_h(&raw);
                proj.scale(1.0 / proj.norm())
            })
            .collect();
        let mut t = 0.05;
        while t <= t_max {
            for dir in &dirs {
                let x = dir.scale(0.7 * self.epsilon);
                let at = CylPoint::new(x, t);
                for (h, s) in [(dir.clone(), 0.0), (SparseVec::zero(), 1.0), (dir.scale(0.6), 0.8)]
                {
                    let img = self.d_pi(&at, &h, s);
                    let input = (h.norm_sq() + s * s).sqrt();
                    sup_fwd = sup_fwd.max(img.norm() / input);
                }
                // inverse derivative norms probed on ambient directions
                for k in [dir.clone(), self.z.clone(), dir.add_scaled(0.5, &self.z)] {
                    if let Ok((h, s)) = self.d_pi_inverse(&at, &k) {
                        let out = (h.norm_sq() + s * s).sqrt();
                        sup_inv = sup_inv.max(out / k.norm());
                    }
                }
            }
            t += 0.1;
        }
        (1.15 * sup_fwd, 1.15 * sup_inv)
    }
}

fn beta_inv_at(t: f64) -> crate::seq_space::RankPerturbOp {
    beta(t).inverse().expect("beta carries its inverse").clone()
}
