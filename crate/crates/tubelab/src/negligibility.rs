//! Deleting diffeomorphisms and what they buy: a smooth map of the whole
//! space onto the complement of a closed tube, equal to the identity
//! outside a ball; a smooth bump with starlike support and no interior
//! critical point; and a smooth retraction of the unit ball onto its
//! sphere, with the fixed-point-free self-map and the contraction of the
//! sphere that follow from it.
//!
//! The engine is planar. [`PlanarBand`] is a convex set `B` in the
//! `(s, t)` half-plane shaped like an open-topped test tube: flat bottom
//! `{t = -1, |s| <= eps/4}`, straight sides `{|s| = eps/2, t >= -1 +
//! eps/4}`, and C-infinity corner arcs joining them with every derivative
//! matched. Its gauge `q_B` is 1 on the boundary, scales linearly along
//! rays, and vanishes on the upward axis. The map `phi(s, t) = (s, t +
//! theta(q_B(s, t)))` with `theta` exploding at 1/2 and dying flatly at 1
//! blows the half-band `B' = B/2` out to infinity while touching nothing
//! outside `B`: a diffeomorphism of the plane minus `B'` onto the plane.
//!
//! Rotating around the `t` axis lifts this to the cylinder: `h(x, t) =
//! (x, phi_inverse(|x|, t))` presses all of `X` into the complement of
//! the core region `U' = {q_B(|x|, t) <= 1/2}` and is the identity where
//! `q_B(|x|, t) >= 1`. [`DeletingDiffeo`] conjugates `h` (shifted up the
//! fiber by 2) with a tube chart, deleting a closed neighborhood `T'` of
//! the tube's core from the ambient space while fixing everything outside
//! the image of the band region. [`OriginDeleter`] translates and
//! rescales so that the deleted set contains the origin and the map is
//! the identity outside the unit ball; [`StarlikeBump`] and
//! [`BallRetraction`] are the two constructions that classically cannot
//! exist in finite dimensions and exist here because the origin can be
//! deleted without moving the boundary.

use serde::Serialize;
use std::sync::OnceLock;
use thiserror::Error;

use crate::seq_space::SparseVec;
use crate::smooth_kit::{
    blowup_cutoff, blowup_cutoff_deriv, smoothstep, support_cutoff, support_cutoff_deriv, zeta,
};
use crate::tube::{CylPoint, Membership, TubeChart, TubeError};

#[derive(Debug, Error)]
pub enum NegligibilityError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("point lies in the deleted set; the inverse is not defined there")]
    InDeletedSet,
    #[error(transparent)]
    Tube(#[from] TubeError),
}

/// Number of cells in the cached cumulative integral of the corner
/// tangent; Simpson error per cell is far below 1e-15 at this size.
const CORNER_CELLS: usize = 4096;

/// Cumulative integral table for the unit corner arc: `cum[i]` holds
/// `int_0^{i/N} cos((pi/2) smoothstep(v)) dv`. The sine integral follows
/// by the symmetry `sin(omega(u)) = cos(omega(1 - u))`, so one table
/// serves both coordinates.
struct CornerTable {
    cum: Vec<f64>,
    total: f64,
}

fn corner_angle(u: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 * smoothstep(u)
}

fn corner_integrand(u: f64) -> f64 {
    corner_angle(u).cos()
}

fn corner_table() -> &'static CornerTable {
    static TABLE: OnceLock<CornerTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = CORNER_CELLS;
        let h = 1.0 / n as f64;
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            let b = a + h;
            let m = a + h / 2.0;
            acc += h / 6.0 * (corner_integrand(a) + 4.0 * corner_integrand(m) + corner_integrand(b));
            cum.push(acc);
        }
        CornerTable { cum, total: acc }
    })
}

/// `int_0^u cos((pi/2) smoothstep)`, cubic Hermite between table nodes
/// (the derivative at the nodes is the integrand, known exactly).
fn corner_cos_integral(u: f64) -> f64 {
    let table = corner_table();
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return table.total + (u - 1.0) * corner_integrand(1.0);
    }
    let n = CORNER_CELLS as f64;
    let cell = ((u * n) as usize).min(CORNER_CELLS - 1);
    let h = 1.0 / n;
    let a = cell as f64 * h;
    let w = (u - a) / h;
    let f0 = table.cum[cell];
    let f1 = table.cum[cell + 1];
    let d0 = corner_integrand(a) * h;
    let d1 = corner_integrand(a + h) * h;
    let w2 = w * w;
    let w3 = w2 * w;
    f0 * (2.0 * w3 - 3.0 * w2 + 1.0)
        + d0 * (w3 - 2.0 * w2 + w)
        + f1 * (-2.0 * w3 + 3.0 * w2)
        + d1 * (w3 - w2)
}

fn corner_sin_integral(u: f64) -> f64 {
    let table = corner_table();
    table.total - corner_cos_integral(1.0 - u.clamp(0.0, 1.0))
}

/// The open-topped planar band `B` and its ray gauge.
///
/// The boundary runs, for `s >= 0`: flat bottom from `(0, -1)` to
/// `(eps/4, -1)`, a convex C-infinity corner arc to `(eps/2, -1 + eps/4)`
/// whose tangent turns from horizontal to vertical with flat joins, then
/// the vertical ray upward. Mirrored for `s < 0`. The gauge `q_B` is
/// positively homogeneous, 1 exactly on this boundary, smooth away from
/// the upward cone `{0} x [0, inf)` where it is identically zero.
#[derive(Debug, Clone)]
pub struct PlanarBand {
    epsilon: f64,
}

impl PlanarBand {
    pub fn new(epsilon: f64) -> Result<Self, NegligibilityError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(NegligibilityError::InvalidArgument(format!(
                "band width must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(PlanarBand { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Corner arc for `s >= 0`, parameter `u` in `[0, 1]`: starts at
    /// `(eps/4, -1)` tangent to the bottom, ends at `(eps/2, -1 + eps/4)`
    /// tangent to the side. The equal horizontal and vertical spans come
    /// from the tangent-angle symmetry, so the arc lands exactly.
    pub fn corner_point(&self, u: f64) -> (f64, f64) {
        let c = corner_table().total;
        let r = self.epsilon / 4.0;
        (
            r + r * corner_cos_integral(u) / c,
            -1.0 + r * corner_sin_integral(u) / c,
        )
    }

    /// Unit tangent of the corner arc.
    pub fn corner_tangent(&self, u: f64) -> (f64, f64) {
        let w = corner_angle(u);
        (w.cos(), w.sin())
    }

    /// Outward unit normal of the corner arc.
    pub fn corner_normal(&self, u: f64) -> (f64, f64) {
        let w = corner_angle(u);
        (w.sin(), -w.cos())
    }

    /// Which boundary face the ray through `(s, t)` exits, for `s > 0`.
    fn classify(&self, s: f64, t: f64) -> Face {
        debug_assert!(s > 0.0);
        if t < 0.0 && 4.0 * s <= self.epsilon * (-t) {
            return Face::Bottom;
        }
        // at or above the ray through the arc's upper endpoint
        if self.epsilon * t >= (self.epsilon / 2.0 - 2.0) * s {
            return Face::Side;
        }
        Face::Arc
    }

    /// Arc parameter whose boundary point lies on the ray through
    /// `(s, t)`: root of the cross product, monotone along the arc.
    fn arc_ray_root(&self, s: f64, t: f64) -> f64 {
        let cross = |u: f64| {
            let (gx, gy) = self.corner_point(u);
            gx * t - gy * s
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        // cross(0) > 0 and cross(1) < 0 in the arc sector
        for _ in 0..20 {
            let m = 0.5 * (lo + hi);
            if cross(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        // Newton polish; the derivative uses the exact tangent
        let c = corner_table().total;
        let speed = self.epsilon / (4.0 * c);
        let mut u = 0.5 * (lo + hi);
        for _ in 0..40 {
            let f = cross(u);
            let (tx, ty) = self.corner_tangent(u);
            let fp = speed * (tx * t - ty * s);
            if fp == 0.0 {
                break;
            }
            let step = f / fp;
            let next = (u - step).clamp(lo, hi);
            if (next - u).abs() <= 1e-15 {
                u = next;
                break;
            }
            u = next;
        }
        u
    }

    /// The ray gauge of the band: 1 on the boundary, linear along rays,
    /// 0 on the upward cone `{0} x [0, inf)`.
    pub fn gauge(&self, s: f64, t: f64) -> f64 {
        let s = s.abs();
        if s == 0.0 {
            return (-t).max(0.0);
        }
        match self.classify(s, t) {
            Face::Bottom => -t,
            Face::Side => 2.0 * s / self.epsilon,
            Face::Arc => {
                let u = self.arc_ray_root(s, t);
                let (_, gy) = self.corner_point(u);
                // gy is near -1, the well-conditioned coordinate
                t / gy
            }
        }
    }

    /// Gradient of the gauge at `(s, t)` (signed `s`). For a starlike
    /// gauge this is `n / <n, gamma>` with `n` the outward normal at the
    /// ray's exit point `gamma`, which makes the Euler identity
    /// `<grad, (s, t)> = q` exact.
    ///
    /// Panics on the cone `{0} x [0, inf)` where the gauge is not
    /// differentiable; every caller works in the region `q > 1/2`, which
    /// the cone (where `q = 0`) never meets.
    pub fn gauge_grad(&self, s: f64, t: f64) -> (f64, f64) {
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let sa = s.abs();
        if sa == 0.0 {
            assert!(t < 0.0, "gauge is not differentiable on the upward cone");
            return (0.0, -1.0);
        }
        match self.classify(sa, t) {
            Face::Bottom => (0.0, -1.0),
            Face::Side => (sign * 2.0 / self.epsilon, 0.0),
            Face::Arc => {
                let u = self.arc_ray_root(sa, t);
                let (nx, ny) = self.corner_normal(u);
                let (gx, gy) = self.corner_point(u);
                let denom = nx * gx + ny * gy;
                (sign * nx / denom, ny / denom)
            }
        }
    }

    /// Forward planar map `phi(s, t) = (s, t + theta(q_B(s, t)))`:
    /// identity where `q_B >= 1`, blows up toward `+inf` as `q_B` drops
    /// to 1/2, out of domain at or inside the half-band.
    pub fn planar_phi(&self, s: f64, t: f64) -> Result<(f64, f64), NegligibilityError> {
        Ok((s, self.phi_t(s, t)?))
    }

    fn phi_t(&self, s: f64, t: f64) -> Result<f64, NegligibilityError> {
        let q = self.gauge(s, t);
        if q <= 0.5 {
            return Err(NegligibilityError::OutOfDomain(format!(
                "phi needs q_B > 1/2, got {q} at (s, t) = ({s}, {t})"
            )));
        }
        Ok(t + blowup_cutoff(q))
    }

    /// Fiber slope of the forward map, `1 + theta'(q) dq/dt`. Both
    /// factors of the product term are nonpositive, so the slope is
    /// always at least 1; that is what makes the inverse a clean
    /// one-dimensional root-find.
    pub fn phi_t_slope(&self, s: f64, t: f64) -> f64 {
        let q = self.gauge(s, t);
        if q >= 1.0 {
            return 1.0;
        }
        let (_, qt) = self.gauge_grad(s, t);
        1.0 + blowup_cutoff_deriv(q) * qt
    }

    /// Inverse of the forward map in the `t` slot: the unique `u` with
    /// `u + theta(q_B(s, u)) = t`. Total on the plane; the image lies
    /// below the half-band (`q_B(s, u) > 1/2`).
    pub fn planar_phi_inverse(&self, s: f64, t: f64) -> (f64, f64) {
        (s, self.phi_t_inverse(s, t))
    }

    fn phi_t_inverse(&self, s: f64, t: f64) -> f64 {
        // exact fast path: theta vanishes identically at q >= 1
        if self.gauge(s, t) >= 1.0 {
            return t;
        }
        // phase 1: find a fiber point below the half-band
        let mut probe = t;
        let mut step = 0.25;
        while self.gauge(s, probe) <= 0.5 {
            probe -= step;
            step *= 2.0;
            assert!(step < 1e9, "runaway bracket descent");
        }
        // phase 2: turn it into a bracket [lo, hi] with
        // phi(lo) <= t <= phi(hi)
        let mut hi = probe;
        if self.phi_t(s, hi).unwrap() < t {
            // walk hi up toward the half-band where phi blows up,
            // keeping it on the valid side
            let mut bad = t; // q(s, bad) <= 1/2 or phi(bad) >= t
            loop {
                let m = 0.5 * (hi + bad);
                if self.gauge(s, m) > 0.5 {
                    if self.phi_t(s, m).unwrap() >= t {
                        hi = m;
                        break;
                    }
                    hi = m;
                } else {
                    bad = m;
                }
                assert!(bad - hi > 1e-300, "degenerate blow-up bracket");
            }
        }
        let mut lo = hi;
        step = 0.25;
        while self.phi_t(s, lo).unwrap() > t {
            lo -= step;
            step *= 2.0;
            assert!(step < 1e9, "runaway lower bracket");
        }
        // phase 3: bisection with Newton polish, slope >= 1
        let tol = 1e-12 * (1.0 + t.abs());
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.phi_t(s, u).unwrap() - t;
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let slope = self.phi_t_slope(s, u);
            let mut next = u - f / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= tol {
                return next;
            }
            u = next;
        }
        u
    }

    /// Derivatives of the solved inverse `u(s, w)` at a point where
    /// `u = phi_t_inverse(s, w)`: returns `(du/ds, du/dw)` by implicit
    /// differentiation of `u + theta(q_B(s, u)) = w`.
    pub fn phi_t_inverse_derivs(&self, s: f64, u: f64) -> (f64, f64) {
        let q = self.gauge(s, u);
        if q >= 1.0 {
            return (0.0, 1.0);
        }
        let tp = blowup_cutoff_deriv(q);
        let (qs, qt) = self.gauge_grad(s, u);
        let slope = 1.0 + tp * qt;
        (-tp * qs / slope, 1.0 / slope)
    }

    /// Cylinder gauge `psi(x, t) = q_B(|x|, t)`.
    pub fn psi(&self, x: &SparseVec, t: f64) -> f64 {
        self.gauge(x.norm(), t)
    }

    /// The cylinder press `h(x, t) = (x, phi_t_inverse(|x|, t))`: maps
    /// the whole cylinder into the complement of `{psi <= 1/2}`, identity
    /// where `psi >= 1`.
    pub fn h_map(&self, x: &SparseVec, t: f64) -> (SparseVec, f64) {
        (x.clone(), self.phi_t_inverse(x.norm(), t))
    }

    /// Inverse of the press: `(x, t + theta(psi(x, t)))`, defined where
    /// `psi > 1/2` (off the deleted core).
    pub fn h_inverse(&self, x: &SparseVec, t: f64) -> Result<(SparseVec, f64), NegligibilityError> {
        let u = self.phi_t(x.norm(), t)?;
        Ok((x.clone(), u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Face {
    Bottom,
    Side,
    Arc,
}

/// A smooth map of the ambient space onto the complement of a closed
/// neighborhood `T'` of a tube's core, equal to the identity outside
/// the band region `pi(V)` of the tube (and in particular outside the
/// ball carrying the tube). Built by conjugating the cylinder press with
/// the tube chart, shifted up the fiber so the pressed region sits at
/// fiber times `t >= 1`.
#[derive(Debug, Clone)]
pub struct DeletingDiffeo {
    chart: TubeChart,
    band: PlanarBand,
}

/// Fiber shift of the band region: the press acts on `(x, t - SHIFT)`,
/// so the deleted core is centered around fiber time `SHIFT` and the
/// band region stays inside `{t >= SHIFT - 1 > 0}`.
const SHIFT: f64 = 2.0;

impl DeletingDiffeo {
    pub fn new(chart: TubeChart) -> Self {
        let band = PlanarBand::new(chart.epsilon())
            .expect("chart cross-section radii are valid band widths");
        DeletingDiffeo { chart, band }
    }

    /// The instance the quantitative checks run on: desk-scale radius,
    /// unit-ball scale. The inverse press amplifies cross-section noise
    /// by up to `|theta'| * 2/eps`, so on the hair-thin faithful chart
    /// (eps near 5e-11) reconstruction dust at the f64 floor comes back
    /// as 1e-6 round-trip error; the desk radius keeps the whole map
    /// invertible to better than 1e-8.
    pub fn desk_unit() -> Self {
        Self::new(TubeChart::desk_scaled())
    }

    pub fn chart(&self) -> &TubeChart {
        &self.chart
    }

    pub fn band(&self) -> &PlanarBand {
        &self.band
    }

    /// Shifted cylinder gauge: `< = 1` bounds the region the map moves,
    /// `<= 1/2` is the deleted core.
    pub fn shifted_psi(&self, x: &SparseVec, t: f64) -> f64 {
        self.band.psi(x, t - SHIFT)
    }

    /// The shifted press in cylinder coordinates.
    pub fn g_cyl(&self, pt: &CylPoint) -> CylPoint {
        let (x, u) = self.band.h_map(&pt.x, pt.t - SHIFT);
        CylPoint::new(x, SHIFT + u)
    }

    /// Its inverse, defined off the deleted core.
    pub fn g_cyl_inverse(&self, pt: &CylPoint) -> Result<CylPoint, NegligibilityError> {
        let (x, u) = self.band.h_inverse(&pt.x, pt.t - SHIFT)?;
        Ok(CylPoint::new(x, SHIFT + u))
    }

    /// Whether `y` lies in the deleted set `T'` (the image of the core
    /// region through the chart).
    pub fn in_deleted_set(&self, y: &SparseVec) -> bool {
        match self.chart.membership(y) {
            Membership::Inside(pt) => self.shifted_psi(&pt.x, pt.t) <= 0.5,
            _ => false,
        }
    }

    /// The deleting map. Identity outside the tube and wherever the
    /// shifted gauge is at least 1; in both cases the input is returned
    /// unchanged, which is the mathematically exact value (the press is
    /// the identity there, so recomposing the chart would only add
    /// round-trip noise).
    pub fn apply(&self, y: &SparseVec) -> SparseVec {
        match self.chart.membership(y) {
            Membership::Outside | Membership::Boundary(_) => y.clone(),
            Membership::Inside(pt) => {
                if self.shifted_psi(&pt.x, pt.t) >= 1.0 {
                    y.clone()
                } else {
                    let moved = self.g_cyl(&pt);
                    self.chart.pi_unchecked(&moved.x, moved.t)
                }
            }
        }
    }

    /// The moving branch without the identity shortcut, for seam checks:
    /// recomposes `pi . g . pi^{-1}` even where `g` is the identity.
    pub fn apply_pressed_branch(&self, y: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        let pt = self.chart.pi_inverse(y)?;
        let moved = self.g_cyl(&pt);
        Ok(self.chart.pi_unchecked(&moved.x, moved.t))
    }

    /// Inverse of the deleting map, defined on its image (everything
    /// except the deleted set `T'`).
    pub fn apply_inverse(&self, y: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        match self.chart.membership(y) {
            Membership::Outside | Membership::Boundary(_) => Ok(y.clone()),
            Membership::Inside(pt) => {
                let psi = self.shifted_psi(&pt.x, pt.t);
                if psi >= 1.0 {
                    Ok(y.clone())
                } else if psi <= 0.5 {
                    Err(NegligibilityError::InDeletedSet)
                } else {
                    let moved = self.g_cyl_inverse(&pt)?;
                    Ok(self.chart.pi_unchecked(&moved.x, moved.t))
                }
            }
        }
    }

    /// Adjoint derivative (gradient pullback): returns `D f(y)^T u` for
    /// the deleting map `f`. Outside the moving region the map is the
    /// identity and the covector passes through unchanged.
    pub fn pullback(&self, y: &SparseVec, u: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        match self.chart.membership(y) {
            Membership::Outside | Membership::Boundary(_) => Ok(u.clone()),
            Membership::Inside(pt) => {
                if self.shifted_psi(&pt.x, pt.t) >= 1.0 {
                    return Ok(u.clone());
                }
                let s = pt.x.norm();
                let moved = self.g_cyl(&pt);
                // adjoint of D pi at the image point
                let (a, b) = self.chart.d_pi_adjoint(&moved, u);
                // adjoint of D g: g = (x, G(x, t)) with dG/dx radial
                let (du_ds, du_dw) = self.band.phi_t_inverse_derivs(s, moved.t - SHIFT);
                let grad_x = if s > 0.0 {
                    a.add_scaled(b * du_ds / s, &pt.x)
                } else {
                    a
                };
                // adjoint of D pi^{-1} at the source point
                Ok(self.chart.pullback_gradient(&pt, &grad_x, b * du_dw)?)
            }
        }
    }
}

/// Gauge of a starlike body: positively homogeneous, positive away
/// from 0, smooth where the constructions evaluate it.
pub trait Gauge: Send + Sync {
    fn value(&self, x: &SparseVec) -> f64;
    fn gradient(&self, x: &SparseVec) -> SparseVec;
}

/// The unit ball's gauge: the norm itself.
#[derive(Debug, Clone, Copy)]
pub struct NormGauge;

impl Gauge for NormGauge {
    fn value(&self, x: &SparseVec) -> f64 {
        x.norm()
    }
    fn gradient(&self, x: &SparseVec) -> SparseVec {
        let n = x.norm();
        assert!(n > 0.0, "the norm gauge is not differentiable at 0");
        x.scale(1.0 / n)
    }
}

/// A bounded starlike body `A = {q_A <= 1}` described by its gauge. The
/// characteristic cone (directions `r x` staying in `A` for all `r > 0`)
/// is trivial for bounded bodies; the directions field lists spanning
/// rays when a caller models an unbounded one.
pub struct StarlikeBody {
    gauge: Box<dyn Gauge>,
    cone_directions: Vec<SparseVec>,
}

impl StarlikeBody {
    /// The default body: the closed unit ball.
    pub fn unit_ball() -> Self {
        StarlikeBody { gauge: Box::new(NormGauge), cone_directions: Vec::new() }
    }

    pub fn with_gauge(gauge: Box<dyn Gauge>) -> Self {
        StarlikeBody { gauge, cone_directions: Vec::new() }
    }

    pub fn gauge(&self, x: &SparseVec) -> f64 {
        self.gauge.value(x)
    }

    pub fn gauge_gradient(&self, x: &SparseVec) -> SparseVec {
        self.gauge.gradient(x)
    }

    pub fn characteristic_cone(&self) -> &[SparseVec] {
        &self.cone_directions
    }

    pub fn contains(&self, x: &SparseVec) -> bool {
        self.gauge(x) <= 1.0
    }
}

/// The deleting map conjugated with a translation taking a point of the
/// deleted set to the origin, so the deleted set contains 0 and
/// everything far from the translated tube is fixed: `f1(x) =
/// delete(x + y0) - y0` with `y0` a point of the deleted set. A
/// translation leaves derivatives untouched, so `D f1(x) =
/// D delete(x + y0)` exactly and the gradient pullback is free.
pub struct OriginDeleter {
    del: DeletingDiffeo,
    y0: SparseVec,
}

impl OriginDeleter {
    pub fn new() -> Self {
        Self::with_deleter(DeletingDiffeo::desk_unit())
    }

    pub fn with_deleter(del: DeletingDiffeo) -> Self {
        // the chart image of (0, SHIFT) sits in the middle of the
        // deleted core
        let y0 = del.chart().pi_unchecked(&SparseVec::zero(), SHIFT);
        OriginDeleter { del, y0 }
    }

    pub fn deleter(&self) -> &DeletingDiffeo {
        &self.del
    }

    pub fn center(&self) -> &SparseVec {
        &self.y0
    }

    /// Everything outside this radius is fixed: the moving region of the
    /// deleting map lies in the ball of the chart's ambient radius bound,
    /// and the translation pulls it to radius `bound + |y0|` around the
    /// origin.
    pub fn nontrivial_radius(&self) -> f64 {
        self.del.chart().ambient_radius_bound() + self.y0.norm()
    }

    fn conjugate_in(&self, x: &SparseVec) -> SparseVec {
        x.add(&self.y0)
    }

    fn conjugate_out(&self, y: &SparseVec) -> SparseVec {
        y.sub(&self.y0)
    }

    /// The origin-deleting diffeomorphism of the whole space.
    pub fn apply(&self, x: &SparseVec) -> SparseVec {
        self.conjugate_out(&self.del.apply(&self.conjugate_in(x)))
    }

    pub fn apply_inverse(&self, x: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        Ok(self.conjugate_out(&self.del.apply_inverse(&self.conjugate_in(x))?))
    }

    /// `D f1(x)^T u`.
    pub fn pullback(&self, x: &SparseVec, u: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        self.del.pullback(&self.conjugate_in(x), u)
    }

    pub fn deletes(&self, x: &SparseVec) -> bool {
        self.del.in_deleted_set(&self.conjugate_in(x))
    }
}

impl Default for OriginDeleter {
    fn default() -> Self {
        Self::new()
    }
}

/// A smooth bump whose support is exactly a starlike body and whose
/// gradient never vanishes inside that support: `b(x) =
/// theta(q_A(f1(x)))` with `f1` deleting the origin. The composed gauge
/// is everywhere positive (the origin is never hit), so the cutoff's
/// derivative is strictly negative on the interior and the chain-rule
/// gradient never dies.
pub struct StarlikeBump {
    f1: OriginDeleter,
    body: StarlikeBody,
}

impl StarlikeBump {
    pub fn new() -> Self {
        StarlikeBump { f1: OriginDeleter::new(), body: StarlikeBody::unit_ball() }
    }

    pub fn with_parts(f1: OriginDeleter, body: StarlikeBody) -> Result<Self, NegligibilityError> {
        if f1.nontrivial_radius() >= 1.0 {
            return Err(NegligibilityError::InvalidArgument(
                "the origin deleter must be the identity outside the unit ball".into(),
            ));
        }
        Ok(StarlikeBump { f1, body })
    }

    pub fn body(&self) -> &StarlikeBody {
        &self.body
    }

    pub fn deleter(&self) -> &OriginDeleter {
        &self.f1
    }

    /// Composed gauge `q_A(f1(x))`: positive everywhere, below 1 exactly
    /// on the interior of the body.
    pub fn composed_gauge(&self, x: &SparseVec) -> f64 {
        self.body.gauge(&self.f1.apply(x))
    }

    pub fn value(&self, x: &SparseVec) -> f64 {
        support_cutoff(self.composed_gauge(x))
    }

    pub fn eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let z = self.f1.apply(x);
        let q = self.body.gauge(&z);
        let v = support_cutoff(q);
        if v == 0.0 {
            return (0.0, SparseVec::zero());
        }
        let grad = self
            .f1
            .pullback(x, &self.body.gauge_gradient(&z))
            .expect("pullback is total")
            .scale(support_cutoff_deriv(q));
        (v, grad)
    }
}

impl Default for StarlikeBump {
    fn default() -> Self {
        Self::new()
    }
}

/// Summary of a fixed-point-free sweep, serialized by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub samples: usize,
    pub min_displacement: f64,
    pub max_gauge_error: f64,
}

/// The classical impossibilities of finite dimensions, realized on a
/// starlike body: a smooth retraction onto the boundary fixing the
/// boundary pointwise, the fixed-point-free self-map `-R`, and a smooth
/// contraction of the boundary to a point.
pub struct BallRetraction {
    f1: OriginDeleter,
    body: StarlikeBody,
}

impl BallRetraction {
    pub fn new() -> Self {
        BallRetraction { f1: OriginDeleter::new(), body: StarlikeBody::unit_ball() }
    }

    pub fn body(&self) -> &StarlikeBody {
        &self.body
    }

    fn require_in_body(&self, x: &SparseVec) -> Result<(), NegligibilityError> {
        let q = self.body.gauge(x);
        if q > 1.0 + 1e-9 {
            return Err(NegligibilityError::InvalidArgument(format!(
                "point with gauge {q} is outside the body"
            )));
        }
        Ok(())
    }

    /// Radial projection of the deleted image: `R(x) = f1(x) / q_A(f1(x))`.
    /// Well-defined on all of the body because `f1` never takes the value
    /// 0; fixes the boundary because `f1` is the identity there.
    pub fn retract(&self, x: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        self.require_in_body(x)?;
        let z = self.f1.apply(x);
        let q = self.body.gauge(&z);
        debug_assert!(q > 0.0, "the deleter must miss the origin");
        Ok(z.scale(1.0 / q))
    }

    /// `-R`: a smooth self-map of the body without fixed points (a fixed
    /// point would be a boundary point equal to its own antipode).
    pub fn fixed_point_free(&self, x: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        Ok(self.retract(x)?.scale(-1.0))
    }

    /// Contraction of the boundary within itself: `H(t, x) =
    /// R((1 - zeta(t)) x)`, the identity at `t = 0`, the constant `R(0)`
    /// at `t = 1`.
    pub fn homotopy(&self, t: f64, x: &SparseVec) -> Result<SparseVec, NegligibilityError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(NegligibilityError::InvalidArgument(format!(
                "homotopy time {t} outside [0, 1]"
            )));
        }
        let q = self.body.gauge(x);
        if (q - 1.0).abs() > 1e-9 {
            return Err(NegligibilityError::InvalidArgument(format!(
                "homotopy is defined on the boundary, got gauge {q}"
            )));
        }
        self.retract(&x.scale(1.0 - zeta(t)))
    }
}

impl Default for BallRetraction {
    fn default() -> Self {
        Self::new()
    }
}
