//! A smooth operator path that drags a direction through every coordinate.
//!
//! Write `v_n = e_n - e_{n-1}`. There is a family of functionals `f_n` with
//! `f_n(v_1) = f_n(v_n) = 1` such that the rank-one shears
//! `S_n = I + f_n (x) (v_n - v_1)` each carry `v_1` to `v_n`, and the
//! two-term interpolations between consecutive shears stay uniformly
//! invertible. Gluing those interpolations with a plateau cutoff gives a
//! C-infinity path `beta(t)` of isomorphisms, equal to the identity for
//! `t <= 1/2`, that moves `v_1` through every `v_n` in turn while `beta`,
//! its inverse, and both derivatives stay bounded. Integrating
//! `beta(t) v_1` yields a centerline of infinite length whose distinct
//! points stay quantitatively separated, the skeleton of a bounded tube
//! that never stops twisting.
//!
//! Everything here is exact finite-rank arithmetic: inverses come from the
//! two-dimensional Woodbury identity, not iteration, and operator norms
//! are computed exactly on the active span.

use std::sync::OnceLock;

use serde::Serialize;

use crate::seq_space::{RankPerturbOp, SparseVec};
use crate::smooth_kit::{theta, theta_antideriv, theta_deriv};

/// The dual functional `f_n`. The first two are bespoke
/// (`f_1 = e_1`, `f_2 = e_1 + 2 e_2 + (7/3) e_3`), the tail is the regular
/// pattern `f_n = e_1 - e_{n-1}`.
pub fn functional(n: u32) -> SparseVec {
    assert!(n >= 1, "functional index starts at 1");
    match n {
        1 => SparseVec::basis(1),
        2 => SparseVec::from_pairs([(1, 1.0), (2, 2.0), (3, 7.0 / 3.0)]),
        _ => SparseVec::from_pairs([(1, 1.0), (n as usize - 1, -1.0)]),
    }
}

/// `u_n = v_n - v_1`, the direction the n-th shear adds. Zero for `n = 1`.
pub fn drag_direction(n: u32) -> SparseVec {
    assert!(n >= 1, "drag index starts at 1");
    if n == 1 {
        return SparseVec::zero();
    }
    SparseVec::from_pairs([
        (0, 1.0),
        (1, -1.0),
        (n as usize - 1, -1.0),
        (n as usize, 1.0),
    ])
}

/// Woodbury determinant of the two-term interpolation. Equals 1 at the
/// endpoints and never drops below 1/2.
pub fn interp_det(n: u32, lambda: f64) -> f64 {
    let (a, b) = offdiag_pairings(n);
    1.0 - lambda * (1.0 - lambda) * a * b
}

/// `(f_n(v_{n+1}) - 1, f_{n+1}(v_n) - 1)`: the two off-diagonal entries of
/// the Woodbury system.
fn offdiag_pairings(n: u32) -> (f64, f64) {
    let a = functional(n).dot(&SparseVec::basis_diff(n as usize + 1)) - 1.0;
    let b = functional(n + 1).dot(&SparseVec::basis_diff(n as usize)) - 1.0;
    (a, b)
}

fn rank_terms(specs: &[(f64, &SparseVec, &SparseVec)]) -> Vec<(SparseVec, SparseVec)> {
    specs
        .iter()
        .filter(|(c, _, u)| *c != 0.0 && !u.is_zero())
        .map(|&(c, f, u)| (f.clone(), u.scale(c)))
        .collect()
}

/// Interpolation `I + (1-lambda) f_n (x) u_n + lambda f_{n+1} (x) u_{n+1}`
/// between consecutive shears, with its exact Woodbury inverse attached.
/// Emits at most two rank-one terms (zero-weight terms are dropped, so the
/// endpoints are literally the shears).
pub fn interp_op(n: u32, lambda: f64) -> RankPerturbOp {
    assert!(n >= 1, "window index starts at 1");
    assert!(
        (0.0..=1.0).contains(&lambda),
        "lambda must lie in [0, 1], got {lambda}"
    );
    let f_lo = functional(n);
    let f_hi = functional(n + 1);
    let u_lo = drag_direction(n);
    let u_hi = drag_direction(n + 1);
    let (a, b) = offdiag_pairings(n);
    let det = 1.0 - lambda * (1.0 - lambda) * a * b;
    let fwd = rank_terms(&[(1.0 - lambda, &f_lo, &u_lo), (lambda, &f_hi, &u_hi)]);
    let inv_f_lo = f_lo.add_scaled(-lambda * a, &f_hi).scale(1.0 / det);
    let inv_f_hi = f_hi.add_scaled(-(1.0 - lambda) * b, &f_lo).scale(1.0 / det);
    let inv = rank_terms(&[
        (-(1.0 - lambda), &inv_f_lo, &u_lo),
        (-lambda, &inv_f_hi, &u_hi),
    ]);
    RankPerturbOp::new(1.0, fwd).with_inverse(RankPerturbOp::new(1.0, inv))
}

/// The shear `S_n`, carrying `v_1` to `v_n`. `S_1` is the identity.
pub fn shift_op(n: u32) -> RankPerturbOp {
    interp_op(n, 0.0)
}

/// Which interpolation window governs time `t >= 0`, and how far along it
/// is: returns `(n, lambda)` with `beta(t) = interp_op(n, lambda)`.
///
/// The window index is `floor(t) + 1` and the weight is the plateau cutoff
/// `theta(t - n)`, so `beta` sits on the shear `S_n` for
/// `t` in `[n - 1, n - 1/2]` and crossfades to `S_{n+1}` during
/// `(n - 1/2, n)`.
pub fn active_window(t: f64) -> (u32, f64) {
    assert!(t >= 0.0 && t.is_finite(), "window time must be finite and nonnegative");
    let n = t.floor() as u32 + 1;
    (n, theta(t - n as f64))
}

/// The operator path at time `t` (identity for `t <= 1/2`, and for
/// negative `t` by extension), with inverse attached.
pub fn beta(t: f64) -> RankPerturbOp {
    if t < 0.0 {
        return RankPerturbOp::identity().with_inverse(RankPerturbOp::identity());
    }
    let (n, lambda) = active_window(t);
    interp_op(n, lambda)
}

pub fn beta_inv(t: f64) -> RankPerturbOp {
    beta(t).inverse().cloned().expect("beta always carries its inverse")
}

/// Time derivative of [`beta`]: the pure rank-two operator
/// `theta'(t - n) (f_{n+1} (x) u_{n+1} - f_n (x) u_n)`. Identically zero on
/// the plateaus.
pub fn beta_prime(t: f64) -> RankPerturbOp {
    if t < 0.0 {
        return RankPerturbOp::new(0.0, vec![]);
    }
    let (n, _) = active_window(t);
    let dl = theta_deriv(t - n as f64);
    if dl == 0.0 {
        return RankPerturbOp::new(0.0, vec![]);
    }
    let terms = rank_terms(&[
        (-dl, &functional(n), &drag_direction(n)),
        (dl, &functional(n + 1), &drag_direction(n + 1)),
    ]);
    RankPerturbOp::new(0.0, terms)
}

/// Time derivative of the inverse path, assembled exactly from
/// `-beta^{-1} beta' beta^{-1}` as at most two rank-one terms.
pub fn beta_inv_prime(t: f64) -> RankPerturbOp {
    if t < 0.0 {
        return RankPerturbOp::new(0.0, vec![]);
    }
    let (n, _) = active_window(t);
    let dl = theta_deriv(t - n as f64);
    if dl == 0.0 {
        return RankPerturbOp::new(0.0, vec![]);
    }
    let b = beta(t);
    let binv = b.inverse().expect("beta always carries its inverse");
    let mut terms = Vec::new();
    for (c, f, u) in [
        (-dl, functional(n), drag_direction(n)),
        (dl, functional(n + 1), drag_direction(n + 1)),
    ] {
        if u.is_zero() {
            continue;
        }
        terms.push((binv.adjoint_apply(&f), binv.apply(&u).scale(-c)));
    }
    RankPerturbOp::new(0.0, terms)
}

/// Centerline of the tube: the integral of `beta(s) v_1`, in closed form.
///
/// On the window `[n-1, n)` only three coordinates are in motion, with
/// antiderivative weights that telescope; behind the active window the
/// coefficients have all saturated, so the point is
/// `(e_{n-1} - e_0) + Theta(fr) (e_n - e_{n-1}) + Theta(fr - 1) (e_{n+1} - e_n)`
/// with `fr = t - n + 1` and `Theta` the cutoff's antiderivative. For
/// `t < 0` the line continues straight along `v_1`.
pub fn path_point(t: f64) -> SparseVec {
    if t < 0.0 {
        let c = 0.25 + t;
        return SparseVec::from_pairs([(0, -c), (1, c)]);
    }
    let n = t.floor() as usize + 1;
    let fr = t - (n as f64 - 1.0);
    let th0 = theta_antideriv(fr);
    let th1 = theta_antideriv(fr - 1.0);
    SparseVec::from_pairs([
        (0, -1.0),
        (n - 1, 1.0 - th0),
        (n, th0 - th1),
        (n + 1, th1),
    ])
}

/// Velocity of the centerline: `beta(t) v_1`, again in closed form. Its
/// norm oscillates between `sqrt(2)` on the plateaus and `1/sqrt(2)` at
/// the crossfade midpoints; it never vanishes.
pub fn path_velocity(t: f64) -> SparseVec {
    if t < 0.0 {
        return SparseVec::basis_diff(1);
    }
    let n = t.floor() as usize + 1;
    let fr = t - (n as f64 - 1.0);
    let c0 = theta(fr);
    let c1 = theta(fr - 1.0);
    SparseVec::from_pairs([(n - 1, -c0), (n, c0 - c1), (n + 1, c1)])
}

/// Quantitative injectivity floor for the centerline: distinct parameters
/// `t, s` keep `|path_point(t) - path_point(s)| >= min(|t - s| / 12, 1/16)`.
pub fn separation_lower_bound(dt: f64) -> f64 {
    (dt.abs() / 12.0).min(1.0 / 16.0)
}

/// Worst-case product bound on the inverse-path derivative usable as the
/// path constant when no measurement is wanted: the interpolations obey
/// `|L| <= 73` and `|L^{-1}| <= 577`, and the crossfade slope is below
/// 584, giving `577^2 * 584`.
pub fn conservative_k_bound() -> f64 {
    577.0 * 577.0 * 584.0
}

/// Path constants measured on a grid, with exact operator norms at each
/// sample. These are the quantities every downstream bound is phrased in.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasuredConstants {
    pub t_max: f64,
    pub grid_step: f64,
    pub sup_beta_norm: f64,
    pub sup_beta_inv_norm: f64,
    pub sup_beta_prime_norm: f64,
    pub sup_beta_inv_prime_norm: f64,
    pub sup_functional_norm: f64,
    pub sup_interp_norm: f64,
    pub sup_interp_inv_norm: f64,
    pub sup_path_norm: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Smallest observed ratio of centerline distance to the separation
    /// floor; at least 1 means the floor holds on the sampled pairs.
    pub min_separation_ratio: f64,
    /// Smallest chord-to-parameter ratio `|p(s+dt)-p(s)| / dt` over pairs
    /// with `dt <= 1`: how slow the centerline can look over short spans.
    pub min_short_ratio: f64,
    /// Smallest centerline distance over pairs with `1 <= dt <= 6`. Beyond
    /// six units the active windows have fully disjoint fresh coordinates
    /// and the distance only grows, so this is the global far-pair floor.
    pub min_far_separation: f64,
    /// `max(1, sup |beta|, sup |beta^{-1}|, sup |beta'|, sup |(beta^{-1})'|)`.
    pub k_measured: f64,
}

impl MeasuredConstants {
    pub fn compute(t_max: f64, step: f64, n_max: u32) -> Self {
        let mut sup_beta: f64 = 0.0;
        let mut sup_beta_inv: f64 = 0.0;
        let mut sup_beta_prime: f64 = 0.0;
        let mut sup_beta_inv_prime: f64 = 0.0;
        let mut sup_path: f64 = 0.0;
        let mut min_speed = f64::INFINITY;
        let mut max_speed: f64 = 0.0;
        let steps = (t_max / step).ceil() as usize;
        for k in 0..=steps {
            let t = (k as f64 * step).min(t_max);
            let b = beta(t);
            sup_beta = sup_beta.max(b.operator_norm_exact());
            let binv = b.inverse().expect("inverse attached");
            sup_beta_inv = sup_beta_inv.max(binv.operator_norm_exact());
            sup_beta_prime = sup_beta_prime.max(beta_prime(t).operator_norm_exact());
            sup_beta_inv_prime =
                sup_beta_inv_prime.max(beta_inv_prime(t).operator_norm_exact());
            sup_path = sup_path.max(path_point(t).norm());
            let speed = path_velocity(t).norm();
            min_speed = min_speed.min(speed);
            max_speed = max_speed.max(speed);
        }

        let mut sup_f: f64 = 0.0;
        let mut sup_interp: f64 = 0.0;
        let mut sup_interp_inv: f64 = 0.0;
        for n in 1..=n_max {
            sup_f = sup_f.max(functional(n).norm());
            for j in 0..=100 {
                let lambda = j as f64 / 100.0;
                let op = interp_op(n, lambda);
                sup_interp = sup_interp.max(op.operator_norm_exact());
                sup_interp_inv = sup_interp_inv
                    .max(op.inverse().expect("inverse attached").operator_norm_exact());
            }
        }

        // centerline separation, sampled over pairs up to 4 apart; windows
        // further than two apart are separated by fresh coordinates alone
        let mut min_ratio = f64::INFINITY;
        let mut s = 0.0;
        while s <= 8.0 {
            let ps = path_point(s);
            let mut dt = 0.01;
            while dt <= 4.0 {
                let d = path_point(s + dt).dist(&ps);
                min_ratio = min_ratio.min(d / separation_lower_bound(dt));
                dt += 0.05;
            }
            s += 0.05;
        }

        // chord-ratio floor (dt <= 1) and far-pair floor (1 <= dt <= 6);
        // the telescoped centerline keeps unit mass on at most three
        // consecutive coordinates, so pairs further than six apart have
        // disjoint active windows and can only be farther
        let mut min_short = f64::INFINITY;
        let mut min_far = f64::INFINITY;
        let mut s = 0.0;
        while s <= t_max - 0.02 {
            let ps = path_point(s);
            let mut dt = 0.02;
            while dt <= 6.0 && s + dt <= t_max {
                let d = path_point(s + dt).dist(&ps);
                if dt <= 1.0 {
                    min_short = min_short.min(d / dt);
                } else {
                    min_far = min_far.min(d);
                }
                dt += 0.02;
            }
            s += 0.02;
        }

        let k_measured = 1.0f64
            .max(sup_beta)
            .max(sup_beta_inv)
            .max(sup_beta_prime)
            .max(sup_beta_inv_prime);

        MeasuredConstants {
            t_max,
            grid_step: step,
            sup_beta_norm: sup_beta,
            sup_beta_inv_norm: sup_beta_inv,
            sup_beta_prime_norm: sup_beta_prime,
            sup_beta_inv_prime_norm: sup_beta_inv_prime,
            sup_functional_norm: sup_f,
            sup_interp_norm: sup_interp,
            sup_interp_inv_norm: sup_interp_inv,
            sup_path_norm: sup_path,
            min_speed,
            max_speed,
            min_separation_ratio: min_ratio,
            min_short_ratio: min_short,
            min_far_separation: min_far,
            k_measured,
        }
    }

    /// The default measurement (t up to 40, step 0.01, windows up to 32),
    /// computed once and shared.
    pub fn shared() -> &'static MeasuredConstants {
        static SHARED: OnceLock<MeasuredConstants> = OnceLock::new();
        SHARED.get_or_init(|| MeasuredConstants::compute(40.0, 0.01, 32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(n: usize) -> SparseVec {
        SparseVec::basis_diff(n)
    }

    #[test]
    fn functional_pairings_table() {
        // every f_n pairs to 1 with both v_1 and v_n
        for n in 1..=12u32 {
            let f = functional(n);
            assert_eq!(f.dot(&v(1)), 1.0, "f_{n}(v_1)");
            assert_eq!(f.dot(&v(n as usize)), 1.0, "f_{n}(v_{n})");
        }
        // the handoff pairings that drive the interpolation determinant
        assert_eq!(functional(1).dot(&v(2)), -1.0);
        assert_eq!(functional(2).dot(&v(1)), 1.0);
        assert!((functional(2).dot(&v(3)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(functional(3).dot(&v(2)), -2.0);
        for n in 3..=10u32 {
            assert_eq!(functional(n).dot(&v(n as usize + 1)), 0.0, "f_n(v_(n+1))");
            assert_eq!(functional(n + 1).dot(&v(n as usize)), -1.0, "f_(n+1)(v_n)");
        }
    }

    #[test]
    fn interp_det_floor() {
        for j in 0..=50 {
            let lambda = j as f64 / 50.0;
            assert_eq!(interp_det(1, lambda), 1.0);
            for n in 2..=12 {
                let det = interp_det(n, lambda);
                let quad = (1.0 - lambda).powi(2) + lambda * lambda;
                assert!((det - quad).abs() < 1e-14, "n = {n}, lambda = {lambda}");
                assert!(det >= 0.5 - 1e-15);
            }
        }
    }

    #[test]
    fn shears_move_the_first_difference() {
        assert_eq!(shift_op(1).terms().len(), 0);
        for n in 1..=9u32 {
            let s = shift_op(n);
            assert!(s.apply(&v(1)).dist(&v(n as usize)) < 1e-15, "S_{n} v_1");
            assert!(s.terms().len() <= 1);
        }
    }

    #[test]
    fn interp_endpoints_are_the_shears() {
        for n in 1..=8u32 {
            assert_eq!(interp_op(n, 0.0), shift_op(n));
            assert_eq!(interp_op(n, 1.0), shift_op(n + 1));
        }
    }

    #[test]
    fn interp_moves_v1_convexly() {
        for n in 1..=8u32 {
            for j in 0..=10 {
                let lambda = j as f64 / 10.0;
                let want = v(n as usize)
                    .scale(1.0 - lambda)
                    .add_scaled(lambda, &v(n as usize + 1));
                let got = interp_op(n, lambda).apply(&v(1));
                assert!(got.dist(&want) < 1e-14, "n = {n}, lambda = {lambda}");
            }
        }
    }

    #[test]
    fn interp_term_budget() {
        for n in 1..=8u32 {
            for j in 0..=20 {
                let op = interp_op(n, j as f64 / 20.0);
                assert!(op.terms().len() <= 2);
                assert!(op.inverse().unwrap().terms().len() <= 2);
            }
        }
    }

    proptest! {
        #[test]
        fn interp_inverse_roundtrip(
            n in 1u32..=10,
            lambda in 0.0f64..=1.0,
            pairs in prop::collection::vec((0usize..14, -4.0f64..4.0), 1..6),
        ) {
            let op = interp_op(n, lambda);
            let x = SparseVec::from_pairs(pairs);
            let there = op.apply(&x);
            let back = op.apply_inverse(&there).unwrap();
            prop_assert!(back.dist(&x) <= 1e-12 * (1.0 + x.norm()),
                "roundtrip drift {}", back.dist(&x));
            // and the other composition order
            let forth = op.apply(&op.apply_inverse(&x).unwrap());
            prop_assert!(forth.dist(&x) <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn stated_norm_bounds_hold_with_room() {
        let mc = MeasuredConstants::compute(12.0, 0.02, 16);
        assert!(mc.sup_functional_norm <= 18.0);
        assert!(mc.sup_interp_norm <= 73.0);
        assert!(mc.sup_interp_inv_norm <= 577.0);
        // non-vacuous: the measured values are genuinely above 1
        assert!(mc.sup_functional_norm > 3.0);
        assert!(mc.sup_interp_norm > 1.5);
        assert!(mc.sup_interp_inv_norm > 1.5);
        // Woodbury correction functionals stay far below their ceiling
        for n in 1..=16u32 {
            for j in 0..=40 {
                let op = interp_op(n, j as f64 / 40.0);
                for (f, _) in op.inverse().unwrap().terms() {
                    assert!(f.norm() <= 144.0);
                }
            }
        }
    }

    #[test]
    fn beta_is_identity_early_and_plateaus_on_shears() {
        for t in [0.0, 0.2, 0.5] {
            assert_eq!(beta(t), interp_op(1, 0.0));
        }
        // plateau of window n: [n-1, n-1/2]
        for n in 2..=6u32 {
            let t = n as f64 - 1.0 + 0.2;
            assert_eq!(beta(t), shift_op(n));
            assert_eq!(beta_prime(t).terms().len(), 0);
            assert_eq!(beta_prime(t).id_coeff(), 0.0);
        }
    }

    #[test]
    fn beta_is_continuous_at_window_seams() {
        let probes: Vec<SparseVec> = (0..8).map(SparseVec::basis).collect();
        for k in 1..=5 {
            let t = k as f64;
            let before = beta(t - 1e-9);
            let after = beta(t);
            for p in &probes {
                assert!(
                    before.apply(p).dist(&after.apply(p)) < 1e-7,
                    "seam at t = {t}"
                );
            }
        }
    }

    fn op_fd_column(
        op_at: &dyn Fn(f64) -> RankPerturbOp,
        t: f64,
        x: &SparseVec,
        h: f64,
    ) -> SparseVec {
        let d = |h: f64| {
            op_at(t + h)
                .apply(x)
                .sub(&op_at(t - h).apply(x))
                .scale(1.0 / (2.0 * h))
        };
        d(h / 2.0).scale(4.0 / 3.0).add_scaled(-1.0 / 3.0, &d(h))
    }

    #[test]
    fn beta_prime_matches_finite_differences() {
        let probes = [
            SparseVec::basis(0),
            SparseVec::basis(3),
            SparseVec::from_pairs([(1, 0.5), (4, -1.0), (6, 2.0)]),
        ];
        for t in [0.6, 0.8, 1.7, 2.55, 3.9, 6.3, 7.75] {
            let bp = beta_prime(t);
            for x in &probes {
                let fd = op_fd_column(&beta, t, x, 1e-4);
                assert!(
                    fd.dist(&bp.apply(x)) < 1e-6 * (1.0 + fd.norm()),
                    "beta' mismatch at t = {t}"
                );
            }
        }
    }

    #[test]
    fn beta_inv_prime_matches_finite_differences() {
        let probes = [
            SparseVec::basis(2),
            SparseVec::from_pairs([(0, 1.0), (5, -0.5)]),
        ];
        for t in [0.7, 1.85, 2.6, 4.95, 5.66] {
            let bip = beta_inv_prime(t);
            for x in &probes {
                let fd = op_fd_column(&beta_inv, t, x, 1e-4);
                assert!(
                    fd.dist(&bip.apply(x)) < 1e-6 * (1.0 + fd.norm()),
                    "(beta^-1)' mismatch at t = {t}"
                );
            }
        }
    }

    #[test]
    fn centerline_starts_at_quarter_v1() {
        assert!(path_point(0.0).dist(&v(1).scale(0.25)) < 1e-15);
    }

    #[test]
    fn velocity_is_beta_of_v1() {
        let v1 = v(1);
        for k in 0..=400 {
            let t = 8.0 * k as f64 / 400.0;
            let via_beta = beta(t).apply(&v1);
            assert!(
                via_beta.dist(&path_velocity(t)) < 1e-12,
                "velocity mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn velocity_is_the_derivative_of_position() {
        for t in [0.3, 0.72, 1.4, 2.81, 3.33, 5.9, 7.08] {
            let d = |h: f64| {
                path_point(t + h)
                    .sub(&path_point(t - h))
                    .scale(1.0 / (2.0 * h))
            };
            let fd = d(5e-5).scale(4.0 / 3.0).add_scaled(-1.0 / 3.0, &d(1e-4));
            assert!(
                fd.dist(&path_velocity(t)) < 1e-6,
                "path derivative mismatch at t = {t}"
            );
        }
    }

    #[test]
    fn speed_window() {
        let mut min_speed = f64::INFINITY;
        let mut max_speed = 0.0f64;
        for k in 0..=2000 {
            let t = 10.0 * k as f64 / 2000.0;
            let s = path_velocity(t).norm();
            min_speed = min_speed.min(s);
            max_speed = max_speed.max(s);
        }
        let half_sqrt2 = 0.5f64.sqrt();
        assert!(min_speed >= half_sqrt2 - 1e-9, "min speed {min_speed}");
        assert!(min_speed <= half_sqrt2 + 0.02);
        assert!(max_speed <= 2.0f64.sqrt() + 1e-12);
    }

    #[test]
    fn centerline_length_grows_linearly() {
        // infinite twisting, infinite length: each unit of time adds at
        // least 1/sqrt(2) of arc length
        let mut len = 0.0;
        let mut prev = path_point(0.0);
        for k in 1..=3000 {
            let t = 30.0 * k as f64 / 3000.0;
            let p = path_point(t);
            len += p.dist(&prev);
            prev = p;
        }
        assert!(len >= 30.0 / 2.0f64.sqrt());
        // while the centerline itself stays bounded
        assert!(path_point(30.0).norm() < 2.0);
    }

    #[test]
    fn separation_floor_on_sampled_pairs() {
        let mut worst = f64::INFINITY;
        let mut s = 0.0;
        while s <= 8.0 {
            let ps = path_point(s);
            let mut dt = 0.01;
            while dt <= 4.0 {
                let ratio = path_point(s + dt).dist(&ps) / separation_lower_bound(dt);
                worst = worst.min(ratio);
                dt += 0.037;
            }
            s += 0.037;
        }
        assert!(worst >= 1.0, "separation ratio dropped to {worst}");
        // far-apart windows are separated by saturated fresh coordinates
        for (t, s) in [(20.3, 3.1), (33.0, 0.0), (17.5, 9.25)] {
            assert!(path_point(t).dist(&path_point(s)) >= 1.0 / 16.0);
        }
    }

    #[test]
    fn measured_constants_are_bounded_and_sane() {
        let mc = MeasuredConstants::compute(10.0, 0.025, 12);
        assert!(mc.sup_beta_norm <= 73.0 && mc.sup_beta_norm >= 1.0);
        assert!(mc.sup_beta_inv_norm <= 577.0 && mc.sup_beta_inv_norm >= 1.0);
        assert!(mc.k_measured < conservative_k_bound());
        assert!(mc.min_separation_ratio >= 1.0);
        assert!(mc.min_speed > 0.5 && mc.max_speed < 2.0);
        assert!(mc.sup_path_norm <= 6.0);
        assert!(mc.sup_beta_inv_prime_norm > 1.0, "derivative sup is not trivial");
        // short chords never crawl and far pairs never meet
        assert!(mc.min_short_ratio > 0.25, "short ratio {}", mc.min_short_ratio);
        assert!(mc.min_far_separation > 1.0 / 16.0, "far floor {}", mc.min_far_separation);
    }

    #[test]
    fn distant_window_pairs_stay_apart() {
        // beyond the measured dt <= 6 sweep, active windows are disjoint
        for (t, s) in [(9.0, 2.0), (17.0, 2.0), (32.0, 11.5), (38.7, 5.3)] {
            assert!(path_point(t).dist(&path_point(s)) >= 0.7, "pair ({t}, {s})");
        }
    }
}
