//! Runtime verification suites: the documented invariants of every
//! module re-checked end to end, one report line per check.
//!
//! Each suite name matches a module (`seq-space` through
//! `gradient-cone`) and re-measures that module's contracted bounds on
//! fresh seeded samples, so a report is evidence, not a cached claim.
//! The CLI `verify` subcommand is a thin wrapper over [`run_suite`] and
//! [`run_all`]. Details always carry the measured numbers; a failed
//! check states what was violated and by how much.

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gradient_cone::{split_blocks, BlockSum, GRADIENT_WINDOW};
use crate::iso_path::{
    beta, beta_inv, beta_inv_prime, beta_prime, interp_det, interp_op, path_velocity,
    MeasuredConstants,
};
use crate::negligibility::{DeletingDiffeo, PlanarBand, StarlikeBody};
use crate::rolle_bump::NonRolleBump;
use crate::seq_space::{RankPerturbOp, SparseVec};
use crate::smooth_kit::{
    alpha_ramp, alpha_ramp_deriv, blowup_cutoff, blowup_cutoff_deriv, cap_profile,
    cap_profile_deriv, mu, mu_deriv, partition_cutoff, partition_cutoff_deriv, smoothstep,
    smoothstep_deriv, support_cutoff, support_cutoff_deriv, theta, theta_deriv, unit_ramp,
    unit_ramp_deriv, zeta, zeta_deriv,
};
use crate::tube::{CylPoint, TubeChart};

/// Outcome of a single invariant check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// All checks of one suite, in declaration order.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Suite names accepted by [`run_suite`], in `run_all` order.
pub const SUITES: [&str; 7] = [
    "seq-space",
    "smooth-kit",
    "iso-path",
    "tube",
    "rolle-bump",
    "negligibility",
    "gradient-cone",
];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}`; expected one of seq-space, smooth-kit, iso-path, tube, rolle-bump, negligibility, gradient-cone")]
    UnknownSuite(String),
}

/// Runs one named suite with a deterministic seed.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport, VerifyError> {
    match name {
        "seq-space" => Ok(seq_space_suite(seed)),
        "smooth-kit" => Ok(smooth_kit_suite()),
        "iso-path" => Ok(iso_path_suite(seed)),
        "tube" => Ok(tube_suite(seed)),
        "rolle-bump" => Ok(rolle_bump_suite(seed)),
        "negligibility" => Ok(negligibility_suite(seed)),
        "gradient-cone" => Ok(gradient_cone_suite(seed)),
        other => Err(VerifyError::UnknownSuite(other.to_string())),
    }
}

/// Runs every suite in [`SUITES`] order.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .map(|name| run_suite(name, seed).expect("built-in suite names are valid"))
        .collect()
}

struct Checks {
    suite: &'static str,
    list: Vec<CheckResult>,
}

impl Checks {
    fn new(suite: &'static str) -> Self {
        Checks { suite, list: Vec::new() }
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.list.push(CheckResult { name: name.to_string(), passed, detail });
    }

    /// measured <= limit, detail reports both.
    fn ceiling(&mut self, name: &str, measured: f64, limit: f64) {
        self.push(
            name,
            measured <= limit,
            format!("measured {measured:.6e} against ceiling {limit:.6e}"),
        );
    }

    /// measured >= limit, detail reports both.
    fn floor(&mut self, name: &str, measured: f64, limit: f64) {
        self.push(
            name,
            measured >= limit,
            format!("measured {measured:.6e} against floor {limit:.6e}"),
        );
    }

    fn report(self) -> SuiteReport {
        SuiteReport { suite: self.suite.to_string(), checks: self.list }
    }
}

/// A short random vector: four coordinates below `dim`, coefficients in
/// `[-scale, scale)`.
fn random_vec(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> SparseVec {
    let mut pairs = Vec::new();
    for _ in 0..4 {
        let idx = rng.gen_range(0..dim);
        let coeff = rng.gen_range(-scale..scale);
        pairs.push((idx, coeff));
    }
    SparseVec::from_pairs(pairs)
}

/// A random cross-section point of `chart` at `frac` of the cylinder
/// radius. Retries until the hyperplane projection is nonzero.
fn random_h(chart: &TubeChart, rng: &mut ChaCha8Rng, frac: f64) -> SparseVec {
    loop {
        let raw = random_vec(rng, 16, 1.0);
        let proj = chart.project_h(&raw);
        if proj.norm() > 0.0 {
            return proj.scale(frac * chart.epsilon() / proj.norm());
        }
    }
}

fn seq_space_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("seq-space");

    // biorthogonality is exact: <e_n, e_k> is 1.0 or 0.0, no tolerance
    let mut exact = true;
    for n in 0..=64usize {
        for k in 0..=64usize {
            let want = if n == k { 1.0 } else { 0.0 };
            if SparseVec::basis(n).dot(&SparseVec::basis(k)) != want {
                exact = false;
            }
        }
    }
    c.push(
        "biorthogonality",
        exact,
        format!("pairings over indices up to 64 all exact: {exact}"),
    );

    // every stored (op, inverse) pair: forward of backward is the identity
    let mut ops: Vec<RankPerturbOp> = vec![
        RankPerturbOp::identity().with_inverse(RankPerturbOp::identity()),
        RankPerturbOp::new(1.0, vec![(SparseVec::basis(0), SparseVec::basis(0))]).with_inverse(
            RankPerturbOp::new(1.0, vec![(SparseVec::basis(0), SparseVec::basis(0).scale(-0.5))]),
        ),
    ];
    for n in [1u32, 2, 3, 5, 8, 13, 21, 32] {
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            ops.push(interp_op(n, lambda));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e9);
    let mut worst = 0.0f64;
    for op in &ops {
        let inv = op.inverse().expect("every op in this sweep carries its inverse");
        for _ in 0..100 {
            let x = random_vec(&mut rng, 40, 3.0);
            let back = op.apply(&inv.apply(&x));
            worst = worst.max(back.dist(&x) / (1.0 + x.norm()));
        }
    }
    c.ceiling("inverse-roundtrip", worst, 1e-10);

    // linearity of apply, relative to the combined output size
    let mut worst_lin = 0.0f64;
    for op in ops.iter().step_by(3) {
        for _ in 0..100 {
            let x = random_vec(&mut rng, 40, 3.0);
            let y = random_vec(&mut rng, 40, 3.0);
            let a = rng.gen_range(-2.0..2.0);
            let b = rng.gen_range(-2.0..2.0);
            let lhs = op.apply(&x.scale(a).add(&y.scale(b)));
            let rhs = op.apply(&x).scale(a).add(&op.apply(&y).scale(b));
            worst_lin = worst_lin.max(lhs.dist(&rhs) / (1.0 + rhs.norm()));
        }
    }
    c.ceiling("apply-linearity", worst_lin, 1e-12);

    c.report()
}

fn smooth_kit_suite() -> SuiteReport {
    let mut c = Checks::new("smooth-kit");

    // derivative ceiling for the window profile on a dense grid
    let mut sup_slope = 0.0f64;
    for k in 0..=10_000 {
        let t = -1.0 + 3.0 * k as f64 / 10_000.0;
        sup_slope = sup_slope.max(theta_deriv(t).abs());
    }
    c.ceiling("theta-slope", sup_slope, 4.0);

    // complementary symmetry across the overlap zone
    let mut worst_sym = 0.0f64;
    for k in 0..=2000 {
        let t = 0.5 + 0.5 * k as f64 / 2000.0;
        worst_sym = worst_sym.max((theta(t) - (1.0 - theta(t - 1.0))).abs());
    }
    c.ceiling("theta-overlap-symmetry", worst_sym, 1e-12);

    // centered finite differences against every analytic derivative on
    // each gadget's active interval
    type Gadget = (&'static str, fn(f64) -> f64, fn(f64) -> f64, f64, f64);
    let gadgets: [Gadget; 10] = [
        ("theta", theta, theta_deriv, -0.7, 1.2),
        ("mu", mu, mu_deriv, 0.3, 4.0),
        ("zeta", zeta, zeta_deriv, -0.2, 1.1),
        ("alpha-ramp", alpha_ramp, alpha_ramp_deriv, -0.5, 2.0),
        ("blowup-cutoff", blowup_cutoff, blowup_cutoff_deriv, 0.65, 1.3),
        ("support-cutoff", support_cutoff, support_cutoff_deriv, -1.2, 1.2),
        ("partition-cutoff", partition_cutoff, partition_cutoff_deriv, -1.2, 1.2),
        ("unit-ramp", unit_ramp, unit_ramp_deriv, -0.2, 1.2),
        ("smoothstep", smoothstep, smoothstep_deriv, -0.2, 1.2),
        ("cap-profile", cap_profile, cap_profile_deriv, -0.2, 0.95),
    ];
    let h = 1e-5;
    let mut worst_fd = 0.0f64;
    let mut worst_name = "";
    for (name, f, df, lo, hi) in gadgets {
        for k in 0..=1000 {
            let t = lo + (hi - lo) * k as f64 / 1000.0;
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            let gap = (fd - df(t)).abs();
            if gap > worst_fd {
                worst_fd = gap;
                worst_name = name;
            }
        }
    }
    c.push(
        "finite-difference-consistency",
        worst_fd <= 1e-6,
        format!("worst gap {worst_fd:.6e} (at {worst_name}) against ceiling 1e-6"),
    );

    // monotone clocks: mu and alpha strictly climb on their active
    // intervals, zeta strictly climbs on its ramp and never dips
    let mut mu_ok = true;
    let mut prev = 0.0f64;
    for k in 1..=4000 {
        let t = 1.0 + 9.0 * k as f64 / 4000.0;
        let v = mu(t);
        if v <= prev || !(v < 0.5) {
            mu_ok = false;
        }
        prev = v;
    }
    let mut alpha_ok = true;
    let mut prev = 0.0f64;
    for k in 1..=1000 {
        let t = 0.02 + 2.98 * k as f64 / 1000.0;
        let v = alpha_ramp(t);
        if v <= prev || alpha_ramp_deriv(t) <= 0.0 {
            alpha_ok = false;
        }
        prev = v;
    }
    // the strict window stops at 0.72: past it the ramp sits within one
    // ulp of its plateau and doubles cannot resolve the increase
    let mut zeta_ok = true;
    let mut prev = zeta(0.26);
    for k in 1..=500 {
        let t = 0.26 + 0.46 * k as f64 / 500.0;
        let v = zeta(t);
        if v <= prev {
            zeta_ok = false;
        }
        prev = v;
    }
    for k in 0..=1000 {
        let t = -0.2 + 5.2 * k as f64 / 1000.0;
        if zeta_deriv(t) < 0.0 {
            zeta_ok = false;
        }
    }
    c.push(
        "clock-monotonicity",
        mu_ok && alpha_ok && zeta_ok,
        format!("strictly increasing on their ramps: mu {mu_ok}, alpha {alpha_ok}, zeta {zeta_ok}"),
    );

    c.report()
}

fn iso_path_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("iso-path");

    // full interpolation sweep: windows up to 32, a 101-point parameter
    // grid, determinant floor and all four norm fences
    let mut min_det = f64::INFINITY;
    let mut max_fwd = 0.0f64;
    let mut min_fwd = f64::INFINITY;
    let mut max_inv = 0.0f64;
    let mut min_inv = f64::INFINITY;
    let mut max_corr = 0.0f64;
    for n in 1..=32u32 {
        for j in 0..=100 {
            let lambda = j as f64 / 100.0;
            min_det = min_det.min(interp_det(n, lambda));
            let op = interp_op(n, lambda);
            let fwd = op.operator_norm_exact();
            max_fwd = max_fwd.max(fwd);
            min_fwd = min_fwd.min(fwd);
            let inv = op.inverse().expect("interpolants carry their inverse");
            let inv_norm = inv.operator_norm_exact();
            max_inv = max_inv.max(inv_norm);
            min_inv = min_inv.min(inv_norm);
            for (f, _) in inv.terms() {
                max_corr = max_corr.max(f.norm());
            }
        }
    }
    c.floor("interpolation-determinant", min_det, 0.5);
    c.push(
        "interpolant-norms",
        (1.0 - 1e-9..=73.0).contains(&max_fwd) && min_fwd >= 1.0 - 1e-9,
        format!("forward norms span [{min_fwd:.6e}, {max_fwd:.6e}], fence [1, 73]"),
    );
    c.push(
        "interpolant-inverse-norms",
        (1.0 - 1e-9..=577.0).contains(&max_inv) && min_inv >= 1.0 - 1e-9,
        format!("inverse norms span [{min_inv:.6e}, {max_inv:.6e}], fence [1, 577]"),
    );
    c.ceiling("correction-functionals", max_corr, 144.0);

    // measured path constants against the universal fences
    let mc = MeasuredConstants::shared();
    c.ceiling("path-derivative-bound", mc.sup_beta_prime_norm, 584.0);
    c.ceiling(
        "inverse-path-derivative-bound",
        mc.sup_beta_inv_prime_norm,
        577.0 * 577.0 * 584.0,
    );

    // the centerline velocity is the path operator applied to the seed
    let v1 = path_velocity(0.0);
    let speed = v1.norm();
    let mut worst_vel = 0.0f64;
    let mut t = 0.0;
    while t <= 20.0 {
        let want = beta(t).apply(&v1);
        worst_vel = worst_vel.max(path_velocity(t).dist(&want) / (1.0 + want.norm()));
        t += 0.05;
    }
    c.push(
        "velocity-identity",
        worst_vel <= 1e-12 && (0.25..=2.0).contains(&speed)
            && (speed - std::f64::consts::SQRT_2).abs() <= 1e-12,
        format!("worst relative gap {worst_vel:.6e}, seed speed {speed:.12}"),
    );

    // centered finite differences of the path operators, entrywise on
    // random probe vectors
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x150);
    let h = 1e-5;
    let mut worst_fd = 0.0f64;
    for _ in 0..40 {
        let t = rng.gen_range(0.1..19.9);
        let x = random_vec(&mut rng, 24, 1.0);
        let fd_fwd = beta(t + h).apply(&x).sub(&beta(t - h).apply(&x)).scale(1.0 / (2.0 * h));
        let gap_fwd = fd_fwd.sub(&beta_prime(t).apply(&x));
        let fd_inv =
            beta_inv(t + h).apply(&x).sub(&beta_inv(t - h).apply(&x)).scale(1.0 / (2.0 * h));
        let gap_inv = fd_inv.sub(&beta_inv_prime(t).apply(&x));
        for (_, coeff) in gap_fwd.iter().chain(gap_inv.iter()) {
            worst_fd = worst_fd.max(coeff.abs());
        }
    }
    c.ceiling("path-operator-finite-differences", worst_fd, 1e-5);

    // scaled charts keep the centerline inside the closed unit ball
    let chart = TubeChart::desk_scaled();
    let mut sup_center = 0.0f64;
    let mut t = 0.0;
    while t <= 40.0 {
        sup_center = sup_center.max(chart.center(t).norm());
        t += 0.05;
    }
    c.ceiling("scaled-centerline-in-ball", sup_center, 1.0);

    c.report()
}

fn tube_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("tube");
    let chart = TubeChart::desk_scaled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70be);

    // distinct cylinder points never collide; images that coincide to
    // tolerance force the fiber-time wedge
    let wedge = 2.0 * chart.k() * chart.k() * chart.epsilon();
    let mut min_gap = f64::INFINITY;
    let mut ok = true;
    let mut pairs = 0;
    while pairs < 1000 {
        let fa = rng.gen_range(0.0..0.97);
        let fb = rng.gen_range(0.0..0.97);
        let ta = rng.gen_range(0.05..15.0);
        let tb = rng.gen_range(0.05..15.0);
        let a = CylPoint::new(random_h(&chart, &mut rng, fa), ta);
        let b = CylPoint::new(random_h(&chart, &mut rng, fb), tb);
        if a.x.dist(&b.x).max((a.t - b.t).abs()) < 1e-6 {
            continue;
        }
        let ya = chart.pi(&a).expect("sample is inside the cylinder");
        let yb = chart.pi(&b).expect("sample is inside the cylinder");
        let gap = ya.dist(&yb);
        if gap <= chart.f_tolerance() {
            if (a.t - b.t).abs() > wedge {
                ok = false;
            }
        } else if gap <= 0.0 {
            ok = false;
        }
        min_gap = min_gap.min(gap);
        pairs += 1;
    }
    c.push(
        "injectivity-wedge",
        ok && min_gap > 0.0,
        format!("1000 distinct pairs, smallest image gap {min_gap:.6e}, wedge {wedge:.6e}"),
    );

    // sampled derivative norms stay under the recorded bound
    let (m_fwd, m_inv) = chart.recorded_derivative_bound(15.0);
    let mut worst_fwd = 0.0f64;
    let mut worst_inv = 0.0f64;
    for _ in 0..300 {
        let frac = rng.gen_range(0.0..0.9);
        let t = rng.gen_range(0.1..14.0);
        let at = CylPoint::new(random_h(&chart, &mut rng, frac), t);
        let hf: f64 = rng.gen_range(0.0..1.0);
        let hdir = random_h(&chart, &mut rng, hf.max(1e-3));
        let s = rng.gen_range(-1.0..1.0);
        let in_norm = (hdir.norm_sq() + s * s).sqrt();
        if in_norm == 0.0 {
            continue;
        }
        let img = chart.d_pi(&at, &hdir, s);
        worst_fwd = worst_fwd.max(img.norm() / in_norm);
        let k = random_vec(&mut rng, 16, 1.0);
        if k.norm() == 0.0 {
            continue;
        }
        if let Ok((back_x, back_t)) = chart.d_pi_inverse(&at, &k) {
            let out = (back_x.norm_sq() + back_t * back_t).sqrt();
            worst_inv = worst_inv.max(out / k.norm());
        }
    }
    c.push(
        "derivative-bounds",
        worst_fwd <= m_fwd && worst_inv <= m_inv,
        format!(
            "sampled |Dpi| {worst_fwd:.6e} against {m_fwd:.6e}, |Dpi^-1| {worst_inv:.6e} against {m_inv:.6e}"
        ),
    );

    // the final Newton bracket lives inside the duplicate-root wedge,
    // and there the fiber equation is strictly decreasing with the
    // slope ceiling at the root itself
    let slope_ceiling = -1.0 / (2.0 * chart.k());
    let mut strictly_decreasing = true;
    let mut max_root_slope = f64::NEG_INFINITY;
    for _ in 0..50 {
        let frac = rng.gen_range(0.0..0.9);
        let t = rng.gen_range(1.0..12.0);
        let x = random_h(&chart, &mut rng, frac);
        let y = chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder");
        let mut prev = f64::INFINITY;
        for j in -16..=16 {
            let r = t + j as f64 * wedge / 16.0;
            if r <= 0.0 {
                continue;
            }
            let f = chart.f_val(&y, r);
            if f >= prev {
                strictly_decreasing = false;
            }
            prev = f;
        }
        max_root_slope = max_root_slope.max(chart.f_deriv(&y, t));
    }
    c.push(
        "fiber-equation-monotone",
        strictly_decreasing && max_root_slope <= slope_ceiling,
        format!(
            "wedge grids strictly decreasing: {strictly_decreasing}, root slope {max_root_slope:.6e} against {slope_ceiling:.6e}"
        ),
    );

    c.report()
}

fn rolle_bump_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("rolle-bump");
    let bump = NonRolleBump::standard();
    let chart = bump.chart().clone();

    // the support minimum is positive at every depth, never rises as
    // the nested sample prefix grows, and keeps falling end to end: the
    // infimum is 0 but no sampled point ever reaches it
    let m100 = bump.support_min_gradient(100, 15.0, seed);
    let m1000 = bump.support_min_gradient(1000, 15.0, seed);
    let m10000 = bump.support_min_gradient(10_000, 15.0, seed);
    c.push(
        "gradient-never-vanishes",
        m10000 > 0.0 && m100 >= m1000 && m1000 >= m10000 && m100 > m10000,
        format!("support minima {m100:.6e} >= {m1000:.6e} >= {m10000:.6e} > 0, strict overall"),
    );

    // wherever the bump is alive, the point inverts into the open
    // cylinder core and sits inside the unit ball
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0);
    let mut contained = true;
    let mut alive = 0;
    for k in 0..500 {
        let y = if k % 2 == 0 {
            let frac = rng.gen_range(0.0..0.98);
            let t = rng.gen_range(1.05..14.0);
            let x = random_h(&chart, &mut rng, frac * 0.49);
            chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder")
        } else {
            random_vec(&mut rng, 12, 0.3)
        };
        let (v, _) = bump.f_eval(&y);
        if v != 0.0 {
            alive += 1;
            let inside = match chart.membership(&y) {
                crate::tube::Membership::Inside(pt) => {
                    pt.x.norm() < bump.phi().radius() && y.norm() <= 1.0
                }
                _ => false,
            };
            if !inside {
                contained = false;
            }
        }
    }
    c.push(
        "support-containment",
        contained && alive > 100,
        format!("{alive} live samples of 500, every one inside the tube core and unit ball"),
    );

    // sampled difference quotients stay under the product of the
    // cylinder Lipschitz bound and the recorded inverse derivative bound
    let (_, m_inv) = chart.recorded_derivative_bound(12.0);
    let lip_g = (2.0 * 1.5 / bump.phi().radius()) * 0.5 + 0.28;
    let bound = lip_g * m_inv;
    let mut max_q = 0.0f64;
    for _ in 0..200 {
        let frac = rng.gen_range(0.0..0.9);
        let t = rng.gen_range(1.05..10.0);
        let x = random_h(&chart, &mut rng, frac * 0.49);
        let y1 = chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder");
        let step = rng.gen_range(1e-7..1e-4);
        let dir = SparseVec::basis(rng.gen_range(0..10));
        let y2 = y1.add_scaled(step, &dir);
        let (v1, _) = bump.f_eval(&y1);
        let (v2, _) = bump.f_eval(&y2);
        if y1.dist(&y2) > 0.0 {
            max_q = max_q.max((v1 - v2).abs() / y1.dist(&y2));
        }
    }
    c.push(
        "lipschitz-quotients",
        max_q <= bound,
        format!("sampled quotient {max_q:.6e} against Lip(g) x M = {bound:.6e}"),
    );

    // analytic gradient against centered differences; the wide chart
    // leaves transverse room for the stencil arms
    let wide = NonRolleBump::new(TubeChart::wide_fd());
    let wchart = wide.chart().clone();
    let h = 1e-5;
    let mut worst_fd = 0.0f64;
    let mut checked = 0;
    while checked < 500 {
        let frac = rng.gen_range(0.05..0.9);
        let t = rng.gen_range(3.0..9.0);
        let x = random_h(&wchart, &mut rng, frac * 0.49);
        let pt = CylPoint::new(x, t);
        let y = wchart.pi(&pt).expect("sample is inside the cylinder");
        let (_, grad) = wide.f_eval(&y);
        let dir = if checked % 3 == 0 {
            let fiber = wchart.d_pi(&pt, &SparseVec::zero(), 1.0);
            fiber.scale(1.0 / fiber.norm())
        } else {
            let raw = random_vec(&mut rng, 12, 1.0);
            if raw.norm() == 0.0 {
                continue;
            }
            raw.scale(1.0 / raw.norm())
        };
        let f_plus = wide.f_eval(&y.add_scaled(h, &dir)).0;
        let f_minus = wide.f_eval(&y.add_scaled(-h, &dir)).0;
        let fd = (f_plus - f_minus) / (2.0 * h);
        worst_fd = worst_fd.max((fd - grad.dot(&dir)).abs());
        checked += 1;
    }
    c.ceiling("gradient-finite-differences", worst_fd, 1e-5);

    c.report()
}

fn negligibility_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("negligibility");
    let del = DeletingDiffeo::desk_unit();
    let chart = del.chart().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde1);

    // identity off the pressed region, injective on it
    let mut identity_ok = true;
    for k in 0..1000 {
        let y = match k % 3 {
            // far from the tube entirely
            0 => random_vec(&mut rng, 10, 1.0),
            // inside the tube below the band
            1 => {
                let frac = rng.gen_range(0.0..0.9);
                let t = rng.gen_range(0.05..0.9);
                let x = random_h(&chart, &mut rng, frac);
                chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder")
            }
            // at band heights but outside the shifted gauge
            _ => {
                let frac = rng.gen_range(0.52..0.9);
                let t = rng.gen_range(2.0..12.0);
                let x = random_h(&chart, &mut rng, frac);
                if del.shifted_psi(&x, t) < 1.0 {
                    continue;
                }
                chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder")
            }
        };
        if del.apply(&y).dist(&y) != 0.0 {
            identity_ok = false;
        }
    }
    let mut injective = true;
    let mut images: Vec<SparseVec> = Vec::new();
    for _ in 0..120 {
        let frac = rng.gen_range(0.0..0.45);
        let t = rng.gen_range(1.0..10.0);
        let x = random_h(&chart, &mut rng, frac);
        let y = chart.pi(&CylPoint::new(x, t)).expect("sample is inside the cylinder");
        images.push(del.apply(&y));
    }
    for i in 0..images.len() {
        for j in 0..i {
            if images[i].dist(&images[j]) == 0.0 {
                injective = false;
            }
        }
    }
    c.push(
        "identity-and-injectivity",
        identity_ok && injective,
        format!(
            "identity off the pressed region: {identity_ok}, pairwise distinct pressed images: {injective}"
        ),
    );

    // gauges are positively homogeneous, in the plane and in the space
    let band = PlanarBand::new(0.5).expect("band width 1/2 is admissible");
    let body = StarlikeBody::unit_ball();
    let mut worst_hom = 0.0f64;
    for _ in 0..500 {
        let x = random_vec(&mut rng, 12, 2.0);
        let r = rng.gen_range(1e-3..50.0);
        let gap = (body.gauge(&x.scale(r)) - r * body.gauge(&x)).abs();
        worst_hom = worst_hom.max(gap / (1.0 + r * body.gauge(&x)));
        let s = rng.gen_range(-2.0..2.0);
        let t = rng.gen_range(-2.0..3.0);
        let gap2 = (band.gauge(r * s, r * t) - r * band.gauge(s, t)).abs();
        worst_hom = worst_hom.max(gap2 / (1.0 + r * band.gauge(s, t).abs()));
    }
    c.ceiling("gauge-homogeneity", worst_hom, 1e-10);

    // the cylinder press moves fiber time strictly monotonically
    let mut monotone = true;
    for _ in 0..40 {
        let x = random_vec(&mut rng, 8, 0.1);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=80 {
            let t = -2.0 + 8.0 * k as f64 / 80.0;
            let (_, u) = band.h_map(&x, t);
            if u <= prev {
                monotone = false;
            }
            prev = u;
        }
    }
    c.push(
        "press-fiber-monotone",
        monotone,
        format!("pressed fiber time strictly increasing along every sampled fiber: {monotone}"),
    );

    // the two branch formulas agree where they overlap, in value and in
    // directional slope
    let mut worst_value = 0.0f64;
    for _ in 0..150 {
        let frac = rng.gen_range(0.0..0.4);
        let x = random_h(&chart, &mut rng, frac);
        let t = 1.0 + rng.gen_range(-0.04..0.04);
        let y = chart
            .pi(&CylPoint::new(x, t))
            .expect("seam samples stay inside the cylinder");
        let pressed = del
            .apply_pressed_branch(&y)
            .expect("seam samples sit inside the pressed branch domain");
        worst_value = worst_value.max(pressed.dist(&del.apply(&y)));
    }
    c.ceiling("seam-value-agreement", worst_value, 1e-7);

    let h = 1e-8;
    let mut worst_jac = 0.0f64;
    for _ in 0..30 {
        let frac = rng.gen_range(0.0..0.35);
        let x = random_h(&chart, &mut rng, frac);
        let seam = CylPoint::new(x.clone(), 1.0);
        let fiber = chart.d_pi(&seam, &SparseVec::zero(), 1.0);
        let mut dirs = vec![fiber.scale(1.0 / fiber.norm())];
        for _ in 0..2 {
            let raw = random_vec(&mut rng, 8, 1.0);
            if raw.norm() > 0.0 {
                dirs.push(raw.scale(1.0 / raw.norm()));
            }
        }
        for dir in &dirs {
            let jac = |t: f64| {
                let y = chart
                    .pi(&CylPoint::new(x.clone(), t))
                    .expect("seam samples stay inside the cylinder");
                let plus = del.apply(&y.add_scaled(h, dir));
                let minus = del.apply(&y.add_scaled(-h, dir));
                plus.sub(&minus).scale(1.0 / (2.0 * h))
            };
            worst_jac = worst_jac.max(jac(1.0 + 0.03).dist(&jac(1.0 - 0.03)));
        }
    }
    c.ceiling("seam-jacobian-agreement", worst_jac, 1e-4);

    c.report()
}

fn gradient_cone_suite(seed: u64) -> SuiteReport {
    let mut c = Checks::new("gradient-cone");
    let sum = BlockSum::standard();
    let u = sum.building_block();
    let eps = u.epsilon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0e);

    // the building block stays pinched between the norm parabolas, is
    // exactly the shifted parabola outside the core, and never has a
    // flat spot
    let mut sandwich = true;
    let mut shell_exact = true;
    let mut live_grad = true;
    for k in 0..1000 {
        let shell = match k % 4 {
            0 => Some(eps / 2.0),
            1 => Some(eps),
            2 => Some(2.0 * eps),
            _ => None,
        };
        let mut x = random_vec(&mut rng, 24, 1.0);
        if x.norm() == 0.0 {
            x = SparseVec::basis(k % 24);
        }
        if let Some(r) = shell {
            x = x.scale(r / x.norm());
        } else {
            let r = rng.gen_range(0.0..3.0 * eps);
            x = x.scale(r / x.norm());
        }
        let (v, g) = u.eval(&x);
        let n2 = x.norm_sq();
        if !(v > 0.0 && v >= n2 && v <= 2.0 * eps * eps + n2) {
            sandwich = false;
        }
        if x.norm() >= eps && v != eps * eps + n2 {
            shell_exact = false;
        }
        if g.norm() == 0.0 && x.norm() > 0.0 {
            live_grad = false;
        }
    }
    let (v0, g0) = u.eval(&SparseVec::zero());
    if !(v0 > 0.0 && v0 <= 2.0 * eps * eps) || g0.norm() == 0.0 {
        sandwich = false;
        live_grad = false;
    }
    c.push(
        "building-block-envelope",
        sandwich && shell_exact && live_grad,
        format!(
            "norm sandwich: {sandwich}, exact beyond the core shell: {shell_exact}, gradient alive: {live_grad}"
        ),
    );

    // blockwise Lipschitz domination: the sum's gradient moves no
    // faster than the worst building-block ratio along the same pairs
    let mut worst_ratio = 0.0f64;
    let mut worst_block = 0.0f64;
    let mut dominated = true;
    for _ in 0..120 {
        let x = random_vec(&mut rng, 24, 0.6);
        let y = x.add(&random_vec(&mut rng, 24, 0.05));
        let d = x.dist(&y);
        if d == 0.0 {
            continue;
        }
        let n_top = split_blocks(&x)
            .iter()
            .chain(split_blocks(&y).iter())
            .map(|(n, _)| *n)
            .max()
            .unwrap_or(1)
            + GRADIENT_WINDOW;
        let mut diff_sq = 0.0f64;
        let mut pair_block = 0.0f64;
        for n in 1..=n_top {
            diff_sq += sum.gradient_block(&x, n).dist(&sum.gradient_block(&y, n)).powi(2);
            let scale = (2.0f64).powi(n as i32);
            let xa = split_block_arg(&x, n, scale);
            let ya = split_block_arg(&y, n, scale);
            let da = xa.dist(&ya);
            if da > 0.0 {
                let (_, gxa) = u.eval(&xa);
                let (_, gya) = u.eval(&ya);
                pair_block = pair_block.max(gxa.dist(&gya) / da);
            }
        }
        let ratio = diff_sq.sqrt() / d;
        worst_ratio = worst_ratio.max(ratio);
        worst_block = worst_block.max(pair_block);
        if ratio > pair_block * (1.0 + 1e-9) + 1e-15 {
            dominated = false;
        }
    }
    c.push(
        "blockwise-lipschitz-domination",
        dominated,
        format!(
            "sum gradient ratio up to {worst_ratio:.6e}, building-block ratio up to {worst_block:.6e}"
        ),
    );

    // the square root's difference quotients obey the slope budget
    let m_hat = worst_block.max(2.0);
    let psi_bound = m_hat / 2.0 + (3.0f64.sqrt() / (2.0 * eps)) * sum.gradient_norm_at_zero();
    let mut worst_psi = 0.0f64;
    for _ in 0..300 {
        let x = random_vec(&mut rng, 24, 0.8);
        let y = x.add(&random_vec(&mut rng, 24, 0.1));
        let d = x.dist(&y);
        if d == 0.0 {
            continue;
        }
        let (px, _) = sum.sqrt_eval(&x);
        let (py, _) = sum.sqrt_eval(&y);
        worst_psi = worst_psi.max((px - py).abs() / d);
    }
    c.ceiling("sqrt-slope-budget", worst_psi, psi_bound * 1.05);

    // closed tail formula against brute-force partial sums
    let u0 = sum.block_value_at_zero();
    let mut worst_tail = 0.0f64;
    for n_last in [0u32, 1, 2, 5, 11] {
        let closed = u0 * 0.25f64.powi(n_last as i32) / 3.0;
        let mut brute = 0.0f64;
        for n in n_last + 1..=60 {
            brute += 0.25f64.powi(n as i32) * u0;
        }
        worst_tail = worst_tail.max((closed - brute).abs());
    }
    c.ceiling("tail-closed-form", worst_tail, 1e-12);

    c.report()
}

/// The block-`n` slice of `x` mapped back to the building block's own
/// argument: coordinates re-indexed to the block layout and scaled up.
fn split_block_arg(x: &SparseVec, n: u32, scale: f64) -> SparseVec {
    for (bn, slice) in split_blocks(x) {
        if bn == n {
            return slice.scale(scale);
        }
    }
    SparseVec::zero()
}
