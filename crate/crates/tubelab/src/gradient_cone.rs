//! Smooth norm-like functionals whose gradients stay clear of prescribed
//! directions.
//!
//! The coordinate space is split into infinitely many infinite blocks by
//! [`block_of`]. On each block lives a rescaled copy of the building block
//! `U(x) = eps^2 + |phi_eps(x)|^2`, where `phi_eps` is an origin-deleting
//! diffeomorphism squeezed to the ball of radius `eps`; since `phi_eps`
//! never returns 0 and is a diffeomorphism, `U` has no critical point at
//! all. [`BlockSum`] adds the copies up: `f(x) = sum_n 4^{-n} U(2^n x_n)`
//! converges with an exactly summable tail, squeezes `max{eps^2/3,
//! |x|^2} <= f(x) <= (2/3) eps^2 + |x|^2`, and every block of its
//! gradient is nonzero at every point. Its square root approximates the
//! norm uniformly within `(2/sqrt 3) eps` while keeping a nonvanishing
//! gradient, and composing with a cutoff gives a bump with the same
//! property on the interior of its support; [`ConeCertificate`] records
//! the blockwise gradient norms that witness it.
//!
//! [`AvoidSubspaceBump`] and [`AvoidTwoFactorsBump`] produce bumps whose
//! gradients at all points of nonzero value stay outside the span of
//! finitely many prescribed directions (respectively outside two
//! complementary coordinate duals), by multiplying a gradient-never-dies
//! bump on one factor with a plain cutoff (or a second such bump) on the
//! other.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::negligibility::OriginDeleter;
use crate::rolle_bump::NonRolleBump;
use crate::seq_space::SparseVec;
use crate::smooth_kit::{smoothstep, smoothstep_deriv};
use crate::tube::CylPoint;

#[derive(Debug, Error)]
pub enum GradientConeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Block number (1-based) and within-block position of a coordinate
/// index: index `k` belongs to the block named by the lowest set bit of
/// `k + 1`, so block `n` owns the indices congruent to `2^{n-1} - 1`
/// modulo `2^n`. Every block is infinite and both directions cost a few
/// bit operations.
pub fn block_of(index: usize) -> (u32, usize) {
    let m = index + 1;
    let n = m.trailing_zeros() + 1;
    (n, m >> n)
}

/// Inverse of [`block_of`]: the coordinate index of position `within`
/// inside block `block`. Panics when the result would overflow `usize`
/// (blocks past 60 have no representable indices on 64-bit targets at
/// positions this library samples).
pub fn index_of(block: u32, within: usize) -> usize {
    assert!(block >= 1 && block <= 60, "block number out of range");
    (1usize << (block - 1)) * (2 * within + 1) - 1
}

/// The nonzero blocks of a vector, each compressed to its within-block
/// indexing, sorted by block number.
pub fn split_blocks(x: &SparseVec) -> Vec<(u32, SparseVec)> {
    let mut grouped: BTreeMap<u32, Vec<(usize, f64)>> = BTreeMap::new();
    for (k, v) in x.iter() {
        let (n, j) = block_of(k);
        grouped.entry(n).or_default().push((j, v));
    }
    grouped
        .into_iter()
        .map(|(n, pairs)| (n, SparseVec::from_pairs(pairs)))
        .collect()
}

fn scatter_block(block: u32, g: &SparseVec, out: &mut Vec<(usize, f64)>) {
    for (j, v) in g.iter() {
        out.push((index_of(block, j), v));
    }
}

/// The building block `U(x) = eps^2 + |phi_eps(x)|^2` with `phi_eps(x) =
/// eps phi(x / eps)` for an origin-deleting diffeomorphism `phi` that is
/// the identity outside the unit ball. `U` is smooth, everywhere at
/// least `eps^2`, equal to `eps^2 + |x|^2` wherever `|x| >= eps` (in
/// fact already past `eps` times the deleter's nontrivial radius, where
/// the identity branch makes the formula exact), and its gradient never
/// vanishes: `U'(x) = 2 eps Dphi(z)^T phi(z)` at `z = x / eps`, a
/// composition of an invertible operator with a vector that is never 0.
pub struct BlockFunctionalU {
    epsilon: f64,
    phi: OriginDeleter,
    identity_cut: f64,
}

impl BlockFunctionalU {
    pub fn new(epsilon: f64) -> Result<Self, GradientConeError> {
        Self::with_phi(epsilon, OriginDeleter::new())
    }

    pub fn with_phi(epsilon: f64, phi: OriginDeleter) -> Result<Self, GradientConeError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(GradientConeError::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if !(phi.nontrivial_radius() < 1.0) {
            return Err(GradientConeError::InvalidArgument(
                "the deleter must be the identity outside the unit ball".into(),
            ));
        }
        let identity_cut = epsilon * phi.nontrivial_radius();
        Ok(BlockFunctionalU { epsilon, phi, identity_cut })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn deleter(&self) -> &OriginDeleter {
        &self.phi
    }

    pub fn value(&self, x: &SparseVec) -> f64 {
        self.eval(x).0
    }

    /// Value and gradient. The `eps` scalings cancel in the chain rule:
    /// `U'(x) = 2 eps Dphi(x/eps)^T phi(x/eps)`, which the identity
    /// branch collapses to exactly `2x`.
    pub fn eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let n2 = x.norm_sq();
        if n2 >= self.identity_cut * self.identity_cut {
            return (self.epsilon * self.epsilon + n2, x.scale(2.0));
        }
        let z = x.scale(1.0 / self.epsilon);
        let img = self.phi.apply(&z);
        let value = self.epsilon * self.epsilon * (1.0 + img.norm_sq());
        let grad = self
            .phi
            .pullback(&z, &img)
            .expect("the deleting map's derivative is defined on the whole space")
            .scale(2.0 * self.epsilon);
        (value, grad)
    }
}

/// How many blocks past the last active one the assembled gradient
/// carries. The true gradient continues with `2^{-n} U'(0)` in every
/// block forever (which is the whole point of the cone certificate); the
/// returned vector truncates at this window, matching what the
/// certificate inspects.
pub const GRADIENT_WINDOW: u32 = 3;

const CONE_MARGIN: f64 = 1e-14;

/// The blockwise sum `f(x) = sum_n 4^{-n} U(2^n x_n)` with its exactly
/// summed tail, the norm surrogate `sqrt f`, and the derived bump.
pub struct BlockSum {
    u: BlockFunctionalU,
    u_zero: f64,
    grad_zero: SparseVec,
}

impl BlockSum {
    pub fn new(u: BlockFunctionalU) -> Self {
        let (u_zero, grad_zero) = u.eval(&SparseVec::zero());
        BlockSum { u, u_zero, grad_zero }
    }

    /// Default instance: `eps = 0.1` over the stock origin deleter.
    pub fn standard() -> Self {
        Self::new(BlockFunctionalU::new(0.1).expect("0.1 is a valid epsilon"))
    }

    pub fn building_block(&self) -> &BlockFunctionalU {
        &self.u
    }

    pub fn epsilon(&self) -> f64 {
        self.u.epsilon()
    }

    /// `U(0)`, the constant every inactive block contributes before its
    /// `4^{-n}` weight.
    pub fn block_value_at_zero(&self) -> f64 {
        self.u_zero
    }

    /// Exact norm of the full (untruncated) gradient at 0: the blocks
    /// are `2^{-n} U'(0)`, so the squared norms form a geometric series
    /// summing to `|U'(0)|^2 / 3`.
    pub fn gradient_norm_at_zero(&self) -> f64 {
        self.grad_zero.norm() / 3f64.sqrt()
    }

    pub fn value(&self, x: &SparseVec) -> f64 {
        self.eval(x).0
    }

    /// Value and gradient of the sum. The value adds the active blocks
    /// and closes the inactive tail in one stroke: blocks past the last
    /// active one contribute `U(0) sum_{n > N} 4^{-n} = U(0) 4^{-N} / 3`
    /// exactly. The gradient carries the active blocks plus
    /// [`GRADIENT_WINDOW`] trailing copies of the never-zero `U'(0)`
    /// term; see [`Self::gradient_block`] for any block past that.
    pub fn eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let blocks = split_blocks(x);
        let n_last = blocks.last().map_or(0, |(n, _)| *n);
        let mut value = self.u_zero * 0.25f64.powi(n_last as i32) / 3.0;
        let mut grad_pairs = Vec::new();
        let mut active = blocks.into_iter().peekable();
        for n in 1..=n_last {
            let weight = 0.25f64.powi(n as i32);
            let half = 2f64.powi(-(n as i32));
            match active.peek() {
                Some((bn, _)) if *bn == n => {
                    let (_, x_n) = active.next().expect("peeked entry");
                    let (u, du) = self.u.eval(&x_n.scale(2f64.powi(n as i32)));
                    value += weight * u;
                    scatter_block(n, &du.scale(half), &mut grad_pairs);
                }
                _ => {
                    value += weight * self.u_zero;
                    scatter_block(n, &self.grad_zero.scale(half), &mut grad_pairs);
                }
            }
        }
        for n in n_last + 1..=n_last + GRADIENT_WINDOW {
            let half = 2f64.powi(-(n as i32));
            scatter_block(n, &self.grad_zero.scale(half), &mut grad_pairs);
        }
        (value, SparseVec::from_pairs(grad_pairs))
    }

    /// The exact block-`n` component of the gradient, for any `n >= 1`,
    /// indexed back into the ambient coordinates.
    pub fn gradient_block(&self, x: &SparseVec, n: u32) -> SparseVec {
        let x_n = SparseVec::from_pairs(x.iter().filter_map(|(k, v)| {
            let (bn, j) = block_of(k);
            (bn == n).then_some((j, v))
        }));
        let (_, du) = self.u.eval(&x_n.scale(2f64.powi(n as i32)));
        let mut pairs = Vec::new();
        scatter_block(n, &du.scale(2f64.powi(-(n as i32))), &mut pairs);
        SparseVec::from_pairs(pairs)
    }

    /// The norm surrogate `sqrt f` and its gradient `f' / (2 sqrt f)`;
    /// well-defined everywhere because `f >= eps^2 / 3 > 0`.
    pub fn sqrt_eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let (f, fp) = self.eval(x);
        let v = f.sqrt();
        (v, fp.scale(0.5 / v))
    }

    /// The bump `b = cutoff(f)`: positive at 0 because `f(0) <= (2/3)
    /// eps^2 < 1`, identically zero once `f >= 1` (in particular for
    /// `|x| >= 1`), with gradient `cutoff'(f) f'`.
    pub fn bump_eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let (f, fp) = self.eval(x);
        let v = smoothstep(1.0 - f);
        (v, fp.scale(-smoothstep_deriv(1.0 - f)))
    }

    /// Blockwise nonzero-gradient certificate: for every sample, every
    /// block up to [`GRADIENT_WINDOW`] past its last active one must
    /// carry a gradient component of norm above the margin. All-blocks
    /// nonzero is the finite witness that the gradient set stays inside
    /// the everywhere-nonzero-block cone.
    pub fn cone_certificate(
        &self,
        samples: &[SparseVec],
    ) -> Result<ConeCertificate, GradientConeError> {
        if samples.is_empty() {
            return Err(GradientConeError::InvalidArgument(
                "certificate needs at least one sample".into(),
            ));
        }
        let mut per_sample = Vec::with_capacity(samples.len());
        let mut min_block_norm = f64::INFINITY;
        let mut weakest_block = 0;
        for x in samples {
            let n_last = split_blocks(x).last().map_or(0, |(n, _)| *n);
            let checked = n_last + GRADIENT_WINDOW;
            let mut sample_min = f64::INFINITY;
            for n in 1..=checked {
                let norm = self.gradient_block(x, n).norm();
                if norm < sample_min {
                    sample_min = norm;
                }
                if norm < min_block_norm {
                    min_block_norm = norm;
                    weakest_block = n;
                }
            }
            per_sample.push(ConeSample {
                last_active_block: n_last,
                blocks_checked: checked,
                min_block_norm: sample_min,
            });
        }
        Ok(ConeCertificate {
            threshold: CONE_MARGIN,
            samples: samples.len(),
            min_block_norm,
            weakest_block,
            all_blocks_nonzero: min_block_norm > CONE_MARGIN,
            per_sample,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeSample {
    pub last_active_block: u32,
    pub blocks_checked: u32,
    pub min_block_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeCertificate {
    pub threshold: f64,
    pub samples: usize,
    pub min_block_norm: f64,
    pub weakest_block: u32,
    pub all_blocks_nonzero: bool,
    pub per_sample: Vec<ConeSample>,
}

/// Product of Householder reflections sending an orthonormal family
/// `u_1, ..., u_m` onto (signed) coordinate directions `e_0, ...,
/// e_{m-1}`; orthogonal, so the adjoint is the inverse and both
/// directions are isometries.
struct HouseholderChain {
    reflectors: Vec<SparseVec>,
}

impl HouseholderChain {
    /// Builds the chain from an already orthonormal family. Reflector
    /// `i` maps the image of `u_i` under the previous reflectors to
    /// `-sign e_i`; the sign choice keeps the reflector's norm away
    /// from 0, and earlier coordinates stay fixed because the incoming
    /// vector is orthogonal to them.
    fn new(orthonormal: &[SparseVec]) -> Self {
        let mut reflectors: Vec<SparseVec> = Vec::with_capacity(orthonormal.len());
        for (i, u) in orthonormal.iter().enumerate() {
            let mut w = u.clone();
            for v in &reflectors {
                w = reflect(v, &w);
            }
            let sign = if w.get(i) > 0.0 { -1.0 } else { 1.0 };
            let v = w.add_scaled(-sign, &SparseVec::basis(i));
            reflectors.push(v.scale(1.0 / v.norm()));
        }
        HouseholderChain { reflectors }
    }

    fn forward(&self, x: &SparseVec) -> SparseVec {
        let mut out = x.clone();
        for v in &self.reflectors {
            out = reflect(v, &out);
        }
        out
    }

    fn backward(&self, x: &SparseVec) -> SparseVec {
        let mut out = x.clone();
        for v in self.reflectors.iter().rev() {
            out = reflect(v, &out);
        }
        out
    }
}

fn reflect(unit: &SparseVec, x: &SparseVec) -> SparseVec {
    x.add_scaled(-2.0 * unit.dot(x), unit)
}

fn orthonormalize(basis: &[SparseVec]) -> Result<Vec<SparseVec>, GradientConeError> {
    let mut out: Vec<SparseVec> = Vec::with_capacity(basis.len());
    for (i, w) in basis.iter().enumerate() {
        let mut r = w.clone();
        // two classical passes for numerical orthogonality
        for _ in 0..2 {
            for u in &out {
                r = r.add_scaled(-u.dot(&r), u);
            }
        }
        if r.norm() <= 1e-10 * (1.0 + w.norm()) {
            return Err(GradientConeError::InvalidArgument(format!(
                "direction {i} is linearly dependent on the earlier ones"
            )));
        }
        out.push(r.scale(1.0 / r.norm()));
    }
    Ok(out)
}

fn drop_first_indices(x: &SparseVec, m: usize) -> (SparseVec, SparseVec) {
    let mut head = Vec::new();
    let mut tail = Vec::new();
    for (k, v) in x.iter() {
        if k < m {
            head.push((k, v));
        } else {
            tail.push((k - m, v));
        }
    }
    (SparseVec::from_pairs(head), SparseVec::from_pairs(tail))
}

fn merge_shifted(head: &SparseVec, tail: &SparseVec, m: usize) -> SparseVec {
    let pairs = head
        .iter()
        .chain(tail.iter().map(|(k, v)| (k + m, v)))
        .collect::<Vec<_>>();
    SparseVec::from_pairs(pairs)
}

/// Bump whose gradient avoids the span of finitely many prescribed
/// directions wherever the value is nonzero. A rotation takes the
/// prescribed directions onto the first `m` coordinates; the bump is
/// the product of a radial cutoff there with a gradient-never-dies bump
/// on the remaining coordinates, so at every point of nonzero value the
/// gradient keeps a nonzero component orthogonal to all the prescribed
/// directions.
pub struct AvoidSubspaceBump {
    rotation: HouseholderChain,
    m: usize,
    bump: NonRolleBump,
}

impl AvoidSubspaceBump {
    pub fn new(directions: &[SparseVec]) -> Result<Self, GradientConeError> {
        Self::with_bump(directions, NonRolleBump::standard())
    }

    pub fn with_bump(
        directions: &[SparseVec],
        bump: NonRolleBump,
    ) -> Result<Self, GradientConeError> {
        let orthonormal = orthonormalize(directions)?;
        Ok(AvoidSubspaceBump {
            rotation: HouseholderChain::new(&orthonormal),
            m: orthonormal.len(),
            bump,
        })
    }

    pub fn prescribed_dim(&self) -> usize {
        self.m
    }

    pub fn factor_bump(&self) -> &NonRolleBump {
        &self.bump
    }

    /// Value and ambient gradient of `cutoff(z) * bump(y)` in the
    /// rotated splitting `x = (z, y)`.
    pub fn eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let (value, g_rot) = self.eval_rotated(&self.rotation.forward(x));
        (value, self.rotation.backward(&g_rot))
    }

    /// Value together with the norm of the gradient component outside
    /// the prescribed span; a positive second entry at nonzero value is
    /// the avoidance witness.
    pub fn avoidance(&self, x: &SparseVec) -> (f64, f64) {
        let w = self.rotation.forward(x);
        let (z, y) = drop_first_indices(&w, self.m);
        let (cut_v, _) = radial_cutoff(&z);
        let (bump_v, bump_g) = self.bump.f_eval(&y);
        (bump_v * cut_v, cut_v * bump_g.norm())
    }

    fn eval_rotated(&self, w: &SparseVec) -> (f64, SparseVec) {
        let (z, y) = drop_first_indices(w, self.m);
        let (cut_v, cut_g) = radial_cutoff(&z);
        let (bump_v, bump_g) = self.bump.f_eval(&y);
        let grad = merge_shifted(&cut_g.scale(bump_v), &bump_g.scale(cut_v), self.m);
        (bump_v * cut_v, grad)
    }

    /// A random point of strictly positive value: a tube point in the
    /// never-dies factor's support paired with a small rotated head.
    /// The fiber window starts past the factor chart's rough patch so
    /// the same sampler serves every chart this library ships.
    pub fn sample_nonzero(&self, rng: &mut impl Rng) -> SparseVec {
        let z = if self.m == 0 {
            SparseVec::zero()
        } else {
            let raw = SparseVec::from_pairs((0..self.m).map(|k| (k, rng.gen_range(-1.0..1.0))));
            if raw.norm() == 0.0 {
                SparseVec::zero()
            } else {
                raw.scale(rng.gen_range(0.0..0.8) / raw.norm())
            }
        };
        let y = sample_bump_support(&self.bump, rng);
        self.rotation.backward(&merge_shifted(&z, &y, self.m))
    }
}

/// Bump on the even/odd coordinate splitting whose gradient at every
/// point of nonzero value has nonzero components in both halves, so it
/// avoids both half-space duals at once.
pub struct AvoidTwoFactorsBump {
    even: NonRolleBump,
    odd: NonRolleBump,
}

impl AvoidTwoFactorsBump {
    pub fn new() -> Self {
        Self::with_bumps(NonRolleBump::standard(), NonRolleBump::standard())
    }

    pub fn with_bumps(even: NonRolleBump, odd: NonRolleBump) -> Self {
        AvoidTwoFactorsBump { even, odd }
    }

    /// Value and ambient gradient of `bump(x_even) * bump(x_odd)`.
    pub fn eval(&self, x: &SparseVec) -> (f64, SparseVec) {
        let (xe, xo) = split_even_odd(x);
        let (ve, ge) = self.even.f_eval(&xe);
        let (vo, go) = self.odd.f_eval(&xo);
        (ve * vo, merge_even_odd(&ge.scale(vo), &go.scale(ve)))
    }

    /// Value plus the even-part and odd-part gradient norms; both
    /// positive at nonzero value is the avoidance witness.
    pub fn factor_margins(&self, x: &SparseVec) -> (f64, f64, f64) {
        let (xe, xo) = split_even_odd(x);
        let (ve, ge) = self.even.f_eval(&xe);
        let (vo, go) = self.odd.f_eval(&xo);
        (ve * vo, vo * ge.norm(), ve * go.norm())
    }

    /// A random point of strictly positive value: tube points in both
    /// factors' supports, interleaved.
    pub fn sample_nonzero(&self, rng: &mut impl Rng) -> SparseVec {
        let xe = sample_bump_support(&self.even, rng);
        let xo = sample_bump_support(&self.odd, rng);
        merge_even_odd(&xe, &xo)
    }
}

impl Default for AvoidTwoFactorsBump {
    fn default() -> Self {
        Self::new()
    }
}

/// `smoothstep(1 - |z|^2)` and its gradient: a smooth radial cutoff that
/// is 1 at the origin and exactly 0 outside the unit ball (smooth in `z`
/// because it reads the squared norm).
fn radial_cutoff(z: &SparseVec) -> (f64, SparseVec) {
    let s = z.norm_sq();
    (smoothstep(1.0 - s), z.scale(-2.0 * smoothstep_deriv(1.0 - s)))
}

fn sample_bump_support(bump: &NonRolleBump, rng: &mut impl Rng) -> SparseVec {
    let chart = bump.chart();
    loop {
        let raw = SparseVec::from_pairs([
            (rng.gen_range(0..8), rng.gen_range(-1.0..1.0f64)),
            (rng.gen_range(0..8), rng.gen_range(-1.0..1.0)),
            (rng.gen_range(0..8), rng.gen_range(-1.0..1.0)),
        ]);
        let dir = chart.project_h(&raw);
        if dir.norm() == 0.0 {
            continue;
        }
        let frac = rng.gen_range(0.05..0.9);
        let x = dir.scale(frac * bump.phi().radius() / dir.norm());
        let t = rng.gen_range(2.6..9.0);
        return chart
            .pi(&CylPoint::new(x, t))
            .expect("support samples lie in the chart domain");
    }
}

fn split_even_odd(x: &SparseVec) -> (SparseVec, SparseVec) {
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (k, v) in x.iter() {
        if k % 2 == 0 {
            even.push((k / 2, v));
        } else {
            odd.push((k / 2, v));
        }
    }
    (SparseVec::from_pairs(even), SparseVec::from_pairs(odd))
}

fn merge_even_odd(even: &SparseVec, odd: &SparseVec) -> SparseVec {
    let pairs = even
        .iter()
        .map(|(k, v)| (2 * k, v))
        .chain(odd.iter().map(|(k, v)| (2 * k + 1, v)))
        .collect::<Vec<_>>();
    SparseVec::from_pairs(pairs)
}
