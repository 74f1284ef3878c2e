//! Sparse vectors in l2 and finite-rank perturbations of the identity.
//!
//! Every vector this crate ever manipulates has finite support, so the
//! ambient space never has to be truncated. A [`SparseVec`] doubles as a
//! functional (all functionals in sight are inner products against a
//! finitely supported vector), and a [`RankPerturbOp`] is an operator of
//! the form `c*I + sum f_i (x) u_i`, which is exactly the class closed
//! under every construction in this crate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Finitely supported vector, stored as `(index, coefficient)` pairs
/// sorted by index with no explicit zeros.
///
/// Serializes as an array of `[index, coefficient]` pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn zero() -> Self {
        SparseVec { entries: Vec::new() }
    }

    /// The canonical basis vector `e_n`.
    pub fn basis(n: usize) -> Self {
        SparseVec { entries: vec![(n, 1.0)] }
    }

    /// The difference direction `e_n - e_{n-1}`.
    ///
    /// Panics if `n == 0`; the chain of differences starts at 1.
    pub fn basis_diff(n: usize) -> Self {
        assert!(n >= 1, "basis_diff needs n >= 1");
        SparseVec { entries: vec![(n - 1, -1.0), (n, 1.0)] }
    }

    /// Builds a vector from arbitrary pairs: sorts, merges duplicate
    /// indices by summing, and drops exact zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut raw: Vec<(usize, f64)> = pairs.into_iter().collect();
        raw.sort_unstable_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(raw.len());
        for (i, x) in raw {
            match entries.last_mut() {
                Some((j, y)) if *j == i => *y += x,
                _ => entries.push((i, x)),
            }
        }
        entries.retain(|&(_, x)| x != 0.0);
        SparseVec { entries }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Coefficient at index `i` (zero off the support).
    pub fn get(&self, i: usize) -> f64 {
        match self.entries.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(k) => self.entries[k].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (self.entries.iter(), other.entries.iter());
        let (mut pa, mut pb) = (a.next(), b.next());
        let mut acc = 0.0;
        while let (Some(&(i, x)), Some(&(j, y))) = (pa, pb) {
            if i == j {
                acc += x * y;
                pa = a.next();
                pb = b.next();
            } else if i < j {
                pa = a.next();
            } else {
                pb = b.next();
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: f64) -> SparseVec {
        if c == 0.0 {
            return SparseVec::zero();
        }
        SparseVec { entries: self.entries.iter().map(|&(i, x)| (i, c * x)).collect() }
    }

    /// `self + c * other`, merging supports and dropping exact cancellations.
    pub fn add_scaled(&self, c: f64, other: &SparseVec) -> SparseVec {
        if c == 0.0 || other.is_zero() {
            return self.clone();
        }
        let mut entries = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter(), other.entries.iter());
        let (mut pa, mut pb) = (a.next(), b.next());
        loop {
            match (pa, pb) {
                (Some(&(i, x)), Some(&(j, y))) => {
                    if i == j {
                        let s = x + c * y;
                        if s != 0.0 {
                            entries.push((i, s));
                        }
                        pa = a.next();
                        pb = b.next();
                    } else if i < j {
                        entries.push((i, x));
                        pa = a.next();
                    } else {
                        let s = c * y;
                        if s != 0.0 {
                            entries.push((j, s));
                        }
                        pb = b.next();
                    }
                }
                (Some(&(i, x)), None) => {
                    entries.push((i, x));
                    pa = a.next();
                }
                (None, Some(&(j, y))) => {
                    let s = c * y;
                    if s != 0.0 {
                        entries.push((j, s));
                    }
                    pb = b.next();
                }
                (None, None) => break,
            }
        }
        SparseVec { entries }
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        self.add_scaled(-1.0, other)
    }

    pub fn dist(&self, other: &SparseVec) -> f64 {
        self.sub(other).norm()
    }
}

impl Serialize for SparseVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<(usize, f64)>::deserialize(d)?;
        Ok(SparseVec::from_pairs(pairs))
    }
}

/// Lower bound on an operator norm found by random sampling, next to the
/// exact value computed on the operator's active subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub sampled_lower_bound: f64,
    pub exact: f64,
}

/// `c * I + sum_i f_i (x) u_i`: a scalar multiple of the identity plus a
/// finite-rank part. Optionally carries its own inverse in the same form.
///
/// The operator acts as `c*I` off the finite-dimensional span of all term
/// supports and as an explicit matrix on it, which is what makes the norm
/// computation exact rather than sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPerturbOp {
    id_coeff: f64,
    terms: Vec<(SparseVec, SparseVec)>,
    inverse: Option<Box<RankPerturbOp>>,
}

impl RankPerturbOp {
    pub fn identity() -> Self {
        RankPerturbOp { id_coeff: 1.0, terms: Vec::new(), inverse: None }
    }

    /// `id_coeff * I + sum f (x) u` over the given `(functional, vector)` pairs.
    pub fn new(id_coeff: f64, terms: Vec<(SparseVec, SparseVec)>) -> Self {
        RankPerturbOp { id_coeff, terms, inverse: None }
    }

    /// Attaches an explicit inverse. The caller is responsible for it
    /// actually inverting `self`; the tests here check the named
    /// constructors that use this.
    pub fn with_inverse(mut self, inv: RankPerturbOp) -> Self {
        self.inverse = Some(Box::new(inv));
        self
    }

    pub fn id_coeff(&self) -> f64 {
        self.id_coeff
    }

    pub fn terms(&self) -> &[(SparseVec, SparseVec)] {
        &self.terms
    }

    pub fn inverse(&self) -> Option<&RankPerturbOp> {
        self.inverse.as_deref()
    }

    pub fn apply(&self, x: &SparseVec) -> SparseVec {
        let mut y = x.scale(self.id_coeff);
        for (f, u) in &self.terms {
            let a = f.dot(x);
            if a != 0.0 {
                y = y.add_scaled(a, u);
            }
        }
        y
    }

    /// Applies the adjoint: `c*g + sum <g, u_i> f_i`.
    pub fn adjoint_apply(&self, g: &SparseVec) -> SparseVec {
        let mut y = g.scale(self.id_coeff);
        for (f, u) in &self.terms {
            let a = u.dot(g);
            if a != 0.0 {
                y = y.add_scaled(a, f);
            }
        }
        y
    }

    pub fn apply_inverse(&self, y: &SparseVec) -> Option<SparseVec> {
        self.inverse.as_ref().map(|inv| inv.apply(y))
    }

    /// The adjoint as a first-class operator (term pairs swapped).
    pub fn transpose(&self) -> RankPerturbOp {
        RankPerturbOp {
            id_coeff: self.id_coeff,
            terms: self.terms.iter().map(|(f, u)| (u.clone(), f.clone())).collect(),
            inverse: self.inverse.as_ref().map(|inv| Box::new(inv.transpose())),
        }
    }

    fn union_support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = Vec::new();
        for (f, u) in &self.terms {
            s.extend(f.support());
            s.extend(u.support());
        }
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Exact operator norm on all of l2.
    ///
    /// The active span `V` of the term supports is invariant, and so is its
    /// orthogonal complement (the functionals live in `V`), so the norm is
    /// the larger of `|id_coeff|` and the top singular value of the
    /// restriction to `V`.
    pub fn operator_norm_exact(&self) -> f64 {
        let support = self.union_support();
        if support.is_empty() {
            return self.id_coeff.abs();
        }
        let d = support.len();
        let pos = |i: usize| support.binary_search(&i).expect("index in union support");
        let mut m = vec![vec![0.0f64; d]; d];
        for k in 0..d {
            m[k][k] = self.id_coeff;
        }
        for (f, u) in &self.terms {
            for (fi, fx) in f.iter() {
                let c = pos(fi);
                for (ui, ux) in u.iter() {
                    m[pos(ui)][c] += ux * fx;
                }
            }
        }
        // Gram matrix M^T M, then its top eigenvalue.
        let mut g = vec![vec![0.0f64; d]; d];
        for a in 0..d {
            for b in a..d {
                let mut acc = 0.0;
                for row in &m {
                    acc += row[a] * row[b];
                }
                g[a][b] = acc;
                g[b][a] = acc;
            }
        }
        let sigma_sq = sym_eig_max(g).max(0.0);
        self.id_coeff.abs().max(sigma_sq.sqrt())
    }

    /// Random lower bound on the norm plus the exact value, for
    /// cross-checking. Sampling covers the active span and one fresh
    /// coordinate so the pure identity action is represented too.
    pub fn operator_norm_estimate(&self, trials: usize, seed: u64) -> NormEstimate {
        let exact = self.operator_norm_exact();
        let mut support = self.union_support();
        support.push(support.last().map_or(0, |&m| m + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for _ in 0..trials.max(1) {
            let x = SparseVec::from_pairs(
                support.iter().map(|&i| (i, rng.gen_range(-1.0..1.0))),
            );
            let n = x.norm();
            if n == 0.0 {
                continue;
            }
            best = best.max(self.apply(&x).norm() / n);
        }
        NormEstimate { sampled_lower_bound: best, exact }
    }
}

/// Top eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sizes here stay in the tens, where Jacobi is both simple and accurate
/// to machine precision.
fn sym_eig_max(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    let frob: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}
