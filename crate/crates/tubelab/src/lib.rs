//! Computable smooth geometry in the separable Hilbert space l2.
//!
//! Everything here operates on finitely supported vectors, so all maps are
//! exact in the sense that no basis truncation ever happens behind the
//! caller's back. The main exports:
//!
//! * [`seq_space`]: sparse vectors and finite-rank perturbations of the
//!   identity, with exact operator norms on their active subspace.
//! * [`smooth_kit`]: the C-infinity scalar gadgets (plateau cutoffs, ramps,
//!   blow-up reparametrizations, radial bump profiles) every construction
//!   is assembled from.
//! * [`iso_path`]: a smooth path of linear isomorphisms that drags a basis
//!   vector through infinitely many coordinate directions.
//! * [`tube`]: the tube map built on that path, its inversion, and its
//!   derivative; the tube is bounded but has infinite centerline length.
//! * [`rolle_bump`]: smooth bumps whose gradient never vanishes inside the
//!   support, plus a probe quantifying approximate versions of that failure.
//! * [`negligibility`]: diffeomorphisms deleting points and tubes from the
//!   space, a smooth retraction of the unit ball onto the sphere, and a
//!   fixed-point-free self-map of the ball.
//! * [`gradient_cone`]: smooth norm-like functions whose gradients avoid
//!   prescribed directions, built blockwise from a deleting map.

pub mod gradient_cone;
pub mod iso_path;
pub mod negligibility;
pub mod rolle_bump;
pub mod seq_space;
pub mod smooth_kit;
pub mod tube;
pub mod verify;
