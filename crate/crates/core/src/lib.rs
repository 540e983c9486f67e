//! Closed geodesics on the modular surface attached to multiplicative
//! orbits of rationals `a/q`, together with the arithmetic apparatus used
//! to study how those orbits distribute.
//!
//! The library is organized around one construction: for a unit `a` mod
//! `q` there is a hyperbolic matrix in `Γ₀(q)` whose expanding fixed point
//! has continued-fraction data tied to `a/q` and whose trace is congruent
//! to `a + a⁻¹ (mod q)`.  The closed geodesic of that matrix is the basic
//! object; everything else measures it:
//!
//! - [`modgroup`] — integral 2×2 matrix arithmetic, the embedding
//!   `a ↦ ψ(a)`, and the geodesic data (axis, length, lowest point) of a
//!   hyperbolic element.
//! - [`charsums`] — unit groups, Dirichlet characters with exact
//!   root-of-unity values, Gauss and (twisted/coset) Kloosterman sums.
//! - [`torusstats`] — statistics of the torus points `(a/q, a⁻¹/q)`:
//!   smoothed counting, Weyl sums against torus observables, trace means.
//! - [`eisenstein`] — Dedekind sums, the Rademacher function, weight-two
//!   Eisenstein pairings of closed geodesics, additive twists of
//!   holomorphic forms, Dirichlet L-values, and the multiplicative local
//!   weights entering Birch–Stevens style average formulas.
//! - [`homology`] — decomposition of `Γ₀(N)` elements into a standard
//!   generating set and the induced first-homology coordinates of closed
//!   geodesics.
//! - [`harness`] — fundamental-domain reduction, geodesic and Haar
//!   integrals of observables, and reproducible experiment drivers behind
//!   the command-line interface.
//!
//! Floating-point reductions use fixed-order pairwise summation so that
//! repeated runs produce bit-identical reports.

pub mod angles;
pub mod charsums;
pub mod eisenstein;
pub mod harness;
pub mod homology;
pub mod modgroup;
pub mod quadrature;
pub mod summation;
pub mod torusstats;
