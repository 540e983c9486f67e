//! Exact arithmetic in the projective modular group and the closed
//! geodesics attached to multiplicative orbits.
//!
//! A unit `a` mod `q` determines a hyperbolic matrix
//! `ψ(a) = (a', b; q, d)` with `a' ≡ a`, `d ≡ a⁻¹ (mod q)`, so its trace
//! is congruent to `a + a⁻¹ (mod q)` and its expanding fixed point sits
//! above `a/q`.  The minimal-trace representative `t_a`, the embedding
//! `a ↦ ψ(a)`, and the geometric data of the resulting closed geodesic
//! (axis radius, length, lowest height, unit-speed parametrization) all
//! live here.
//!
//! Matrix entries are 128-bit integers; moduli are capped at `2^40` so
//! that products of traces near `q²` cannot overflow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible modulus; trace products stay within `i128` below it.
pub const MAX_MODULUS: i128 = 1 << 40;

#[derive(Debug, Error, PartialEq)]
pub enum ModGroupError {
    #[error("matrix has determinant {0}, expected 1")]
    NotUnimodular(i128),
    #[error("{a} and {q} share the common factor {gcd}")]
    NotAUnit { a: i128, q: i128, gcd: i128 },
    #[error("modulus {0} out of range (need 2 <= q <= 2^40)")]
    BadModulus(i128),
    #[error("trace {0} is not hyperbolic (|trace| <= 2)")]
    NotHyperbolic(i128),
    #[error("upper-triangular class (c = 0) has no closed geodesic")]
    NoGeodesic,
    #[error("level {n} does not divide the modulus {q}")]
    LevelMismatch { n: i128, q: i128 },
    #[error("explicit trace shift {0} leaves |trace| <= 2")]
    InadmissibleShift(i64),
}

/// An element of the projective modular group, stored as the canonical
/// integer matrix representative: `c > 0`, or `c = 0` and `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct UnimodularMatrix {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub d: i128,
}

impl UnimodularMatrix {
    /// Canonicalize an integer matrix of determinant one.
    pub fn normalize(a: i128, b: i128, c: i128, d: i128) -> Result<Self, ModGroupError> {
        let det = a * d - b * c;
        if det != 1 {
            return Err(ModGroupError::NotUnimodular(det));
        }
        let flip = c < 0 || (c == 0 && a < 0);
        let s = if flip { -1 } else { 1 };
        Ok(UnimodularMatrix {
            a: s * a,
            b: s * b,
            c: s * c,
            d: s * d,
        })
    }

    pub fn identity() -> Self {
        UnimodularMatrix {
            a: 1,
            b: 0,
            c: 0,
            d: 1,
        }
    }

    pub fn trace(&self) -> i128 {
        self.a + self.d
    }

    /// Product in the projective group (re-canonicalized).
    pub fn mul(&self, o: &UnimodularMatrix) -> UnimodularMatrix {
        UnimodularMatrix::normalize(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
        .expect("product of unimodular matrices is unimodular")
    }

    pub fn inverse(&self) -> UnimodularMatrix {
        UnimodularMatrix::normalize(self.d, -self.b, -self.c, self.a)
            .expect("inverse of unimodular matrix is unimodular")
    }

    /// Image of the cusp at infinity, as a (numerator, denominator) pair.
    pub fn apply_to_infinity(&self) -> (i128, i128) {
        (self.a, self.c)
    }

    /// Möbius action on a point of the upper half plane.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        let den = (c * x + d) * (c * x + d) + c * c * y * y;
        let nx = (a * x + b) * (c * x + d) + a * c * y * y;
        (nx / den, y / den)
    }
}

/// How the trace of the embedded matrix is selected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmbeddingVariant {
    /// Least `|trace|` with `|trace| > 2`; ties broken toward positive.
    MinimalTrace,
    /// Fixed shift: trace is `t_a + n·q` (rejected if `|trace| <= 2`).
    ExplicitShift(i64),
    /// Regularized variant: build the base variant, then multiply by the
    /// unit translation when `|trace| < q^(1-eps)`.
    EpsRegular {
        eps: f64,
        base: Box<EmbeddingVariant>,
    },
}

/// Modulus plus trace-selection rule for the embedding `a ↦ ψ(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub q: i128,
    pub variant: EmbeddingVariant,
}

impl EmbeddingSpec {
    pub fn minimal(q: i128) -> Self {
        EmbeddingSpec {
            q,
            variant: EmbeddingVariant::MinimalTrace,
        }
    }
}

fn check_modulus(q: i128) -> Result<(), ModGroupError> {
    if q < 2 || q > MAX_MODULUS {
        return Err(ModGroupError::BadModulus(q));
    }
    Ok(())
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// The inverse of `a` modulo `q`, in `(0, q)`.
pub fn inverse_mod(a: i128, q: i128) -> Result<i128, ModGroupError> {
    check_modulus(q)?;
    let g = gcd(a, q);
    if g != 1 {
        return Err(ModGroupError::NotAUnit { a, q, gcd: g });
    }
    // Extended Euclid.
    let (mut r0, mut r1) = (a.rem_euclid(q), q);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let k = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - k * r1);
        (s0, s1) = (s1, s0 - k * s1);
    }
    debug_assert_eq!(r0, 1);
    Ok(s0.rem_euclid(q))
}

/// The representative of `a + a⁻¹ (mod q)` in `[-q/2, q/2)`.
pub fn minimal_trace(a: i128, q: i128) -> Result<i128, ModGroupError> {
    let abar = inverse_mod(a, q)?;
    let s = (a.rem_euclid(q) + abar).rem_euclid(q);
    // Shift into [-q/2, q/2): subtract q when 2s >= q.
    Ok(if 2 * s >= q { s - q } else { s })
}

/// Hyperbolic matrix attached to the unit `a`, together with the shift
/// `n_ψ(a)` with `trace = t_a + q·n_ψ(a)`.
pub fn embed(a: i128, spec: &EmbeddingSpec) -> Result<(UnimodularMatrix, i128), ModGroupError> {
    let q = spec.q;
    let t = minimal_trace(a, q)?;
    let tr = select_trace(t, q, &spec.variant)?;
    let m = matrix_for_trace(a, q, tr);
    let mut n_psi = (tr - t) / q;
    let mut m = m;
    if let EmbeddingVariant::EpsRegular { eps, .. } = &spec.variant {
        // Escape the small-trace range by appending a unit translation,
        // which adds q to the trace.
        let bound = (q as f64).powf(1.0 - eps);
        if (m.trace().abs() as f64) < bound {
            let t_shift = UnimodularMatrix::normalize(1, 1, 0, 1).unwrap();
            m = m.mul(&t_shift);
            n_psi += 1;
        }
    }
    Ok((m, n_psi))
}

fn select_trace(t: i128, q: i128, variant: &EmbeddingVariant) -> Result<i128, ModGroupError> {
    match variant {
        EmbeddingVariant::MinimalTrace => {
            let mut best: Option<i128> = None;
            for k in -2..=2i128 {
                let cand = t + k * q;
                if cand.abs() <= 2 {
                    continue;
                }
                best = Some(match best {
                    None => cand,
                    Some(b) => {
                        if cand.abs() < b.abs() || (cand.abs() == b.abs() && cand > b) {
                            cand
                        } else {
                            b
                        }
                    }
                });
            }
            Ok(best.expect("some shift of t_a by q escapes [-2, 2]"))
        }
        EmbeddingVariant::ExplicitShift(n) => {
            let cand = t + (*n as i128) * q;
            if cand.abs() <= 2 {
                return Err(ModGroupError::InadmissibleShift(*n));
            }
            Ok(cand)
        }
        EmbeddingVariant::EpsRegular { base, .. } => select_trace(t, q, base),
    }
}

fn matrix_for_trace(a: i128, q: i128, tr: i128) -> UnimodularMatrix {
    let a1 = a.rem_euclid(q);
    let d = tr - a1;
    debug_assert_eq!((a1 * d - 1).rem_euclid(q), 0);
    let b = (a1 * d - 1) / q;
    UnimodularMatrix::normalize(a1, b, q, d).expect("embedding matrix is unimodular")
}

/// Geometric data of the closed geodesic of a hyperbolic matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicData {
    /// Orientation sign `sign(c·trace)`.
    pub epsilon: i8,
    /// Euclidean radius of the axis semicircle.
    pub radius: f64,
    /// Real base-point matrix conjugating the diagonal flow to the axis.
    pub base: [[f64; 2]; 2],
    /// Length of the closed geodesic, `2·log λ` with `λ + λ⁻¹ = |trace|`.
    pub length: f64,
    /// Height of the apex of the axis, `2·radius/|trace|`.
    pub apex_height: f64,
}

/// Compute the closed-geodesic data of a hyperbolic matrix with `c ≠ 0`.
pub fn geodesic_data(g: &UnimodularMatrix) -> Result<GeodesicData, ModGroupError> {
    let tr = g.trace();
    if tr.abs() <= 2 {
        return Err(ModGroupError::NotHyperbolic(tr));
    }
    if g.c == 0 {
        return Err(ModGroupError::NoGeodesic);
    }
    let (a, c, d) = (g.a as f64, g.c as f64, g.d as f64);
    let trf = tr as f64;
    let eps = if (c * trf) > 0.0 { 1i8 } else { -1i8 };
    let radius = ((trf / (2.0 * c)).powi(2) - 1.0 / (c * c)).sqrt();
    let epsf = eps as f64;
    let u = (a - d) / (2.0 * c);
    let s = (2.0 * radius).sqrt();
    let base = [
        [(u + epsf * radius) / s, (epsf * u - radius) / s],
        [1.0 / s, epsf / s],
    ];
    // 2 log((|tr| + sqrt(tr^2 - 4))/2), stable for large traces.
    let at = tr.abs() as f64;
    let length = 2.0 * ((at + (at * at - 4.0).sqrt()) / 2.0).ln();
    let apex_height = 2.0 * radius / at;
    Ok(GeodesicData {
        epsilon: eps,
        radius,
        base,
        length,
        apex_height,
    })
}

/// A unit tangent vector in Iwasawa coordinates `(x, y, θ)`, `θ` mod π.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TangentPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Iwasawa coordinates of a real determinant-one matrix `g`, i.e. of the
/// tangent vector `g` applied to the upward vector at `i`.
pub fn iwasawa(m: &[[f64; 2]; 2]) -> TangentPoint {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let den = c * c + d * d;
    let x = (a * c + b * d) / den;
    let y = 1.0 / den; // det = 1
    // The rotation part satisfies (c·i + d)/|c·i + d| = e^{-iθ}.
    let mut theta = -(c.atan2(d));
    theta = theta.rem_euclid(std::f64::consts::PI);
    TangentPoint { x, y, theta }
}

/// Point of the unit-speed parametrization of the closed geodesic at
/// time `t`, as Iwasawa coordinates of `g_γ·a_t`.
pub fn geodesic_point(g: &UnimodularMatrix, t: f64) -> Result<TangentPoint, ModGroupError> {
    let data = geodesic_data(g)?;
    Ok(flow_point(&data.base, t))
}

/// Iwasawa coordinates of `base·a_t` for a fixed real base matrix.
pub fn flow_point(base: &[[f64; 2]; 2], t: f64) -> TangentPoint {
    let e = (t / 2.0).exp();
    let m = [
        [base[0][0] * e, base[0][1] / e],
        [base[1][0] * e, base[1][1] / e],
    ];
    iwasawa(&m)
}

/// One geodesic of the orbit: the unit, its matrix, shift, and geometry.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitEntry {
    pub a: i128,
    pub matrix: UnimodularMatrix,
    pub n_psi: i128,
    pub minimal_trace: i128,
    pub geodesic: GeodesicData,
}

/// The family of closed geodesics over a coset of units mod `q`.
#[derive(Debug, Clone, Serialize)]
pub struct Orbit {
    pub q: i128,
    pub level: i128,
    pub entries: Vec<OrbitEntry>,
    /// Total geodesic length `Σ|C|` (pairwise-summed).
    pub total_length: f64,
}

/// Build the orbit of closed geodesics over the given coset elements.
///
/// `level` must divide `q` so that every matrix lies in the congruence
/// group of that level.  Entries are produced in ascending order of `a`.
pub fn orbit(
    spec: &EmbeddingSpec,
    coset: &[i128],
    level: i128,
) -> Result<Orbit, ModGroupError> {
    check_modulus(spec.q)?;
    if level < 1 || spec.q % level != 0 {
        return Err(ModGroupError::LevelMismatch {
            n: level,
            q: spec.q,
        });
    }
    let mut elements: Vec<i128> = coset.iter().map(|a| a.rem_euclid(spec.q)).collect();
    elements.sort_unstable();
    elements.dedup();
    let mut entries = Vec::with_capacity(elements.len());
    for &a in &elements {
        let (m, n_psi) = embed(a, spec)?;
        let geo = geodesic_data(&m)?;
        entries.push(OrbitEntry {
            a,
            matrix: m,
            n_psi,
            minimal_trace: minimal_trace(a, spec.q)?,
            geodesic: geo,
        });
    }
    let lengths: Vec<f64> = entries.iter().map(|e| e.geodesic.length).collect();
    let total_length = crate::summation::pairwise_sum(&lengths);
    Ok(Orbit {
        q: spec.q,
        level,
        entries,
        total_length,
    })
}

/// All units mod `q` in ascending order.
pub fn all_units(q: i128) -> Vec<i128> {
    (1..q).filter(|a| gcd(*a, q) == 1).collect()
}

/// Hyperbolic distance between two points of the upper half plane.
pub fn hyperbolic_distance(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let num = (x1 - x2).powi(2) + (y1 - y2).powi(2);
    let arg = 1.0 + num / (2.0 * y1 * y2);
    (arg + (arg * arg - 1.0).sqrt()).ln()
}
