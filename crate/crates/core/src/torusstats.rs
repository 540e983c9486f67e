//! Fine-scale statistics of the torus points `(a/q, a⁻¹/q)`.
//!
//! The diagonal pairs `(a/q, a⁻¹/q)` for `a` in a coset of units govern
//! the trace distribution of the associated closed geodesics: the trace
//! is `q·(a/q + a⁻¹/q)` up to a multiple of `q`.  This module provides
//! the smoothed step used to count traces near a target, Weyl sums of
//! torus observables over cosets, and the trace/lift means.

use crate::charsums::{enumerate_subgroup, CosetSpec};
use crate::modgroup::{inverse_mod, minimal_trace};
use crate::quadrature::{integrate_2d_adaptive, integrate_adaptive};
use num::complex::Complex64;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TorusStatsError {
    #[error("sharpness {0} too small: the smoothed step needs T >= 2")]
    SharpnessTooSmall(f64),
}

/// Mass of the bump `exp(-1/(1-x²))` on `(-1, 1)`, computed once.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| integrate_adaptive(raw_bump, -1.0, 1.0, 1e-12))
}

fn raw_bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// The unit-mass mollifier `φ(x)`, supported on `(-1, 1)`.
pub fn mollifier(x: f64) -> f64 {
    raw_bump(x) / bump_mass()
}

/// CDF of the mollifier, `∫_{-1}^{u} φ`.
fn mollifier_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        integrate_adaptive(mollifier, -1.0, u, 1e-12).clamp(0.0, 1.0)
    }
}

/// Smoothed indicator of `[0, 1]` at sharpness `T`.
///
/// `ψ_T = 1_{[0,1]} * φ_T` with `φ_T(x) = T·φ(T·x)`: equal to 1 on
/// `(1/T, 1 - 1/T)`, 0 outside `(-1/T, 1 + 1/T)`, and in `[0, 1]`
/// everywhere.
pub fn smooth_step(y: f64, sharpness: f64) -> Result<f64, TorusStatsError> {
    if !(sharpness >= 2.0) {
        return Err(TorusStatsError::SharpnessTooSmall(sharpness));
    }
    // (1_{[0,1]} * φ_T)(y) = ∫_{y-1}^{y} φ_T = Φ(T·y) − Φ(T·(y−1)).
    Ok(mollifier_cdf(sharpness * y) - mollifier_cdf(sharpness * (y - 1.0)))
}

/// `∫ ψ_T(x) x^m dx`, by quadrature over the support.
pub fn smooth_step_moment(m: u32, sharpness: f64) -> Result<f64, TorusStatsError> {
    if !(sharpness >= 2.0) {
        return Err(TorusStatsError::SharpnessTooSmall(sharpness));
    }
    Ok(integrate_adaptive(
        |x| smooth_step(x, sharpness).unwrap() * x.powi(m as i32),
        -1.0 / sharpness,
        1.0 + 1.0 / sharpness,
        1e-11,
    ))
}

/// A smooth observable on the torus `(R/Z)²`.
pub struct TorusObservable {
    /// Evaluation on torus coordinates in `[0,1)²`.
    pub eval: Box<dyn Fn(f64, f64) -> Complex64 + Sync>,
}

impl TorusObservable {
    pub fn new(f: impl Fn(f64, f64) -> Complex64 + Sync + 'static) -> Self {
        TorusObservable { eval: Box::new(f) }
    }

    pub fn real(f: impl Fn(f64, f64) -> f64 + Sync + 'static) -> Self {
        TorusObservable {
            eval: Box::new(move |x, y| Complex64::new(f(x, y), 0.0)),
        }
    }
}

/// Result of a smoothed Weyl sum over a coset.
#[derive(Debug, Clone, Copy)]
pub struct TorusSum {
    /// `Σ_{a ∈ cH} obs(a/q, a⁻¹/q)`.
    pub sum: Complex64,
    /// `sum − |H|·∫obs` with the mean computed by 2D quadrature.
    pub mean_gap: Complex64,
    /// The quadrature value of `∫obs` over the torus.
    pub mean: Complex64,
}

/// Sum an observable over the torus points of a coset and compare with
/// the flat average.
pub fn torus_sum(
    coset: &CosetSpec,
    obs: &TorusObservable,
) -> Result<TorusSum, crate::charsums::CharSumError> {
    let q = coset.q;
    let h = enumerate_subgroup(coset)?;
    let mut vals = Vec::with_capacity(h.len());
    for &x in &h {
        let a = (coset.coset_rep as i128 * x as i128).rem_euclid(q as i128);
        let abar = inverse_mod(a, q as i128).unwrap();
        vals.push((obs.eval)(a as f64 / q as f64, abar as f64 / q as f64));
    }
    let sum = crate::summation::pairwise_sum_complex(&vals);
    let mean_re = integrate_2d_adaptive(|x, y| (obs.eval)(x, y).re, 0.0, 1.0, 0.0, 1.0, 1e-10);
    let mean_im = integrate_2d_adaptive(|x, y| (obs.eval)(x, y).im, 0.0, 1.0, 0.0, 1.0, 1e-10);
    let mean = Complex64::new(mean_re, mean_im);
    Ok(TorusSum {
        sum,
        mean_gap: sum - mean * h.len() as f64,
        mean,
    })
}

/// Trace and lift statistics of a coset of units.
#[derive(Debug, Clone)]
pub struct TraceStats {
    pub q: i64,
    /// Minimal traces `t_a` for `a` in the coset, ascending in `a`.
    pub traces: Vec<i64>,
    /// `Σ t_a / q`.
    pub trace_mean: f64,
    /// `Σ a/q` over the lifts of the coset to `(0, q)`.
    pub lift_mean: f64,
}

impl TraceStats {
    /// `#{a in the coset : |t_a/q − δ| ≤ 1/T}`.
    pub fn near_delta_count(&self, delta: f64, sharpness: f64) -> usize {
        self.traces
            .iter()
            .filter(|t| (**t as f64 / self.q as f64 - delta).abs() <= 1.0 / sharpness)
            .count()
    }
}

/// Minimal-trace and lift statistics over a coset.
pub fn trace_stats(coset: &CosetSpec) -> Result<TraceStats, crate::charsums::CharSumError> {
    let q = coset.q;
    let h = enumerate_subgroup(coset)?;
    let mut lifts: Vec<i64> = h
        .iter()
        .map(|&x| (coset.coset_rep as i128 * x as i128).rem_euclid(q as i128) as i64)
        .collect();
    lifts.sort_unstable();
    let traces: Vec<i64> = lifts
        .iter()
        .map(|&a| minimal_trace(a as i128, q as i128).unwrap() as i64)
        .collect();
    // Integer sums first: both means are exact rationals with
    // denominator q, so a single correctly-rounded division keeps the
    // half-integer cases (Σa = q·φ/2) exact in floating point.
    let tsum: i128 = traces.iter().map(|&t| t as i128).sum();
    let asum: i128 = lifts.iter().map(|&a| a as i128).sum();
    Ok(TraceStats {
        q,
        traces,
        trace_mean: tsum as f64 / q as f64,
        lift_mean: asum as f64 / q as f64,
    })
}
