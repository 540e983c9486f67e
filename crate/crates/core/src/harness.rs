//! Experiment orchestration: equidistribution measurements on the unit
//! tangent bundle of the modular surface, geodesic and Haar quadrature,
//! the standard observable suite, per-modulus orbit reports, caching,
//! and the trend experiments backing the statistical claims.
//!
//! Observables live on the level-1 quotient: the suite reduces each
//! tangent point to the standard fundamental domain (transporting the
//! angle by the automorphy factor) before evaluating.  The normalized
//! orbit ratio `Σ_a ∫_{C_a} φ / Σ_a |C_a|` is compared against the Haar
//! integral `(3/π)∬ φ dx dy/y²` (θ-averaged); equidistribution predicts
//! convergence as the modulus grows.

use crate::charsums::CosetSpec;
use crate::eisenstein::CoefficientSource;
use crate::modgroup::{
    flow_point, geodesic_data, EmbeddingSpec, EmbeddingVariant, TangentPoint,
    UnimodularMatrix,
};
use crate::summation::{pairwise_sum, pairwise_sum_complex};
use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("observable tail bound {0} exceeds the integrability threshold")]
    TailBound(f64),
    #[error(transparent)]
    ModGroup(#[from] crate::modgroup::ModGroupError),
    #[error(transparent)]
    CharSum(#[from] crate::charsums::CharSumError),
    #[error(transparent)]
    Homology(#[from] crate::homology::HomologyError),
    #[error("eisenstein stage failed: {0}")]
    Eisenstein(String),
    #[error("cache entry failed its checksum")]
    CacheChecksum,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------
// Fundamental-domain reduction.
// ---------------------------------------------------------------------

/// Reduce `x + iy` into the standard level-1 fundamental domain
/// (`|x| ≤ 1/2`, `|z| ≥ 1`); returns the reduced point and the integer
/// matrix mapping input to output.
pub fn reduce_level1(mut x: f64, mut y: f64) -> ((f64, f64), UnimodularMatrix) {
    assert!(y > 0.0, "reduction needs a point of the upper half-plane");
    let mut m = UnimodularMatrix::identity();
    for _ in 0..10_000 {
        let k = x.round();
        if k != 0.0 {
            x -= k;
            // T^{-k} on the left.
            let t = UnimodularMatrix::normalize(1, -(k as i128), 0, 1).unwrap();
            m = t.mul(&m);
        }
        let r2 = x * x + y * y;
        if r2 < 1.0 - 1e-15 {
            // Invert: z → −1/z.
            let s = UnimodularMatrix::normalize(0, -1, 1, 0).unwrap();
            m = s.mul(&m);
            let nx = -x / r2;
            let ny = y / r2;
            x = nx;
            y = ny;
        } else {
            break;
        }
    }
    ((x, y), m)
}

/// Reduce a tangent point, transporting the angle by the automorphy
/// factor: `θ′ = θ − arg(c·z + d) mod π`.
pub fn reduce_tangent(p: &TangentPoint) -> TangentPoint {
    let ((x, y), m) = reduce_level1(p.x, p.y);
    let j = Complex64::new(
        m.c as f64 * p.x + m.d as f64,
        m.c as f64 * p.y,
    );
    let theta = (p.theta - j.arg()).rem_euclid(PI);
    TangentPoint { x, y, theta }
}

// ---------------------------------------------------------------------
// Observables.
// ---------------------------------------------------------------------

/// A bounded observable on the unit tangent bundle in Iwasawa
/// coordinates.
pub struct SurfaceObservable {
    pub name: String,
    f: Box<dyn Fn(&TangentPoint) -> Complex64 + Sync>,
}

impl SurfaceObservable {
    /// Observable evaluated at raw coordinates.
    pub fn raw(
        name: &str,
        f: impl Fn(&TangentPoint) -> Complex64 + Sync + 'static,
    ) -> Self {
        SurfaceObservable {
            name: name.to_string(),
            f: Box::new(f),
        }
    }

    /// Observable on the level-1 quotient: the point is reduced to the
    /// fundamental domain (with angle transport) before evaluation.
    pub fn on_quotient(
        name: &str,
        f: impl Fn(&TangentPoint) -> Complex64 + Sync + 'static,
    ) -> Self {
        SurfaceObservable {
            name: name.to_string(),
            f: Box::new(move |p| f(&reduce_tangent(p))),
        }
    }

    pub fn eval(&self, p: &TangentPoint) -> Complex64 {
        (self.f)(p)
    }
}

/// The fixed suite of five bounded smooth observables used by the
/// equidistribution experiments (all on the level-1 quotient).
pub fn standard_suite() -> Vec<SurfaceObservable> {
    let bump = |center: f64, width: f64| {
        move |y: f64| crate::torusstats::mollifier((y - center) / width)
    };
    vec![
        SurfaceObservable::on_quotient("cusp_decay", |p| {
            Complex64::new(1.0 / (1.0 + p.y), 0.0)
        }),
        SurfaceObservable::on_quotient("band", {
            let b = bump(1.3, 0.25);
            move |p| Complex64::new(b(p.y), 0.0)
        }),
        SurfaceObservable::on_quotient("horocycle_mode", {
            let b = bump(1.2, 0.3);
            move |p| Complex64::new((2.0 * PI * p.x).cos() * b(p.y), 0.0)
        }),
        SurfaceObservable::on_quotient("angular_mode", |p| {
            Complex64::new((2.0 * p.theta).cos(), 0.0)
        }),
        SurfaceObservable::on_quotient("mixed_mode", {
            let b = bump(1.4, 0.35);
            move |p| Complex64::new((2.0 * p.theta).sin() * b(p.y), 0.0)
        }),
    ]
}

// ---------------------------------------------------------------------
// Geodesic quadrature.
// ---------------------------------------------------------------------

/// Vector-valued panel-doubling Gauss quadrature (fixed reduction tree).
fn integrate_vec<F: FnMut(f64) -> Vec<Complex64>>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
) -> Vec<Complex64> {
    let (nodes, weights) = crate::quadrature::gauss_legendre(16);
    let run = |panels: usize, f: &mut F| -> Vec<Complex64> {
        let h = (b - a) / panels as f64;
        let mut per_dim: Vec<Vec<Complex64>> = vec![Vec::new(); dim];
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (node, weight) in nodes.iter().zip(&weights) {
                let t = lo + h * 0.5 * (node + 1.0);
                let vals = f(t);
                for (i, v) in vals.iter().enumerate() {
                    per_dim[i].push(v * (weight * h * 0.5));
                }
            }
        }
        per_dim.iter().map(|v| pairwise_sum_complex(v)).collect()
    };
    let mut panels = 1usize;
    let mut prev = run(panels, &mut f);
    loop {
        panels *= 2;
        let next = run(panels, &mut f);
        let gap = prev
            .iter()
            .zip(&next)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        if gap < tol || panels >= 1 << 14 {
            return next;
        }
        prev = next;
    }
}

/// Integrate an observable along the closed geodesic of `g` over one
/// period of the unit-speed parametrization, adaptively to `tol`.
pub fn geodesic_integral(
    g: &UnimodularMatrix,
    obs: &SurfaceObservable,
    tol: f64,
) -> Result<Complex64, HarnessError> {
    Ok(geodesic_integral_suite(g, std::slice::from_ref(obs), tol)?[0])
}

/// Integrate several observables along one geodesic in a single pass
/// (the point construction and reduction dominate the cost).
pub fn geodesic_integral_suite(
    g: &UnimodularMatrix,
    obs: &[SurfaceObservable],
    tol: f64,
) -> Result<Vec<Complex64>, HarnessError> {
    let data = geodesic_data(g)?;
    let half = data.length / 2.0;
    let vals = integrate_vec(
        |t| {
            let p = flow_point(&data.base, t);
            obs.iter().map(|o| o.eval(&p)).collect()
        },
        -half,
        half,
        obs.len(),
        tol,
    );
    Ok(vals)
}

/// Period of a weight-2 cusp source along the closed geodesic of `g`.
///
/// Integrates the lift `e^{2iθ}·y·f(x+iy)` over one full period of the
/// geodesic flow, traversing the closed curve in the orientation for which
/// the additive-twist identity `period = modular_symbol / (−2π)` holds.
/// That orientation is the *reverse* of the flow parameterization used by
/// [`flow_point`], hence the overall sign.
pub fn weight_two_geodesic_period(
    g: &UnimodularMatrix,
    f: &CoefficientSource,
    tol: f64,
) -> Result<Complex64, HarnessError> {
    let src = f.clone();
    let lift = SurfaceObservable::raw("weight-2 lift", move |p| {
        Complex64::new(0.0, 2.0 * p.theta).exp() * p.y * src.eval(p.x, p.y)
    });
    Ok(-geodesic_integral(g, &lift, tol)?)
}

// ---------------------------------------------------------------------
// Haar integral.
// ---------------------------------------------------------------------

/// Value and truncation tail bound of a Haar integral.
#[derive(Debug, Clone, Copy)]
pub struct HaarIntegral {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Haar-probability integral `(3/π)·∬_F (θ-average of obs) dx dy/y²`
/// over the level-1 fundamental domain, truncated at height `Y` with
/// the sup-bound tail `(3/π)·sup_{y>Y}|obs|/Y` reported.  Observables
/// that keep growing up the cusp are rejected.
pub fn haar_integral(
    obs: &SurfaceObservable,
    tol: f64,
) -> Result<HaarIntegral, HarnessError> {
    const THETA_NODES: usize = 64;
    let theta_avg = |x: f64, y: f64| -> Complex64 {
        let vals: Vec<Complex64> = (0..THETA_NODES)
            .map(|k| {
                obs.eval(&TangentPoint {
                    x,
                    y,
                    theta: k as f64 * PI / THETA_NODES as f64,
                })
            })
            .collect();
        pairwise_sum_complex(&vals) / THETA_NODES as f64
    };
    // Integrability probe along the cusp.
    let big_y = 1e7f64;
    let mut sup_tail = 0.0f64;
    let mut sup_far = 0.0f64;
    for &scale in &[1.0, 3.0, 10.0, 100.0] {
        for k in 0..8 {
            let x = -0.5 + (k as f64 + 0.5) / 8.0;
            let v = theta_avg(x, big_y * scale).norm();
            sup_tail = sup_tail.max(v);
            if scale >= 100.0 {
                sup_far = sup_far.max(v);
            }
        }
    }
    let tail_bound = 3.0 / PI * sup_tail / big_y;
    if sup_far > 10.0 * (sup_tail.min(1.0)) + 1e6 * tol {
        return Err(HarnessError::TailBound(sup_far));
    }
    // Substituting u = 1/y flattens the cusp: ∬ f dx dy/y² =
    // ∫ dx ∫_{1/Y}^{1/√(1−x²)} f(x, 1/u) du; the inner range is mapped
    // onto [0, 1] so the rectangle rule applies.
    let integrate_part = |part: fn(Complex64) -> f64| -> f64 {
        crate::quadrature::integrate_2d_adaptive(
            |x, s| {
                let umax = 1.0 / (1.0 - x * x).sqrt();
                let width = umax - 1.0 / big_y;
                let u = 1.0 / big_y + s * width;
                part(theta_avg(x, 1.0 / u)) * width
            },
            -0.5,
            0.5,
            0.0,
            1.0,
            tol * PI / 3.0,
        )
    };
    let re = integrate_part(|v| v.re);
    let im = integrate_part(|v| v.im);
    Ok(HaarIntegral {
        value: 3.0 / PI * Complex64::new(re, im),
        tail_bound,
    })
}

// ---------------------------------------------------------------------
// Experiment configuration and reports.
// ---------------------------------------------------------------------

/// Experiment families exposed by the harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Orbit,
    Equidist,
    Kloosterman,
    BirchStevens,
    Homology,
    Torus,
}

/// Full description of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub q_list: Vec<i128>,
    pub level: i64,
    pub variant: EmbeddingVariant,
    /// Generators of the unit subgroup H (empty = full group).
    pub subgroup_generators: Vec<i64>,
    /// Coset representative c for cH sums.
    pub coset_rep: i64,
    pub tol: f64,
    pub cache_dir: Option<PathBuf>,
    pub threads: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, q_list: Vec<i128>) -> Self {
        ExperimentConfig {
            kind,
            q_list,
            level: 1,
            variant: EmbeddingVariant::MinimalTrace,
            subgroup_generators: Vec::new(),
            coset_rep: 1,
            tol: 1e-6,
            cache_dir: None,
            threads: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.q_list.is_empty() {
            return Err(HarnessError::Config {
                field: "q".into(),
                message: "at least one modulus is required".into(),
            });
        }
        if self.tol <= 0.0 {
            return Err(HarnessError::Config {
                field: "tol".into(),
                message: "tolerance must be positive".into(),
            });
        }
        if self.level < 1 {
            return Err(HarnessError::Config {
                field: "level".into(),
                message: "level must be ≥ 1".into(),
            });
        }
        for &q in &self.q_list {
            if q % self.level as i128 != 0 {
                return Err(HarnessError::Config {
                    field: "q".into(),
                    message: format!("modulus {q} is not divisible by the level {}", self.level),
                });
            }
            if q < 3 {
                return Err(HarnessError::Config {
                    field: "q".into(),
                    message: format!("modulus {q} is too small"),
                });
            }
        }
        Ok(())
    }
}

/// One geodesic of the orbit in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerARecord {
    pub a: i64,
    pub minimal_trace: i64,
    pub trace: i64,
    pub n_psi: i64,
    pub length: f64,
    /// `(re, im)` of `∫_{C_a} φ` per suite observable (equidist runs).
    pub observable_integrals: Vec<(f64, f64)>,
}

/// Normalized ratio of one observable against its Haar integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableRatio {
    pub name: String,
    pub ratio: (f64, f64),
    pub haar: (f64, f64),
    pub deviation: f64,
}

/// Per-modulus report: orbit geometry, aggregates, and the optional
/// experiment-specific sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitReport {
    pub q: i64,
    pub level: i64,
    pub subgroup_size: usize,
    pub total_length: f64,
    pub sum_n_psi: i64,
    pub max_trace_over_q: f64,
    pub trace_mean_over_phi: f64,
    pub per_a: Vec<PerARecord>,
    pub ratios: Vec<ObservableRatio>,
    pub concentration_distance: Option<f64>,
    pub kloosterman_direct: Option<(f64, f64)>,
    pub kloosterman_characters: Option<(f64, f64)>,
    pub birch_stevens_max_residual: Option<f64>,
    pub lift_mean: Option<f64>,
    pub degraded_homology: Option<bool>,
}

/// All per-q reports of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub reports: Vec<OrbitReport>,
}

fn coset_elements(q: i128, gens: &[i64], rep: i64) -> Result<Vec<i128>, HarnessError> {
    if gens.is_empty() && rep == 1 {
        return Ok(crate::modgroup::all_units(q));
    }
    let spec = CosetSpec {
        q: q as i64,
        subgroup_generators: gens.to_vec(),
        coset_rep: rep,
    };
    let h = crate::charsums::enumerate_subgroup(&spec)?;
    let mut out: Vec<i128> = h
        .iter()
        .map(|&x| (x as i128 * rep as i128).rem_euclid(q))
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn embedding_spec(q: i128, variant: EmbeddingVariant) -> EmbeddingSpec {
    EmbeddingSpec { q, variant }
}

/// Run one experiment; deterministic for a fixed config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    // Haar integrals are shared across moduli for equidist runs.
    let suite = standard_suite();
    let haar: Vec<Complex64> = if config.kind == ExperimentKind::Equidist {
        suite
            .iter()
            .map(|o| haar_integral(o, 1e-7).map(|h| h.value))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let gs = if config.kind == ExperimentKind::Homology {
        Some(crate::homology::schreier_generators(config.level)?)
    } else {
        None
    };
    let mut reports = Vec::new();
    for &q in &config.q_list {
        if let Some(hit) = cache_lookup(config, q)? {
            reports.push(hit);
            continue;
        }
        let spec = embedding_spec(q, config.variant.clone());
        let coset = coset_elements(q, &config.subgroup_generators, config.coset_rep)?;
        let orbit = crate::modgroup::orbit(&spec, &coset, config.level as i128)?;
        let sum_n_psi: i64 = orbit.entries.iter().map(|e| e.n_psi as i64).sum();
        let max_trace_over_q = orbit
            .entries
            .iter()
            .map(|e| (e.matrix.trace().abs() as f64) / q as f64)
            .fold(0.0, f64::max);
        let trace_terms: Vec<f64> = orbit
            .entries
            .iter()
            .map(|e| e.minimal_trace as f64 / q as f64)
            .collect();
        let trace_mean_over_phi = pairwise_sum(&trace_terms) / orbit.entries.len() as f64;

        let mut per_a: Vec<PerARecord> = Vec::with_capacity(orbit.entries.len());
        let with_integrals = config.kind == ExperimentKind::Equidist;
        for e in &orbit.entries {
            let integrals = if with_integrals {
                geodesic_integral_suite(&e.matrix, &suite, config.tol)?
                    .iter()
                    .map(|v| (v.re, v.im))
                    .collect()
            } else {
                Vec::new()
            };
            per_a.push(PerARecord {
                a: e.a as i64,
                minimal_trace: e.minimal_trace as i64,
                trace: e.matrix.trace() as i64,
                n_psi: e.n_psi as i64,
                length: e.geodesic.length,
                observable_integrals: integrals,
            });
        }

        let ratios = if with_integrals {
            suite
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let terms: Vec<Complex64> = per_a
                        .iter()
                        .map(|r| {
                            Complex64::new(
                                r.observable_integrals[i].0,
                                r.observable_integrals[i].1,
                            )
                        })
                        .collect();
                    let ratio = pairwise_sum_complex(&terms) / orbit.total_length;
                    ObservableRatio {
                        name: o.name.clone(),
                        ratio: (ratio.re, ratio.im),
                        haar: (haar[i].re, haar[i].im),
                        deviation: (ratio - haar[i]).norm(),
                    }
                })
                .collect()
        } else {
            Vec::new()
        };

        let mut report = OrbitReport {
            q: q as i64,
            level: config.level,
            subgroup_size: coset.len(),
            total_length: orbit.total_length,
            sum_n_psi,
            max_trace_over_q,
            trace_mean_over_phi,
            per_a,
            ratios,
            concentration_distance: None,
            kloosterman_direct: None,
            kloosterman_characters: None,
            birch_stevens_max_residual: None,
            lift_mean: None,
            degraded_homology: None,
        };

        match config.kind {
            ExperimentKind::Homology => {
                let gs = gs.as_ref().unwrap();
                let v = crate::homology::orbit_sum(&coset, &spec, gs)?;
                report.concentration_distance =
                    Some(crate::homology::concentration_distance(&v)?);
                report.degraded_homology = Some(v.degraded);
            }
            ExperimentKind::Kloosterman => {
                let cs = CosetSpec {
                    q: q as i64,
                    subgroup_generators: config.subgroup_generators.clone(),
                    coset_rep: config.coset_rep,
                };
                let k = crate::charsums::coset_kloosterman(&cs, 1, 1)?;
                report.kloosterman_direct = Some((k.direct.re, k.direct.im));
                report.kloosterman_characters =
                    Some((k.via_characters.re, k.via_characters.im));
            }
            ExperimentKind::BirchStevens => {
                let mut max_res = 0.0f64;
                for chi in crate::charsums::characters(q as i64)? {
                    let rep = crate::eisenstein::birch_stevens_eisenstein(
                        config.level,
                        q as i64,
                        &chi,
                        &spec,
                    )
                    .map_err(|e| HarnessError::Eisenstein(e.to_string()))?;
                    max_res = max_res.max(rep.residual);
                }
                report.birch_stevens_max_residual = Some(max_res);
            }
            ExperimentKind::Torus => {
                let gens = if config.subgroup_generators.is_empty() {
                    crate::charsums::UnitGroup::new(q as i64)?.generators.clone()
                } else {
                    config.subgroup_generators.clone()
                };
                let cs = CosetSpec {
                    q: q as i64,
                    subgroup_generators: gens,
                    coset_rep: config.coset_rep,
                };
                let stats = crate::torusstats::trace_stats(&cs)?;
                report.lift_mean = Some(stats.lift_mean);
            }
            ExperimentKind::Orbit | ExperimentKind::Equidist => {}
        }
        cache_store(config, q, &report)?;
        reports.push(report);
    }
    Ok(RunReport {
        kind: config.kind,
        reports,
    })
}

// ---------------------------------------------------------------------
// Cache.
// ---------------------------------------------------------------------

fn cache_key(config: &ExperimentConfig, q: i128) -> String {
    let fingerprint = format!(
        "kind={:?};q={};level={};variant={:?};subgroup={:?};coset={};tol={:e}",
        config.kind,
        q,
        config.level,
        config.variant,
        config.subgroup_generators,
        config.coset_rep,
        config.tol,
    );
    let mut h = Sha256::new();
    h.update(fingerprint.as_bytes());
    format!("{:x}", h.finalize())
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    checksum: String,
    payload: String,
}

fn cache_lookup(
    config: &ExperimentConfig,
    q: i128,
) -> Result<Option<OrbitReport>, HarnessError> {
    let Some(dir) = &config.cache_dir else {
        return Ok(None);
    };
    let path = dir.join(format!("{}.json", cache_key(config, q)));
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)?;
    let entry: CacheEntry = serde_json::from_str(&text)
        .map_err(|_| HarnessError::CacheChecksum)?;
    let mut h = Sha256::new();
    h.update(entry.payload.as_bytes());
    if format!("{:x}", h.finalize()) != entry.checksum {
        return Err(HarnessError::CacheChecksum);
    }
    let report: OrbitReport = serde_json::from_str(&entry.payload)
        .map_err(|_| HarnessError::CacheChecksum)?;
    Ok(Some(report))
}

fn cache_store(
    config: &ExperimentConfig,
    q: i128,
    report: &OrbitReport,
) -> Result<(), HarnessError> {
    let Some(dir) = &config.cache_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let payload = serde_json::to_string(report).expect("report serializes");
    let mut h = Sha256::new();
    h.update(payload.as_bytes());
    let entry = CacheEntry {
        checksum: format!("{:x}", h.finalize()),
        payload,
    };
    let path = dir.join(format!("{}.json", cache_key(config, q)));
    let tmp = dir.join(format!("{}.tmp", cache_key(config, q)));
    std::fs::write(&tmp, serde_json::to_string(&entry).unwrap())?;
    std::fs::rename(&tmp, &path)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Trend helpers.
// ---------------------------------------------------------------------

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let num: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .collect();
    let den: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    pairwise_sum(&num) / pairwise_sum(&den)
}

/// Generators of the subgroup of squares mod `q` (the squares of the
/// unit-group generators).
pub fn square_subgroup_generators(q: i64) -> Result<Vec<i64>, HarnessError> {
    let g = crate::charsums::UnitGroup::new(q)?;
    Ok(g.generators.iter().map(|x| (x * x) % q).collect())
}

/// Primes in `[lo, hi]`, thinned to at most `count` roughly evenly
/// spaced entries.
pub fn prime_grid(lo: i64, hi: i64, count: usize) -> Vec<i64> {
    let mut primes = Vec::new();
    for n in lo..=hi {
        let mut is_p = n >= 2;
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                is_p = false;
                break;
            }
            d += 1;
        }
        if is_p {
            primes.push(n);
        }
    }
    if primes.len() <= count {
        return primes;
    }
    (0..count)
        .map(|i| primes[i * (primes.len() - 1) / (count - 1)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn reduction_examples() {
        let ((x, y), m) = reduce_level1(0.0, 1.0);
        assert!((x, y) == (0.0, 1.0) && m == UnimodularMatrix::identity());
        let ((x, y), _) = reduce_level1(5.0, 1.0);
        assert!((x.abs() < 1e-12) && (y - 1.0).abs() < 1e-12);
        let ((x, y), m) = reduce_level1(0.0, 0.5);
        assert!((x.abs() < 1e-12) && (y - 2.0).abs() < 1e-12);
        assert_eq!(m, UnimodularMatrix::normalize(0, -1, 1, 0).unwrap());
        // Random points land in the fundamental domain and map back.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x0 = rng.gen_range(-8.0..8.0);
            let y0 = rng.gen_range(0.01..4.0);
            let ((x, y), m) = reduce_level1(x0, y0);
            assert!(x.abs() <= 0.5 + 1e-9 && x * x + y * y >= 1.0 - 1e-9);
            let (mx, my) = m.apply(x0, y0);
            assert!((mx - x).abs() < 1e-9 && (my - y).abs() < 1e-9);
        }
    }

    #[test]
    fn angle_transport_consistency() {
        // Reducing the Iwasawa frame of g·aₜ must agree with the frame
        // of (m·g)·aₜ for the reducing matrix m.
        let g = UnimodularMatrix::normalize(2, 1, 5, 3).unwrap();
        let data = crate::modgroup::geodesic_data(&g).unwrap();
        for t in [-1.0, 0.0, 0.7, 1.4] {
            let p = flow_point(&data.base, t);
            let r = reduce_tangent(&p);
            let (_, m) = reduce_level1(p.x, p.y);
            let mf = [
                [m.a as f64, m.b as f64],
                [m.c as f64, m.d as f64],
            ];
            let composed = [
                [
                    mf[0][0] * data.base[0][0] + mf[0][1] * data.base[1][0],
                    mf[0][0] * data.base[0][1] + mf[0][1] * data.base[1][1],
                ],
                [
                    mf[1][0] * data.base[0][0] + mf[1][1] * data.base[1][0],
                    mf[1][0] * data.base[0][1] + mf[1][1] * data.base[1][1],
                ],
            ];
            let direct = flow_point(&composed, t);
            assert!((direct.x - r.x).abs() < 1e-9);
            assert!((direct.y - r.y).abs() < 1e-9);
            let dth = (direct.theta - r.theta).rem_euclid(PI);
            assert!(dth < 1e-9 || dth > PI - 1e-9, "θ transport off by {dth}");
        }
    }

    #[test]
    fn geodesic_integral_of_one_is_length() {
        let spec = EmbeddingSpec::minimal(35);
        for a in [2i128, 3, 4] {
            let (g, _) = crate::modgroup::embed(a, &spec).unwrap();
            let data = crate::modgroup::geodesic_data(&g).unwrap();
            let one = SurfaceObservable::raw("one", |_| Complex64::new(1.0, 0.0));
            let v = geodesic_integral(&g, &one, 1e-10).unwrap();
            assert!((v.re - data.length).abs() < 1e-8);
        }
    }

    #[test]
    fn orientation_reversal_symmetry() {
        let g = UnimodularMatrix::normalize(2, 1, 5, 3).unwrap();
        let gi = g.inverse();
        let obs = SurfaceObservable::on_quotient("sym", |p| {
            Complex64::new(1.0 / (1.0 + p.y), 0.0)
        });
        let v1 = geodesic_integral(&g, &obs, 1e-9).unwrap();
        let v2 = geodesic_integral(&gi, &obs, 1e-9).unwrap();
        assert!((v1 - v2).norm() < 1e-7, "{v1} vs {v2}");
    }

    #[test]
    fn haar_normalization_and_angular_modes() {
        let one = SurfaceObservable::raw("one", |_| Complex64::new(1.0, 0.0));
        let h = haar_integral(&one, 1e-8).unwrap();
        assert!((h.value.re - 1.0).abs() < 1e-6, "Haar(1) = {}", h.value.re);
        assert!(h.tail_bound < 1e-6);
        let ang = SurfaceObservable::raw("e2", |p| {
            Complex64::new(0.0, 2.0 * p.theta).exp()
        });
        let h = haar_integral(&ang, 1e-8).unwrap();
        assert!(h.value.norm() < 1e-10);
        // Unbounded observable is rejected.
        let bad = SurfaceObservable::raw("linear", |p| Complex64::new(p.y, 0.0));
        assert!(haar_integral(&bad, 1e-8).is_err());
    }

    #[test]
    fn haar_band_against_monte_carlo() {
        let band = SurfaceObservable::raw("band", |p| {
            Complex64::new(crate::torusstats::mollifier((p.y - 1.3) / 0.25), 0.0)
        });
        let h = haar_integral(&band, 1e-9).unwrap();
        // Importance-sampled Monte Carlo oracle with an explicit seed:
        // x uniform, 1/y uniform below the circle boundary, strip mass
        // 1/√(1−x²).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20250826);
        let n = 2_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..n {
            let x: f64 = rng.gen_range(-0.5..0.5);
            let ymin = (1.0 - x * x).sqrt();
            let u: f64 = rng.gen_range(0.0..1.0);
            let y = ymin / u.max(1e-12);
            let mass = 1.0 / ymin;
            acc += mass * crate::torusstats::mollifier((y - 1.3) / 0.25);
        }
        let mc = 3.0 / PI * acc / n as f64;
        assert!(
            (h.value.re - mc).abs() < 1e-3,
            "quadrature {} vs Monte Carlo {}",
            h.value.re,
            mc
        );
    }

    #[test]
    fn cross_module_weight_two_lift() {
        // The weight-2 period along the closed geodesic matches the
        // Fourier-series evaluation −(2π)⁻¹·L(1/2, f, γ∞).
        let f = CoefficientSource::EtaSquaredLevel11;
        let spec = EmbeddingSpec::minimal(55);
        for a in [2i128, 3] {
            let (g, _) = crate::modgroup::embed(a, &spec).unwrap();
            let quad = weight_two_geodesic_period(&g, &f, 1e-9).unwrap();
            let series = crate::eisenstein::geodesic_period_series(&f, &g).unwrap();
            assert!(
                (quad - series).norm() < 1e-5,
                "a={a}: quadrature {quad} vs series {series}"
            );
        }
    }

    #[test]
    fn run_experiment_deterministic_and_consistent() {
        let mut config = ExperimentConfig::new(ExperimentKind::Equidist, vec![101]);
        config.tol = 1e-5;
        let r1 = run_experiment(&config).unwrap();
        let r2 = run_experiment(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap(),
            "identical config must give bit-identical reports"
        );
        // Aggregates match recomputation from the per-a records.
        let rep = &r1.reports[0];
        let lengths: Vec<f64> = rep.per_a.iter().map(|r| r.length).collect();
        assert!((pairwise_sum(&lengths) - rep.total_length).abs() < 1e-12);
        for (i, ratio) in rep.ratios.iter().enumerate() {
            let terms: Vec<Complex64> = rep
                .per_a
                .iter()
                .map(|r| {
                    Complex64::new(
                        r.observable_integrals[i].0,
                        r.observable_integrals[i].1,
                    )
                })
                .collect();
            let again = pairwise_sum_complex(&terms) / rep.total_length;
            assert!((again.re - ratio.ratio.0).abs() < 1e-12);
            assert!((again.im - ratio.ratio.1).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_regularization_ratio_envelope() {
        // The ε-regularized embedding perturbs the normalized observable
        // ratio by at most 10·(q^{−ε} + q^{1/2+3ε}/|H|^{3/4}) on a small
        // grid (full unit group).
        let eps = 0.2f64;
        for q in [101i128, 211] {
            let mut base = ExperimentConfig::new(ExperimentKind::Equidist, vec![q]);
            base.tol = 1e-4;
            let mut reg = base.clone();
            reg.variant = EmbeddingVariant::EpsRegular {
                eps,
                base: Box::new(EmbeddingVariant::MinimalTrace),
            };
            let r0 = run_experiment(&base).unwrap();
            let r1 = run_experiment(&reg).unwrap();
            let h = r0.reports[0].subgroup_size as f64;
            let envelope = 10.0
                * ((q as f64).powf(-eps)
                    + (q as f64).powf(0.5 + 3.0 * eps) / h.powf(0.75));
            for (a, b) in r0.reports[0].ratios.iter().zip(&r1.reports[0].ratios) {
                let gap = (Complex64::new(a.ratio.0, a.ratio.1)
                    - Complex64::new(b.ratio.0, b.ratio.1))
                .norm();
                assert!(
                    gap <= envelope,
                    "q={q}, observable {}: gap {gap} exceeds envelope {envelope}",
                    a.name
                );
            }
        }
    }

    #[test]
    fn config_rejections() {
        let c = ExperimentConfig::new(ExperimentKind::Orbit, vec![]);
        assert!(matches!(
            c.validate(),
            Err(HarnessError::Config { .. })
        ));
        let mut c = ExperimentConfig::new(ExperimentKind::Orbit, vec![35]);
        c.level = 11;
        assert!(c.validate().is_err());
        c.level = 5;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("qorbit-cache-{}", std::process::id()));
        let mut config = ExperimentConfig::new(ExperimentKind::Orbit, vec![35]);
        config.cache_dir = Some(dir.clone());
        let r1 = run_experiment(&config).unwrap();
        let r2 = run_experiment(&config).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn prime_grid_and_slope() {
        let g = prime_grid(100, 200, 5);
        assert_eq!(g.len(), 5);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 1.5, 1.0, 0.5];
        assert!((fit_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }
}
