//! Unit groups, Dirichlet characters with exact root-of-unity values,
//! Gauss sums, and plain/twisted/coset Kloosterman sums.
//!
//! Character values are kept as exact rational angles ([`Angle`]) and
//! collapsed to floating complex numbers only when a sum is evaluated;
//! multiplicativity and orthogonality checks are therefore exact.  All
//! floating sums reduce in fixed pairwise order.

use crate::angles::{Angle, AngleSum};
use crate::summation::pairwise_sum_complex;
use num::complex::Complex64;
use num::BigInt;
use std::collections::BTreeSet;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CharSumError {
    #[error("modulus {0} out of supported range")]
    BadModulus(i64),
    #[error("{a} is not a unit modulo {q}")]
    NotAUnit { a: i64, q: i64 },
    #[error("coset evaluation paths disagree: |direct - characters| = {0}")]
    InconsistentPaths(f64),
}

/// Cyclic decomposition of `(Z/qZ)^×` with a discrete-log table.
#[derive(Debug)]
pub struct UnitGroup {
    pub q: i64,
    /// One generator per cyclic factor, lifted mod `q`.
    pub generators: Vec<i64>,
    /// Orders of the cyclic factors; their product is `φ(q)`.
    pub orders: Vec<i64>,
    /// `dlog[a]` = exponent vector of `a`, `None` for non-units.
    dlog: Vec<Option<Vec<i64>>>,
    /// Units mod `q` in ascending order.
    units: Vec<i64>,
}

fn factorize(mut n: i64) -> Vec<(i64, u32)> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut k = 0;
            while n % p == 0 {
                n /= p;
                k += 1;
            }
            out.push((p, k));
        }
        p += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn pow_mod(b: i64, mut e: i64, m: i64) -> i64 {
    let mut acc: i128 = 1;
    let mut bb: i128 = (b.rem_euclid(m)) as i128;
    let m128 = m as i128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * bb % m128;
        }
        bb = bb * bb % m128;
        e >>= 1;
    }
    acc as i64
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Euler totient.
pub fn euler_phi(q: i64) -> i64 {
    factorize(q)
        .into_iter()
        .map(|(p, k)| (p - 1) * p.pow(k - 1))
        .product::<i64>()
        .max(1)
}

fn primitive_root_mod_p(p: i64) -> i64 {
    let phi = p - 1;
    let fac = factorize(phi);
    'outer: for g in 2..p {
        for (f, _) in &fac {
            if pow_mod(g, phi / f, p) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("every prime has a primitive root")
}

impl UnitGroup {
    /// Build the unit group mod `q` by CRT over the prime powers of `q`.
    pub fn new(q: i64) -> Result<Self, CharSumError> {
        if q < 1 || q > 1 << 24 {
            return Err(CharSumError::BadModulus(q));
        }
        // Per-prime-power cyclic generators, then CRT-lift each to be
        // congruent to the local generator at its prime and 1 elsewhere.
        let mut generators = Vec::new();
        let mut orders = Vec::new();
        for (p, k) in factorize(q) {
            let pk = p.pow(k);
            if p == 2 {
                if k == 2 {
                    generators.push(crt_lift(3, pk, q));
                    orders.push(2);
                } else if k >= 3 {
                    generators.push(crt_lift(pk - 1, pk, q));
                    orders.push(2);
                    generators.push(crt_lift(5, pk, q));
                    orders.push(pk / 4);
                }
                // k == 1: trivial factor.
            } else {
                let mut g = primitive_root_mod_p(p);
                if k > 1 {
                    // Ensure g stays primitive mod p²  (hence mod p^k).
                    if pow_mod(g, p - 1, p * p) == 1 {
                        g += p;
                    }
                }
                generators.push(crt_lift(g, pk, q));
                orders.push((p - 1) * p.pow(k - 1));
            }
        }
        // Enumerate exponent tuples to fill the discrete log table.
        let mut dlog: Vec<Option<Vec<i64>>> = vec![None; q.max(2) as usize];
        let nfac = generators.len();
        let mut exps = vec![0i64; nfac];
        let mut value: i128 = 1;
        let q128 = q as i128;
        // Mixed-radix counter; value tracks Π g_i^{e_i} incrementally.
        let total: i64 = orders.iter().product::<i64>().max(1);
        // Precompute generator powers for fast increments.
        for _ in 0..total {
            let v = (value.rem_euclid(q128)) as usize;
            let v = if q == 1 { 0 } else { v };
            if dlog[v.max(0)].is_none() {
                dlog[v] = Some(exps.clone());
            }
            // Increment the mixed-radix counter.
            let mut i = 0;
            loop {
                if i == nfac {
                    break;
                }
                exps[i] += 1;
                value = value * generators[i] as i128 % q128.max(2);
                if exps[i] < orders[i] {
                    break;
                }
                // Wrapped: multiply handled above brings g^ord = 1; reset.
                exps[i] = 0;
                i += 1;
            }
        }
        let units: Vec<i64> = (1..q.max(2))
            .filter(|a| gcd(*a, q) == 1)
            .collect();
        let units = if q == 1 { vec![] } else { units };
        Ok(UnitGroup {
            q,
            generators,
            orders,
            dlog,
            units,
        })
    }

    pub fn phi(&self) -> i64 {
        self.orders.iter().product::<i64>().max(1)
    }

    pub fn units(&self) -> &[i64] {
        &self.units
    }

    pub fn is_unit(&self, a: i64) -> bool {
        self.q == 1 || self.dlog[a.rem_euclid(self.q.max(2)) as usize].is_some()
    }

    /// Exponent vector of `a` in the cyclic decomposition.
    pub fn discrete_log(&self, a: i64) -> Option<&[i64]> {
        if self.q == 1 {
            return None;
        }
        self.dlog[a.rem_euclid(self.q) as usize]
            .as_deref()
    }
}

/// CRT lift: the residue mod `q` that is `g` mod `pk` and 1 mod `q/pk`.
fn crt_lift(g: i64, pk: i64, q: i64) -> i64 {
    let rest = q / pk;
    if rest == 1 {
        return g.rem_euclid(q);
    }
    // x = g + pk·t ≡ 1 (mod rest).
    let inv = crate::modgroup::inverse_mod(pk as i128, rest as i128).unwrap() as i64;
    let t = ((1 - g).rem_euclid(rest) as i128 * inv as i128).rem_euclid(rest as i128) as i64;
    (g as i128 + pk as i128 * t as i128).rem_euclid(q as i128) as i64
}

/// A Dirichlet character mod `q`, given by exponents against the cyclic
/// decomposition of the unit group.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    pub group: Arc<UnitGroup>,
    /// One exponent per cyclic factor: `χ(g_i) = e(exponents[i]/orders[i])`.
    pub exponents: Vec<i64>,
}

impl DirichletCharacter {
    pub fn q(&self) -> i64 {
        self.group.q
    }

    /// Exact angle of `χ(a)`, or `None` when `gcd(a, q) > 1`.
    pub fn angle(&self, a: i64) -> Option<Angle> {
        let dl = if self.group.q == 1 {
            return Some(Angle::zero());
        } else {
            self.group.discrete_log(a)?
        };
        let mut acc = Angle::zero();
        for ((e, k), ord) in self
            .exponents
            .iter()
            .zip(dl)
            .zip(&self.group.orders)
        {
            acc = acc.add(Angle::new(e * k, *ord));
        }
        Some(acc)
    }

    /// `χ(a)` as a complex number (0 on non-units).
    pub fn value(&self, a: i64) -> Complex64 {
        match self.angle(a) {
            Some(t) => t.to_complex(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `χ(a)` as an exact root-of-unity combination (empty on non-units).
    pub fn value_exact(&self, a: i64) -> AngleSum {
        match self.angle(a) {
            Some(t) => AngleSum::root(t),
            None => AngleSum::zero(),
        }
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|e| *e == 0)
    }

    /// `χ(-1)`, either `1` or `-1`.
    pub fn parity(&self) -> i64 {
        if self.q() <= 2 {
            return 1;
        }
        let t = self.angle(self.q() - 1).expect("-1 is always a unit");
        if t.is_zero() {
            1
        } else {
            assert_eq!((t.numer(), t.denom()), (1, 2), "χ(-1) must be ±1");
            -1
        }
    }

    pub fn is_odd(&self) -> bool {
        self.parity() == -1
    }

    pub fn conj(&self) -> DirichletCharacter {
        DirichletCharacter {
            group: Arc::clone(&self.group),
            exponents: self
                .exponents
                .iter()
                .zip(&self.group.orders)
                .map(|(e, ord)| (-e).rem_euclid(*ord))
                .collect(),
        }
    }

    /// Order of the character in the dual group.
    pub fn order(&self) -> i64 {
        let mut ord = 1i64;
        for (e, f) in self.exponents.iter().zip(&self.group.orders) {
            if *e != 0 {
                let g = gcd(*e, *f);
                ord = num::integer::lcm(ord, f / g);
            }
        }
        ord
    }

    /// Conductor: least `m | q` such that χ is trivial on units ≡ 1 mod m.
    pub fn conductor(&self) -> i64 {
        let q = self.q();
        let mut divisors: Vec<i64> = (1..=q).filter(|m| q % m == 0).collect();
        divisors.sort_unstable();
        'outer: for m in divisors {
            for &a in self.group.units() {
                if a % m == 1 % m && !self.angle(a).unwrap().is_zero() {
                    continue 'outer;
                }
            }
            return m;
        }
        unreachable!("χ is trivial on units ≡ 1 mod q")
    }

    /// The primitive character mod `conductor(χ)` inducing χ.
    pub fn primitive_inducing(&self) -> DirichletCharacter {
        let m = self.conductor();
        let sub = Arc::new(UnitGroup::new(m).unwrap());
        let mut exponents = Vec::with_capacity(sub.generators.len());
        for (g, ord) in sub.generators.iter().zip(&sub.orders) {
            // Lift g to a unit mod q congruent to g mod m.
            let mut b = *g;
            while gcd(b, self.q()) != 1 {
                b += m;
            }
            let t = self.angle(b).expect("lift is a unit");
            // χ*(g) = e(e/ord): recover the exponent from the angle.
            assert_eq!(
                ord % t.denom(),
                0,
                "angle of χ on the lifted generator must have order dividing the factor order"
            );
            let e = t.numer() * (ord / t.denom());
            exponents.push(e.rem_euclid(*ord));
        }
        DirichletCharacter {
            group: sub,
            exponents,
        }
    }
}

/// All φ(q) Dirichlet characters mod `q`, in lexicographic exponent order.
pub fn characters(q: i64) -> Result<Vec<DirichletCharacter>, CharSumError> {
    let group = Arc::new(UnitGroup::new(q)?);
    let mut out = Vec::with_capacity(group.phi() as usize);
    let nfac = group.orders.len();
    let mut exps = vec![0i64; nfac];
    loop {
        out.push(DirichletCharacter {
            group: Arc::clone(&group),
            exponents: exps.clone(),
        });
        let mut i = nfac;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            exps[i] += 1;
            if exps[i] < group.orders[i] {
                break;
            }
            exps[i] = 0;
            if i == 0 {
                return Ok(out);
            }
        }
    }
}

/// Gauss sum `τ(χ) = Σ_{a mod m} χ(a) e(a/m)`.
pub fn gauss_sum(chi: &DirichletCharacter) -> Complex64 {
    let m = chi.q();
    if m == 1 {
        return Complex64::new(1.0, 0.0);
    }
    let mut vals = Vec::with_capacity(chi.group.units().len());
    for &a in chi.group.units() {
        let t = chi.angle(a).unwrap().add(Angle::new(a, m));
        vals.push(t.to_complex());
    }
    pairwise_sum_complex(&vals)
}

/// Gauss sum as an exact root-of-unity combination.
pub fn gauss_sum_exact(chi: &DirichletCharacter) -> AngleSum {
    let m = chi.q();
    let mut s = AngleSum::zero();
    if m == 1 {
        return AngleSum::integer(1);
    }
    for &a in chi.group.units() {
        s.push(chi.angle(a).unwrap().add(Angle::new(a, m)), BigInt::from(1));
    }
    s
}

/// Kloosterman sum `S_χ(m, n; q) = Σ_{a unit} χ(a) e((ma + n·a⁻¹)/q)`,
/// with the plain sum when `chi` is `None`.
///
/// Plain sums are real; the imaginary part is asserted below 1e-12 and
/// suppressed.
pub fn kloosterman(
    m: i64,
    n: i64,
    q: i64,
    chi: Option<&DirichletCharacter>,
) -> Result<Complex64, CharSumError> {
    let group_storage;
    let group: &UnitGroup = match chi {
        Some(c) => {
            assert_eq!(c.q(), q, "character modulus must match q");
            &c.group
        }
        None => {
            group_storage = UnitGroup::new(q)?;
            &group_storage
        }
    };
    let mut vals = Vec::with_capacity(group.units().len());
    for &a in group.units() {
        let abar = crate::modgroup::inverse_mod(a as i128, q as i128).unwrap() as i64;
        let e = Angle::new(m * a + n * abar, q);
        let t = match chi {
            Some(c) => c.angle(a).unwrap().add(e),
            None => e,
        };
        vals.push(t.to_complex());
    }
    let s = pairwise_sum_complex(&vals);
    if chi.is_none() {
        assert!(
            s.im.abs() < 1e-12,
            "plain Kloosterman sum must be real, got imaginary part {}",
            s.im
        );
        return Ok(Complex64::new(s.re, 0.0));
    }
    Ok(s)
}

/// A coset `cH` of a subgroup of units mod `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetSpec {
    pub q: i64,
    pub subgroup_generators: Vec<i64>,
    pub coset_rep: i64,
}

/// Closure of the generators under multiplication mod `q`, sorted.
pub fn enumerate_subgroup(spec: &CosetSpec) -> Result<Vec<i64>, CharSumError> {
    let q = spec.q;
    for &g in &spec.subgroup_generators {
        if gcd(g, q) != 1 {
            return Err(CharSumError::NotAUnit { a: g, q });
        }
    }
    let mut set = BTreeSet::new();
    set.insert(1i64.rem_euclid(q));
    let mut frontier = vec![1i64.rem_euclid(q)];
    while let Some(x) = frontier.pop() {
        for &g in &spec.subgroup_generators {
            let y = (x as i128 * g as i128).rem_euclid(q as i128) as i64;
            if set.insert(y) {
                frontier.push(y);
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Both evaluations of a coset Kloosterman sum.
#[derive(Debug, Clone, Copy)]
pub struct CosetKloosterman {
    /// Direct sum over the enumerated coset `cH`.
    pub direct: Complex64,
    /// `(|H|/φ(q)) Σ_{χ trivial on H} χ̄(c) S_χ(m, n; q)`.
    pub via_characters: Complex64,
}

/// Kloosterman sum restricted to a coset, evaluated both directly and by
/// expansion over characters trivial on the subgroup.
pub fn coset_kloosterman(
    spec: &CosetSpec,
    m: i64,
    n: i64,
) -> Result<CosetKloosterman, CharSumError> {
    let q = spec.q;
    if gcd(spec.coset_rep, q) != 1 {
        return Err(CharSumError::NotAUnit {
            a: spec.coset_rep,
            q,
        });
    }
    let subgroup = enumerate_subgroup(spec)?;
    let mut vals = Vec::with_capacity(subgroup.len());
    for &h in &subgroup {
        let a = (spec.coset_rep as i128 * h as i128).rem_euclid(q as i128) as i64;
        let abar = crate::modgroup::inverse_mod(a as i128, q as i128).unwrap() as i64;
        vals.push(Angle::new(m * a + n * abar, q).to_complex());
    }
    let direct = pairwise_sum_complex(&vals);

    let chars = characters(q)?;
    let phi = chars.len() as f64;
    let mut terms = Vec::new();
    for chi in &chars {
        if subgroup
            .iter()
            .all(|&h| chi.angle(h).map(|t| t.is_zero()).unwrap_or(false))
        {
            let s = kloosterman(m, n, q, Some(chi))?;
            let cbar = chi.conj().value(spec.coset_rep);
            terms.push(cbar * s);
        }
    }
    let via_characters =
        pairwise_sum_complex(&terms) * (subgroup.len() as f64 / phi);
    Ok(CosetKloosterman {
        direct,
        via_characters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_group_structure() {
        let g5 = UnitGroup::new(5).unwrap();
        assert_eq!(g5.orders, vec![4]);
        assert_eq!(g5.phi(), 4);
        // The generator really has order 4.
        let g = g5.generators[0];
        assert_eq!(pow_mod(g, 4, 5), 1);
        assert_ne!(pow_mod(g, 2, 5), 1);

        let g8 = UnitGroup::new(8).unwrap();
        assert_eq!(g8.orders, vec![2, 2]);

        let g2 = UnitGroup::new(2).unwrap();
        assert_eq!(g2.phi(), 1);
        assert!(g2.orders.is_empty());
    }

    #[test]
    fn unit_group_generates_everything() {
        for q in [5i64, 8, 12, 16, 35, 101, 210, 1024] {
            let g = UnitGroup::new(q).unwrap();
            assert_eq!(g.phi(), euler_phi(q));
            assert_eq!(g.units().len() as i64, euler_phi(q));
            for &a in g.units() {
                assert!(g.discrete_log(a).is_some(), "missing dlog for {a} mod {q}");
            }
        }
    }

    #[test]
    fn character_count_and_parity() {
        for q in [5i64, 8, 12, 35] {
            let chars = characters(q).unwrap();
            assert_eq!(chars.len() as i64, euler_phi(q));
            for chi in &chars {
                assert!(chi.parity() == 1 || chi.parity() == -1);
            }
        }
    }

    #[test]
    fn conductor_examples() {
        let chars5 = characters(5).unwrap();
        let principal = chars5.iter().find(|c| c.is_principal()).unwrap();
        assert_eq!(principal.conductor(), 1);
        let quadratic = chars5.iter().find(|c| c.order() == 2).unwrap();
        assert_eq!(quadratic.conductor(), 5);

        // The character mod 10 agreeing with the quadratic mod 5.
        let chars10 = characters(10).unwrap();
        let quad10 = chars10.iter().find(|c| c.order() == 2).unwrap();
        assert_eq!(quad10.conductor(), 5);
        let star = quad10.primitive_inducing();
        assert_eq!(star.q(), 5);
        for a in [1, 3, 7, 9] {
            assert_eq!(quad10.angle(a), star.angle(a % 5));
        }
    }

    #[test]
    fn gauss_sum_examples() {
        let chars5 = characters(5).unwrap();
        let quadratic = chars5.iter().find(|c| c.order() == 2).unwrap();
        let t = gauss_sum(quadratic);
        assert!((t - Complex64::new(5f64.sqrt(), 0.0)).norm() < 1e-12);

        let chars3 = characters(3).unwrap();
        let odd = chars3.iter().find(|c| c.is_odd()).unwrap();
        let t = gauss_sum(odd);
        assert!((t - Complex64::new(0.0, 3f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn kloosterman_examples() {
        let s = kloosterman(1, 1, 5, None).unwrap();
        assert!((s.re - 0.3819660).abs() < 1e-6);
        let s = kloosterman(1, 0, 5, None).unwrap();
        assert!((s.re - -1.0).abs() < 1e-12);
    }

    #[test]
    fn kloosterman_symmetry() {
        for q in [5i64, 12, 35] {
            for (m, n) in [(1, 2), (3, 4), (0, 1)] {
                let a = kloosterman(m, n, q, None).unwrap();
                let b = kloosterman(n, m, q, None).unwrap();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn subgroup_examples() {
        let sq7 = CosetSpec {
            q: 7,
            subgroup_generators: vec![1, 2, 4],
            coset_rep: 1,
        };
        assert_eq!(enumerate_subgroup(&sq7).unwrap(), vec![1, 2, 4]);

        let neg5 = CosetSpec {
            q: 5,
            subgroup_generators: vec![4],
            coset_rep: 1,
        };
        assert_eq!(enumerate_subgroup(&neg5).unwrap(), vec![1, 4]);

        let two5 = CosetSpec {
            q: 5,
            subgroup_generators: vec![2],
            coset_rep: 1,
        };
        assert_eq!(enumerate_subgroup(&two5).unwrap(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn coset_kloosterman_trivial_cases() {
        // Full group: both paths equal the plain sum.
        let spec = CosetSpec {
            q: 5,
            subgroup_generators: vec![2],
            coset_rep: 1,
        };
        let ck = coset_kloosterman(&spec, 1, 1).unwrap();
        let plain = kloosterman(1, 1, 5, None).unwrap();
        assert!((ck.direct - plain).norm() < 1e-12);
        assert!((ck.via_characters - plain).norm() < 1e-10);

        // Singleton subgroup: one-term sum e(2/5).
        let spec = CosetSpec {
            q: 5,
            subgroup_generators: vec![1],
            coset_rep: 1,
        };
        let ck = coset_kloosterman(&spec, 1, 1).unwrap();
        let expect = Angle::new(2, 5).to_complex();
        assert!((ck.direct - expect).norm() < 1e-12);
        assert!((ck.via_characters - expect).norm() < 1e-10);
    }

    #[test]
    fn orthogonality_exact() {
        for q in [5i64, 12, 16] {
            let chars = characters(q).unwrap();
            let group = UnitGroup::new(q).unwrap();
            for &a in group.units() {
                let mut s = AngleSum::zero();
                for chi in &chars {
                    s.add_assign(&chi.value_exact(a));
                }
                if a == 1 {
                    let mut expect = s.clone();
                    expect.sub_assign(&AngleSum::integer(chars.len() as i64));
                    assert!(expect.is_zero_exact());
                } else {
                    assert!(s.is_zero_exact(), "orthogonality failed at a={a}, q={q}");
                }
            }
        }
    }
}
