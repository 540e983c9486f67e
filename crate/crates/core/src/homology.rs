//! Homology of the open modular curve of prime level: decomposition of
//! Γ₀(N) elements into Schreier generators, abelianization, homology
//! classes of orbit geodesics, concentration statistics against the
//! Eisenstein direction, and the group-theoretic obstruction checker.
//!
//! The level-1 group is generated by `S = (0,−1;1,0)` and `T = (1,1;0,1)`
//! with defining relations `S²` and `(ST)³` (projectively).  Cosets of
//! Γ₀(N) are indexed by the projective line over Z/N (size `N+1` for
//! prime `N`), with representatives `I ↔ (0:1)` and `S·Tʲ ↔ (1:j)`.
//! Reidemeister–Schreier rewriting over this transversal turns any
//! Γ₀(N) element — first expanded into an `S,T` word by continued
//! fractions — into a word in `N+1` concrete Schreier generators.
//! Rewriting the conjugated relators and column-reducing their exponent
//! matrix exhibits the free part of the abelianization; homology
//! vectors are coordinates in a fixed basis of that free quotient drawn
//! from `{T} ∪ {(a, −(aa*+1)/N; N, −a*)}`, with the image of `T` (the
//! loop around the cusp, dual to the Eisenstein class) always first.

use crate::modgroup::UnimodularMatrix;
use num::{BigInt, BigRational, Integer, One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HomologyError {
    #[error("level {0} must be a prime ≥ 3")]
    BadLevel(i64),
    #[error("lower-left entry {c} is not divisible by the level {n}")]
    NotInGroup { n: i64, c: String },
    #[error("decomposition failed to reproduce the input matrix")]
    MultiplyBackFailed,
    #[error("homology vector is zero")]
    ZeroVector,
    #[error("modulus {q} is not a multiple of the level {n}")]
    LevelModulusMismatch { n: i64, q: i128 },
    #[error(transparent)]
    ModGroup(#[from] crate::modgroup::ModGroupError),
}

fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

// ---------------------------------------------------------------------
// Exact 2×2 integer matrices of unbounded size.
// ---------------------------------------------------------------------

/// Determinant-one 2×2 matrix over arbitrary-precision integers; the
/// decomposition pipeline works projectively (up to global sign).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigMatrix {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl BigMatrix {
    pub fn identity() -> Self {
        BigMatrix {
            a: BigInt::one(),
            b: BigInt::zero(),
            c: BigInt::zero(),
            d: BigInt::one(),
        }
    }

    pub fn from_unimodular(m: &UnimodularMatrix) -> Self {
        BigMatrix {
            a: BigInt::from(m.a),
            b: BigInt::from(m.b),
            c: BigInt::from(m.c),
            d: BigInt::from(m.d),
        }
    }

    pub fn mul(&self, o: &BigMatrix) -> BigMatrix {
        BigMatrix {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    /// Integer power with arbitrary exponent (inverse for negatives).
    pub fn pow(&self, e: &BigInt) -> BigMatrix {
        let base = if e.is_negative() {
            // Determinant-one inverse.
            BigMatrix {
                a: self.d.clone(),
                b: -self.b.clone(),
                c: -self.c.clone(),
                d: self.a.clone(),
            }
        } else {
            self.clone()
        };
        let mut n = e.abs();
        let mut acc = BigMatrix::identity();
        let mut sq = base;
        let two = BigInt::from(2);
        while !n.is_zero() {
            if n.is_odd() {
                acc = acc.mul(&sq);
            }
            n /= &two;
            if !n.is_zero() {
                sq = sq.mul(&sq);
            }
        }
        acc
    }

    /// Equality in the projective group.
    pub fn projectively_equal(&self, o: &BigMatrix) -> bool {
        (self.a == o.a && self.b == o.b && self.c == o.c && self.d == o.d)
            || (self.a == -&o.a && self.b == -&o.b && self.c == -&o.c && self.d == -&o.d)
    }
}

// ---------------------------------------------------------------------
// Level-1 decomposition by continued fractions.
// ---------------------------------------------------------------------

/// Letter in a level-1 word: the involution `S` or a translation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Level1Letter {
    S,
    T(BigInt),
}

/// Decompose a determinant-one matrix into `S` and `T` runs, valid in
/// the projective group; word length is `O(log max|entry|)`.
pub fn psl2z_decompose(g: &BigMatrix) -> Vec<Level1Letter> {
    assert!(g.det().is_one(), "input must have determinant one");
    let mut m = g.clone();
    let mut word = Vec::new();
    while !m.c.is_zero() {
        // Peel T^k·S with k = ⌊a/c⌋; the new lower-left −(a−kc) has
        // absolute value < |c|, so this is the Euclid algorithm.
        let k = m.a.div_floor(&m.c);
        if !k.is_zero() {
            word.push(Level1Letter::T(k.clone()));
        }
        word.push(Level1Letter::S);
        let na = m.c.clone();
        let nb = m.d.clone();
        let nc = -(&m.a - &k * &m.c);
        let nd = -(&m.b - &k * &m.d);
        m = BigMatrix { a: na, b: nb, c: nc, d: nd };
    }
    // m = ±(1, e; 0, 1).
    let e = if m.a.is_positive() { m.b.clone() } else { -&m.b };
    if !e.is_zero() {
        word.push(Level1Letter::T(e));
    }
    word
}

// ---------------------------------------------------------------------
// Schreier generators and the abelianization.
// ---------------------------------------------------------------------

/// Word in the Schreier generators of a [`GeneratorSet`]: run-length
/// pairs (generator index, exponent); the indexed product reproduces
/// the source matrix projectively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub letters: Vec<(usize, BigInt)>,
}

impl Word {
    /// Exponent sum per generator.
    pub fn abelianize(&self, n_generators: usize) -> Vec<BigInt> {
        let mut v = vec![BigInt::zero(); n_generators];
        for (i, e) in &self.letters {
            v[*i] += e;
        }
        v
    }
}

/// Homology class in the free quotient of the abelianization of Γ₀(N),
/// written in the fixed generator basis with the Eisenstein direction
/// (image of `T`) at index 0.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct HomologyVector {
    /// Basis coordinates (stringified arbitrary-precision integers in
    /// JSON exports).
    #[serde(serialize_with = "serialize_bigints")]
    pub coordinates: Vec<BigInt>,
    /// Set when the level is not ≡ −1 mod 12 (possible undetected
    /// torsion in downstream interpretations) or when a coordinate
    /// solve needed denominator clearing.
    pub degraded: bool,
}

fn serialize_bigints<S: serde::Serializer>(
    v: &[BigInt],
    s: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

impl HomologyVector {
    pub fn zero(dim: usize, degraded: bool) -> Self {
        HomologyVector {
            coordinates: vec![BigInt::zero(); dim],
            degraded,
        }
    }

    pub fn add(&self, o: &HomologyVector) -> HomologyVector {
        assert_eq!(self.coordinates.len(), o.coordinates.len());
        HomologyVector {
            coordinates: self
                .coordinates
                .iter()
                .zip(&o.coordinates)
                .map(|(x, y)| x + y)
                .collect(),
            degraded: self.degraded || o.degraded,
        }
    }

    pub fn neg(&self) -> HomologyVector {
        HomologyVector {
            coordinates: self.coordinates.iter().map(|x| -x).collect(),
            degraded: self.degraded,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coordinates.iter().all(|x| x.is_zero())
    }
}

/// Generating data for Γ₀(N): coset transversal, Schreier generators,
/// the column-reduced relator lattice, and the chosen free-quotient
/// basis (`generators`, image of `T` first).
#[derive(Debug)]
pub struct GeneratorSet {
    pub level: i64,
    /// Basis matrices of the free quotient, drawn from
    /// `{T} ∪ {(a, −(aa*+1)/N; N, −a*)}`, lexicographically smallest
    /// achieving full rank; `generators[0] = T` (the v_E direction).
    pub generators: Vec<UnimodularMatrix>,
    /// Coset representatives indexed by P¹(Z/N): `j ↔ S·Tʲ` for
    /// `0 ≤ j < N` and index `N ↔ I`.
    pub coset_table: Vec<UnimodularMatrix>,
    /// All nontrivial Schreier generators: index 0 = `T`, index 1 =
    /// the wrap generator `(1,0;−N,1)`, index `j+1` = the generator
    /// attached to the transversal pair `(S·Tʲ, S)` for `1 ≤ j < N`.
    pub schreier: Vec<UnimodularMatrix>,
    /// True when `N ≢ −1 (mod 12)` (torsion present in Γ₀(N)).
    pub degraded: bool,
    /// Rank of the free quotient (2g+1 in the torsion-free case).
    pub free_rank: usize,
    // Column transform of the relator exponent matrix: free-quotient
    // coordinates of a raw exponent vector x are (x·w)[rank..].
    w: Vec<Vec<BigInt>>,
    rank: usize,
    // Free-quotient images of `generators`, rows of the basis matrix.
    basis_images: Vec<Vec<BigInt>>,
    // State transition for the letter S: state -> (emitted generator
    // with exponent +1 if any, next state).
    s_transition: Vec<(Option<usize>, usize)>,
}

fn inv_mod(a: i64, n: i64) -> i64 {
    // n prime, 0 < a < n.
    let mut t = (0i64, 1i64);
    let mut r = (n, a);
    while r.1 != 0 {
        let q = r.0 / r.1;
        t = (t.1, t.0 - q * t.1);
        r = (r.1, r.0 - q * r.1);
    }
    t.0.rem_euclid(n)
}

/// Rewrite a level-1 word into Schreier generators, starting from the
/// given coset state; returns the run-length word and the end state.
fn rewrite(
    gs_level: i64,
    s_transition: &[(Option<usize>, usize)],
    word: &[Level1Letter],
    start_state: usize,
) -> (Word, usize) {
    let n = gs_level;
    let idx_inf = n as usize; // coset (0:1), representative I.
    let mut state = start_state;
    let mut letters: Vec<(usize, BigInt)> = Vec::new();
    let emit = |i: usize, e: BigInt, letters: &mut Vec<(usize, BigInt)>| {
        if e.is_zero() {
            return;
        }
        if let Some(last) = letters.last_mut() {
            if last.0 == i {
                last.1 += &e;
                if last.1.is_zero() {
                    letters.pop();
                }
                return;
            }
        }
        letters.push((i, e));
    };
    for letter in word {
        match letter {
            Level1Letter::T(e) => {
                if state == idx_inf {
                    emit(0, e.clone(), &mut letters);
                } else {
                    // Cyclic walk j → j+e mod N; each wrap through the
                    // boundary N−1 → 0 crosses the wrap generator.
                    let j = BigInt::from(state as i64) + e;
                    let nn = BigInt::from(n);
                    let wraps = j.div_floor(&nn);
                    emit(1, wraps, &mut letters);
                    let jm: BigInt = j.mod_floor(&nn);
                    state = i64::try_from(jm).unwrap() as usize;
                }
            }
            Level1Letter::S => {
                let (gen, next) = &s_transition[state];
                if let Some(i) = gen {
                    emit(*i, BigInt::one(), &mut letters);
                }
                state = *next;
            }
        }
    }
    (Word { letters }, state)
}

/// Build the coset table, Schreier generators, abelianized relator
/// lattice, and free-quotient basis for prime `N ≥ 3`.
pub fn schreier_generators(level: i64) -> Result<GeneratorSet, HomologyError> {
    if level < 3 || !is_prime(level) {
        return Err(HomologyError::BadLevel(level));
    }
    let n = level;
    let idx_inf = n as usize;
    // Coset representatives.
    let s = UnimodularMatrix::normalize(0, -1, 1, 0).unwrap();
    let mut coset_table = Vec::with_capacity(n as usize + 1);
    for j in 0..n {
        // S·Tʲ = (0, −1; 1, j).
        coset_table.push(UnimodularMatrix::normalize(0, -1, 1, j as i128).unwrap());
    }
    coset_table.push(UnimodularMatrix::identity());
    let _ = s;

    // Schreier generators.
    let t = UnimodularMatrix::normalize(1, 1, 0, 1).unwrap();
    let wrap = UnimodularMatrix::normalize(1, 0, -(n as i128), 1).unwrap();
    let mut schreier = vec![t, wrap];
    // s_transition[state] = (emitted generator, next state).
    let mut s_transition = vec![(None, 0usize); n as usize + 1];
    s_transition[idx_inf] = (None, 0);
    s_transition[0] = (None, idx_inf);
    for j in 1..n {
        let jp = (n - inv_mod(j, n)) % n; // j′ = −j̄ mod N
        let gen = UnimodularMatrix::normalize(
            -(jp as i128),
            -1,
            (j as i128) * (jp as i128) + 1,
            j as i128,
        )
        .unwrap();
        schreier.push(gen);
        s_transition[j as usize] = (Some(j as usize + 1), jp as usize);
    }
    let k = schreier.len(); // N + 1

    // Abelianized conjugated relators: S² and (ST)³ from every state.
    let relator_s2 = vec![Level1Letter::S, Level1Letter::S];
    let relator_st3 = vec![
        Level1Letter::S,
        Level1Letter::T(BigInt::one()),
        Level1Letter::S,
        Level1Letter::T(BigInt::one()),
        Level1Letter::S,
        Level1Letter::T(BigInt::one()),
    ];
    let mut rows: Vec<Vec<BigInt>> = Vec::new();
    for state in 0..=n as usize {
        for rel in [&relator_s2, &relator_st3] {
            let (word, end) = rewrite(n, &s_transition, rel, state);
            assert_eq!(end, state, "relator must return to its coset");
            rows.push(word.abelianize(k));
        }
    }

    // Column-reduce the relator matrix over Z, accumulating the
    // transform W so that (x·W)[rank..] is the free-quotient image.
    let mut m = rows;
    let mut w: Vec<Vec<BigInt>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect();
    let mut rank = 0usize;
    for row in 0..m.len() {
        if rank == k {
            break;
        }
        // Gcd-eliminate this row across columns rank..k−1.
        loop {
            let mut pivot: Option<usize> = None;
            for c in rank..k {
                if !m[row][c].is_zero()
                    && pivot.map_or(true, |p| m[row][c].abs() < m[row][p].abs())
                {
                    pivot = Some(c);
                }
            }
            let p = match pivot {
                None => break,
                Some(p) => p,
            };
            let mut clean = true;
            for c in rank..k {
                if c == p || m[row][c].is_zero() {
                    continue;
                }
                clean = false;
                let f = &m[row][c] / &m[row][p];
                for r in 0..m.len() {
                    let sub = &f * &m[r][p];
                    m[r][c] -= sub;
                }
                for r in 0..k {
                    let sub = &f * &w[r][p];
                    w[r][c] -= sub;
                }
            }
            if clean {
                // Move the pivot column into position `rank`.
                for r in 0..m.len() {
                    m[r].swap(rank, p);
                }
                for r in 0..k {
                    w[r].swap(rank, p);
                }
                rank += 1;
                break;
            }
        }
    }
    let free_rank = k - rank;

    // Free-quotient image of a raw exponent vector.
    let image = |x: &[BigInt]| -> Vec<BigInt> {
        (rank..k)
            .map(|c| x.iter().zip(w.iter()).map(|(xi, wr)| xi * &wr[c]).sum())
            .collect()
    };

    // Basis selection: T first, then candidates (a, −(aa*+1)/N; N, −a*)
    // in ascending a, kept when they raise the rational rank.
    let decompose_raw = |g: &UnimodularMatrix| -> Vec<BigInt> {
        let word = psl2z_decompose(&BigMatrix::from_unimodular(g));
        let (w1, end) = rewrite(n, &s_transition, &word, idx_inf);
        assert_eq!(end, idx_inf);
        w1.abelianize(k)
    };
    let t = UnimodularMatrix::normalize(1, 1, 0, 1).unwrap();
    let mut generators = vec![t];
    let mut basis_images = vec![image(&decompose_raw(&generators[0]))];
    let mut a = 0i64;
    while basis_images.len() < free_rank {
        a += 1;
        assert!(a < 100 * n, "basis search exhausted the candidate family");
        if a % n == 0 {
            continue;
        }
        let astar = (n - inv_mod(a % n, n)) % n;
        let cand = UnimodularMatrix::normalize(
            a as i128,
            -((a as i128) * (astar as i128) + 1) / (n as i128),
            n as i128,
            -(astar as i128),
        )
        .unwrap();
        let img = image(&decompose_raw(&cand));
        let mut trial: Vec<Vec<BigRational>> = basis_images
            .iter()
            .chain(std::iter::once(&img))
            .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
            .collect();
        if rational_rank(&mut trial) == basis_images.len() + 1 {
            generators.push(cand);
            basis_images.push(img);
        }
    }

    Ok(GeneratorSet {
        level: n,
        generators,
        coset_table,
        schreier,
        degraded: n % 12 != 11,
        free_rank,
        w,
        rank,
        basis_images,
        s_transition,
    })
}

fn rational_rank(rows: &mut [Vec<BigRational>]) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && !rows[r][c].is_zero() {
                let f = &rows[r][c] / &rows[rank][c];
                for cc in c..ncols {
                    let sub = &f * &rows[rank][cc];
                    rows[r][cc] -= sub;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

impl GeneratorSet {
    /// Free-quotient image of a raw exponent vector over the Schreier
    /// generators.
    fn free_image(&self, x: &[BigInt]) -> Vec<BigInt> {
        (self.rank..self.schreier.len())
            .map(|c| {
                x.iter()
                    .zip(self.w.iter())
                    .map(|(xi, wr)| xi * &wr[c])
                    .sum()
            })
            .collect()
    }

    /// Express a free-quotient image in the chosen basis; denominators
    /// are cleared (flagged) if the basis is not a lattice basis.
    fn in_basis(&self, img: &[BigInt]) -> HomologyVector {
        let d = self.free_rank;
        // Solve y·B = img by rational elimination on Bᵀ | imgᵀ.
        let mut aug: Vec<Vec<BigRational>> = (0..d)
            .map(|c| {
                let mut row: Vec<BigRational> = (0..d)
                    .map(|r| BigRational::from_integer(self.basis_images[r][c].clone()))
                    .collect();
                row.push(BigRational::from_integer(img[c].clone()));
                row
            })
            .collect();
        let mut col_of_row = vec![usize::MAX; d];
        let mut rank = 0;
        for c in 0..d {
            let Some(p) = (rank..d).find(|&r| !aug[r][c].is_zero()) else {
                continue;
            };
            aug.swap(rank, p);
            let pivot = aug[rank][c].clone();
            for cc in 0..=d {
                aug[rank][cc] /= &pivot;
            }
            for r in 0..d {
                if r != rank && !aug[r][c].is_zero() {
                    let f = aug[r][c].clone();
                    for cc in 0..=d {
                        let sub = &f * &aug[rank][cc];
                        aug[r][cc] -= sub;
                    }
                }
            }
            col_of_row[rank] = c;
            rank += 1;
        }
        assert_eq!(rank, d, "basis matrix must be invertible");
        let mut y = vec![BigRational::from_integer(BigInt::zero()); d];
        for r in 0..d {
            y[col_of_row[r]] = aug[r][d].clone();
        }
        let mut scaled = false;
        let coords: Vec<BigInt> = y
            .iter()
            .map(|v| {
                if v.is_integer() {
                    v.to_integer()
                } else {
                    scaled = true;
                    (v * BigRational::from_integer(v.denom().clone())).to_integer()
                }
            })
            .collect();
        HomologyVector {
            coordinates: coords,
            degraded: self.degraded || scaled,
        }
    }

    /// Homology class of a raw exponent vector.
    fn class_of_raw(&self, x: &[BigInt]) -> HomologyVector {
        self.in_basis(&self.free_image(x))
    }
}

/// Decompose an element of Γ₀(N) (given with unbounded entries) into a
/// word in the Schreier generators; the product is verified to
/// reproduce the input exactly (projectively) before returning.
pub fn gamma0_decompose_big(
    g: &BigMatrix,
    gs: &GeneratorSet,
) -> Result<Word, HomologyError> {
    let n = BigInt::from(gs.level);
    if !(&g.c % &n).is_zero() {
        return Err(HomologyError::NotInGroup {
            n: gs.level,
            c: g.c.to_string(),
        });
    }
    let level1 = psl2z_decompose(g);
    let idx_inf = gs.level as usize;
    let (word, end) = rewrite(gs.level, &gs.s_transition, &level1, idx_inf);
    if end != idx_inf {
        return Err(HomologyError::MultiplyBackFailed);
    }
    // Exact multiply-back.
    let mut acc = BigMatrix::identity();
    for (i, e) in &word.letters {
        acc = acc.mul(&BigMatrix::from_unimodular(&gs.schreier[*i]).pow(e));
    }
    if !acc.projectively_equal(g) {
        return Err(HomologyError::MultiplyBackFailed);
    }
    Ok(word)
}

/// Decompose a machine-sized Γ₀(N) element.
pub fn gamma0_decompose(
    g: &UnimodularMatrix,
    gs: &GeneratorSet,
) -> Result<Word, HomologyError> {
    gamma0_decompose_big(&BigMatrix::from_unimodular(g), gs)
}

/// Homology class of an arbitrary Γ₀(N) element.
pub fn matrix_class(
    g: &UnimodularMatrix,
    gs: &GeneratorSet,
) -> Result<HomologyVector, HomologyError> {
    let word = gamma0_decompose(g, gs)?;
    Ok(gs.class_of_raw(&word.abelianize(gs.schreier.len())))
}

/// Homology class of the embedded geodesic of `a` modulo `spec.q`.
pub fn homology_class(
    spec: &crate::modgroup::EmbeddingSpec,
    a: i128,
    gs: &GeneratorSet,
) -> Result<HomologyVector, HomologyError> {
    if spec.q % gs.level as i128 != 0 {
        return Err(HomologyError::LevelModulusMismatch {
            n: gs.level,
            q: spec.q,
        });
    }
    let (m, _) = crate::modgroup::embed(a, spec)?;
    matrix_class(&m, gs)
}

/// Coordinate-wise sum of homology classes over a set of residues.
pub fn orbit_sum(
    subgroup: &[i128],
    spec: &crate::modgroup::EmbeddingSpec,
    gs: &GeneratorSet,
) -> Result<HomologyVector, HomologyError> {
    let mut acc = HomologyVector::zero(gs.free_rank, gs.degraded);
    for &a in subgroup {
        acc = acc.add(&homology_class(spec, a, gs)?);
    }
    Ok(acc)
}

/// Sup-norm distance between the normalized vector and the normalized
/// Eisenstein direction `v_E = (1, 0, …, 0)`:
/// `max_i |v_i/max|v| − (v_E)_i|`.
pub fn concentration_distance(v: &HomologyVector) -> Result<f64, HomologyError> {
    if v.is_zero() {
        return Err(HomologyError::ZeroVector);
    }
    let vals: Vec<f64> = v
        .coordinates
        .iter()
        .map(|x| BigRational::from_integer(x.clone()))
        .map(|r| crate::angles::rational_to_f64(&r))
        .collect();
    let norm = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut dist = 0.0f64;
    for (i, x) in vals.iter().enumerate() {
        let e = if i == 0 { 1.0 } else { 0.0 };
        dist = dist.max((x / norm - e).abs());
    }
    Ok(dist)
}

/// Verdict of the obstruction check: a nonzero T-coordinate of the
/// product's class certifies that no conjugate of the product lies in
/// the subgroup generated by the non-T basis generators (conjugation
/// fixes homology classes).
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorollaryVerdict {
    #[serde(serialize_with = "serialize_bigint")]
    pub t_coordinate: BigInt,
    pub obstruction: bool,
    pub class: HomologyVector,
}

fn serialize_bigint<S: serde::Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Form the ordered product of the minimal-trace embeddings of the
/// given residues modulo `q`, decompose it, and report the
/// T-coordinate of its homology class.
pub fn corollary_check(
    a_list: &[i128],
    q: i128,
    gs: &GeneratorSet,
) -> Result<CorollaryVerdict, HomologyError> {
    if q % gs.level as i128 != 0 {
        return Err(HomologyError::LevelModulusMismatch { n: gs.level, q });
    }
    let spec = crate::modgroup::EmbeddingSpec::minimal(q);
    let mut prod = BigMatrix::identity();
    for &a in a_list {
        let (m, _) = crate::modgroup::embed(a, &spec)?;
        prod = prod.mul(&BigMatrix::from_unimodular(&m));
    }
    corollary_check_matrix(&prod, gs)
}

/// Obstruction check for an explicitly given Γ₀(N) product.
pub fn corollary_check_matrix(
    prod: &BigMatrix,
    gs: &GeneratorSet,
) -> Result<CorollaryVerdict, HomologyError> {
    let word = gamma0_decompose_big(prod, gs)?;
    let class = gs.class_of_raw(&word.abelianize(gs.schreier.len()));
    let t = class.coordinates[0].clone();
    Ok(CorollaryVerdict {
        obstruction: !t.is_zero(),
        t_coordinate: t,
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modgroup::EmbeddingSpec;

    fn unimat(a: i128, b: i128, c: i128, d: i128) -> UnimodularMatrix {
        UnimodularMatrix::normalize(a, b, c, d).unwrap()
    }

    fn product_of(word: &[Level1Letter]) -> BigMatrix {
        let s = BigMatrix::from_unimodular(&unimat(0, -1, 1, 0));
        let t = BigMatrix::from_unimodular(&unimat(1, 1, 0, 1));
        let mut acc = BigMatrix::identity();
        for l in word {
            match l {
                Level1Letter::S => acc = acc.mul(&s),
                Level1Letter::T(e) => acc = acc.mul(&t.pow(e)),
            }
        }
        acc
    }

    #[test]
    fn psl2z_decompose_examples() {
        let t = BigMatrix::from_unimodular(&unimat(1, 1, 0, 1));
        assert_eq!(psl2z_decompose(&t), vec![Level1Letter::T(BigInt::from(1))]);
        let s = BigMatrix::from_unimodular(&unimat(0, -1, 1, 0));
        assert_eq!(psl2z_decompose(&s), vec![Level1Letter::S]);
        let g = BigMatrix::from_unimodular(&unimat(2, 1, 5, 3));
        let w = psl2z_decompose(&g);
        assert!(product_of(&w).projectively_equal(&g));
    }

    #[test]
    fn psl2z_decompose_random_multiply_back() {
        // Deterministic pseudo-random unimodular matrices by composing
        // T-powers and S.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) % 19) as i128 - 9
        };
        for _ in 0..200 {
            let mut m = BigMatrix::identity();
            let t = BigMatrix::from_unimodular(&unimat(1, 1, 0, 1));
            let s = BigMatrix::from_unimodular(&unimat(0, -1, 1, 0));
            for _ in 0..6 {
                m = m.mul(&t.pow(&BigInt::from(next()))).mul(&s);
            }
            let w = psl2z_decompose(&m);
            assert!(product_of(&w).projectively_equal(&m));
        }
    }

    #[test]
    fn schreier_structure_level_11() {
        let gs = schreier_generators(11).unwrap();
        assert_eq!(gs.coset_table.len(), 12);
        assert_eq!(gs.schreier.len(), 12);
        for g in &gs.schreier {
            if g.c != 0 {
                assert_eq!(g.c.rem_euclid(11), 0, "generator not in the group: {g:?}");
            }
        }
        assert_eq!(gs.free_rank, 3, "rank 2g+1 with g = 1 at level 11");
        assert!(!gs.degraded);
        assert_eq!(gs.generators.len(), 3);
        assert_eq!(gs.generators[0], unimat(1, 1, 0, 1));
        // All basis generators live in the group.
        for g in &gs.generators[1..] {
            assert_eq!(g.c, 11);
        }
    }

    #[test]
    fn schreier_rejections() {
        assert!(schreier_generators(4).is_err());
        assert!(schreier_generators(2).is_err());
    }

    #[test]
    fn class_of_t_is_ve() {
        for n in [5i64, 7, 11, 13, 23] {
            let gs = schreier_generators(n).unwrap();
            let t = unimat(1, 1, 0, 1);
            let v = matrix_class(&t, &gs).unwrap();
            assert_eq!(v.coordinates[0], BigInt::from(1));
            for c in &v.coordinates[1..] {
                assert!(c.is_zero());
            }
        }
    }

    #[test]
    fn generators_decompose_to_unit_classes() {
        let gs = schreier_generators(11).unwrap();
        for (i, g) in gs.generators.iter().enumerate() {
            let w = gamma0_decompose(g, &gs).unwrap();
            // Multiply-back already checked inside; class must be eᵢ.
            let v = gs.class_of_raw(&w.abelianize(gs.schreier.len()));
            for (j, c) in v.coordinates.iter().enumerate() {
                assert_eq!(*c, BigInt::from((i == j) as i64));
            }
        }
    }

    fn random_gamma0_11(seed: u64, factors: usize) -> BigMatrix {
        let gs = schreier_generators(11).unwrap();
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as usize
        };
        let mut m = BigMatrix::identity();
        for _ in 0..factors {
            let g = &gs.generators[next() % gs.generators.len()];
            let e = BigInt::from((next() % 5) as i64) - 2;
            m = m.mul(&BigMatrix::from_unimodular(g).pow(&e));
        }
        m
    }

    #[test]
    fn homomorphism_and_conjugation_invariance() {
        let gs = schreier_generators(11).unwrap();
        for seed in 0..100u64 {
            let g1 = random_gamma0_11(seed, 4);
            let g2 = random_gamma0_11(seed ^ 0xdeadbeef, 4);
            let w1 = gamma0_decompose_big(&g1, &gs).unwrap();
            let w2 = gamma0_decompose_big(&g2, &gs).unwrap();
            let w12 = gamma0_decompose_big(&g1.mul(&g2), &gs).unwrap();
            let v1 = gs.class_of_raw(&w1.abelianize(gs.schreier.len()));
            let v2 = gs.class_of_raw(&w2.abelianize(gs.schreier.len()));
            let v12 = gs.class_of_raw(&w12.abelianize(gs.schreier.len()));
            assert_eq!(v12, v1.add(&v2), "class(γγ′) = class(γ)+class(γ′)");
            // Conjugation invariance.
            let sigma = random_gamma0_11(seed.wrapping_add(7777), 3);
            let inv = BigMatrix {
                a: sigma.d.clone(),
                b: -sigma.b.clone(),
                c: -sigma.c.clone(),
                d: sigma.a.clone(),
            };
            let conj = sigma.mul(&g1).mul(&inv);
            let wc = gamma0_decompose_big(&conj, &gs).unwrap();
            let vc = gs.class_of_raw(&wc.abelianize(gs.schreier.len()));
            assert_eq!(vc, v1, "conjugation fixes homology classes");
        }
    }

    #[test]
    fn inverse_negates_class() {
        let gs = schreier_generators(11).unwrap();
        let g = random_gamma0_11(42, 5);
        let inv = BigMatrix {
            a: g.d.clone(),
            b: -g.b.clone(),
            c: -g.c.clone(),
            d: g.a.clone(),
        };
        let v = gs.class_of_raw(
            &gamma0_decompose_big(&g, &gs).unwrap().abelianize(gs.schreier.len()),
        );
        let vi = gs.class_of_raw(
            &gamma0_decompose_big(&inv, &gs).unwrap().abelianize(gs.schreier.len()),
        );
        assert_eq!(vi, v.neg());
    }

    #[test]
    fn embedded_class_at_q55() {
        let gs = schreier_generators(11).unwrap();
        let spec = EmbeddingSpec::minimal(55);
        let v = homology_class(&spec, 2, &gs).unwrap();
        assert!(!v.degraded);
        // Rejection for a modulus not divisible by the level.
        let bad = EmbeddingSpec::minimal(56);
        assert!(matches!(
            homology_class(&bad, 3, &gs),
            Err(HomologyError::LevelModulusMismatch { .. })
        ));
    }

    #[test]
    fn concentration_examples() {
        let ve3 = HomologyVector {
            coordinates: vec![BigInt::from(7), BigInt::zero(), BigInt::zero()],
            degraded: false,
        };
        assert!(concentration_distance(&ve3).unwrap().abs() < 1e-15);
        let anti = HomologyVector {
            coordinates: vec![BigInt::from(-1), BigInt::zero(), BigInt::zero()],
            degraded: false,
        };
        assert!((concentration_distance(&anti).unwrap() - 2.0).abs() < 1e-15);
        let zero = HomologyVector::zero(3, false);
        assert_eq!(
            concentration_distance(&zero),
            Err(HomologyError::ZeroVector)
        );
    }

    #[test]
    fn corollary_trivial_product() {
        let gs = schreier_generators(11).unwrap();
        let g = random_gamma0_11(5, 4);
        let inv = BigMatrix {
            a: g.d.clone(),
            b: -g.b.clone(),
            c: -g.c.clone(),
            d: g.a.clone(),
        };
        let verdict = corollary_check_matrix(&g.mul(&inv), &gs).unwrap();
        assert!(!verdict.obstruction);
        assert!(verdict.class.is_zero());
        // Residue-list form with q = 55.
        let v = corollary_check(&[1], 55, &gs).unwrap();
        assert_eq!(v.obstruction, !v.t_coordinate.is_zero());
        assert!(corollary_check(&[1], 56, &gs).is_err());
    }

    #[test]
    fn cross_module_pairing_bilinearity() {
        // The Eisenstein pairing is a homomorphism to Q vanishing on
        // torsion, so pairing(γ) = Σ coords_i · pairing(basis_i).
        let gs = schreier_generators(11).unwrap();
        let base: Vec<num::BigRational> = gs
            .generators
            .iter()
            .map(|g| crate::eisenstein::eisenstein_pairing_exact(g, 11).unwrap())
            .collect();
        for seed in [3u64, 17, 99] {
            let g = random_gamma0_11(seed, 4);
            // Only test matrices that fit the machine-sized pairing API.
            let fits = [&g.a, &g.b, &g.c, &g.d]
                .iter()
                .all(|x| x.to_string().len() < 30);
            if !fits {
                continue;
            }
            let m = unimat(
                i128::try_from(&g.a).unwrap(),
                i128::try_from(&g.b).unwrap(),
                i128::try_from(&g.c).unwrap(),
                i128::try_from(&g.d).unwrap(),
            );
            let direct = crate::eisenstein::eisenstein_pairing_exact(&m, 11).unwrap();
            let v = matrix_class(&m, &gs).unwrap();
            let mut expanded = num::BigRational::from_integer(BigInt::zero());
            for (c, p) in v.coordinates.iter().zip(&base) {
                expanded += num::BigRational::from_integer(c.clone()) * p;
            }
            assert_eq!(direct, expanded, "seed {seed}");
        }
    }
}
