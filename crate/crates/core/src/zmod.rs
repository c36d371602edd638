//! Exact arithmetic over `Z/p^N`.
//!
//! Scalars are [`Residue`]s, matrices are [`Mat2`]s; both carry their
//! [`Modulus`] so that levels can be mixed safely (mixed levels reduce to the
//! smaller one). Everything is `Copy` and every operation is pure.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest admissible `p^N` (exclusive). Products are formed in `u128`.
pub const MODULUS_BOUND: u128 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ZmodError {
    #[error("{0} is not a prime >= 5")]
    UnsupportedPrime(u64),
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("{p}^{level} does not fit the 63-bit residue bound")]
    PrecisionOverflow { p: u64, level: u32 },
    #[error("cannot raise level from {from} to {to} by reduction")]
    LevelIncrease { from: u32, to: u32 },
    #[error("residue {0} is not a unit")]
    NotUnit(u64),
    #[error("matrix is singular modulo p")]
    Singular,
    #[error("{0} is divisible by p and has no Teichmüller lift")]
    TeichmullerDomain(u64),
    #[error("matrix is not diagonal with distinct entries modulo p")]
    RepeatedEigenvalues,
    #[error("matrix has nonzero trace")]
    NotTraceZero,
    #[error("operands use different primes ({0} and {1})")]
    PrimeMismatch(u64, u64),
}

pub type Result<T> = std::result::Result<T, ZmodError>;

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// The ring `Z/p^level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawModulus", into = "RawModulus")]
pub struct Modulus {
    p: u64,
    level: u32,
    modulus: u64,
}

#[derive(Serialize, Deserialize)]
struct RawModulus {
    p: u64,
    level: u32,
}

impl TryFrom<RawModulus> for Modulus {
    type Error = ZmodError;
    fn try_from(raw: RawModulus) -> Result<Self> {
        Modulus::new(raw.p, raw.level)
    }
}

impl From<Modulus> for RawModulus {
    fn from(m: Modulus) -> Self {
        RawModulus {
            p: m.p,
            level: m.level,
        }
    }
}

impl Modulus {
    pub fn new(p: u64, level: u32) -> Result<Self> {
        if p < 5 || !is_prime(p) {
            return Err(ZmodError::UnsupportedPrime(p));
        }
        if level == 0 {
            return Err(ZmodError::ZeroLevel);
        }
        let mut modulus: u128 = 1;
        for _ in 0..level {
            modulus *= p as u128;
            if modulus >= MODULUS_BOUND {
                return Err(ZmodError::PrecisionOverflow { p, level });
            }
        }
        Ok(Modulus {
            p,
            level,
            modulus: modulus as u64,
        })
    }

    /// The residue field `F_p`.
    pub fn field(p: u64) -> Result<Self> {
        Self::new(p, 1)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// `p^level`.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn with_level(&self, level: u32) -> Result<Self> {
        Self::new(self.p, level)
    }

    /// `p^e` as a plain integer; `e` may not exceed the level.
    pub fn power_of_p(&self, e: u32) -> u64 {
        assert!(e <= self.level, "p^{e} exceeds level {}", self.level);
        self.p.pow(e)
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.modulus as i128) as u64
    }

    pub fn reduce_u128(&self, x: u128) -> u64 {
        (x % self.modulus as u128) as u64
    }

    pub fn residue(&self, value: i64) -> Residue {
        Residue {
            value: self.reduce_i128(value as i128),
            modulus: *self,
        }
    }

    pub fn zero(&self) -> Residue {
        self.residue(0)
    }

    pub fn one(&self) -> Residue {
        self.residue(1)
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    fn add(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 + b as u128)
    }

    fn sub(&self, a: u64, b: u64) -> u64 {
        self.reduce_i128(a as i128 - b as i128)
    }

    /// The smaller of two levels over a common prime.
    fn meet(&self, other: &Modulus) -> Modulus {
        assert_eq!(
            self.p, other.p,
            "residue arithmetic requires a common prime"
        );
        if self.level <= other.level {
            *self
        } else {
            *other
        }
    }
}

/// An element of `Z/p^N`, always stored reduced.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Residue {
    value: u64,
    modulus: Modulus,
}

impl fmt::Debug for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}^{}", self.value, self.modulus.p, self.modulus.level)
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Residue {
    pub fn new(value: i64, modulus: Modulus) -> Self {
        modulus.residue(value)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// Representative in `(-p^N/2, p^N/2]`.
    pub fn signed(&self) -> i64 {
        let m = self.modulus.modulus;
        if self.value > m / 2 {
            self.value as i64 - m as i64
        } else {
            self.value as i64
        }
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn level(&self) -> u32 {
        self.modulus.level
    }

    pub fn p(&self) -> u64 {
        self.modulus.p
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn is_unit(&self) -> bool {
        !self.value.is_multiple_of(self.modulus.p)
    }

    /// `p`-adic valuation of the representative, `None` for zero.
    pub fn valuation(&self) -> Option<u32> {
        if self.value == 0 {
            return None;
        }
        let mut v = 0;
        let mut x = self.value;
        while x.is_multiple_of(self.modulus.p) {
            x /= self.modulus.p;
            v += 1;
        }
        Some(v)
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let m = self.modulus;
        let mut base = self.value;
        let mut acc = m.reduce_u128(1);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = m.mul(acc, base);
            }
            base = m.mul(base, base);
            exp >>= 1;
        }
        Residue {
            value: acc,
            modulus: m,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(ZmodError::NotUnit(self.value));
        }
        let m = self.modulus.modulus as i128;
        let (mut r0, mut r1) = (m, self.value as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(Residue {
            value: self.modulus.reduce_i128(t0),
            modulus: self.modulus,
        })
    }

    /// Projection to a lower (or equal) level.
    pub fn reduce(&self, level: u32) -> Result<Self> {
        if level > self.modulus.level {
            return Err(ZmodError::LevelIncrease {
                from: self.modulus.level,
                to: level,
            });
        }
        let m = self.modulus.with_level(level)?;
        Ok(Residue {
            value: self.value % m.modulus,
            modulus: m,
        })
    }

    /// Embeds the representative in `[0, p^N)` at a higher level.
    pub fn lift(&self, level: u32) -> Result<Self> {
        let m = self.modulus.with_level(level)?;
        Ok(Residue {
            value: m.reduce_u128(self.value as u128),
            modulus: m,
        })
    }

    /// `p^e * self`, computed at the same level.
    pub fn shifted(&self, e: u32) -> Self {
        let m = self.modulus;
        let pe = if e >= m.level { 0 } else { m.p.pow(e) };
        Residue {
            value: m.mul(self.value, pe),
            modulus: m,
        }
    }

    /// Exact division by `p^e`, returned modulo `p^(level - e)`.
    pub fn divide_by_p_power(&self, e: u32) -> Option<Self> {
        if e >= self.modulus.level {
            return None;
        }
        let pe = self.modulus.p.pow(e);
        if !self.value.is_multiple_of(pe) {
            return None;
        }
        let m = self.modulus.with_level(self.modulus.level - e).ok()?;
        Some(Residue {
            value: (self.value / pe) % m.modulus,
            modulus: m,
        })
    }
}

impl Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        let m = self.modulus.meet(&rhs.modulus);
        Residue {
            value: m.add(self.value % m.modulus, rhs.value % m.modulus),
            modulus: m,
        }
    }
}

impl Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        let m = self.modulus.meet(&rhs.modulus);
        Residue {
            value: m.sub(self.value % m.modulus, rhs.value % m.modulus),
            modulus: m,
        }
    }
}

impl Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        let m = self.modulus.meet(&rhs.modulus);
        Residue {
            value: m.mul(self.value % m.modulus, rhs.value % m.modulus),
            modulus: m,
        }
    }
}

impl Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        Residue {
            value: self.modulus.sub(0, self.value),
            modulus: self.modulus,
        }
    }
}

/// The Teichmüller representative of `a` at level `level`: the unique
/// `(p-1)`-st root of unity congruent to `a` modulo `p`.
pub fn teichmuller(a: i64, p: u64, level: u32) -> Result<Residue> {
    let m = Modulus::new(p, level)?;
    let a = m.residue(a);
    if !a.is_unit() {
        return Err(ZmodError::TeichmullerDomain(a.value));
    }
    // a^(p^(N-1)) is constant on the class of a mod p and satisfies x^(p-1) = 1.
    let mut x = a;
    for _ in 1..level {
        x = x.pow(p);
    }
    Ok(x)
}

/// A 2x2 matrix over `Z/p^N`, row-major.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mat2 {
    modulus: Modulus,
    entries: [u64; 4],
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.entries;
        write!(
            f,
            "[[{a}, {b}], [{c}, {d}]] mod {}^{}",
            self.modulus.p, self.modulus.level
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.entries;
        write!(f, "({a} {b}; {c} {d})")
    }
}

impl Mat2 {
    pub fn new(modulus: Modulus, entries: [i64; 4]) -> Self {
        Mat2 {
            modulus,
            entries: entries.map(|x| modulus.reduce_i128(x as i128)),
        }
    }

    pub fn from_residues(entries: [[Residue; 2]; 2]) -> Self {
        let m = entries[0][0]
            .modulus
            .meet(&entries[0][1].modulus)
            .meet(&entries[1][0].modulus)
            .meet(&entries[1][1].modulus);
        let flat = [entries[0][0], entries[0][1], entries[1][0], entries[1][1]];
        Mat2 {
            modulus: m,
            entries: flat.map(|r| r.value % m.modulus),
        }
    }

    pub fn identity(modulus: Modulus) -> Self {
        Self::new(modulus, [1, 0, 0, 1])
    }

    pub fn zero(modulus: Modulus) -> Self {
        Self::new(modulus, [0, 0, 0, 0])
    }

    pub fn diag(modulus: Modulus, a: i64, d: i64) -> Self {
        Self::new(modulus, [a, 0, 0, d])
    }

    pub fn diag_residues(a: Residue, d: Residue) -> Self {
        let m = a.modulus.meet(&d.modulus);
        Self::from_residues([[a, m.zero()], [m.zero(), d]])
    }

    /// Upper unitriangular `(1 u; 0 1)`.
    pub fn unipotent(modulus: Modulus, u: i64) -> Self {
        Self::new(modulus, [1, u, 0, 1])
    }

    /// Elementary matrix with a single 1 at `(i, j)`.
    pub fn elementary(modulus: Modulus, i: usize, j: usize) -> Self {
        let mut e = [0i64; 4];
        e[2 * i + j] = 1;
        Self::new(modulus, e)
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn level(&self) -> u32 {
        self.modulus.level
    }

    pub fn p(&self) -> u64 {
        self.modulus.p
    }

    /// Row-major raw representatives.
    pub fn raw(&self) -> [u64; 4] {
        self.entries
    }

    pub fn signed(&self) -> [i64; 4] {
        self.entries.map(|v| Residue { value: v, modulus: self.modulus }.signed())
    }

    pub fn entry(&self, i: usize, j: usize) -> Residue {
        Residue {
            value: self.entries[2 * i + j],
            modulus: self.modulus,
        }
    }

    pub fn det(&self) -> Residue {
        let m = self.modulus;
        let [a, b, c, d] = self.entries;
        Residue {
            value: m.sub(m.mul(a, d), m.mul(b, c)),
            modulus: m,
        }
    }

    pub fn trace(&self) -> Residue {
        let m = self.modulus;
        Residue {
            value: m.add(self.entries[0], self.entries[3]),
            modulus: m,
        }
    }

    pub fn is_invertible(&self) -> bool {
        self.det().is_unit()
    }

    pub fn inverse(&self) -> Result<Self> {
        let det_inv = self.det().inverse().map_err(|_| ZmodError::Singular)?;
        let m = self.modulus;
        let [a, b, c, d] = self.entries;
        let adj = [d, m.sub(0, b), m.sub(0, c), a];
        Ok(Mat2 {
            modulus: m,
            entries: adj.map(|x| m.mul(x, det_inv.value)),
        })
    }

    pub fn scale(&self, s: Residue) -> Self {
        let m = self.modulus.meet(&s.modulus);
        let s = s.value % m.modulus;
        Mat2 {
            modulus: m,
            entries: self.entries.map(|x| m.mul(x % m.modulus, s)),
        }
    }

    /// `p^e * self` at the same level.
    pub fn shifted(&self, e: u32) -> Self {
        let pe = if e >= self.modulus.level { 0 } else { self.modulus.p.pow(e) };
        let m = self.modulus;
        Mat2 {
            modulus: m,
            entries: self.entries.map(|x| m.mul(x, pe)),
        }
    }

    pub fn pow(&self, mut exp: u64) -> Self {
        let mut base = *self;
        let mut acc = Self::identity(self.modulus);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Projection to a lower (or equal) level.
    pub fn reduce(&self, level: u32) -> Result<Self> {
        if level > self.modulus.level {
            return Err(ZmodError::LevelIncrease {
                from: self.modulus.level,
                to: level,
            });
        }
        let m = self.modulus.with_level(level)?;
        Ok(Mat2 {
            modulus: m,
            entries: self.entries.map(|x| x % m.modulus),
        })
    }

    /// Embeds the representatives unchanged at a higher level.
    pub fn lift(&self, level: u32) -> Result<Self> {
        let m = self.modulus.with_level(level)?;
        Ok(Mat2 {
            modulus: m,
            entries: self.entries.map(|x| m.reduce_u128(x as u128)),
        })
    }

    /// `c * self * c^-1`.
    pub fn conjugate_by(&self, c: &Mat2) -> Result<Self> {
        Ok(*c * *self * c.inverse()?)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.modulus)
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries[1] == 0 && self.entries[2] == 0
    }

    pub fn is_upper_unitriangular(&self) -> bool {
        self.entries[0] == 1 % self.modulus.modulus
            && self.entries[2] == 0
            && self.entries[3] == 1 % self.modulus.modulus
    }

    /// Whether `self ≡ other (mod p^level)`.
    pub fn congruent(&self, other: &Mat2, level: u32) -> bool {
        let q = self.modulus.p.pow(level) as u128;
        self.modulus.p == other.modulus.p
            && level <= self.modulus.level
            && level <= other.modulus.level
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(&a, &b)| a as u128 % q == b as u128 % q)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let m = self.modulus.meet(&rhs.modulus);
        let q = m.modulus as u128;
        let [a, b, c, d] = self.entries.map(|x| x as u128 % q);
        let [e, f, g, h] = rhs.entries.map(|x| x as u128 % q);
        Mat2 {
            modulus: m,
            entries: [
                ((a * e + b * g) % q) as u64,
                ((a * f + b * h) % q) as u64,
                ((c * e + d * g) % q) as u64,
                ((c * f + d * h) % q) as u64,
            ],
        }
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let m = self.modulus.meet(&rhs.modulus);
        let mut out = [0u64; 4];
        for (k, o) in out.iter_mut().enumerate() {
            *o = m.add(self.entries[k] % m.modulus, rhs.entries[k] % m.modulus);
        }
        Mat2 {
            modulus: m,
            entries: out,
        }
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let m = self.modulus.meet(&rhs.modulus);
        let mut out = [0u64; 4];
        for (k, o) in out.iter_mut().enumerate() {
            *o = m.sub(self.entries[k] % m.modulus, rhs.entries[k] % m.modulus);
        }
        Mat2 {
            modulus: m,
            entries: out,
        }
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        Mat2::zero(self.modulus) - self
    }
}

/// Plain record form of a matrix: `(p, level)` header plus row-major entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub p: u64,
    pub level: u32,
    pub entries: [u64; 4],
}

impl From<Mat2> for MatrixRecord {
    fn from(m: Mat2) -> Self {
        MatrixRecord {
            p: m.p(),
            level: m.level(),
            entries: m.raw(),
        }
    }
}

impl TryFrom<MatrixRecord> for Mat2 {
    type Error = ZmodError;
    fn try_from(r: MatrixRecord) -> Result<Self> {
        let m = Modulus::new(r.p, r.level)?;
        Ok(Mat2 {
            modulus: m,
            entries: r.entries.map(|x| m.reduce_u128(x as u128)),
        })
    }
}

impl Serialize for Mat2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRecord::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MatrixRecord::deserialize(d)?;
        Mat2::try_from(r).map_err(serde::de::Error::custom)
    }
}

/// A trace-zero matrix, i.e. an element of `Ad^0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TraceZeroMat(Mat2);

impl TraceZeroMat {
    pub fn new(m: Mat2) -> Result<Self> {
        if m.trace().is_zero() {
            Ok(TraceZeroMat(m))
        } else {
            Err(ZmodError::NotTraceZero)
        }
    }

    /// `(x y; z -x)`.
    pub fn from_coords(modulus: Modulus, x: i64, y: i64, z: i64) -> Self {
        TraceZeroMat(Mat2::new(modulus, [x, y, z, -x]))
    }

    pub fn zero(modulus: Modulus) -> Self {
        TraceZeroMat(Mat2::zero(modulus))
    }

    /// Coordinates `(x, y, z)` of `(x y; z -x)`.
    pub fn coords(&self) -> [u64; 3] {
        let [a, b, c, _] = self.0.raw();
        [a, b, c]
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat2 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.raw() == [0; 4]
    }

    pub fn conjugate_by(&self, c: &Mat2) -> Result<Self> {
        Ok(TraceZeroMat(self.0.conjugate_by(c)?))
    }
}

impl Add for TraceZeroMat {
    type Output = TraceZeroMat;
    fn add(self, rhs: Self) -> Self {
        TraceZeroMat(self.0 + rhs.0)
    }
}

impl Sub for TraceZeroMat {
    type Output = TraceZeroMat;
    fn sub(self, rhs: Self) -> Self {
        TraceZeroMat(self.0 - rhs.0)
    }
}

impl Neg for TraceZeroMat {
    type Output = TraceZeroMat;
    fn neg(self) -> Self {
        TraceZeroMat(-self.0)
    }
}

/// Conjugates `m` to diagonal form by a matrix congruent to `I` mod `p`.
///
/// Requires `m` to be diagonal modulo `p` with distinct diagonal entries.
/// Off-diagonal entries are killed one power of `p` at a time; returns
/// `(c, d)` with `c * m * c^-1 = d`.
pub fn hensel_diagonalize(m: &Mat2) -> Result<(Mat2, Mat2)> {
    let modulus = m.modulus();
    let p = modulus.p();
    let residual = m.reduce(1)?;
    if !residual.is_diagonal() || residual.entry(0, 0) == residual.entry(1, 1) {
        return Err(ZmodError::RepeatedEigenvalues);
    }
    let gap_inv = (residual.entry(0, 0) - residual.entry(1, 1)).inverse()?;
    let mut conj = Mat2::identity(modulus);
    let mut cur = *m;
    while !cur.is_diagonal() {
        // Smallest valuation j >= 1 among the off-diagonal entries.
        let j = [cur.entry(0, 1), cur.entry(1, 0)]
            .iter()
            .filter_map(|r| r.valuation())
            .min()
            .expect("non-diagonal matrix has a nonzero off-diagonal entry");
        let pj = p.pow(j);
        let x = ((cur.entries[1] / pj) % p) as i64;
        let y = ((cur.entries[2] / pj) % p) as i64;
        let g = gap_inv.value() as i64;
        let z12 = (x * g).rem_euclid(p as i64);
        let z21 = (-y * g).rem_euclid(p as i64);
        let step = Mat2::identity(modulus) + Mat2::new(modulus, [0, z12, z21, 0]).shifted(j);
        cur = cur.conjugate_by(&step)?;
        conj = step * conj;
    }
    Ok((conj, cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(p: u64, n: u32) -> Modulus {
        Modulus::new(p, n).unwrap()
    }

    #[test]
    fn modulus_validation() {
        assert_eq!(Modulus::new(3, 2), Err(ZmodError::UnsupportedPrime(3)));
        assert_eq!(Modulus::new(9, 2), Err(ZmodError::UnsupportedPrime(9)));
        assert_eq!(Modulus::new(5, 0), Err(ZmodError::ZeroLevel));
        assert!(Modulus::new(5, 27).is_ok());
        assert_eq!(
            Modulus::new(5, 28),
            Err(ZmodError::PrecisionOverflow { p: 5, level: 28 })
        );
    }

    #[test]
    fn teichmuller_examples() {
        assert_eq!(teichmuller(1, 5, 3).unwrap().value(), 1);
        assert_eq!(teichmuller(2, 5, 1).unwrap().value(), 2);
        assert_eq!(teichmuller(2, 5, 2).unwrap().value(), 7);
        assert_eq!(
            teichmuller(10, 5, 2),
            Err(ZmodError::TeichmullerDomain(10))
        );
    }

    #[test]
    fn teichmuller_matches_brute_force() {
        for p in [5u64, 7, 11] {
            for level in 1..=3 {
                let md = m(p, level);
                for a in 1..p {
                    let brute: Vec<u64> = (0..md.modulus())
                        .filter(|x| x % p == a && md.residue(*x as i64).pow(p - 1).value() == 1)
                        .collect();
                    assert_eq!(brute.len(), 1);
                    assert_eq!(teichmuller(a as i64, p, level).unwrap().value(), brute[0]);
                }
            }
        }
    }

    #[test]
    fn residue_mixed_levels_reduce_to_minimum() {
        let a = m(5, 3).residue(101);
        let b = m(5, 2).residue(3);
        let s = a + b;
        assert_eq!(s.level(), 2);
        assert_eq!(s.value(), (101 + 3) % 25);
    }

    #[test]
    fn residue_inverse_and_valuation() {
        let md = m(7, 4);
        let x = md.residue(10);
        assert_eq!((x * x.inverse().unwrap()).value(), 1);
        assert!(md.residue(49).inverse().is_err());
        assert_eq!(md.residue(98).valuation(), Some(2));
        assert_eq!(md.zero().valuation(), None);
        assert_eq!(md.residue(-1).signed(), -1);
    }

    #[test]
    fn identity_law_and_diagonal_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let md = m(5, 3);
        for _ in 0..50 {
            let x = Mat2::new(md, [0; 4].map(|_: i64| rng.gen_range(0..125)));
            assert_eq!(Mat2::identity(md) * x, x);
            assert_eq!(x * Mat2::identity(md), x);
        }
        assert_eq!(Mat2::diag(m(5, 2), 7, 1).det().value(), 7);
    }

    #[test]
    fn random_inverses_mod_125() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let md = m(5, 3);
        let mut checked = 0;
        while checked < 100 {
            let x = Mat2::new(md, [0; 4].map(|_: i64| rng.gen_range(0..125)));
            if !x.is_invertible() {
                assert_eq!(x.inverse(), Err(ZmodError::Singular));
                continue;
            }
            let inv = x.inverse().unwrap();
            assert!((x * inv).is_identity());
            assert!((inv * x).is_identity());
            checked += 1;
        }
    }

    #[test]
    fn power_and_reduction() {
        let md = m(5, 2);
        let a = Mat2::diag(md, 7, 1);
        assert!(a.pow(4).is_identity());
        assert!(!a.pow(2).is_identity());
        assert_eq!(a.reduce(1).unwrap(), Mat2::diag(m(5, 1), 2, 1));
        assert!(a.reduce(3).is_err());
    }

    #[test]
    fn hensel_fixed_point() {
        let d = Mat2::diag(m(5, 4), 7, 1);
        let (c, out) = hensel_diagonalize(&d).unwrap();
        assert!(c.is_identity());
        assert_eq!(out, d);
    }

    #[test]
    fn hensel_recovers_conjugated_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let md = m(5, 2);
        let d = Mat2::diag(md, 7, 1);
        for _ in 0..50 {
            let noise = Mat2::new(md, [0; 4].map(|_: i64| rng.gen_range(0..5)));
            let c = Mat2::identity(md) + noise.shifted(1);
            let x = d.conjugate_by(&c).unwrap();
            let (conj, out) = hensel_diagonalize(&x).unwrap();
            assert_eq!(out, d);
            assert!(conj.reduce(1).unwrap().is_identity());
            assert_eq!(x.conjugate_by(&conj).unwrap(), out);
        }
    }

    #[test]
    fn hensel_matches_characteristic_roots() {
        // Oracle: roots of x^2 - tr x + det mod p^2 found by exhaustive search.
        let md = m(5, 2);
        for t in 0..5 {
            let x = Mat2::new(md, [2, 5 * t, 0, 1]) + Mat2::new(md, [5, 0, 0, 10]);
            let (_, d) = hensel_diagonalize(&x).unwrap();
            let tr = x.trace();
            let det = x.det();
            let roots: Vec<u64> = (0..25i64)
                .filter(|&r| {
                    let r = md.residue(r);
                    (r * r - tr * r + det).is_zero()
                })
                .map(|r| r as u64)
                .collect();
            let mut eig = vec![d.entry(0, 0).value(), d.entry(1, 1).value()];
            eig.sort();
            assert_eq!(roots, eig);
        }
    }

    #[test]
    fn hensel_rejects_repeated_eigenvalues() {
        let x = Mat2::new(m(5, 2), [1, 5, 0, 6]);
        assert_eq!(hensel_diagonalize(&x), Err(ZmodError::RepeatedEigenvalues));
        let y = Mat2::new(m(5, 2), [2, 1, 0, 1]);
        assert_eq!(hensel_diagonalize(&y), Err(ZmodError::RepeatedEigenvalues));
    }

    #[test]
    fn trace_zero_guard() {
        assert!(TraceZeroMat::new(Mat2::diag(m(5, 1), 1, 1)).is_err());
        let t = TraceZeroMat::from_coords(m(5, 1), 1, 2, 3);
        assert_eq!(t.coords(), [1, 2, 3]);
    }
}
