//! Local deformation calculus at a tamely ramified prime `l ≠ p`.
//!
//! The tame quotient of the local Galois group is generated by a Frobenius
//! `σ` and an inertia generator `τ` subject to `σ τ σ^-1 = τ^l`. A
//! [`LocalRep`] records their images in `GL_2(Z/p^n)`; residually
//! `σ ↦ diag(a, 1)` with `a ≡ l (mod p)` and `τ ↦ I`.
//!
//! `H^1` of the adjoint trace-zero module is two-dimensional with basis
//! `r` (unramified: `σ ↦ diag(1,-1)`, `τ ↦ 0`) and `s` (null:
//! `σ ↦ 0`, `τ ↦ E_12`). Acting by `s` preserves the special form
//! `σ ↦ diag(l,1)`, `τ ↦ (1 u; 0 1)`; any class with a nonzero `r`
//! coordinate can repair it.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{FpMatrix, LinalgError};
use crate::zmod::{hensel_diagonalize, Mat2, Modulus, Residue, TraceZeroMat, ZmodError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TameError {
    #[error(transparent)]
    Zmod(#[from] ZmodError),
    #[error("l = {l} is congruent to 0 or ±1 mod {p}")]
    UnsupportedPrime { p: u64, l: u64 },
    #[error("matrices do not have the residual shape σ ≡ diag({0}, 1), τ ≡ I")]
    ResidualShape(u64),
    #[error("σ and τ live at different levels")]
    LevelMismatch,
    #[error("cocycle value at τ is outside the l-eigenspace of the residual Frobenius")]
    InvalidCocycle,
    #[error("exponent {e} outside 1..={max}")]
    ExponentRange { e: u32, max: u32 },
    #[error("conjugated inertia image is not upper unitriangular; the tame relation fails")]
    RelationViolated,
    #[error("class has zero unramified coordinate and cannot repair the Frobenius eigenvalue")]
    NullClass,
    #[error("representation does not reduce to a special one at level {0}")]
    NotLiftOfSpecial(u32),
    #[error("det σ is not l at level {0}")]
    Determinant(u32),
    #[error("representation is not in exact special form")]
    NotSpecial,
    #[error("u_next does not reduce to the current parameter")]
    InconsistentLift,
    #[error("u must be divisible by p")]
    ParameterNotDivisible,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, TameError>;

/// The prime `p` together with the tame prime `l` (as an integer
/// representative, usually the prime itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TameModel {
    p: u64,
    l: u64,
}

impl TameModel {
    pub fn new(p: u64, l: u64) -> Result<Self> {
        Modulus::field(p)?;
        let r = l % p;
        if r == 0 || r == 1 || r == p - 1 {
            return Err(TameError::UnsupportedPrime { p, l });
        }
        Ok(TameModel { p, l })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn field(&self) -> Modulus {
        Modulus::field(self.p).expect("validated at construction")
    }

    pub fn modulus(&self, level: u32) -> Result<Modulus> {
        Ok(Modulus::new(self.p, level)?)
    }

    /// `l` as a residue at `level`.
    pub fn l_at(&self, level: u32) -> Result<Residue> {
        let m = self.modulus(level)?;
        Ok(Residue::new((self.l % m.modulus()) as i64, m))
    }

    /// The residual Frobenius entry `a ≡ l (mod p)`.
    pub fn residual_eigenvalue(&self) -> u64 {
        self.l % self.p
    }

    /// Residual Frobenius image `diag(a, 1)` over `F_p`.
    pub fn residual_frobenius(&self) -> Mat2 {
        Mat2::diag(self.field(), self.residual_eigenvalue() as i64, 1)
    }

    /// Multiplicative order of `l` modulo `p`.
    pub fn order_of_l_mod_p(&self) -> u64 {
        let a = self.residual_eigenvalue();
        let mut x = a;
        let mut k = 1;
        while x != 1 {
            x = x * a % self.p;
            k += 1;
        }
        k
    }
}

/// Images of `σ` and `τ` in `GL_2(Z/p^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalRep {
    model: TameModel,
    sigma: Mat2,
    tau: Mat2,
}

impl LocalRep {
    /// Checks the residual shape; the tame relation and determinants are
    /// checked separately by [`check_relation`] and [`LocalRep::determinants_ok`].
    pub fn new(model: TameModel, sigma: Mat2, tau: Mat2) -> Result<Self> {
        if sigma.modulus() != tau.modulus() {
            return Err(TameError::LevelMismatch);
        }
        if sigma.p() != model.p {
            return Err(TameError::Zmod(ZmodError::UnsupportedPrime(sigma.p())));
        }
        let (s1, t1) = (sigma.reduce(1)?, tau.reduce(1)?);
        if s1 != model.residual_frobenius() || !t1.is_identity() {
            return Err(TameError::ResidualShape(model.residual_eigenvalue()));
        }
        Ok(LocalRep { model, sigma, tau })
    }

    /// The special representation `σ ↦ diag(l, 1)`, `τ ↦ (1 u; 0 1)`.
    pub fn special(model: TameModel, level: u32, u: i64) -> Result<Self> {
        let m = model.modulus(level)?;
        if u.rem_euclid(model.p as i64) != 0 {
            return Err(TameError::ParameterNotDivisible);
        }
        let l = model.l_at(level)?;
        let sigma = Mat2::diag_residues(l, m.one());
        let tau = Mat2::unipotent(m, u);
        Self::new(model, sigma, tau)
    }

    pub fn model(&self) -> &TameModel {
        &self.model
    }

    pub fn level(&self) -> u32 {
        self.sigma.level()
    }

    pub fn sigma(&self) -> &Mat2 {
        &self.sigma
    }

    pub fn tau(&self) -> &Mat2 {
        &self.tau
    }

    pub fn reduce(&self, level: u32) -> Result<Self> {
        Self::new(self.model, self.sigma.reduce(level)?, self.tau.reduce(level)?)
    }

    pub fn conjugate_by(&self, c: &Mat2) -> Result<Self> {
        Self::new(
            self.model,
            self.sigma.conjugate_by(c)?,
            self.tau.conjugate_by(c)?,
        )
    }

    /// `det σ = l` and `det τ = 1` at the working level.
    pub fn determinants_ok(&self) -> bool {
        let l = self.model.l_at(self.level()).expect("level validated");
        self.sigma.det() == l && self.tau.det().value() == 1
    }

    /// Exact special shape: `σ = diag(l, 1)` and `τ` upper unitriangular.
    pub fn is_special_exact(&self) -> bool {
        let l = self.model.l_at(self.level()).expect("level validated");
        self.sigma == Mat2::diag_residues(l, self.sigma.modulus().one())
            && self.tau.is_upper_unitriangular()
    }

    /// The parameter `u` of an exactly special representation.
    pub fn u(&self) -> Option<Residue> {
        self.is_special_exact().then(|| self.tau.entry(0, 1))
    }

    /// Whether the inertia image is nontrivial.
    pub fn is_ramified(&self) -> bool {
        !self.tau.is_identity()
    }
}

impl fmt::Display for LocalRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "σ ↦ {}, τ ↦ {} (mod {}^{})",
            self.sigma,
            self.tau,
            self.model.p,
            self.level()
        )
    }
}

/// Whether `σ τ σ^-1 = τ^l` holds at the representation's level.
pub fn check_relation(rep: &LocalRep) -> bool {
    match rep.tau.conjugate_by(&rep.sigma) {
        Ok(lhs) => lhs == rep.tau.pow(rep.model.l),
        Err(_) => false,
    }
}

/// A 1-cocycle on the tame quotient with values in `Ad^0` over `F_p`,
/// given by its values at `σ` and `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cocycle {
    f_sigma: TraceZeroMat,
    f_tau: TraceZeroMat,
}

impl Cocycle {
    pub fn new(f_sigma: TraceZeroMat, f_tau: TraceZeroMat) -> Self {
        Cocycle { f_sigma, f_tau }
    }

    pub fn from_coords(p: u64, sigma: [i64; 3], tau: [i64; 3]) -> Result<Self> {
        let m = Modulus::field(p)?;
        Ok(Cocycle {
            f_sigma: TraceZeroMat::from_coords(m, sigma[0], sigma[1], sigma[2]),
            f_tau: TraceZeroMat::from_coords(m, tau[0], tau[1], tau[2]),
        })
    }

    /// Reads a cocycle from two row-major integer quadruples.
    pub fn from_quadruples(p: u64, sigma: [i64; 4], tau: [i64; 4]) -> Result<Self> {
        let m = Modulus::field(p)?;
        Ok(Cocycle {
            f_sigma: TraceZeroMat::new(Mat2::new(m, sigma))?,
            f_tau: TraceZeroMat::new(Mat2::new(m, tau))?,
        })
    }

    pub fn zero(p: u64) -> Result<Self> {
        Self::from_coords(p, [0; 3], [0; 3])
    }

    /// The unramified class `r`: `σ ↦ diag(1,-1)`, `τ ↦ 0`.
    pub fn unramified(p: u64) -> Result<Self> {
        Self::from_coords(p, [1, 0, 0], [0, 0, 0])
    }

    /// The null class `s`: `σ ↦ 0`, `τ ↦ E_12`.
    pub fn null(p: u64) -> Result<Self> {
        Self::from_coords(p, [0, 0, 0], [0, 1, 0])
    }

    /// `g ↦ M - g·M` for `g ∈ {σ, τ}`; vanishes at `τ` because `τ` acts trivially.
    pub fn coboundary(model: &TameModel, m: &TraceZeroMat) -> Result<Self> {
        let frob = model.residual_frobenius();
        let at_sigma = *m - m.conjugate_by(&frob)?;
        Ok(Cocycle {
            f_sigma: at_sigma,
            f_tau: TraceZeroMat::zero(model.field()),
        })
    }

    pub fn p(&self) -> u64 {
        self.f_sigma.matrix().p()
    }

    pub fn f_sigma(&self) -> &TraceZeroMat {
        &self.f_sigma
    }

    pub fn f_tau(&self) -> &TraceZeroMat {
        &self.f_tau
    }

    pub fn scale(&self, alpha: u64) -> Self {
        let m = self.f_sigma.matrix().modulus();
        let a = Residue::new((alpha % m.p()) as i64, m);
        Cocycle {
            f_sigma: TraceZeroMat::new(self.f_sigma.matrix().scale(a)).expect("trace stays zero"),
            f_tau: TraceZeroMat::new(self.f_tau.matrix().scale(a)).expect("trace stays zero"),
        }
    }

    /// Coordinates in `F_p^6`: `(x, y, z)` at `σ` then at `τ`.
    pub fn to_vector(&self) -> Vec<u64> {
        let mut v = self.f_sigma.coords().to_vec();
        v.extend(self.f_tau.coords());
        v
    }

    pub fn from_vector(p: u64, v: &[u64]) -> Result<Self> {
        assert_eq!(v.len(), 6);
        let c = |i: usize| v[i] as i64;
        Self::from_coords(p, [c(0), c(1), c(2)], [c(3), c(4), c(5)])
    }

    pub fn is_zero(&self) -> bool {
        self.f_sigma.is_zero() && self.f_tau.is_zero()
    }

    /// The relation-induced condition `Ad(σ̄) f(τ) = l f(τ)`.
    pub fn check(&self, model: &TameModel) -> Result<()> {
        let conj = self.f_tau.matrix().conjugate_by(&model.residual_frobenius())?;
        let l = Residue::new(model.residual_eigenvalue() as i64, model.field());
        if conj == self.f_tau.matrix().scale(l) {
            Ok(())
        } else {
            Err(TameError::InvalidCocycle)
        }
    }
}

impl Add for Cocycle {
    type Output = Cocycle;
    fn add(self, rhs: Cocycle) -> Cocycle {
        Cocycle {
            f_sigma: self.f_sigma + rhs.f_sigma,
            f_tau: self.f_tau + rhs.f_tau,
        }
    }
}

impl Sub for Cocycle {
    type Output = Cocycle;
    fn sub(self, rhs: Cocycle) -> Cocycle {
        Cocycle {
            f_sigma: self.f_sigma - rhs.f_sigma,
            f_tau: self.f_tau - rhs.f_tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CocycleSpace {
    pub z1_basis: Vec<Cocycle>,
    pub b1_basis: Vec<Cocycle>,
    /// `[r, s]`.
    pub h1_basis: [Cocycle; 2],
}

impl CocycleSpace {
    pub fn dims(&self) -> (usize, usize, usize) {
        let z = self.z1_basis.len();
        let b = self.b1_basis.len();
        (z, b, z - b)
    }
}

/// Cocycles, coboundaries and the `(r, s)` basis of `H^1`.
///
/// `Z^1` is cut out by the linear condition the tame relation imposes on
/// `f(τ)` (`f(σ)` is unconstrained); `B^1` is the image of `M ↦ ∂M`.
pub fn cocycle_space(model: &TameModel) -> Result<CocycleSpace> {
    let p = model.p;
    let field = model.field();
    let frob = model.residual_frobenius();
    let a = model.residual_eigenvalue();

    // Linear map on the τ-coordinates: X ↦ Ad(σ̄)X - a X.
    let mut cond = FpMatrix::zeros(p, 3, 6);
    for (k, unit) in [[1, 0, 0], [0, 1, 0], [0, 0, 1]].iter().enumerate() {
        let x = TraceZeroMat::from_coords(field, unit[0], unit[1], unit[2]);
        let img = x.matrix().conjugate_by(&frob)? - x.matrix().scale(Residue::new(a as i64, field));
        let img = TraceZeroMat::new(img)?.coords();
        for (row, v) in img.iter().enumerate() {
            cond.set(row, 3 + k, *v);
        }
    }
    let z1_basis = cond
        .kernel()
        .iter()
        .map(|v| Cocycle::from_vector(p, v))
        .collect::<Result<Vec<_>>>()?;

    let mut b1_vectors: Vec<Vec<u64>> = Vec::new();
    for unit in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
        let m = TraceZeroMat::from_coords(field, unit[0], unit[1], unit[2]);
        b1_vectors.push(Cocycle::coboundary(model, &m)?.to_vector());
    }
    // Extract an independent subset, keeping canonical order.
    let mut b1_basis = Vec::new();
    let mut chosen: Vec<Vec<u64>> = Vec::new();
    for v in b1_vectors {
        let mut trial = chosen.clone();
        trial.push(v.clone());
        if crate::linalg::span_rank(p, 6, &trial) > chosen.len() {
            chosen = trial;
            b1_basis.push(Cocycle::from_vector(p, &v)?);
        }
    }

    Ok(CocycleSpace {
        z1_basis,
        b1_basis,
        h1_basis: [Cocycle::unramified(p)?, Cocycle::null(p)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Coboundary,
    Unramified,
    Null,
    Mixed,
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassKind::Coboundary => "coboundary",
            ClassKind::Unramified => "unramified",
            ClassKind::Null => "null",
            ClassKind::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Coordinates `(a, b)` of a class in the `(r, s)` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CocycleClassification {
    pub kind: ClassKind,
    pub a: u64,
    pub b: u64,
}

impl CocycleClassification {
    pub fn is_nonnull(&self) -> bool {
        self.a != 0
    }

    pub fn is_ramified(&self) -> bool {
        self.b != 0
    }
}

pub fn classify(c: &Cocycle, model: &TameModel) -> Result<CocycleClassification> {
    c.check(model)?;
    let space = cocycle_space(model)?;
    let p = model.p;
    let mut cols = vec![space.h1_basis[0].to_vector(), space.h1_basis[1].to_vector()];
    cols.extend(space.b1_basis.iter().map(Cocycle::to_vector));
    let coords = FpMatrix::from_columns(p, 6, &cols)
        .solve(&c.to_vector())
        .map_err(|_| TameError::InvalidCocycle)?;
    let (a, b) = (coords[0], coords[1]);
    let kind = match (a != 0, b != 0) {
        (false, false) => ClassKind::Coboundary,
        (true, false) => ClassKind::Unramified,
        (false, true) => ClassKind::Null,
        (true, true) => ClassKind::Mixed,
    };
    Ok(CocycleClassification { kind, a, b })
}

/// `g ↦ (I + p^e f(g)) rep(g)` for `g ∈ {σ, τ}`, with `1 <= e < level`.
pub fn act(f: &Cocycle, rep: &LocalRep, e: u32) -> Result<LocalRep> {
    let level = rep.level();
    if e == 0 || e >= level {
        return Err(TameError::ExponentRange { e, max: level.saturating_sub(1) });
    }
    let m = rep.sigma.modulus();
    let id = Mat2::identity(m);
    let twist = |x: &TraceZeroMat| -> Result<Mat2> { Ok(id + x.matrix().lift(level)?.shifted(e)) };
    LocalRep::new(
        rep.model,
        twist(&f.f_sigma)? * rep.sigma,
        twist(&f.f_tau)? * rep.tau,
    )
}

/// Result of conjugating a representation into diagonal-Frobenius form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalized {
    /// Strict-equivalence conjugator, `≡ I (mod p)`.
    pub conjugator: Mat2,
    pub eigenvalues: (Residue, Residue),
    pub u: Residue,
    /// `conjugator · rep · conjugator^-1`.
    pub rep: LocalRep,
}

impl Normalized {
    /// Special up to strict equivalence: the Frobenius eigenvalues are `(l, 1)`.
    pub fn is_special(&self) -> bool {
        self.rep.is_special_exact()
    }
}

pub fn normalize_to_special(rep: &LocalRep) -> Result<Normalized> {
    let (conjugator, diag) = hensel_diagonalize(&rep.sigma)?;
    let tau = rep.tau.conjugate_by(&conjugator)?;
    if !tau.is_upper_unitriangular() {
        return Err(TameError::RelationViolated);
    }
    let rep = LocalRep::new(rep.model, diag, tau)?;
    Ok(Normalized {
        conjugator,
        eigenvalues: (diag.entry(0, 0), diag.entry(1, 1)),
        u: tau.entry(0, 1),
        rep,
    })
}

/// Finds the unique `α ∈ F_p` with `(α f)·rep` special (after normalization).
///
/// `rep` lives at level `n + 1` and reduces to a special representation at
/// level `n`; `f` must have a nonzero unramified coordinate.
pub fn adjust_to_special(rep: &LocalRep, f: &Cocycle) -> Result<(u64, LocalRep)> {
    let model = rep.model;
    let cls = classify(f, &model)?;
    if !cls.is_nonnull() {
        return Err(TameError::NullClass);
    }
    let level = rep.level();
    if level < 2 {
        return Err(TameError::ExponentRange { e: 0, max: 0 });
    }
    let n = level - 1;
    if rep.sigma.det() != model.l_at(level)? {
        return Err(TameError::Determinant(level));
    }
    let norm = normalize_to_special(rep)?;
    let l = model.l_at(level)?;
    let gap = norm.eigenvalues.0 - l;
    let t = gap
        .divide_by_p_power(n)
        .ok_or(TameError::NotLiftOfSpecial(n))?
        .value()
        % model.p;
    let p = model.p;
    // The σ-eigenvalue moves by p^n·α·a·λ₁ to first order.
    let slope = f.f_sigma().coords()[0] * model.residual_eigenvalue() % p;
    let slope_inv = Residue::new(slope as i64, model.field()).inverse()?.value();
    let alpha = (p - t) % p * slope_inv % p;
    let adjusted = normalize_to_special(&act(&f.scale(alpha), rep, n)?)?;
    debug_assert!(adjusted.is_special());
    Ok((alpha, adjusted.rep))
}

/// Lifts a special representation by replacing `u` with a lift `u_next`.
pub fn special_lift_step(rep: &LocalRep, u_next: Residue) -> Result<LocalRep> {
    let u = rep.u().ok_or(TameError::NotSpecial)?;
    let level = rep.level();
    if u_next.level() != level + 1 || u_next.reduce(level)? != u {
        return Err(TameError::InconsistentLift);
    }
    LocalRep::special(rep.model, level + 1, u_next.value() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> TameModel {
        TameModel::new(5, 7).unwrap()
    }

    #[test]
    fn model_rejects_plus_minus_one() {
        assert!(TameModel::new(5, 11).is_err());
        assert!(TameModel::new(5, 19).is_err());
        assert!(TameModel::new(5, 10).is_err());
        assert!(TameModel::new(3, 2).is_err());
        assert_eq!(model().order_of_l_mod_p(), 4);
    }

    #[test]
    fn relation_examples() {
        let md = model();
        let m = md.modulus(2).unwrap();
        let special = LocalRep::special(md, 2, 5).unwrap();
        assert!(check_relation(&special));
        let trivial = LocalRep::new(md, Mat2::diag(m, 7, 1), Mat2::identity(m)).unwrap();
        assert!(check_relation(&trivial));
        let lower = LocalRep::new(md, Mat2::diag(m, 7, 1), Mat2::new(m, [1, 0, 5, 1])).unwrap();
        assert!(!check_relation(&lower));
    }

    #[test]
    fn residual_shape_enforced() {
        let md = model();
        let m = md.modulus(2).unwrap();
        assert_eq!(
            LocalRep::new(md, Mat2::diag(m, 3, 1), Mat2::identity(m)),
            Err(TameError::ResidualShape(2))
        );
        assert!(LocalRep::new(md, Mat2::diag(m, 7, 1), Mat2::unipotent(m, 1)).is_err());
        assert_eq!(LocalRep::special(md, 2, 3), Err(TameError::ParameterNotDivisible));
    }

    #[test]
    fn space_dims_and_basis() {
        for (p, l) in [(5, 7), (7, 2), (13, 2)] {
            let sp = cocycle_space(&TameModel::new(p, l).unwrap()).unwrap();
            assert_eq!(sp.dims(), (4, 2, 2));
        }
        let sp = cocycle_space(&model()).unwrap();
        assert!(sp.h1_basis[0].f_tau().is_zero());
        assert_eq!(sp.h1_basis[0].f_sigma().coords(), [1, 0, 0]);
        assert_eq!(sp.h1_basis[1].f_tau().coords(), [0, 1, 0]);
    }

    #[test]
    fn classify_examples() {
        let md = model();
        let r = Cocycle::unramified(5).unwrap();
        let s = Cocycle::null(5).unwrap();
        let c = classify(&r, &md).unwrap();
        assert_eq!((c.kind, c.a, c.b), (ClassKind::Unramified, 1, 0));
        let c = classify(&s, &md).unwrap();
        assert_eq!((c.kind, c.a, c.b), (ClassKind::Null, 0, 1));
        let m = TraceZeroMat::from_coords(md.field(), 2, 3, 4);
        let mixed = r + s + Cocycle::coboundary(&md, &m).unwrap();
        let c = classify(&mixed, &md).unwrap();
        assert_eq!((c.kind, c.a, c.b), (ClassKind::Mixed, 1, 1));
        let bad = Cocycle::from_coords(5, [0, 0, 0], [0, 0, 1]).unwrap();
        assert_eq!(classify(&bad, &md), Err(TameError::InvalidCocycle));
    }

    #[test]
    fn act_examples() {
        let md = model();
        let rep = LocalRep::special(md, 2, 5).unwrap();
        assert_eq!(act(&Cocycle::zero(5).unwrap(), &rep, 1).unwrap(), rep);
        let out = act(&Cocycle::unramified(5).unwrap(), &LocalRep::special(md, 2, 0).unwrap(), 1).unwrap();
        assert_eq!(*out.sigma(), Mat2::diag(md.modulus(2).unwrap(), 17, 21));
        assert_eq!(
            act(&Cocycle::null(5).unwrap(), &rep, 2),
            Err(TameError::ExponentRange { e: 2, max: 1 })
        );
        assert!(act(&Cocycle::null(5).unwrap(), &rep, 0).is_err());
    }

    #[test]
    fn null_action_shifts_parameter() {
        let md = model();
        let rep = LocalRep::special(md, 3, 5).unwrap();
        let out = act(&Cocycle::null(5).unwrap(), &rep, 2).unwrap();
        assert_eq!(out.u().unwrap().value(), 30);
    }

    #[test]
    fn normalize_examples() {
        let md = model();
        let rep = LocalRep::special(md, 3, 25).unwrap();
        let n = normalize_to_special(&rep).unwrap();
        assert!(n.conjugator.is_identity());
        assert_eq!((n.eigenvalues.0.value(), n.eigenvalues.1.value()), (7, 1));
        assert_eq!(n.u.value(), 25);

        let perturbed = act(&Cocycle::unramified(5).unwrap(), &LocalRep::special(md, 2, 5).unwrap(), 1).unwrap();
        let n = normalize_to_special(&perturbed).unwrap();
        assert!(n.conjugator.is_identity());
        assert_eq!((n.eigenvalues.0.value(), n.eigenvalues.1.value()), (17, 21));
        assert!(!n.is_special());
        assert_eq!(n.u.valuation(), Some(1));
    }

    #[test]
    fn worked_adjustment() {
        let md = model();
        let m = md.modulus(2).unwrap();
        let rep = LocalRep::new(md, Mat2::diag(m, 17, 21), Mat2::identity(m)).unwrap();
        let (alpha, adjusted) = adjust_to_special(&rep, &Cocycle::unramified(5).unwrap()).unwrap();
        assert_eq!(alpha, 4);
        assert_eq!(*adjusted.sigma(), Mat2::diag(m, 7, 1));
        assert!(adjusted.is_special_exact());
    }

    #[test]
    fn adjustment_of_special_is_zero() {
        let md = model();
        let rep = LocalRep::special(md, 4, 25).unwrap();
        let f = Cocycle::from_coords(5, [3, 1, 2], [0, 4, 0]).unwrap();
        let (alpha, adjusted) = adjust_to_special(&rep, &f).unwrap();
        assert_eq!(alpha, 0);
        assert_eq!(adjusted, rep);
    }

    #[test]
    fn null_class_cannot_adjust() {
        let md = model();
        let rep = LocalRep::special(md, 3, 5).unwrap();
        assert_eq!(
            adjust_to_special(&rep, &Cocycle::null(5).unwrap()),
            Err(TameError::NullClass)
        );
    }

    #[test]
    fn special_lift_step_examples() {
        let md = model();
        let rep = LocalRep::special(md, 2, 5).unwrap();
        let m3 = md.modulus(3).unwrap();
        for u in [5, 30, 55, 80, 105] {
            let next = special_lift_step(&rep, Residue::new(u, m3)).unwrap();
            assert!(check_relation(&next));
            assert_eq!(next.reduce(2).unwrap(), rep);
            assert_eq!(next.u().unwrap().value(), u as u64);
        }
        assert_eq!(
            special_lift_step(&rep, Residue::new(10, m3)),
            Err(TameError::InconsistentLift)
        );
    }
}
