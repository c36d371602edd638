//! Finite group computations: subgroup closure, the search for a section
//! of `GL_2(Z/p^2) → GL_2(F_p)`, semidirect products with `Ad^0` layers,
//! centralizers and the Chebotarev classes used to pick new primes.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::FpMatrix;
use crate::zmod::{teichmuller, Mat2, Modulus, Residue, TraceZeroMat, ZmodError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupsError {
    #[error(transparent)]
    Zmod(#[from] ZmodError),
    #[error("generator {0} is singular")]
    SingularGenerator(usize),
    #[error("generators must share one modulus")]
    MixedModuli,
    #[error("partial search: {checked} of {total} candidates exceed the budget of {budget}")]
    BudgetExceeded { checked: u64, total: u64, budget: u64 },
    #[error("generating pair has closure {got}, expected {expected}")]
    BadGenerators { got: String, expected: u64 },
    #[error("residual matrix must be diagonal with distinct entries mod p")]
    RepeatedEigenvalues,
    #[error("layer index {index} out of range for {layers} layers")]
    Layer { index: usize, layers: usize },
    #[error("group order does not fit in 128 bits")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, GroupsError>;

/// Which construction a computation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "uncond", alias = "unconditional")]
    Unconditional,
    #[serde(rename = "grh")]
    Grh,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Unconditional => "uncond",
            Variant::Grh => "grh",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uncond" | "unconditional" => Ok(Variant::Unconditional),
            "grh" => Ok(Variant::Grh),
            other => Err(format!("unknown variant '{other}' (expected uncond or grh)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "order", rename_all = "snake_case")]
pub enum Closure {
    Order(u64),
    CapExceeded,
}

impl Closure {
    pub fn order(&self) -> Option<u64> {
        match self {
            Closure::Order(n) => Some(*n),
            Closure::CapExceeded => None,
        }
    }
}

fn check_generators(gens: &[Mat2]) -> Result<Option<Modulus>> {
    let Some(first) = gens.first() else {
        return Ok(None);
    };
    for (i, g) in gens.iter().enumerate() {
        if g.modulus() != first.modulus() {
            return Err(GroupsError::MixedModuli);
        }
        if !g.is_invertible() {
            return Err(GroupsError::SingularGenerator(i));
        }
    }
    Ok(Some(first.modulus()))
}

/// Order of the subgroup generated by `gens`, or `CapExceeded` once more
/// than `cap` elements are found.
pub fn closure(gens: &[Mat2], cap: u64) -> Result<Closure> {
    let Some(m) = check_generators(gens)? else {
        return Ok(if cap >= 1 { Closure::Order(1) } else { Closure::CapExceeded });
    };
    let id = Mat2::identity(m);
    let mut seen: HashSet<[u64; 4]> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(id.raw());
    queue.push_back(id);
    while let Some(x) = queue.pop_front() {
        for g in gens {
            let y = x * *g;
            if seen.insert(y.raw()) {
                if seen.len() as u64 > cap {
                    return Ok(Closure::CapExceeded);
                }
                queue.push_back(y);
            }
        }
    }
    Ok(Closure::Order(seen.len() as u64))
}

/// Closure specialised to small moduli: elements are indexed densely and
/// the visited set is a reusable bitmap.
struct DenseClosure {
    q: u64,
    visited: Vec<bool>,
    touched: Vec<u32>,
}

impl DenseClosure {
    fn new(q: u64) -> Self {
        DenseClosure {
            q,
            visited: vec![false; (q * q * q * q) as usize],
            touched: Vec::new(),
        }
    }

    fn index(&self, m: [u64; 4]) -> u32 {
        (((m[0] * self.q + m[1]) * self.q + m[2]) * self.q + m[3]) as u32
    }

    fn mul(&self, a: [u64; 4], b: [u64; 4]) -> [u64; 4] {
        let q = self.q;
        [
            (a[0] * b[0] + a[1] * b[2]) % q,
            (a[0] * b[1] + a[1] * b[3]) % q,
            (a[2] * b[0] + a[3] * b[2]) % q,
            (a[2] * b[1] + a[3] * b[3]) % q,
        ]
    }

    fn run(&mut self, gens: &[[u64; 4]], cap: u64) -> Closure {
        for &i in &self.touched {
            self.visited[i as usize] = false;
        }
        self.touched.clear();
        let id = [1, 0, 0, 1];
        let i0 = self.index(id);
        self.visited[i0 as usize] = true;
        self.touched.push(i0);
        let mut head = 0;
        let mut elems = vec![id];
        while head < elems.len() {
            let x = elems[head];
            head += 1;
            for g in gens {
                let y = self.mul(x, *g);
                let iy = self.index(y);
                if !self.visited[iy as usize] {
                    self.visited[iy as usize] = true;
                    self.touched.push(iy);
                    if self.touched.len() as u64 > cap {
                        return Closure::CapExceeded;
                    }
                    elems.push(y);
                }
            }
        }
        Closure::Order(self.touched.len() as u64)
    }
}

/// `|GL_2(Z/p^n)| = p^{4(n-1)} (p^2 - 1)(p^2 - p)`.
/// `|GL2(Z/p^level)|`, or `None` if it does not fit in a `u128`.
pub fn gl2_order(p: u64, level: u32) -> Option<u128> {
    let p = u128::from(p);
    p.checked_pow(4 * (level - 1))?.checked_mul((p * p - 1) * (p * p - p))
}

pub fn primitive_root(p: u64) -> u64 {
    (2..p)
        .find(|&g| {
            let mut x = 1;
            (1..p - 1).all(|_| {
                x = x * g % p;
                x != 1
            })
        })
        .expect("p is prime")
}

/// The generating pair `diag(g, 1)` and `(0 -1; 1 0)(1 1; 0 1)` of `GL_2(F_p)`.
pub fn standard_generators(p: u64) -> Result<(Mat2, Mat2)> {
    let m = Modulus::field(p)?;
    let x = Mat2::diag(m, primitive_root(p) as i64, 1);
    let y = Mat2::new(m, [0, -1, 1, 0]) * Mat2::new(m, [1, 1, 0, 1]);
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum SectionVerdict {
    NoSection { candidates: u64 },
    SectionFound { x: Mat2, y: Mat2, candidates: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionReport {
    pub p: u64,
    pub level: u32,
    pub target_order: u64,
    pub verdict: SectionVerdict,
    /// Candidates rejected because the capped closure overflowed.
    pub cap_rejections: u64,
    /// Candidates rejected with a closure of some other order `<= target`.
    pub order_rejections: u64,
    pub elapsed_ms: u128,
}

impl SectionReport {
    pub fn is_no_section(&self) -> bool {
        matches!(self.verdict, SectionVerdict::NoSection { .. })
    }
}

/// Default budget for [`section_search`], in candidate pairs.
pub const DEFAULT_SECTION_BUDGET: u64 = 1_000_000;

/// All `p^4` lifts to level `level` of a matrix over `F_p` (just the matrix
/// itself when `level == 1`).
fn lifts(base: &Mat2, level: u32) -> Result<Vec<[u64; 4]>> {
    let p = base.p();
    let m = Modulus::new(p, level)?;
    let b = base.lift(level)?;
    if level == 1 {
        return Ok(vec![b.raw()]);
    }
    let shift = m.power_of_p(level - 1);
    let mut out = Vec::with_capacity((p * p * p * p) as usize);
    for code in 0..p.pow(4) {
        let digits = [code % p, code / p % p, code / (p * p) % p, code / (p * p * p)];
        let mut e = b.raw();
        for (k, d) in digits.iter().enumerate() {
            e[k] = (e[k] + d * shift) % m.modulus();
        }
        out.push(e);
    }
    Ok(out)
}

fn search(p: u64, level: u32, budget: u64) -> Result<SectionReport> {
    let start = Instant::now();
    let (x, y) = standard_generators(p)?;
    let target = gl2_order(p, 1).expect("GL2(F_p) order fits") as u64;
    match closure(&[x, y], target + 1)? {
        Closure::Order(n) if n == target => {}
        other => {
            return Err(GroupsError::BadGenerators {
                got: format!("{other:?}"),
                expected: target,
            })
        }
    }
    let lx = lifts(&x, level)?;
    let ly = lifts(&y, level)?;
    let total = lx.len() as u64 * ly.len() as u64;
    if total > budget {
        return Err(GroupsError::BudgetExceeded { checked: 0, total, budget });
    }
    let q = Modulus::new(p, level)?.modulus();
    let cap_rej = AtomicU64::new(0);
    let ord_rej = AtomicU64::new(0);
    let witness = lx
        .par_iter()
        .map_init(
            || DenseClosure::new(q),
            |dc, &a| {
                let mut hit = None;
                for &b in &ly {
                    match dc.run(&[a, b], target + 1) {
                        Closure::CapExceeded => {
                            cap_rej.fetch_add(1, Ordering::Relaxed);
                        }
                        Closure::Order(n) if n == target => {
                            hit.get_or_insert((a, b));
                        }
                        Closure::Order(_) => {
                            ord_rej.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                }
                hit
            },
        )
        .filter_map(|h| h)
        .min();
    let m = Modulus::new(p, level)?;
    let as_mat = |e: [u64; 4]| Mat2::new(m, e.map(|v| v as i64));
    let verdict = match witness {
        Some((a, b)) => SectionVerdict::SectionFound { x: as_mat(a), y: as_mat(b), candidates: total },
        None => SectionVerdict::NoSection { candidates: total },
    };
    Ok(SectionReport {
        p,
        level,
        target_order: target,
        verdict,
        cap_rejections: cap_rej.into_inner(),
        order_rejections: ord_rej.into_inner(),
        elapsed_ms: start.elapsed().as_millis(),
    })
}

/// Exhaustive search over all pairs of lifts mod `p^2` of the standard
/// generators for a pair generating a subgroup of order `|GL_2(F_p)|`.
pub fn section_search(p: u64) -> Result<SectionReport> {
    section_search_with_budget(p, DEFAULT_SECTION_BUDGET)
}

pub fn section_search_with_budget(p: u64, budget: u64) -> Result<SectionReport> {
    search(p, 2, budget)
}

/// The same search over the trivial extension `GL_2(F_p) × 1`, where the
/// generators themselves form a section.
pub fn split_sanity_search(p: u64) -> Result<SectionReport> {
    search(p, 1, DEFAULT_SECTION_BUDGET)
}

/// `H = (Ad^0)^layers ⋊ GL_2(Z/p^c_level)`, with `GL_2` acting on every
/// layer by conjugation through its reduction mod `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemidirectGroup {
    pub p: u64,
    pub c_level: u32,
    pub layers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemidirectElement {
    pub n_part: Vec<TraceZeroMat>,
    pub c_part: Mat2,
}

impl SemidirectGroup {
    pub fn new(p: u64, c_level: u32, layers: usize) -> Result<Self> {
        Modulus::new(p, c_level)?;
        Ok(SemidirectGroup { p, c_level, layers })
    }

    /// The group `H_k`: `k + 2` layers over `GL_2(Z/p^{k+2})`.
    pub fn stage(p: u64, k: u32) -> Result<Self> {
        Self::new(p, k + 2, k as usize + 2)
    }

    pub fn field(&self) -> Modulus {
        Modulus::field(self.p).expect("validated")
    }

    pub fn c_modulus(&self) -> Modulus {
        Modulus::new(self.p, self.c_level).expect("validated")
    }

    pub fn order(&self) -> Option<u128> {
        gl2_order(self.p, self.c_level)?.checked_mul(u128::from(self.p).checked_pow(3 * self.layers as u32)?)
    }

    pub fn identity(&self) -> SemidirectElement {
        SemidirectElement {
            n_part: vec![TraceZeroMat::zero(self.field()); self.layers],
            c_part: Mat2::identity(self.c_modulus()),
        }
    }

    pub fn element(&self, n_part: Vec<TraceZeroMat>, c_part: Mat2) -> Result<SemidirectElement> {
        if n_part.len() != self.layers {
            return Err(GroupsError::Layer { index: n_part.len(), layers: self.layers });
        }
        if c_part.modulus() != self.c_modulus() {
            return Err(GroupsError::MixedModuli);
        }
        if !c_part.is_invertible() {
            return Err(GroupsError::SingularGenerator(0));
        }
        Ok(SemidirectElement { n_part, c_part })
    }

    /// Element with `b` in layer `index` and zeros elsewhere.
    pub fn layer_element(&self, index: usize, b: TraceZeroMat, c: Mat2) -> Result<SemidirectElement> {
        if index >= self.layers {
            return Err(GroupsError::Layer { index, layers: self.layers });
        }
        let mut n = vec![TraceZeroMat::zero(self.field()); self.layers];
        n[index] = b;
        self.element(n, c)
    }

    fn act(&self, c: &Mat2, n: &TraceZeroMat) -> TraceZeroMat {
        let c1 = c.reduce(1).expect("level >= 1");
        n.conjugate_by(&c1).expect("same field")
    }

    pub fn mul(&self, x: &SemidirectElement, y: &SemidirectElement) -> SemidirectElement {
        let n_part = x
            .n_part
            .iter()
            .zip(&y.n_part)
            .map(|(a, b)| *a + self.act(&x.c_part, b))
            .collect();
        SemidirectElement { n_part, c_part: x.c_part * y.c_part }
    }

    pub fn inverse(&self, x: &SemidirectElement) -> SemidirectElement {
        let ci = x.c_part.inverse().expect("invertible by construction");
        SemidirectElement {
            n_part: x.n_part.iter().map(|n| -self.act(&ci, n)).collect(),
            c_part: ci,
        }
    }

    pub fn is_identity(&self, x: &SemidirectElement) -> bool {
        x.c_part.is_identity() && x.n_part.iter().all(TraceZeroMat::is_zero)
    }

    pub fn element_order(&self, x: &SemidirectElement) -> u64 {
        let mut acc = x.clone();
        let mut k = 1;
        while !self.is_identity(&acc) {
            acc = self.mul(&acc, x);
            k += 1;
        }
        k
    }

    /// Centralizer order of `(0, a)` for `a` with distinct residual diagonal
    /// entries: diagonal matrices in `GL_2` times the fixed part of each layer.
    pub fn centralizer_order_of_torus_element(&self, a: &Mat2) -> Result<u128> {
        let fixed = u128::from(layer_centralizer_order(&a.reduce(1)?)?);
        let m = self.c_modulus();
        let units = u128::from(m.modulus() - m.modulus() / self.p);
        fixed
            .checked_pow(self.layers as u32)
            .and_then(|f| f.checked_mul(units * units))
            .ok_or(GroupsError::Overflow)
    }
}

/// Order of the subgroup of `Ad^0(F_p)` fixed by conjugation by `a`.
pub fn layer_centralizer_order(a: &Mat2) -> Result<u64> {
    if a.level() != 1 {
        return layer_centralizer_order(&a.reduce(1)?);
    }
    if !a.is_diagonal() || a.entry(0, 0) == a.entry(1, 1) {
        return Err(GroupsError::RepeatedEigenvalues);
    }
    let p = a.p();
    let m = a.modulus();
    let mut map = FpMatrix::zeros(p, 3, 3);
    for (k, unit) in [[1, 0, 0], [0, 1, 0], [0, 0, 1]].iter().enumerate() {
        let x = TraceZeroMat::from_coords(m, unit[0], unit[1], unit[2]);
        let diff = x.conjugate_by(a)? - x;
        for (row, v) in diff.coords().iter().enumerate() {
            map.set(row, k, *v);
        }
    }
    Ok(p.pow(map.kernel().len() as u32))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChebotarevClassSpec {
    pub variant: Variant,
    pub p: u64,
    pub k: u32,
    pub a: Mat2,
    /// Component in the top `Ad^0` layer.
    pub b: Mat2,
    /// Primes in the class are congruent to this value mod `p^{k+2}`.
    pub frobenius_congruence: u64,
}

impl ChebotarevClassSpec {
    pub fn b_trace_zero(&self) -> TraceZeroMat {
        TraceZeroMat::new(self.b).expect("constructed trace zero")
    }

    /// The class representative in `H_k` with `b` in the top layer.
    pub fn element(&self, group: &SemidirectGroup) -> Result<SemidirectElement> {
        group.layer_element(group.layers - 1, self.b_trace_zero(), self.a)
    }

    /// Whether `a` has Frobenius eigenvalues `(l, 1)` at `level` for `l ≡ 2*`.
    pub fn is_special_at(&self, level: u32) -> Result<bool> {
        let a = self.a.reduce(level)?;
        let l = Residue::new(self.frobenius_congruence as i64, a.modulus());
        Ok(a == Mat2::diag_residues(l, a.modulus().one()))
    }
}

/// The conjugacy class whose primes serve as new ramified primes at stage `k`.
pub fn chebotarev_class(variant: Variant, p: u64, k: u32) -> Result<ChebotarevClassSpec> {
    let level = k + 2;
    let m = Modulus::new(p, level)?;
    let two = teichmuller(2, p, level)?;
    let field = Modulus::field(p)?;
    let (a, b) = match variant {
        Variant::Unconditional => (
            Mat2::diag_residues(two, m.one()),
            Mat2::diag(field, 1, -1),
        ),
        Variant::Grh => {
            let eps = m.residue(m.power_of_p(k + 1) as i64);
            (
                Mat2::diag_residues(two * (m.one() + eps), m.one() - eps),
                Mat2::zero(field),
            )
        }
    };
    Ok(ChebotarevClassSpec {
        variant,
        p,
        k,
        a,
        b,
        frobenius_congruence: two.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f5() -> Modulus {
        Modulus::field(5).unwrap()
    }

    #[test]
    fn closure_examples() {
        let m = f5();
        assert_eq!(closure(&[Mat2::identity(m)], 10).unwrap(), Closure::Order(1));
        assert_eq!(closure(&[Mat2::diag(m, 2, 1)], 10).unwrap(), Closure::Order(4));
        let (x, y) = standard_generators(5).unwrap();
        assert_eq!(closure(&[x, y], 1000).unwrap(), Closure::Order(480));
        assert_eq!(closure(&[x, y], 100).unwrap(), Closure::CapExceeded);
        assert_eq!(
            closure(&[Mat2::diag(m, 0, 1)], 10),
            Err(GroupsError::SingularGenerator(0))
        );
    }

    #[test]
    fn dense_closure_agrees() {
        let (x, y) = standard_generators(5).unwrap();
        let mut dc = DenseClosure::new(5);
        assert_eq!(dc.run(&[x.raw(), y.raw()], 1000), Closure::Order(480));
        assert_eq!(dc.run(&[x.raw()], 1000), Closure::Order(4));
    }

    #[test]
    fn gl2_orders() {
        assert_eq!(gl2_order(5, 1), Some(480));
        assert_eq!(gl2_order(5, 2), Some(480 * 625));
        assert_eq!(gl2_order(5, 8), Some(480 * 5u128.pow(28)));
        assert_eq!(gl2_order(1_000_003, 40), None);
        assert_eq!(primitive_root(5), 2);
        assert_eq!(primitive_root(7), 3);
    }

    #[test]
    fn split_case_finds_section() {
        let r = split_sanity_search(5).unwrap();
        assert!(matches!(r.verdict, SectionVerdict::SectionFound { candidates: 1, .. }));
    }

    #[test]
    fn budget_is_reported() {
        assert!(matches!(
            section_search_with_budget(5, 1000),
            Err(GroupsError::BudgetExceeded { total: 390_625, .. })
        ));
    }

    #[test]
    fn semidirect_orders() {
        let g = SemidirectGroup::stage(5, 0).unwrap();
        let cls = chebotarev_class(Variant::Unconditional, 5, 0).unwrap();
        let x = cls.element(&g).unwrap();
        assert_eq!(g.element_order(&x), 20);
        assert_eq!(g.element_order(&g.identity()), 1);
        let b = TraceZeroMat::from_coords(f5(), 1, 2, 3);
        let y = g.layer_element(0, b, Mat2::identity(g.c_modulus())).unwrap();
        assert_eq!(g.element_order(&y), 5);
    }

    #[test]
    fn inverse_law() {
        let g = SemidirectGroup::new(5, 2, 2).unwrap();
        let m = g.c_modulus();
        let x = g
            .element(
                vec![TraceZeroMat::from_coords(f5(), 1, 4, 2), TraceZeroMat::from_coords(f5(), 0, 3, 1)],
                Mat2::new(m, [7, 3, 5, 11]),
            )
            .unwrap();
        assert!(g.is_identity(&g.mul(&x, &g.inverse(&x))));
        assert!(g.is_identity(&g.mul(&g.inverse(&x), &x)));
    }

    #[test]
    fn layer_centralizer() {
        assert_eq!(layer_centralizer_order(&Mat2::diag(f5(), 2, 1)).unwrap(), 5);
        let f7 = Modulus::field(7).unwrap();
        assert_eq!(layer_centralizer_order(&Mat2::diag(f7, 2, 1)).unwrap(), 7);
        assert_eq!(
            layer_centralizer_order(&Mat2::diag(f5(), 2, 2)),
            Err(GroupsError::RepeatedEigenvalues)
        );
    }

    #[test]
    fn torus_centralizer_orders() {
        let g = SemidirectGroup::stage(5, 2).unwrap();
        let a = Mat2::diag(g.c_modulus(), 2, 1);
        // Diagonal units of GL2(Z/625) times 5 fixed vectors in each of 4 layers.
        assert_eq!(g.centralizer_order_of_torus_element(&a).unwrap(), 500 * 500 * 625);
        let big = SemidirectGroup::stage(5, 25).unwrap();
        let a = Mat2::diag(big.c_modulus(), 2, 1);
        assert_eq!(big.centralizer_order_of_torus_element(&a), Err(GroupsError::Overflow));
    }

    #[test]
    fn chebotarev_examples() {
        let m = Modulus::new(5, 2).unwrap();
        let u = chebotarev_class(Variant::Unconditional, 5, 0).unwrap();
        assert_eq!(u.a, Mat2::diag(m, 7, 1));
        assert_eq!(u.b, Mat2::diag(f5(), 1, -1));
        assert_eq!(u.frobenius_congruence, 7);
        let g = chebotarev_class(Variant::Grh, 5, 0).unwrap();
        assert_eq!(g.a, Mat2::diag(m, 17, 21));
        assert_eq!(g.b, Mat2::zero(f5()));
        assert!(!g.is_special_at(2).unwrap());
        assert!(g.is_special_at(1).unwrap());
        assert!(u.is_special_at(2).unwrap());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("uncond".parse::<Variant>().unwrap(), Variant::Unconditional);
        assert_eq!("grh".parse::<Variant>().unwrap(), Variant::Grh);
        assert!("x".parse::<Variant>().is_err());
        assert_eq!(serde_json::to_string(&Variant::Grh).unwrap(), "\"grh\"");
    }
}
