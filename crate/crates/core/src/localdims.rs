//! Local cohomology dimensions of `Ad^0` at the places that occur in the
//! construction, and the direct-sum decomposition used to make a lift
//! ordinary at `p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{span_rank, FpMatrix};
use crate::zmod::is_prime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalDimsError {
    #[error("unsupported place: {0}")]
    Unsupported(String),
    #[error("subspaces are not complementary (dim U = {u}, dim W = {w}, rank = {rank}, ambient = {ambient})")]
    NotComplementary {
        u: usize,
        w: usize,
        rank: usize,
        ambient: usize,
    },
    #[error("vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, LocalDimsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaceKind {
    /// A tamely ramified prime `l ≠ p`; `l` is its class mod `p`.
    TameL { l: u64 },
    /// A prime of multiplicative reduction `v ≠ p`.
    MultiplicativeV { v: u64, star_nontrivial: bool },
    /// The ordinary place `p`; `psi_order` is the order of the unramified character.
    OrdinaryP { star_nontrivial: bool, psi_order: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlaceDescriptor {
    pub p: u64,
    pub kind: PlaceKind,
}

impl PlaceDescriptor {
    pub fn tame(p: u64, l: u64) -> Result<Self> {
        Self::new(p, PlaceKind::TameL { l })
    }

    pub fn multiplicative(p: u64, v: u64, star_nontrivial: bool) -> Result<Self> {
        Self::new(p, PlaceKind::MultiplicativeV { v, star_nontrivial })
    }

    pub fn ordinary(p: u64, star_nontrivial: bool, psi_order: u64) -> Result<Self> {
        Self::new(p, PlaceKind::OrdinaryP { star_nontrivial, psi_order })
    }

    pub fn new(p: u64, kind: PlaceKind) -> Result<Self> {
        if p < 5 || !is_prime(p) {
            return Err(LocalDimsError::Unsupported(format!("p = {p} must be a prime >= 5")));
        }
        match kind {
            PlaceKind::TameL { l } => {
                let r = l % p;
                if r == 0 || r == 1 || r == p - 1 {
                    return Err(LocalDimsError::Unsupported(format!(
                        "tame place needs l not congruent to 0, ±1 mod {p}, got l = {l}"
                    )));
                }
            }
            PlaceKind::MultiplicativeV { v, star_nontrivial } => {
                if v % p == 0 {
                    return Err(LocalDimsError::Unsupported(format!(
                        "multiplicative place v = {v} must differ from p"
                    )));
                }
                // With trivial extension class the invariants grow and the
                // vanishing statement no longer applies.
                if !star_nontrivial {
                    return Err(LocalDimsError::Unsupported(
                        "multiplicative place with split (trivial) extension class".into(),
                    ));
                }
                // Frobenius scales the unipotent line by v, and its twist by v^2.
                let r = v % p;
                if r == 1 || r == p - 1 {
                    return Err(LocalDimsError::Unsupported(format!(
                        "multiplicative place needs v not congruent to ±1 mod {p}, got v = {v}"
                    )));
                }
                // Duality at v = 3 fails for Ad^0.
                if v == 3 {
                    return Err(LocalDimsError::Unsupported(
                        "v = 3 is excluded from the multiplicative case".into(),
                    ));
                }
            }
            PlaceKind::OrdinaryP { psi_order, .. } => {
                if psi_order <= 2 {
                    return Err(LocalDimsError::Unsupported(format!(
                        "ordinary place needs psi of order > 2, got {psi_order}"
                    )));
                }
                if !(p - 1).is_multiple_of(psi_order) {
                    return Err(LocalDimsError::Unsupported(format!(
                        "an F_{p}-valued character has order dividing {}, got {psi_order}",
                        p - 1
                    )));
                }
            }
        }
        Ok(PlaceDescriptor { p, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummandLabel {
    Trivial,
    Cyclotomic,
    InverseCyclotomic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Summand {
    pub label: SummandLabel,
    /// Frobenius eigenvalue mod `p`.
    pub eigenvalue: u64,
    /// Power of the cyclotomic character.
    pub twist: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterDecomposition {
    pub p: u64,
    pub summands: Vec<Summand>,
}

impl CharacterDecomposition {
    pub fn dimension(&self) -> usize {
        self.summands.len()
    }

    /// Number of summands on which Frobenius acts trivially.
    pub fn invariants(&self) -> usize {
        self.summands.iter().filter(|s| s.eigenvalue == 1).count()
    }

    /// The same module tensored with the cyclotomic character, whose
    /// Frobenius eigenvalue at a tame place is `l`.
    pub fn cyclotomic_twist(&self, l: u64) -> CharacterDecomposition {
        let p = self.p;
        CharacterDecomposition {
            p,
            summands: self
                .summands
                .iter()
                .map(|s| Summand {
                    label: s.label,
                    eigenvalue: s.eigenvalue * (l % p) % p,
                    twist: s.twist + 1,
                })
                .collect(),
        }
    }
}

fn inv_mod(a: u64, p: u64) -> u64 {
    (1..p).find(|x| a % p * x % p == 1).expect("unit mod p")
}

/// `Ad^0 ≅ 1 ⊕ μ_p ⊕ μ_p^{-1}` as a module for the tame quotient.
pub fn ad0_decomposition(place: &PlaceDescriptor) -> Result<CharacterDecomposition> {
    let PlaceKind::TameL { l } = place.kind else {
        return Err(LocalDimsError::Unsupported(
            "character decomposition is only available at tame places".into(),
        ));
    };
    let p = place.p;
    let l = l % p;
    Ok(CharacterDecomposition {
        p,
        summands: vec![
            Summand { label: SummandLabel::Trivial, eigenvalue: 1, twist: 0 },
            Summand { label: SummandLabel::Cyclotomic, eigenvalue: l, twist: 1 },
            Summand { label: SummandLabel::InverseCyclotomic, eigenvalue: inv_mod(l, p), twist: -1 },
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalDims {
    pub h0: usize,
    pub h1: usize,
    pub h2: usize,
}

impl LocalDims {
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.h0, self.h1, self.h2)
    }

    /// `h1 - h0 - h2`.
    pub fn euler_defect(&self) -> i64 {
        self.h1 as i64 - self.h0 as i64 - self.h2 as i64
    }
}

/// Dimension of `Ad^0`, the Euler-characteristic contribution at `p`.
pub const AD0_DIM: usize = 3;

pub fn local_h_dims(place: &PlaceDescriptor) -> Result<LocalDims> {
    let place = PlaceDescriptor::new(place.p, place.kind)?;
    let (h0, h2, defect) = match place.kind {
        PlaceKind::TameL { l } => {
            let dec = ad0_decomposition(&place)?;
            (dec.invariants(), dec.cyclotomic_twist(l).invariants(), 0)
        }
        // A nonsplit extension has no invariants and no coinvariants of the twist.
        PlaceKind::MultiplicativeV { .. } => (0, 0, 0),
        // Invariants come from the split case only; H^2 vanishes since ψ² ≠ 1.
        PlaceKind::OrdinaryP { star_nontrivial, .. } => {
            (usize::from(!star_nontrivial), 0, AD0_DIM)
        }
    };
    Ok(LocalDims { h0, h1: h0 + h2 + defect, h2 })
}

/// Dimension of the ordinary part of local `H^1` at `p`.
pub fn h1_ord_dim(place: &PlaceDescriptor) -> Result<usize> {
    match place.kind {
        PlaceKind::OrdinaryP { star_nontrivial, .. } => {
            PlaceDescriptor::new(place.p, place.kind)?;
            Ok(if star_nontrivial { 1 } else { 2 })
        }
        _ => Err(LocalDimsError::Unsupported(
            "ordinary dimension is only defined at p".into(),
        )),
    }
}

/// `F_p^ambient = U ⊕ W`, with a target vector to split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceDecompositionProblem {
    pub p: u64,
    pub ambient: usize,
    pub u_basis: Vec<Vec<u64>>,
    pub w_basis: Vec<Vec<u64>>,
    pub target: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Coordinates of the `U` component in `u_basis`.
    pub u_coords: Vec<u64>,
    /// Coordinates of the `W` component in `w_basis`.
    pub w_coords: Vec<u64>,
    pub u_part: Vec<u64>,
    pub w_part: Vec<u64>,
}

/// Checks `U ∩ W = 0` and `dim U + dim W = ambient`.
pub fn check_complementary(p: u64, ambient: usize, u: &[Vec<u64>], w: &[Vec<u64>]) -> Result<()> {
    for v in u.iter().chain(w) {
        if v.len() != ambient {
            return Err(LocalDimsError::Dimension { expected: ambient, got: v.len() });
        }
    }
    let all: Vec<Vec<u64>> = u.iter().chain(w).cloned().collect();
    let rank = span_rank(p, ambient, &all);
    if u.len() + w.len() != ambient || rank != ambient {
        return Err(LocalDimsError::NotComplementary {
            u: u.len(),
            w: w.len(),
            rank,
            ambient,
        });
    }
    Ok(())
}

fn combine(p: u64, ambient: usize, basis: &[Vec<u64>], coords: &[u64]) -> Vec<u64> {
    let mut out = vec![0; ambient];
    for (b, &c) in basis.iter().zip(coords) {
        crate::linalg::add_scaled(p, &mut out, b, c);
    }
    out
}

pub fn subspace_decompose(problem: &SubspaceDecompositionProblem) -> Result<Decomposition> {
    let SubspaceDecompositionProblem { p, ambient, u_basis, w_basis, target } = problem;
    let (p, ambient) = (*p, *ambient);
    check_complementary(p, ambient, u_basis, w_basis)?;
    if target.len() != ambient {
        return Err(LocalDimsError::Dimension { expected: ambient, got: target.len() });
    }
    let cols: Vec<Vec<u64>> = u_basis.iter().chain(w_basis).cloned().collect();
    let x = FpMatrix::from_columns(p, ambient, &cols)
        .solve(target)
        .expect("complementary bases span the ambient space");
    let (u_coords, w_coords) = x.split_at(u_basis.len());
    Ok(Decomposition {
        u_part: combine(p, ambient, u_basis, u_coords),
        w_part: combine(p, ambient, w_basis, w_coords),
        u_coords: u_coords.to_vec(),
        w_coords: w_coords.to_vec(),
    })
}
