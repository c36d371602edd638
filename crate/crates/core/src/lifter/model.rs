//! The synthetic global model: primes, global classes given by their local
//! restrictions, ordinary data at `p`, plus validation and a seeded
//! generator.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LiftError;
use crate::groups::Variant;
use crate::linalg::{in_span, FpMatrix};
use crate::localdims::{check_complementary, h1_ord_dim, local_h_dims, PlaceDescriptor};
use crate::tame::{classify, ClassKind, Cocycle, CocycleClassification, TameModel};
use crate::zmod::{is_prime, teichmuller, Modulus, TraceZeroMat};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Values of a local cocycle at `σ` and `τ`, as row-major integer quadruples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleRecord {
    pub f_sigma: [i64; 4],
    pub f_tau: [i64; 4],
}

impl CocycleRecord {
    pub fn from_cocycle(c: &Cocycle) -> Self {
        CocycleRecord {
            f_sigma: c.f_sigma().matrix().signed(),
            f_tau: c.f_tau().matrix().signed(),
        }
    }

    pub fn to_cocycle(&self, p: u64) -> Result<Cocycle, LiftError> {
        Ok(Cocycle::from_quadruples(p, self.f_sigma, self.f_tau)?)
    }
}

/// A global class, described by its restriction at each tame prime (absent
/// means zero) and, in the grh variant, its local component at `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    #[serde(default)]
    pub restrictions: BTreeMap<u64, CocycleRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub at_p: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeSpec {
    pub l: u64,
    /// Class used to introduce ramification (unconditional variant only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub introduction: Option<ClassSpec>,
    /// Class nonnull at this prime, used to restore the special form.
    pub repair: ClassSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub stage: u32,
    #[serde(default)]
    pub two_prime: bool,
    pub primes: Vec<PrimeSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinarySpec {
    pub star_nontrivial: bool,
    pub psi_order: u64,
    pub ambient_dim: usize,
    /// Basis of the ordinary subspace `W`.
    pub ordinary_basis: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub schema_version: u32,
    pub p: u64,
    pub precision: u32,
    pub variant: Variant,
    pub seed: u64,
    pub base_h1_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinary: Option<OrdinarySpec>,
    /// Classes unramified outside the base set; their `at_p` vectors span `U`.
    #[serde(default)]
    pub base_classes: Vec<ClassSpec>,
    pub stages: Vec<StageSpec>,
}

impl GlobalModel {
    pub fn from_json(s: &str) -> Result<Self, LiftError> {
        serde_json::from_str(s).map_err(|e| LiftError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<ValidatedModel, LiftError> {
        validate(self)
    }
}

/// A validated class: cocycles parsed per prime, zero where unspecified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalClass {
    pub name: String,
    restrictions: HashMap<u64, Cocycle>,
    pub at_p: Vec<u64>,
    p: u64,
}

impl GlobalClass {
    pub fn restriction(&self, l: u64) -> Cocycle {
        self.restrictions
            .get(&l)
            .copied()
            .unwrap_or_else(|| Cocycle::zero(self.p).expect("p validated"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeEntry {
    pub l: u64,
    pub stage: u32,
    /// Position within its stage (0, or 0/1 in a two-prime stage).
    pub slot: usize,
    pub tame: TameModel,
    pub introduction: Option<usize>,
    pub repair: usize,
}

/// A model that passed every check in [`validate`]. Only this type can be run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    raw: GlobalModel,
    pub(crate) primes: Vec<PrimeEntry>,
    pub(crate) classes: Vec<GlobalClass>,
    pub(crate) base: Vec<usize>,
    pub(crate) u_basis: Vec<Vec<u64>>,
    pub(crate) w_basis: Vec<Vec<u64>>,
}

impl ValidatedModel {
    pub fn raw(&self) -> &GlobalModel {
        &self.raw
    }

    pub fn p(&self) -> u64 {
        self.raw.p
    }

    pub fn precision(&self) -> u32 {
        self.raw.precision
    }

    pub fn variant(&self) -> Variant {
        self.raw.variant
    }

    pub fn stage_count(&self) -> u32 {
        self.raw.stages.len() as u32
    }

    pub fn primes(&self) -> &[PrimeEntry] {
        &self.primes
    }

    pub fn class(&self, i: usize) -> &GlobalClass {
        &self.classes[i]
    }

    pub fn ordinary_basis(&self) -> &[Vec<u64>] {
        &self.w_basis
    }

    pub fn global_image_basis(&self) -> &[Vec<u64>] {
        &self.u_basis
    }

    pub fn base_classes(&self) -> &[usize] {
        &self.base
    }

    pub fn ambient_dim(&self) -> usize {
        self.raw.ordinary.as_ref().map_or(0, |o| o.ambient_dim)
    }

    /// Global `H^1` dimension after `stage` stages: one new dimension per prime.
    pub fn global_h1_dim(&self, stage: u32) -> usize {
        self.raw.base_h1_dim
            + self
                .primes
                .iter()
                .filter(|e| e.stage <= stage)
                .count()
    }
}

fn invalid(msg: impl Into<String>) -> LiftError {
    LiftError::Validation(msg.into())
}

fn classify_at(class: &GlobalClass, entry: &PrimeEntry) -> Result<CocycleClassification, LiftError> {
    Ok(classify(&class.restriction(entry.l), &entry.tame)?)
}

pub fn validate(m: &GlobalModel) -> Result<ValidatedModel, LiftError> {
    if m.schema_version != MODEL_SCHEMA_VERSION {
        return Err(invalid(format!(
            "schema_version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    let p = m.p;
    Modulus::new(p, m.precision)?;
    if m.base_h1_dim != 2 {
        return Err(invalid(format!("base_h1_dim must be 2, got {}", m.base_h1_dim)));
    }

    // Primes and their stages.
    let mut primes = Vec::new();
    let mut seen = HashSet::new();
    for (idx, st) in m.stages.iter().enumerate() {
        let s = idx as u32 + 1;
        if st.stage != s {
            return Err(invalid(format!("stage {} listed at position {s}", st.stage)));
        }
        if s + 2 > m.precision {
            return Err(invalid(format!(
                "stage {s} needs precision at least {} but the cap is {}",
                s + 2,
                m.precision
            )));
        }
        let want = if st.two_prime { 2 } else { 1 };
        if st.primes.len() != want {
            return Err(invalid(format!("stage {s} must list {want} prime(s)")));
        }
        if st.two_prime && m.variant == Variant::Unconditional {
            return Err(invalid(format!("stage {s}: two-prime stages need the grh variant")));
        }
        let congruence = teichmuller(2, p, s + 1)?;
        for (slot, ps) in st.primes.iter().enumerate() {
            let l = ps.l;
            if !is_prime(l) || l == p {
                return Err(invalid(format!("l = {l} must be a prime different from p")));
            }
            if !seen.insert(l) {
                return Err(invalid(format!("prime {l} appears twice")));
            }
            if l % congruence.modulus().modulus() != congruence.value() {
                return Err(invalid(format!(
                    "stage {s}: l = {l} is not congruent to {} mod {}",
                    congruence.value(),
                    congruence.modulus().modulus()
                )));
            }
            let tame = TameModel::new(p, l)?;
            primes.push((s, slot, tame, ps));
        }
    }

    // Classes.
    let ambient = m.ordinary.as_ref().map_or(0, |o| o.ambient_dim);
    let mut classes: Vec<GlobalClass> = Vec::new();
    let mut add_class = |spec: &ClassSpec| -> Result<usize, LiftError> {
        let mut restrictions = HashMap::new();
        for (l, rec) in &spec.restrictions {
            let Some((_, _, tame, _)) = primes.iter().find(|(_, _, t, _)| t.l() == *l) else {
                return Err(invalid(format!("class {}: {l} is not a prime of the model", spec.name)));
            };
            let c = rec.to_cocycle(p)?;
            c.check(tame)
                .map_err(|_| invalid(format!("class {}: invalid cocycle at {l}", spec.name)))?;
            restrictions.insert(*l, c);
        }
        match m.variant {
            Variant::Grh if spec.at_p.len() != ambient => {
                return Err(invalid(format!(
                    "class {}: at_p has length {}, expected {ambient}",
                    spec.name,
                    spec.at_p.len()
                )))
            }
            Variant::Unconditional if !spec.at_p.is_empty() => {
                return Err(invalid(format!(
                    "class {}: at_p data is only used by the grh variant",
                    spec.name
                )))
            }
            _ => {}
        }
        classes.push(GlobalClass {
            name: spec.name.clone(),
            restrictions,
            at_p: spec.at_p.iter().map(|x| x % p).collect(),
            p,
        });
        Ok(classes.len() - 1)
    };

    let mut base = Vec::new();
    for spec in &m.base_classes {
        base.push(add_class(spec)?);
    }
    let mut entries = Vec::new();
    for (s, slot, tame, ps) in &primes {
        let introduction = ps.introduction.as_ref().map(&mut add_class).transpose()?;
        let repair = add_class(&ps.repair)?;
        entries.push(PrimeEntry {
            l: tame.l(),
            stage: *s,
            slot: *slot,
            tame: *tame,
            introduction,
            repair,
        });
    }

    // Local patterns at each prime.
    for e in &entries {
        let rep = classify_at(&classes[e.repair], e)?;
        let stage = &m.stages[(e.stage - 1) as usize];
        match (m.variant, stage.two_prime) {
            (Variant::Unconditional, _) => {
                let Some(intro) = e.introduction else {
                    return Err(invalid(format!("prime {}: missing introduction class", e.l)));
                };
                if !classify_at(&classes[intro], e)?.is_ramified() {
                    return Err(invalid(format!(
                        "prime {}: introduction class is unramified there",
                        e.l
                    )));
                }
                if !(rep.is_nonnull() && !rep.is_ramified()) {
                    return Err(invalid(format!(
                        "prime {}: repair class must be unramified and nonnull there, got {:?}",
                        e.l, rep.kind
                    )));
                }
            }
            (Variant::Grh, false) => {
                if e.introduction.is_some() {
                    return Err(invalid(format!(
                        "prime {}: the grh variant introduces ramification with the repair class",
                        e.l
                    )));
                }
                if rep.kind != ClassKind::Mixed {
                    return Err(invalid(format!(
                        "prime {}: new class must be ramified and nonnull there, got {:?}",
                        e.l, rep.kind
                    )));
                }
            }
            (Variant::Grh, true) => {
                if e.introduction.is_some() {
                    return Err(invalid(format!("prime {}: unexpected introduction class", e.l)));
                }
                let partner = entries
                    .iter()
                    .find(|o| o.stage == e.stage && o.slot != e.slot)
                    .expect("two primes per two-prime stage");
                let at_partner = classify_at(&classes[e.repair], partner)?;
                if rep.kind != ClassKind::Unramified || at_partner.kind != ClassKind::Null {
                    return Err(invalid(format!(
                        "stage {}: class for {} must be unramified nonnull at {} and null at {} (got {:?}, {:?})",
                        e.stage, e.l, e.l, partner.l, rep.kind, at_partner.kind
                    )));
                }
            }
        }
        // Repair classes vanish at every later prime.
        for later in entries.iter().filter(|o| o.stage > e.stage) {
            if classify_at(&classes[e.repair], later)?.kind != ClassKind::Coboundary {
                return Err(invalid(format!(
                    "repair class for {} (stage {}) must restrict trivially at {} (stage {})",
                    e.l, e.stage, later.l, later.stage
                )));
            }
        }
    }

    // Ordinary data.
    let mut u_basis = Vec::new();
    let mut w_basis = Vec::new();
    match (m.variant, &m.ordinary) {
        (Variant::Grh, Some(o)) => {
            let place = PlaceDescriptor::ordinary(p, o.star_nontrivial, o.psi_order)?;
            let h1 = local_h_dims(&place)?.h1;
            if o.ambient_dim != h1 {
                return Err(invalid(format!(
                    "ambient_dim {} differs from local H^1 dimension {h1}",
                    o.ambient_dim
                )));
            }
            let ord = h1_ord_dim(&place)?;
            if o.ordinary_basis.len() != ord {
                return Err(invalid(format!(
                    "ordinary basis has {} vectors, expected {ord}",
                    o.ordinary_basis.len()
                )));
            }
            if base.len() != m.base_h1_dim {
                return Err(invalid(format!(
                    "expected {} base classes, got {}",
                    m.base_h1_dim,
                    base.len()
                )));
            }
            u_basis = base.iter().map(|&i| classes[i].at_p.clone()).collect();
            w_basis = o
                .ordinary_basis
                .iter()
                .map(|v| v.iter().map(|x| x % p).collect())
                .collect();
            check_complementary(p, h1, &u_basis, &w_basis)?;
            for &b in &base {
                for e in &entries {
                    if classify_at(&classes[b], e)?.kind != ClassKind::Coboundary {
                        return Err(invalid(format!(
                            "base class {} must restrict trivially at {}",
                            classes[b].name, e.l
                        )));
                    }
                }
            }
        }
        (Variant::Grh, None) => return Err(invalid("grh variant needs ordinary data")),
        (Variant::Unconditional, Some(_)) => {
            return Err(invalid("ordinary data is only used by the grh variant"))
        }
        (Variant::Unconditional, None) => {}
    }

    Ok(ValidatedModel {
        raw: m.clone(),
        primes: entries,
        classes,
        base,
        u_basis,
        w_basis,
    })
}

/// Parameters of [`generate_model`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub p: u64,
    pub precision: u32,
    pub variant: Variant,
    pub stages: u32,
    pub seed: u64,
    /// Stages (grh only) that add two primes at once.
    pub two_prime_stages: Vec<u32>,
}

impl GeneratorConfig {
    pub fn new(p: u64, precision: u32, variant: Variant, stages: u32, seed: u64) -> Self {
        let two_prime_stages = match variant {
            Variant::Grh if stages >= 2 => vec![2],
            Variant::Grh if stages == 1 => vec![1],
            _ => Vec::new(),
        };
        GeneratorConfig { p, precision, variant, stages, seed, two_prime_stages }
    }
}

struct Gen {
    p: u64,
    rng: ChaCha8Rng,
}

impl Gen {
    fn unit(&mut self) -> i64 {
        self.rng.gen_range(1..self.p) as i64
    }

    fn any(&mut self) -> i64 {
        self.rng.gen_range(0..self.p) as i64
    }

    fn vector(&mut self, n: usize) -> Vec<u64> {
        (0..n).map(|_| self.any() as u64).collect()
    }

    /// `a·r + b·s + ∂M` for random trace-zero `M`.
    fn cocycle(&mut self, tame: &TameModel, a: i64, b: i64) -> CocycleRecord {
        let p = self.p;
        let field = tame.field();
        let m = TraceZeroMat::from_coords(field, self.any(), self.any(), self.any());
        let c = Cocycle::unramified(p).unwrap().scale(a.rem_euclid(p as i64) as u64)
            + Cocycle::null(p).unwrap().scale(b.rem_euclid(p as i64) as u64)
            + Cocycle::coboundary(tame, &m).unwrap();
        CocycleRecord::from_cocycle(&c)
    }
}

/// Smallest primes `> p` congruent to `target` mod `modulus`, skipping `used`.
fn primes_in_class(target: u64, modulus: u64, count: usize, used: &HashSet<u64>) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = target;
    while out.len() < count {
        if is_prime(x) && !used.contains(&x) {
            out.push(x);
        }
        x += modulus;
    }
    out
}

/// Builds a model satisfying every validation rule, drawing local data from `seed`.
pub fn generate_model(cfg: &GeneratorConfig) -> Result<GlobalModel, LiftError> {
    let p = cfg.p;
    Modulus::new(p, cfg.precision)?;
    if cfg.stages + 2 > cfg.precision {
        return Err(LiftError::Validation(format!(
            "{} stages need precision at least {}, got {}",
            cfg.stages,
            cfg.stages + 2,
            cfg.precision
        )));
    }
    let mut g = Gen { p, rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    let grh = cfg.variant == Variant::Grh;

    // Choose primes first so every class can restrict everywhere.
    let mut used = HashSet::new();
    let mut layout: Vec<(u32, Vec<TameModel>)> = Vec::new();
    for s in 1..=cfg.stages {
        let two = grh && cfg.two_prime_stages.contains(&s);
        let t = teichmuller(2, p, s + 1)?;
        let ls = primes_in_class(t.value(), t.modulus().modulus(), if two { 2 } else { 1 }, &used);
        used.extend(ls.iter().copied());
        let tames = ls.iter().map(|&l| TameModel::new(p, l)).collect::<Result<Vec<_>, _>>()?;
        layout.push((s, tames));
    }
    let all: Vec<(u32, TameModel)> = layout
        .iter()
        .flat_map(|(s, ts)| ts.iter().map(move |t| (*s, *t)))
        .collect();

    let ordinary = if grh {
        let w = loop {
            let w = g.vector(3);
            if w.iter().any(|&x| x != 0) {
                break w;
            }
        };
        Some(OrdinarySpec {
            star_nontrivial: true,
            psi_order: p - 1,
            ambient_dim: 3,
            ordinary_basis: vec![w],
        })
    } else {
        None
    };
    let ambient = ordinary.as_ref().map_or(0, |o| o.ambient_dim);

    let class = |g: &mut Gen, name: String, local: &dyn Fn(&mut Gen, u32, &TameModel) -> (i64, i64)| {
        let restrictions = all
            .iter()
            .map(|(s, t)| {
                let (a, b) = local(g, *s, t);
                (t.l(), g.cocycle(t, a, b))
            })
            .collect();
        ClassSpec {
            name,
            restrictions,
            at_p: if grh { g.vector(ambient) } else { Vec::new() },
        }
    };

    let base_classes = if grh {
        loop {
            let c1 = class(&mut g, "base_1".into(), &|_, _, _| (0, 0));
            let c2 = class(&mut g, "base_2".into(), &|_, _, _| (0, 0));
            let u = vec![c1.at_p.clone(), c2.at_p.clone()];
            let w = &ordinary.as_ref().unwrap().ordinary_basis;
            if check_complementary(p, ambient, &u, w).is_ok() {
                break vec![c1, c2];
            }
        }
    } else {
        Vec::new()
    };

    let mut stages = Vec::new();
    for (s, tames) in &layout {
        let s = *s;
        let two = tames.len() == 2;
        let mut primes = Vec::new();
        for (slot, t) in tames.iter().enumerate() {
            let own = t.l();
            let partner = two.then(|| tames[1 - slot].l());
            // Earlier primes: arbitrary; own prime: pattern; later primes: trivial.
            let repair = class(&mut g, format!("f_{own}"), &|g, st, tt| {
                if st > s {
                    (0, 0)
                } else if tt.l() == own {
                    match (grh, two) {
                        (false, _) => (g.unit(), 0),
                        (true, false) => (g.unit(), g.unit()),
                        (true, true) => (g.unit(), 0),
                    }
                } else if Some(tt.l()) == partner {
                    (0, g.unit())
                } else {
                    (g.any(), g.any())
                }
            });
            let introduction = (!grh).then(|| {
                class(&mut g, format!("h_{own}"), &|g, _, tt| {
                    if tt.l() == own {
                        (g.any(), g.unit())
                    } else {
                        (g.any(), g.any())
                    }
                })
            });
            primes.push(PrimeSpec { l: own, introduction, repair });
        }
        stages.push(StageSpec { stage: s, two_prime: two, primes });
    }

    Ok(GlobalModel {
        schema_version: MODEL_SCHEMA_VERSION,
        p,
        precision: cfg.precision,
        variant: cfg.variant,
        seed: cfg.seed,
        base_h1_dim: 2,
        ordinary,
        base_classes,
        stages,
    })
}

/// Coordinates of `v` in `basis` (which must be independent), if `v` lies in the span.
pub fn coordinates(p: u64, dim: usize, basis: &[Vec<u64>], v: &[u64]) -> Option<Vec<u64>> {
    if !in_span(p, dim, basis, v) {
        return None;
    }
    if basis.is_empty() {
        return Some(Vec::new());
    }
    FpMatrix::from_columns(p, dim, basis).solve(v).ok()
}
