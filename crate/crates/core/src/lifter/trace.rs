//! Per-level trace records and an independent auditor for them.
//!
//! The auditor only reads the records; it recomputes every check from the
//! matrices stored in the trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LiftError;
use crate::groups::Variant;
use crate::linalg::in_span;
use crate::zmod::{Mat2, Modulus};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TracePrime {
    pub l: u64,
    pub stage: u32,
    pub slot: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub p: u64,
    pub precision: u32,
    pub variant: Variant,
    pub k_max: u32,
    pub ordinary_basis: Vec<Vec<u64>>,
    pub primes: Vec<TracePrime>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalRecord {
    pub stage: u32,
    pub level: u32,
    pub l: u64,
    pub prime_stage: u32,
    /// Row-major entries reduced mod `p^level`.
    pub sigma: [u64; 4],
    pub tau: [u64; 4],
    pub u: u64,
    /// Repair coefficient used at this prime at this level.
    pub alpha: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intro_alpha: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinaryRecord {
    pub stage: u32,
    pub level: u32,
    pub vector: Vec<u64>,
    pub adjustment: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEndPrime {
    pub l: u64,
    pub prime_stage: u32,
    pub u: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEndRecord {
    pub stage: u32,
    pub level: u32,
    pub primes: Vec<StageEndPrime>,
    pub at_p: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(TraceHeader),
    Local(LocalRecord),
    Ordinary(OrdinaryRecord),
    StageEnd(StageEndRecord),
    Truncation { requested: u32, completed: u32, reason: String },
}

pub fn to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<TraceRecord>, LiftError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| LiftError::Parse(format!("trace line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Header,
    Missing,
    Relation,
    Specialness,
    Determinant,
    Valuation,
    Onset,
    Congruence,
    StageCongruence,
    Ordinary,
    Unramified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub stage: u32,
    pub level: u32,
    pub l: Option<u64>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at stage {} level {}", self.kind, self.stage, self.level)?;
        if let Some(l) = self.l {
            write!(f, " prime {l}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub stages: u32,
    pub local_records: usize,
    pub ordinary_records: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

struct Audit {
    violations: Vec<Violation>,
}

impl Audit {
    fn flag(&mut self, kind: ViolationKind, stage: u32, level: u32, l: Option<u64>, detail: impl Into<String>) {
        self.violations.push(Violation { kind, stage, level, l, detail: detail.into() });
    }
}

fn mat(p: u64, level: u32, e: [u64; 4]) -> Option<Mat2> {
    let m = Modulus::new(p, level).ok()?;
    if e.iter().any(|&x| x >= m.modulus()) {
        return None;
    }
    Some(Mat2::new(m, e.map(|x| x as i64)))
}

fn valuation(p: u64, level: u32, x: u64) -> Option<u32> {
    Modulus::new(p, level).ok()?.residue(x as i64).valuation()
}

/// Audits a trace: relation, exact special form, determinants, valuation of
/// `u`, onset levels, congruences between levels and stages, ordinarity at
/// `p`, and ramification of the final stage.
pub fn verify_chain(trace: &[TraceRecord]) -> VerifyReport {
    let mut audit = Audit { violations: Vec::new() };
    let header = match trace.first() {
        Some(TraceRecord::Header(h)) => h.clone(),
        _ => {
            audit.flag(ViolationKind::Header, 0, 0, None, "trace does not start with a header");
            return VerifyReport { violations: audit.violations, ..Default::default() };
        }
    };
    let (p, n) = (header.p, header.precision);
    if header.schema_version != TRACE_SCHEMA_VERSION {
        audit.flag(ViolationKind::Header, 0, 0, None, format!("schema version {}", header.schema_version));
    }
    let prime_stage: BTreeMap<u64, u32> = header.primes.iter().map(|q| (q.l, q.stage)).collect();

    let mut locals: BTreeMap<(u32, u64), BTreeMap<u32, &LocalRecord>> = BTreeMap::new();
    let mut ordinary_levels: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    let mut stage_ends: BTreeMap<u32, &StageEndRecord> = BTreeMap::new();
    let (mut n_local, mut n_ord) = (0, 0);
    let in_w = |v: &[u64]| v.len() == header.ordinary_basis.first().map_or(v.len(), Vec::len) && in_span(p, v.len(), &header.ordinary_basis, v);

    for rec in &trace[1..] {
        match rec {
            TraceRecord::Header(_) => audit.flag(ViolationKind::Header, 0, 0, None, "repeated header"),
            TraceRecord::Local(r) => {
                n_local += 1;
                check_local(&mut audit, p, &prime_stage, r);
                if locals.entry((r.stage, r.l)).or_default().insert(r.level, r).is_some() {
                    audit.flag(ViolationKind::Header, r.stage, r.level, Some(r.l), "duplicate record");
                }
            }
            TraceRecord::Ordinary(r) => {
                n_ord += 1;
                ordinary_levels.entry(r.stage).or_default().insert(r.level);
                if header.variant == Variant::Grh && !in_w(&r.vector) {
                    audit.flag(ViolationKind::Ordinary, r.stage, r.level, None, format!("{:?} not in the ordinary subspace", r.vector));
                }
            }
            TraceRecord::StageEnd(r) => {
                stage_ends.insert(r.stage, r);
            }
            TraceRecord::Truncation { .. } => {}
        }
    }

    // Completeness, onset and level-to-level congruence.
    for s in 1..=header.k_max {
        if !stage_ends.contains_key(&s) {
            audit.flag(ViolationKind::Missing, s, n, None, "no stage end record");
        }
        if header.variant == Variant::Grh {
            let have = ordinary_levels.get(&s).cloned().unwrap_or_default();
            for level in s + 1..=n {
                if !have.contains(&level) {
                    audit.flag(ViolationKind::Missing, s, level, None, "no ordinary record");
                }
            }
        }
        for q in header.primes.iter().filter(|q| q.stage <= s) {
            let Some(levels) = locals.get(&(s, q.l)) else {
                audit.flag(ViolationKind::Missing, s, s + 1, Some(q.l), "no records for this prime");
                continue;
            };
            for level in s + 1..=n {
                if !levels.contains_key(&level) {
                    audit.flag(ViolationKind::Missing, s, level, Some(q.l), "missing level");
                }
            }
            if q.stage == s && levels.keys().next() != Some(&(s + 1)) {
                audit.flag(
                    ViolationKind::Onset,
                    s,
                    levels.keys().next().copied().unwrap_or(0),
                    Some(q.l),
                    format!("ramification must begin at level {}", s + 1),
                );
            }
            for (&level, r) in levels {
                if let Some(next) = levels.get(&(level + 1)) {
                    let congruent = match (mat(p, level + 1, next.sigma), mat(p, level + 1, next.tau)) {
                        (Some(ns), Some(nt)) => {
                            ns.reduce(level).map(|m| m.raw() == r.sigma).unwrap_or(false)
                                && nt.reduce(level).map(|m| m.raw() == r.tau).unwrap_or(false)
                        }
                        _ => false,
                    };
                    if !congruent {
                        audit.flag(
                            ViolationKind::Congruence,
                            s,
                            level + 1,
                            Some(q.l),
                            format!("level {} does not reduce to level {level}", level + 1),
                        );
                    }
                }
            }
        }
    }

    // Stage-to-stage congruence at full precision.
    for s in 2..=header.k_max {
        for q in header.primes.iter().filter(|q| q.stage < s) {
            let cur = locals.get(&(s, q.l)).and_then(|m| m.get(&n));
            let prev = locals.get(&(s - 1, q.l)).and_then(|m| m.get(&n));
            if let (Some(cur), Some(prev)) = (cur, prev) {
                let red = |e: [u64; 4]| mat(p, n, e).and_then(|m| m.reduce(s).ok()).map(|m| m.raw());
                if red(cur.sigma) != red(prev.sigma) || red(cur.tau) != red(prev.tau) {
                    audit.flag(
                        ViolationKind::StageCongruence,
                        s,
                        n,
                        Some(q.l),
                        format!("stage {s} and stage {} differ mod p^{s}", s - 1),
                    );
                }
            }
        }
    }

    if header.variant == Variant::Grh {
        for (&s, end) in &stage_ends {
            for (i, v) in end.at_p.iter().enumerate() {
                if !in_w(v) {
                    audit.flag(ViolationKind::Ordinary, s, i as u32 + 2, None, "stage end component not ordinary");
                }
            }
            if s >= 1 {
                if let Some(prev) = stage_ends.get(&(s - 1)) {
                    let keep = (s as usize - 1).min(end.at_p.len()).min(prev.at_p.len());
                    if end.at_p[..keep] != prev.at_p[..keep] {
                        audit.flag(ViolationKind::StageCongruence, s, s, None, "components at p changed below the stage onset");
                    }
                }
            }
        }
    }

    if header.k_max >= 1 {
        let s = header.k_max;
        for q in header.primes.iter().filter(|q| q.stage <= s) {
            if let Some(r) = locals.get(&(s, q.l)).and_then(|m| m.get(&n)) {
                if r.tau == [1, 0, 0, 1] {
                    audit.flag(ViolationKind::Unramified, s, n, Some(q.l), "inertia acts trivially");
                }
            }
        }
    }

    VerifyReport {
        stages: header.k_max,
        local_records: n_local,
        ordinary_records: n_ord,
        violations: audit.violations,
    }
}

fn check_local(audit: &mut Audit, p: u64, prime_stage: &BTreeMap<u64, u32>, r: &LocalRecord) {
    let (s, level, l) = (r.stage, r.level, Some(r.l));
    let Some(&i) = prime_stage.get(&r.l) else {
        audit.flag(ViolationKind::Header, s, level, l, "prime not declared in the header");
        return;
    };
    if i != r.prime_stage {
        audit.flag(ViolationKind::Header, s, level, l, "prime stage disagrees with header");
    }
    let (Some(sigma), Some(tau)) = (mat(p, level, r.sigma), mat(p, level, r.tau)) else {
        audit.flag(ViolationKind::Header, s, level, l, "entries out of range");
        return;
    };
    let lhs = sigma * tau * match sigma.inverse() {
        Ok(inv) => inv,
        Err(_) => {
            audit.flag(ViolationKind::Determinant, s, level, l, "sigma is not invertible");
            return;
        }
    };
    if lhs != tau.pow(r.l) {
        audit.flag(ViolationKind::Relation, s, level, l, "sigma tau sigma^-1 != tau^l");
    }
    let m = sigma.modulus();
    let special_sigma = Mat2::new(m, [r.l as i64 % m.modulus() as i64, 0, 0, 1]);
    if sigma != special_sigma || !tau.is_upper_unitriangular() {
        audit.flag(ViolationKind::Specialness, s, level, l, "not of the form (diag(l,1), (1 u; 0 1))");
    }
    if sigma.det() != m.residue(r.l as i64) || tau.det() != m.one() {
        audit.flag(ViolationKind::Determinant, s, level, l, "det sigma != l or det tau != 1");
    }
    if tau.entry(0, 1).value() != r.u {
        audit.flag(ViolationKind::Valuation, s, level, l, "recorded u disagrees with tau");
    }
    if level <= i {
        audit.flag(ViolationKind::Onset, s, level, l, format!("record below onset level {}", i + 1));
    } else if valuation(p, level, r.u) != Some(i) {
        audit.flag(
            ViolationKind::Valuation,
            s,
            level,
            l,
            format!("v_p(u) = {:?}, expected {i}", valuation(p, level, r.u)),
        );
    }
}
