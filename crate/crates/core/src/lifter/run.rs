//! The inductive lifting procedure over a validated model.

use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::ValidatedModel;
use super::trace::{
    LocalRecord, OrdinaryRecord, StageEndPrime, StageEndRecord, TraceHeader, TracePrime, TraceRecord,
    TRACE_SCHEMA_VERSION,
};
use super::LiftError;
use crate::groups::{chebotarev_class, Variant};
use crate::linalg::add_scaled;
use crate::localdims::{subspace_decompose, SubspaceDecompositionProblem};
use crate::tame::{act, adjust_to_special, normalize_to_special, special_lift_step, Cocycle, LocalRep, TameError};
use crate::zmod::{Mat2, Modulus, Residue, TraceZeroMat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeState {
    /// Index into [`ValidatedModel::primes`].
    pub entry: usize,
    pub l: u64,
    pub stage: u32,
    pub rep: LocalRep,
}

/// Reductions of one completed stage at full precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSnapshot {
    pub stage: u32,
    pub primes: Vec<PrimeState>,
    pub at_p: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftState {
    pub stage: u32,
    pub level: u32,
    pub primes: Vec<PrimeState>,
    /// `at_p[e - 1]` is the component at `p` of the step from level `e` to `e + 1`.
    pub at_p: Vec<Vec<u64>>,
    pub ledger: Vec<StageSnapshot>,
}

impl LiftState {
    pub fn prime(&self, l: u64) -> Option<&PrimeState> {
        self.primes.iter().find(|s| s.l == l)
    }

    pub fn all_special(&self) -> bool {
        self.primes.iter().all(|s| s.rep.is_special_exact())
    }

    /// Reduction of every local image (and the `p` data) to `level`.
    pub fn reduce(&self, level: u32) -> Result<LiftState, LiftError> {
        Ok(LiftState {
            stage: self.stage,
            level,
            primes: self
                .primes
                .iter()
                .map(|s| Ok(PrimeState { rep: s.rep.reduce(level)?, ..s.clone() }))
                .collect::<Result<_, LiftError>>()?,
            at_p: self.at_p[..(level - 1) as usize].to_vec(),
            ledger: self.ledger.clone(),
        })
    }

    fn snapshot(&self) -> StageSnapshot {
        StageSnapshot { stage: self.stage, primes: self.primes.clone(), at_p: self.at_p.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairOrder {
    NewestFirst,
    OldestFirst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    /// `(l, α)` in the order the primes were visited.
    pub alphas: Vec<(u64, u64)>,
    pub all_special: bool,
}

fn normalize(rep: &LocalRep) -> Result<LocalRep, LiftError> {
    Ok(normalize_to_special(rep)?.rep)
}

/// Acts by `alpha` times a global class at exponent `e` on every local
/// image and on the component at `p`.
pub fn apply_class(
    model: &ValidatedModel,
    state: &mut LiftState,
    class: usize,
    alpha: u64,
    e: u32,
) -> Result<(), LiftError> {
    let p = model.p();
    let alpha = alpha % p;
    if alpha == 0 {
        return Ok(());
    }
    let cls = model.class(class);
    for ps in &mut state.primes {
        let f = cls.restriction(ps.l).scale(alpha);
        if !f.is_zero() {
            ps.rep = normalize(&act(&f, &ps.rep, e)?)?;
        }
    }
    if model.variant() == Variant::Grh {
        add_scaled(p, &mut state.at_p[(e - 1) as usize], &cls.at_p, alpha);
    }
    Ok(())
}

/// The unramified lift at level `N` that the induction starts from.
pub fn base_state(model: &ValidatedModel, rng: &mut ChaCha8Rng) -> LiftState {
    let n = model.precision();
    let at_p = (1..n).map(|_| random_ordinary(model, rng)).collect();
    LiftState { stage: 0, level: n, primes: Vec::new(), at_p, ledger: Vec::new() }
}

fn random_ordinary(model: &ValidatedModel, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let p = model.p();
    let mut v = vec![0; model.ambient_dim()];
    for w in model.ordinary_basis() {
        add_scaled(p, &mut v, w, rng.gen_range(0..p));
    }
    v
}

fn repair_class(model: &ValidatedModel, ps: &PrimeState) -> usize {
    model.primes()[ps.entry].repair
}

/// Restores the special form at every prime using each prime's repair class.
pub fn repair_pass(
    model: &ValidatedModel,
    state: &mut LiftState,
    order: RepairOrder,
) -> Result<RepairOutcome, LiftError> {
    let e = state.level - 1;
    let mut idx: Vec<usize> = (0..state.primes.len()).collect();
    match order {
        RepairOrder::NewestFirst => idx.sort_by_key(|&i| (Reverse(state.primes[i].stage), state.primes[i].entry)),
        RepairOrder::OldestFirst => idx.sort_by_key(|&i| (state.primes[i].stage, state.primes[i].entry)),
    }
    let mut alphas = Vec::new();
    for i in idx {
        let ps = &state.primes[i];
        let class = repair_class(model, ps);
        let f = model.class(class).restriction(ps.l);
        let (alpha, _) = adjust_to_special(&ps.rep, &f).map_err(|err| match err {
            TameError::NullClass => LiftError::NullRepair { l: ps.l },
            other => LiftError::Tame(other),
        })?;
        let l = ps.l;
        apply_class(model, state, class, alpha, e)?;
        alphas.push((l, alpha));
    }
    let all_special = state.all_special();
    if order == RepairOrder::NewestFirst && !all_special {
        let bad = state.primes.iter().find(|s| !s.rep.is_special_exact()).expect("some prime");
        return Err(LiftError::NotSpecialAfterRepair { l: bad.l, level: state.level });
    }
    Ok(RepairOutcome { alphas, all_special })
}

/// Moves the component at `p` of the top step into the ordinary subspace
/// using the base classes; returns their coefficients.
pub fn ordinary_pass(model: &ValidatedModel, state: &mut LiftState) -> Result<Vec<u64>, LiftError> {
    if model.variant() != Variant::Grh {
        return Err(LiftError::Validation("ordinary pass needs the grh variant".into()));
    }
    let p = model.p();
    let e = state.level - 1;
    let problem = SubspaceDecompositionProblem {
        p,
        ambient: model.ambient_dim(),
        u_basis: model.global_image_basis().to_vec(),
        w_basis: model.ordinary_basis().to_vec(),
        target: state.at_p[(e - 1) as usize].clone(),
    };
    let dec = subspace_decompose(&problem)?;
    for (&class, &c) in model.base_classes().iter().zip(&dec.u_coords) {
        apply_class(model, state, class, (p - c) % p, e)?;
    }
    Ok(dec.u_coords)
}

/// Adds the prime(s) of `stage` and forces ramification there at level `stage + 1`.
/// Returns `(l, α)` for each adjustment made.
pub fn introduce_ramification(
    model: &ValidatedModel,
    state: &mut LiftState,
    stage: u32,
) -> Result<Vec<(u64, u64)>, LiftError> {
    let p = model.p();
    if state.level != stage + 1 {
        return Err(LiftError::Validation(format!(
            "stage {stage} starts at level {}, state is at level {}",
            stage + 1,
            state.level
        )));
    }
    let spec = chebotarev_class(model.variant(), p, stage - 1)?;
    let m = Modulus::new(p, state.level)?;
    let new: Vec<usize> = model
        .primes()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.stage == stage)
        .map(|(i, _)| i)
        .collect();
    for &i in &new {
        let entry = &model.primes()[i];
        let rep = LocalRep::new(entry.tame, spec.a, Mat2::identity(m))?;
        state.primes.push(PrimeState { entry: i, l: entry.l, stage, rep });
    }
    let e = stage;
    let mut alphas = Vec::new();
    match model.variant() {
        Variant::Unconditional => {
            for &i in &new {
                let entry = &model.primes()[i];
                let intro = entry.introduction.expect("validated");
                apply_class(model, state, intro, 1, e)?;
                alphas.push((entry.l, 1));
            }
        }
        Variant::Grh => {
            for &i in &new {
                let entry = &model.primes()[i];
                let ps = state.prime(entry.l).expect("just added");
                let f = model.class(entry.repair).restriction(entry.l);
                let (alpha, _) = adjust_to_special(&ps.rep, &f)?;
                if alpha == 0 {
                    return Err(LiftError::ZeroForcedAdjustment { l: entry.l });
                }
                apply_class(model, state, entry.repair, alpha, e)?;
                alphas.push((entry.l, alpha));
            }
        }
    }
    Ok(alphas)
}

/// Lifts every local image one level: a special lift with a random new digit
/// of `u`, twisted by a random local class.
pub fn lift_level(model: &ValidatedModel, state: &mut LiftState, rng: &mut ChaCha8Rng) -> Result<(), LiftError> {
    let p = model.p();
    let m = state.level;
    let next = Modulus::new(p, m + 1)?;
    let field = Modulus::field(p)?;
    for ps in &mut state.primes {
        let u = ps.rep.u().ok_or(LiftError::NotSpecialAfterRepair { l: ps.l, level: m })?;
        let digit = rng.gen_range(0..p);
        let u_next = Residue::new((u.value() + digit * next.power_of_p(m)) as i64, next);
        let lifted = special_lift_step(&ps.rep, u_next)?;
        let (a, b) = (rng.gen_range(0..p), rng.gen_range(0..p));
        let coords = [rng.gen_range(0..p), rng.gen_range(0..p), rng.gen_range(0..p)];
        let mat = TraceZeroMat::from_coords(field, coords[0] as i64, coords[1] as i64, coords[2] as i64);
        let f = Cocycle::unramified(p)?.scale(a)
            + Cocycle::null(p)?.scale(b)
            + Cocycle::coboundary(&ps.rep.model().clone(), &mat)?;
        ps.rep = normalize(&act(&f, &lifted, m)?)?;
    }
    let v = (0..model.ambient_dim()).map(|_| rng.gen_range(0..p)).collect();
    state.at_p.push(v);
    state.level = m + 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: LiftState,
    pub trace: Vec<TraceRecord>,
    /// Set when fewer stages than requested were available.
    pub truncation: Option<String>,
    pub stages_completed: u32,
}

fn local_records(
    state: &LiftState,
    alphas: &[(u64, u64)],
    intro: &[(u64, u64)],
) -> Vec<TraceRecord> {
    state
        .primes
        .iter()
        .map(|ps| {
            let find = |v: &[(u64, u64)]| v.iter().find(|(l, _)| *l == ps.l).map(|(_, a)| *a);
            TraceRecord::Local(LocalRecord {
                stage: state.stage,
                level: state.level,
                l: ps.l,
                prime_stage: ps.stage,
                sigma: ps.rep.sigma().raw(),
                tau: ps.rep.tau().raw(),
                u: ps.rep.tau().entry(0, 1).value(),
                alpha: find(alphas).unwrap_or(0),
                intro_alpha: find(intro),
            })
        })
        .collect()
}

fn ordinary_record(state: &LiftState, adjustment: Vec<u64>) -> TraceRecord {
    TraceRecord::Ordinary(OrdinaryRecord {
        stage: state.stage,
        level: state.level,
        vector: state.at_p[(state.level - 2) as usize].clone(),
        adjustment,
    })
}

fn stage_end(state: &LiftState) -> TraceRecord {
    TraceRecord::StageEnd(StageEndRecord {
        stage: state.stage,
        level: state.level,
        primes: state
            .primes
            .iter()
            .map(|ps| StageEndPrime { l: ps.l, prime_stage: ps.stage, u: ps.rep.tau().entry(0, 1).value() })
            .collect(),
        at_p: state.at_p.clone(),
    })
}

/// Runs stages `1..=k_max`, each lifting from its onset level to the precision cap.
pub fn run(model: &ValidatedModel, k_max: u32) -> Result<RunOutput, LiftError> {
    let n = model.precision();
    let grh = model.variant() == Variant::Grh;
    let mut rng = ChaCha8Rng::seed_from_u64(model.raw().seed);
    let completed = k_max.min(model.stage_count());
    let truncation = (completed < k_max).then(|| {
        format!(
            "requested {k_max} stages but the model provides {}; stopped after stage {completed}",
            model.stage_count()
        )
    });

    let mut trace = vec![TraceRecord::Header(TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        p: model.p(),
        precision: n,
        variant: model.variant(),
        k_max: completed,
        ordinary_basis: model.ordinary_basis().to_vec(),
        primes: model
            .primes()
            .iter()
            .filter(|e| e.stage <= completed)
            .map(|e| TracePrime { l: e.l, stage: e.stage, slot: e.slot as u32 })
            .collect(),
    })];

    let mut state = base_state(model, &mut rng);
    if grh {
        for level in 2..=n {
            trace.push(TraceRecord::Ordinary(OrdinaryRecord {
                stage: 0,
                level,
                vector: state.at_p[(level - 2) as usize].clone(),
                adjustment: Vec::new(),
            }));
        }
    }
    trace.push(stage_end(&state));
    state.ledger.push(state.snapshot());

    for s in 1..=completed {
        let mut cur = state.reduce(s + 1)?;
        cur.stage = s;
        let intro = introduce_ramification(model, &mut cur, s)?;
        let rep = repair_pass(model, &mut cur, RepairOrder::NewestFirst)?;
        trace.extend(local_records(&cur, &rep.alphas, &intro));
        if grh {
            let adj = ordinary_pass(model, &mut cur)?;
            trace.push(ordinary_record(&cur, adj));
        }
        while cur.level < n {
            lift_level(model, &mut cur, &mut rng)?;
            let rep = repair_pass(model, &mut cur, RepairOrder::NewestFirst)?;
            if grh {
                let adj = ordinary_pass(model, &mut cur)?;
                trace.extend(local_records(&cur, &rep.alphas, &[]));
                trace.push(ordinary_record(&cur, adj));
            } else {
                trace.extend(local_records(&cur, &rep.alphas, &[]));
            }
        }
        trace.push(stage_end(&cur));
        cur.ledger.push(cur.snapshot());
        state = cur;
    }
    if let Some(reason) = &truncation {
        trace.push(TraceRecord::Truncation {
            requested: k_max,
            completed,
            reason: reason.clone(),
        });
    }
    Ok(RunOutput { state, trace, truncation, stages_completed: completed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifter::model::{generate_model, GeneratorConfig};
    use crate::lifter::trace::{verify_chain, ViolationKind};

    fn model(variant: Variant, stages: u32, n: u32, seed: u64) -> ValidatedModel {
        generate_model(&GeneratorConfig::new(5, n, variant, stages, seed)).unwrap().validate().unwrap()
    }

    #[test]
    fn unconditional_three_stages_verify() {
        let m = model(Variant::Unconditional, 3, 6, 1);
        let out = run(&m, 3).unwrap();
        let report = verify_chain(&out.trace);
        assert!(report.is_ok(), "{:#?}", report.violations);
        assert_eq!(out.stages_completed, 3);
        assert!(out.state.all_special());
        for ps in &out.state.primes {
            assert_eq!(ps.rep.u().unwrap().valuation(), Some(ps.stage));
        }
    }

    #[test]
    fn grh_three_stages_verify() {
        let m = model(Variant::Grh, 3, 6, 2);
        let out = run(&m, 3).unwrap();
        let report = verify_chain(&out.trace);
        assert!(report.is_ok(), "{:#?}", report.violations);
        assert_eq!(out.state.primes.len(), 4);
    }

    #[test]
    fn run_is_deterministic() {
        let m = model(Variant::Grh, 2, 5, 9);
        assert_eq!(run(&m, 2).unwrap().trace, run(&m, 2).unwrap().trace);
    }

    #[test]
    fn truncates_to_available_stages() {
        let m = model(Variant::Unconditional, 2, 5, 3);
        let out = run(&m, 5).unwrap();
        assert_eq!(out.stages_completed, 2);
        assert!(out.truncation.is_some());
        assert!(verify_chain(&out.trace).is_ok());
    }

    #[test]
    fn oldest_first_repair_can_leave_earlier_primes_broken() {
        let mut broken = 0;
        for seed in 0..10 {
            let m = model(Variant::Unconditional, 2, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut st = base_state(&m, &mut rng).reduce(2).unwrap();
            st.stage = 1;
            introduce_ramification(&m, &mut st, 1).unwrap();
            repair_pass(&m, &mut st, RepairOrder::NewestFirst).unwrap();
            lift_level(&m, &mut st, &mut rng).unwrap();
            repair_pass(&m, &mut st, RepairOrder::NewestFirst).unwrap();
            st.stage = 2;
            introduce_ramification(&m, &mut st, 2).unwrap();
            if !repair_pass(&m, &mut st, RepairOrder::OldestFirst).unwrap().all_special {
                broken += 1;
            }
        }
        assert!(broken > 0);
    }

    #[test]
    fn mutated_traces_are_rejected() {
        let m = model(Variant::Grh, 2, 5, 4);
        let out = run(&m, 2).unwrap();
        let n = m.precision();
        let p = m.p();

        let mut zeroed = out.trace.clone();
        for r in &mut zeroed {
            if let TraceRecord::Local(r) = r {
                if r.stage == 2 && r.level == n && r.prime_stage == 1 {
                    r.tau[1] = 0;
                    r.u = 0;
                    break;
                }
            }
        }
        let rep = verify_chain(&zeroed);
        assert!(rep.count(ViolationKind::Valuation) > 0);

        let mut shifted = out.trace.clone();
        for r in &mut shifted {
            if let TraceRecord::Local(r) = r {
                if r.stage == 2 && r.level == 4 && r.prime_stage == 1 {
                    let m4 = Modulus::new(p, 4).unwrap();
                    r.tau[1] = (r.tau[1] + m4.power_of_p(3)) % m4.modulus();
                    r.u = r.tau[1];
                    break;
                }
            }
        }
        let rep = verify_chain(&shifted);
        assert!(rep.count(ViolationKind::Congruence) > 0);

        let mut non_ordinary = out.trace.clone();
        for r in &mut non_ordinary {
            if let TraceRecord::Ordinary(o) = r {
                if o.stage == 1 {
                    let probe = (0..m.ambient_dim())
                        .map(|i| {
                            let mut e = vec![0; m.ambient_dim()];
                            e[i] = 1;
                            e
                        })
                        .find(|e| !crate::linalg::in_span(p, e.len(), m.ordinary_basis(), e))
                        .unwrap();
                    add_scaled(p, &mut o.vector, &probe, 1);
                    break;
                }
            }
        }
        let rep = verify_chain(&non_ordinary);
        assert!(rep.count(ViolationKind::Ordinary) > 0);
    }
}
