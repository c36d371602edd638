//! `ramify`: command-line access to the verification surfaces of `ramify-core`.
//!
//! Every subcommand produces a list of records. `--output records` prints them
//! as line-delimited JSON; `--output table` renders the same records for
//! reading. Timings go to stderr so that records are reproducible.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use ramify_core::analytic::{
    contradiction_x, counting_point, log_discriminant, lo_bound, simulate_matrix, split_density, DensityParams,
    LoParams, Verdict, LOGINT_TOLERANCE,
};
use ramify_core::groups::{
    chebotarev_class, gl2_order, layer_centralizer_order, section_search_with_budget, split_sanity_search,
    GroupsError, SectionVerdict, SemidirectGroup, Variant, DEFAULT_SECTION_BUDGET,
};
use ramify_core::lifter::{generate_model, run, to_jsonl, verify_chain, GeneratorConfig, GlobalModel};
use ramify_core::localdims::{h1_ord_dim, local_h_dims, PlaceDescriptor, PlaceKind, AD0_DIM};
use ramify_core::tame::{adjust_to_special, classify, cocycle_space, Cocycle, LocalRep, TameModel};
use ramify_core::zmod::{is_prime, teichmuller, Mat2, Modulus};

/// Version of the record layout printed by `--output records`.
const RECORD_SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "ramify", version, about = "Exact checks for infinitely ramified p-adic lifts")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Residue characteristic.
    #[arg(long = "p", global = true, env = "RAMIFY_P", default_value_t = 5)]
    p: u64,
    /// Precision cap N (work mod p^N). Defaults to 8, or the model's precision.
    #[arg(long = "N", global = true, env = "RAMIFY_N")]
    n: Option<u32>,
    #[arg(long, global = true, env = "RAMIFY_VARIANT", default_value = "uncond")]
    variant: Variant,
    #[arg(long, global = true, env = "RAMIFY_SEED", default_value_t = 0)]
    seed: u64,
    /// Global model file (JSON).
    #[arg(long, global = true, env = "RAMIFY_MODEL")]
    model: Option<PathBuf>,
    /// Number of induction stages.
    #[arg(long, global = true, env = "RAMIFY_KMAX", default_value_t = 3)]
    kmax: u32,
    #[arg(long, global = true, env = "RAMIFY_OUTPUT", value_enum, default_value_t = Output::Table)]
    output: Output,
}

const DEFAULT_N: u32 = 8;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Output {
    Table,
    Records,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Local cohomology dimensions of Ad^0 at one place.
    Cohomology(CohomologyArgs),
    /// Tame local cocycles: bases, classification, special adjustment.
    #[command(subcommand)]
    Tame(TameCommand),
    /// Group-theoretic checks.
    #[command(subcommand)]
    Groups(GroupsCommand),
    /// Run the inductive lift on a model and audit the trace.
    Lift(LiftArgs),
    /// Split densities, error bounds and the counting contradiction.
    Density(DensityArgs),
    /// Monte Carlo simulation of the null-probability heuristic.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PlaceArg {
    Tame,
    Multiplicative,
    Ordinary,
}

#[derive(Args, Debug)]
struct CohomologyArgs {
    #[arg(long, value_enum, default_value_t = PlaceArg::Tame)]
    place: PlaceArg,
    /// Tame prime l (default: the least prime congruent to 2 mod p).
    #[arg(long)]
    l: Option<u64>,
    /// Multiplicative prime v.
    #[arg(long, default_value_t = 13)]
    v: u64,
    /// Treat the extension class * as trivial.
    #[arg(long)]
    star_trivial: bool,
    /// Order of the unramified character at p (default: p - 1).
    #[arg(long)]
    psi_order: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum TameCommand {
    /// Bases of Z^1, B^1 and H^1 at a tame prime.
    Basis {
        #[arg(long)]
        l: Option<u64>,
    },
    /// Classify a cocycle given by (x, y, z) coordinates of f(σ) and f(τ).
    Classify {
        #[arg(long)]
        l: Option<u64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        sigma: Vec<i64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        tau: Vec<i64>,
    },
    /// Find α making (I + p^(n-1) α f)·ρ special. Defaults to diag(17, 21) mod 25 with f = r.
    Adjust {
        #[arg(long)]
        l: Option<u64>,
        #[arg(long, default_value_t = 2)]
        level: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [17, 0, 0, 21], allow_hyphen_values = true)]
        sigma: Vec<i64>,
        #[arg(long = "tau", value_delimiter = ',', default_values_t = [1, 0, 0, 1], allow_hyphen_values = true)]
        tau_matrix: Vec<i64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 0, 0], allow_hyphen_values = true)]
        f_sigma: Vec<i64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0, 0, 0], allow_hyphen_values = true)]
        f_tau: Vec<i64>,
    },
}

#[derive(Subcommand, Debug)]
enum GroupsCommand {
    /// Exhaustive search for a section of GL2(Z/p^2) -> GL2(F_p).
    SectionSearch {
        #[arg(long, default_value_t = DEFAULT_SECTION_BUDGET)]
        budget: u64,
        /// Run the split sanity case instead.
        #[arg(long)]
        split: bool,
    },
    /// Orders of GL2(Z/p^n) and of the stage-k Chebotarev class element.
    Orders {
        #[arg(long, default_value_t = 0)]
        k: u32,
    },
    /// Centralizer of diag(a, 1) in one Ad^0 layer, and in H_k.
    Centralizer {
        #[arg(long, default_value_t = 2)]
        a: u64,
        #[arg(long, default_value_t = 0)]
        k: u32,
    },
}

#[derive(Args, Debug)]
struct LiftArgs {
    /// Audit the trace and fail on any violation.
    #[arg(long)]
    verify: bool,
    /// Write the line-delimited trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the (generated or loaded) model here.
    #[arg(long)]
    write_model: Option<PathBuf>,
    /// Stages to generate when no model file is given (default: kmax).
    #[arg(long)]
    stages: Option<u32>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    /// Density of the base class, as n/d.
    #[arg(long, default_value = "1/100")]
    d: String,
    #[arg(long, default_value_t = 1.0)]
    e1: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 10.0)]
    c2: f64,
    #[arg(long = "n-l", default_value_t = 100.0)]
    n_l: f64,
    /// Also evaluate both counts and the error bound at this x.
    #[arg(long)]
    x: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    size: usize,
    /// Probability of a zero entry (default: 1/p).
    #[arg(long)]
    null_probability: Option<f64>,
    /// Largest accepted |z|.
    #[arg(long, default_value_t = 3.0)]
    z_max: f64,
}

/// Records plus whether every requested verification passed.
struct Outcome {
    records: Vec<Value>,
    ok: bool,
}

fn record(kind: &str, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("schema".into(), json!(RECORD_SCHEMA));
    m.insert("record".into(), json!(kind));
    match body {
        Value::Object(fields) => m.extend(fields),
        other => {
            m.insert("value".into(), other);
        }
    }
    Value::Object(m)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn least_tame_prime(p: u64) -> u64 {
    (1..).map(|k| 2 + k * p).find(|&l| is_prime(l)).expect("Dirichlet")
}

fn cohomology(g: &Global, a: &CohomologyArgs) -> Result<Outcome> {
    let kind = match a.place {
        PlaceArg::Tame => PlaceKind::TameL { l: a.l.unwrap_or_else(|| least_tame_prime(g.p)) },
        PlaceArg::Multiplicative => PlaceKind::MultiplicativeV { v: a.v, star_nontrivial: !a.star_trivial },
        PlaceArg::Ordinary => PlaceKind::OrdinaryP {
            star_nontrivial: !a.star_trivial,
            psi_order: a.psi_order.unwrap_or(g.p - 1),
        },
    };
    let place = PlaceDescriptor::new(g.p, kind)?;
    let d = local_h_dims(&place)?;
    let defect = if matches!(kind, PlaceKind::OrdinaryP { .. }) { AD0_DIM as i64 } else { 0 };
    let mut body = json!({
        "place": to_value(&place),
        "h0": d.h0,
        "h1": d.h1,
        "h2": d.h2,
        "dims": [d.h0, d.h1, d.h2],
        "euler_defect": d.euler_defect(),
        "expected_euler_defect": defect,
    });
    if matches!(kind, PlaceKind::OrdinaryP { .. }) {
        body["h1_ord"] = json!(h1_ord_dim(&place)?);
    }
    Ok(Outcome { records: vec![record("local_dims", body)], ok: d.euler_defect() == defect })
}

fn coords(c: &Cocycle) -> Value {
    json!({ "f_sigma": c.f_sigma().coords(), "f_tau": c.f_tau().coords() })
}

fn expect_len(name: &str, v: &[i64], n: usize) -> Result<()> {
    if v.len() != n {
        bail!("--{name} needs {n} comma-separated integers, got {}", v.len());
    }
    Ok(())
}

fn tame(g: &Global, cmd: &TameCommand) -> Result<Outcome> {
    let model = |l: Option<u64>| TameModel::new(g.p, l.unwrap_or_else(|| least_tame_prime(g.p)));
    match cmd {
        TameCommand::Basis { l } => {
            let md = model(*l)?;
            let space = cocycle_space(&md)?;
            let (z1, b1, h1) = space.dims();
            let list = |v: &[Cocycle]| v.iter().map(coords).collect::<Vec<_>>();
            Ok(Outcome {
                records: vec![record(
                    "cocycle_space",
                    json!({
                        "p": g.p, "l": md.l(),
                        "dim_z1": z1, "dim_b1": b1, "dim_h1": h1,
                        "z1_basis": list(&space.z1_basis),
                        "b1_basis": list(&space.b1_basis),
                        "h1_basis": list(&space.h1_basis),
                    }),
                )],
                ok: (z1, b1, h1) == (4, 2, 2),
            })
        }
        TameCommand::Classify { l, sigma, tau } => {
            expect_len("sigma", sigma, 3)?;
            expect_len("tau", tau, 3)?;
            let md = model(*l)?;
            let c = Cocycle::from_coords(g.p, [sigma[0], sigma[1], sigma[2]], [tau[0], tau[1], tau[2]])?;
            let valid = c.check(&md);
            let mut body = json!({ "p": g.p, "l": md.l(), "cocycle": coords(&c), "is_cocycle": valid.is_ok() });
            match valid {
                Ok(()) => body["classification"] = to_value(&classify(&c, &md)?),
                Err(e) => body["error"] = json!(e.to_string()),
            }
            let ok = body["is_cocycle"] == json!(true);
            Ok(Outcome { records: vec![record("classification", body)], ok })
        }
        TameCommand::Adjust { l, level, sigma, tau_matrix, f_sigma, f_tau } => {
            expect_len("sigma", sigma, 4)?;
            expect_len("tau", tau_matrix, 4)?;
            expect_len("f-sigma", f_sigma, 3)?;
            expect_len("f-tau", f_tau, 3)?;
            let md = model(*l)?;
            let m = Modulus::new(g.p, *level)?;
            let quad = |v: &[i64]| [v[0], v[1], v[2], v[3]];
            let rep = LocalRep::new(md, Mat2::new(m, quad(sigma)), Mat2::new(m, quad(tau_matrix)))?;
            let f = Cocycle::from_coords(g.p, [f_sigma[0], f_sigma[1], f_sigma[2]], [f_tau[0], f_tau[1], f_tau[2]])?;
            let (alpha, adjusted) = adjust_to_special(&rep, &f)?;
            Ok(Outcome {
                records: vec![record(
                    "adjustment",
                    json!({
                        "p": g.p, "l": md.l(), "level": level,
                        "sigma": rep.sigma().raw(), "tau": rep.tau().raw(),
                        "class": coords(&f),
                        "alpha": alpha,
                        "adjusted_sigma": adjusted.sigma().raw(),
                        "adjusted_tau": adjusted.tau().raw(),
                        "special": adjusted.is_special_exact(),
                    }),
                )],
                ok: adjusted.is_special_exact(),
            })
        }
    }
}

fn groups(g: &Global, cmd: &GroupsCommand) -> Result<Outcome> {
    match cmd {
        GroupsCommand::SectionSearch { budget, split } => {
            let start = Instant::now();
            let result = if *split { split_sanity_search(g.p) } else { section_search_with_budget(g.p, *budget) };
            let report = match result {
                Ok(r) => r,
                Err(GroupsError::BudgetExceeded { checked, total, budget }) => {
                    let body = json!({ "p": g.p, "status": "incomplete", "checked": checked, "total": total, "budget": budget });
                    return Ok(Outcome { records: vec![record("section_search_incomplete", body)], ok: false });
                }
                Err(e) => return Err(e.into()),
            };
            eprintln!("section search: {:.2?}", start.elapsed());
            let (verdict, candidates, witness) = match &report.verdict {
                SectionVerdict::NoSection { candidates } => ("NoSection", *candidates, Value::Null),
                SectionVerdict::SectionFound { x, y, candidates } => {
                    ("SectionFound", *candidates, json!({ "x": x.raw(), "y": y.raw() }))
                }
            };
            let body = json!({
                "p": report.p,
                "level": report.level,
                "target_order": report.target_order,
                "verdict": verdict,
                "candidates": candidates,
                "cap_rejections": report.cap_rejections,
                "order_rejections": report.order_rejections,
                "witness": witness,
            });
            let expected = if *split { "SectionFound" } else { "NoSection" };
            Ok(Outcome { records: vec![record("section_search", body)], ok: verdict == expected })
        }
        GroupsCommand::Orders { k } => {
            let n = g.n.unwrap_or(DEFAULT_N);
            let mut records: Vec<Value> = (1..=n)
                .map(|level| {
                    let order = gl2_order(g.p, level).map(|o| o.to_string());
                    record("gl2_order", json!({ "p": g.p, "level": level, "order": order }))
                })
                .collect();
            let group = SemidirectGroup::stage(g.p, *k)?;
            let cls = chebotarev_class(g.variant, g.p, *k)?;
            let order = group.element_order(&cls.element(&group)?);
            records.push(record(
                "class_element_order",
                json!({
                    "p": g.p, "k": k, "variant": g.variant,
                    "a": cls.a.raw(), "b": cls.b.raw(), "order": order,
                    "special_mod_p": cls.is_special_at(1)?,
                    "special_at_level": cls.is_special_at(k + 2)?,
                }),
            ));
            Ok(Outcome { records, ok: true })
        }
        GroupsCommand::Centralizer { a, k } => {
            let f = Modulus::field(g.p)?;
            let layer = layer_centralizer_order(&Mat2::diag(f, *a as i64, 1))?;
            let group = SemidirectGroup::stage(g.p, *k)?;
            let m = group.c_modulus();
            let full = group.centralizer_order_of_torus_element(&Mat2::diag(m, teichmuller(*a as i64, g.p, m.level())?.value() as i64, 1))?;
            Ok(Outcome {
                records: vec![record(
                    "centralizer",
                    json!({ "p": g.p, "a": a, "k": k, "layer_order": layer, "group_order": full.to_string() }),
                )],
                ok: layer == g.p,
            })
        }
    }
}

fn lift(g: &Global, a: &LiftArgs) -> Result<Outcome> {
    let raw = match &g.model {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let m = GlobalModel::from_json(&text)?;
            if let Some(n) = g.n {
                if n != m.precision {
                    bail!("--N {n} differs from the model precision {}", m.precision);
                }
            }
            m
        }
        None => {
            let n = g.n.unwrap_or(DEFAULT_N);
            let stages = a.stages.unwrap_or(g.kmax);
            generate_model(&GeneratorConfig::new(g.p, n, g.variant, stages, g.seed))?
        }
    };
    if g.kmax + 2 > raw.precision {
        bail!("kmax + 2 = {} exceeds N = {}", g.kmax + 2, raw.precision);
    }
    if let Some(path) = &a.write_model {
        fs::write(path, raw.to_json_pretty()).with_context(|| format!("writing {}", path.display()))?;
    }
    let model = raw.validate()?;
    let start = Instant::now();
    let out = run(&model, g.kmax)?;
    eprintln!("lift: {:.2?}", start.elapsed());
    if let Some(path) = &a.trace {
        fs::write(path, to_jsonl(&out.trace)).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut records = vec![record(
        "lift_summary",
        json!({
            "p": model.p(),
            "precision": model.precision(),
            "variant": model.variant(),
            "k_max": g.kmax,
            "stages_completed": out.stages_completed,
            "primes": out.state.primes.iter().map(|s| json!({
                "l": s.l,
                "stage": s.stage,
                "u": s.rep.tau().entry(0, 1).value(),
                "u_valuation": s.rep.tau().entry(0, 1).valuation(),
            })).collect::<Vec<_>>(),
            "trace_records": out.trace.len(),
        }),
    )];
    if let Some(reason) = &out.truncation {
        records.push(record("truncation", json!({ "requested": g.kmax, "completed": out.stages_completed, "reason": reason })));
    }
    let mut ok = true;
    if a.verify {
        let report = verify_chain(&out.trace);
        ok = report.is_ok();
        records.push(record(
            "verify_report",
            json!({
                "stages": report.stages,
                "local_records": report.local_records,
                "ordinary_records": report.ordinary_records,
                "violations": report.violations.len(),
            }),
        ));
        records.extend(report.violations.iter().map(|v| record("violation", to_value(v))));
    }
    Ok(Outcome { records, ok })
}

fn parse_ratio(s: &str) -> Result<num_rational::Rational64> {
    let parse = |t: &str| t.trim().parse::<i64>().with_context(|| format!("bad density {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d == 0 {
                bail!("zero denominator in {s:?}");
            }
            Ok(num_rational::Rational64::new(parse(n)?, d))
        }
        None => Ok(num_rational::Rational64::from_integer(parse(s)?)),
    }
}

fn density(g: &Global, a: &DensityArgs) -> Result<Outcome> {
    let params = DensityParams::new(parse_ratio(&a.d)?, g.p)?;
    let lo = LoParams { e1: a.e1, c1: a.c1, c2: a.c2, n_l: a.n_l };
    let (zero, one) = split_density(&params);
    let mut records = vec![record(
        "split_density",
        json!({ "p": g.p, "d": params.d.to_string(), "zero_density": zero.to_string(), "one_density": one.to_string() }),
    )];
    if let Some(x) = a.x {
        let pt = counting_point(&params, &lo, x, LOGINT_TOLERANCE)?;
        let log_d = log_discriminant(lo.c1, lo.c2, x);
        let bound = lo_bound(x, ramify_core::analytic::ratio_to_f64(params.d), log_d, lo.n_l, lo.e1)?;
        let mut body = to_value(&pt);
        body["log_discriminant"] = json!(log_d);
        body["class_error_bound"] = json!(bound);
        records.push(record("counting_point", body));
    }
    let report = contradiction_x(&params, &lo)?;
    let ok = report.verdict == Verdict::ContradictionReached && report.ratios_increase_after();
    records.push(record(
        "contradiction",
        json!({
            "d": params.d.to_string(),
            "p": g.p,
            "lo": to_value(&report.lo),
            "safety_factor": report.safety_factor,
            "verdict": to_value(&report.verdict),
            "crossover": to_value(&report.crossover),
            "ratios_increase_after": report.ratios_increase_after(),
        }),
    ));
    records.extend(report.after.iter().map(|pt| record("after_crossover", to_value(pt))));
    Ok(Outcome { records, ok })
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<Outcome> {
    let start = Instant::now();
    let s = simulate_matrix(a.size, g.p, g.seed, a.null_probability)?;
    eprintln!("simulate: {:.2?}", start.elapsed());
    let (rz, sz) = (s.row_z(), s.symmetric_z());
    let mut body = to_value(&s);
    body["row_z"] = json!(rz);
    body["symmetric_z"] = json!(sz);
    Ok(Outcome { records: vec![record("simulation", body)], ok: rz.abs() < a.z_max && sz.abs() < a.z_max })
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Renders records as blocks of `key  value` rows; nested objects are
/// flattened with dotted keys.
fn render_table(records: &[Value]) -> String {
    fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) if !m.is_empty() => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    flatten(&key, x, rows);
                }
            }
            other => rows.push((prefix.to_string(), cell(other))),
        }
    }
    let mut out = String::new();
    for r in records {
        let kind = r.get("record").map(cell).unwrap_or_default();
        out.push_str(&format!("== {kind} ==\n"));
        let mut rows = Vec::new();
        if let Value::Object(m) = r {
            for (k, v) in m.iter().filter(|(k, _)| *k != "record" && *k != "schema") {
                flatten(k, v, &mut rows);
            }
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            out.push_str(&format!("  {k:<width$}  {v}\n"));
        }
    }
    out
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    Modulus::new(g.p, g.n.unwrap_or(DEFAULT_N)).context("invalid (p, N)")?;
    match &cli.command {
        Command::Cohomology(a) => cohomology(g, a),
        Command::Tame(c) => tame(g, c),
        Command::Groups(c) => groups(g, c),
        Command::Lift(a) => lift(g, a),
        Command::Density(a) => density(g, a),
        Command::Simulate(a) => simulate(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(outcome) => {
            match cli.global.output {
                Output::Records => {
                    for r in &outcome.records {
                        println!("{}", serde_json::to_string(r).expect("records serialize"));
                    }
                }
                Output::Table => print!("{}", render_table(&outcome.records)),
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
