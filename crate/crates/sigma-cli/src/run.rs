//! One job per invocation: parse the input document, dispatch to the core,
//! build the JSON report and the exit code.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};
use sigma_core::amalgamation::{
    build_3amalg_obstruction, check_n_sas_witness, extend_character, hyperplane_search, search_n_sas_witness,
    AmalgError, AmalgVerdict, CharacterTable, Extension, NSasSearch, Query,
};
use sigma_core::counterexample::{
    build_base, closure_step, verify_control, verify_counterexample, VERDICT_DECOMPOSABLE, VERDICT_REFUTED,
};
use sigma_core::sas::{
    certify_unsolvable, decide_free_base, solve_multiplicative_bounded, solve_twisted_bounded, CertifyOutcome,
    Equation, FreeBaseDecision, MultiplicativeSas, SearchBounds, SolveResult, TwistedSas,
};
use sigma_core::systems::{
    decompose, ff_decompose_bounded, ff_decompose_with_witnesses, validate_decomposition, AdditiveEquation,
    Decomposition, FfSearch, GenericPoints, SearchOracle, SystemError, SystemModel,
};
use sigma_core::{Element, GenKind, Presentation, RatFunc};
use thiserror::Error;

use crate::document::{parse_document, Document, ParseError, Statement};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    SolveSas,
    SolveMult,
    Decompose,
    FfDecompose,
    Character,
    Hyperplane,
    AmalgCheck,
    NsasCheck,
    ClosureStep,
    VerifyCounterexample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveSas => "solve-sas",
            Command::SolveMult => "solve-mult",
            Command::Decompose => "decompose",
            Command::FfDecompose => "ff-decompose",
            Command::Character => "character",
            Command::Hyperplane => "hyperplane",
            Command::AmalgCheck => "amalg-check",
            Command::NsasCheck => "nsas-check",
            Command::ClosureStep => "closure-step",
            Command::VerifyCounterexample => "verify-counterexample",
        }
    }

    /// Bounds used when the flags leave them unset.
    pub fn default_bounds(self) -> SearchBounds {
        match self {
            Command::FfDecompose | Command::VerifyCounterexample => SearchBounds { degree: 4, window: 3 },
            Command::Hyperplane | Command::NsasCheck => SearchBounds { degree: 2, window: 1 },
            _ => SearchBounds::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Job {
    pub command: Command,
    /// Document text; `verify-counterexample` needs none.
    pub input: Option<String>,
    pub degree: Option<u32>,
    pub window: Option<u32>,
    pub seed: u64,
    pub require_decision: bool,
}

impl Job {
    pub fn new(command: Command, input: Option<&str>) -> Self {
        Job { command, input: input.map(str::to_string), degree: None, window: None, seed: 0, require_decision: false }
    }

    pub fn bounds(&self) -> SearchBounds {
        let d = self.command.default_bounds();
        SearchBounds { degree: self.degree.unwrap_or(d.degree), window: self.window.unwrap_or(d.window) }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("input error: {0}")]
    Input(String),
}

impl From<SystemError> for RunError {
    fn from(e: SystemError) -> Self {
        RunError::Input(e.to_string())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub bounds: SearchBounds,
    pub presentation: Vec<String>,
    pub verdict: String,
    /// False when only a bounded or partial answer was reached.
    pub decided: bool,
    pub details: Value,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Report,
    pub json: String,
    pub summary: String,
}

pub fn run(job: &Job) -> Result<Outcome, RunError> {
    let doc = match (&job.input, job.command) {
        (_, Command::VerifyCounterexample) => Document::default(),
        (Some(text), _) => parse_document(text)?,
        (None, c) => return Err(RunError::Input(format!("{} needs an input document", c.name()))),
    };
    let bounds = job.bounds();
    let (verdict, decided, details) = match job.command {
        Command::SolveSas => solve_sas(&doc, bounds)?,
        Command::SolveMult => solve_mult(&doc, bounds)?,
        Command::Decompose => run_decompose(&doc, job.seed)?,
        Command::FfDecompose => run_ff_decompose(&doc, bounds, job.seed)?,
        Command::Character => run_character(&doc)?,
        Command::Hyperplane => run_hyperplane(&doc, bounds)?,
        Command::AmalgCheck => run_amalg_check(&doc)?,
        Command::NsasCheck => run_nsas_check(&doc, bounds)?,
        Command::ClosureStep => run_closure_step(&doc)?,
        Command::VerifyCounterexample => run_verify_counterexample(bounds, job.seed),
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: job.command.name(),
        seed: job.seed,
        bounds,
        presentation: doc.presentation.describe(),
        verdict,
        decided,
        details,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let exit_code = if job.require_decision && !report.decided { EXIT_UNDECIDED } else { EXIT_OK };
    let summary = summarize(&report);
    Ok(Outcome { exit_code, report, json, summary })
}

fn summarize(r: &Report) -> String {
    let mut s = format!("command: {}\nverdict: {}\n", r.command, r.verdict);
    if !r.decided {
        s.push_str(&format!("undecided within bounds {}\n", r.bounds));
    }
    s
}

type Verdict = (String, bool, Value);

fn fmt(p: &Presentation, x: &Element) -> String {
    p.fmt(x)
}

fn first<T>(doc: &Document, what: &str, pick: impl Fn(&Statement) -> Option<T>) -> Result<T, RunError> {
    doc.statements.iter().find_map(pick).ok_or_else(|| RunError::Input(format!("missing `{what}` statement")))
}

fn solve_result_json(p: &Presentation, r: &SolveResult) -> Value {
    match r {
        SolveResult::Solution(x) => json!({ "outcome": r.verdict(), "solution": fmt(p, x) }),
        SolveResult::NoSolutionWithinBounds(b) => json!({ "outcome": r.verdict(), "bounds": b }),
        SolveResult::Unsolvable(c) => json!({ "outcome": r.verdict(), "certificate": c }),
    }
}

/// Bounded search, then the free-base decision, then the certifier.
/// Certifier first, since it is cheap and never refutes a solvable
/// equation; then the bounded search, then the free-base decision.
fn settle(
    p: &Presentation,
    eq: &Equation,
    search: impl FnOnce() -> Result<SolveResult, RunError>,
) -> Result<Verdict, RunError> {
    let mut details = json!({ "equation": eq.display(p) });
    let reason = match certify_unsolvable(p, eq, None) {
        CertifyOutcome::Certificate(c) => {
            details["bounded"] = json!({ "verdict": "Skipped" });
            details["derived_equations"] = json!(c.derived_equations());
            details["certificate"] = json!(c);
            return Ok(("Unsolvable".into(), true, details));
        }
        CertifyOutcome::Unknown(reason) => reason,
    };
    let bounded = search()?;
    details["bounded"] = solve_result_json(p, &bounded);
    match bounded {
        SolveResult::Solution(_) => return Ok(("Solution".into(), true, details)),
        SolveResult::Unsolvable(_) => return Ok(("Unsolvable".into(), true, details)),
        SolveResult::NoSolutionWithinBounds(_) => {}
    }
    if p.all_free() {
        match decide_free_base(p, eq).map_err(|e| RunError::Input(e.to_string()))? {
            FreeBaseDecision::Solvable(x) => {
                details["free_base"] = json!({ "decision": "Solvable", "solution": fmt(p, &x) });
                return Ok(("Solution".into(), true, details));
            }
            FreeBaseDecision::Unsolvable(c) => {
                details["free_base"] = json!({ "decision": "Unsolvable", "certificate": c });
                return Ok(("Unsolvable".into(), true, details));
            }
            FreeBaseDecision::Undecided(b) => details["free_base"] = json!({ "decision": "Undecided", "bounds": b }),
        }
    }
    details["certifier"] = json!({ "outcome": "Unknown", "reason": reason });
    Ok(("Unknown".into(), false, details))
}

fn solve_sas(doc: &Document, bounds: SearchBounds) -> Result<Verdict, RunError> {
    let p = &doc.presentation;
    let eq = first(doc, "torsor` or `twisted", |s| match s {
        Statement::Torsor(a) => Some(TwistedSas::torsor(a.clone())),
        Statement::Twisted(e1, e2) => Some(TwistedSas { e1: e1.clone(), e2: e2.clone() }),
        _ => None,
    })?;
    if eq.e1.is_zero() {
        return Err(RunError::Input("e1 must be nonzero".into()));
    }
    let full = Equation::Twisted(eq.clone());
    settle(p, &full, || solve_twisted_bounded(p, &eq, bounds).map_err(|e| RunError::Input(e.to_string())))
}

fn solve_mult(doc: &Document, bounds: SearchBounds) -> Result<Verdict, RunError> {
    let p = &doc.presentation;
    let (e, z) = first(doc, "mult", |s| match s {
        Statement::Mult(e, z) => Some((e.clone(), *z)),
        _ => None,
    })?;
    let eq = MultiplicativeSas::new(e, z).map_err(|e| RunError::Input(e.to_string()))?;
    let full = Equation::Multiplicative(eq.clone());
    settle(p, &full, || solve_multiplicative_bounded(p, &eq, bounds).map_err(|e| RunError::Input(e.to_string())))
}

fn system(doc: &Document) -> Result<SystemModel, RunError> {
    let n = doc.system.ok_or_else(|| RunError::Input("missing `system` statement".into()))?;
    let base: BTreeSet<u32> = doc.presentation.ids().into_iter().filter(|id| !doc.homes.contains_key(id)).collect();
    Ok(SystemModel::from_homes(doc.presentation.clone(), base, doc.homes.clone(), n)?)
}

fn summands(doc: &Document, m: &SystemModel) -> Result<AdditiveEquation, RunError> {
    let s: Vec<Element> = doc
        .statements
        .iter()
        .filter_map(|s| match s {
            Statement::Summand(x) => Some(x.clone()),
            _ => None,
        })
        .collect();
    Ok(AdditiveEquation::new(m, s)?)
}

fn decomposition_json(p: &Presentation, dec: &Decomposition) -> Value {
    let entries: Vec<Value> =
        dec.c.iter().map(|((i, j), x)| json!({ "i": i + 1, "j": j + 1, "value": fmt(p, x) })).collect();
    Value::Array(entries)
}

fn run_decompose(doc: &Document, seed: u64) -> Result<Verdict, RunError> {
    let m = system(doc)?;
    let eq = summands(doc, &m)?;
    let p = m.presentation();
    match decompose(&m, &eq, &mut GenericPoints::new(seed)) {
        Ok(dec) => {
            let v = validate_decomposition(&m, &eq, &dec);
            let details = json!({
                "height": m.n(),
                "decomposition": decomposition_json(p, &dec),
                "validation": { "valid": v.valid, "diagnostics": v.diagnostics },
            });
            let verdict = if v.valid { "Decomposed" } else { "Invalid" };
            Ok((verdict.into(), v.valid, details))
        }
        Err(e) => Ok(("Failed".into(), false, json!({ "reason": e.to_string() }))),
    }
}

fn run_ff_decompose(doc: &Document, bounds: SearchBounds, seed: u64) -> Result<Verdict, RunError> {
    let m = system(doc)?;
    let eq = summands(doc, &m)?;
    eq.check_ff(&m)?;
    let p = m.presentation();
    match ff_decompose_bounded(&m, &eq, bounds)? {
        FfSearch::Found(dec) => {
            let v = validate_decomposition(&m, &eq, &dec);
            let details = json!({
                "decomposition": decomposition_json(p, &dec),
                "validation": { "valid": v.valid, "diagnostics": v.diagnostics },
                "pointwise_fixed": dec.c.values().all(|x| p.is_fixed(x)),
            });
            Ok(("Decomposed".into(), v.valid, details))
        }
        FfSearch::NotFoundWithinBounds(b) => {
            let mut oracle = SearchOracle { bounds };
            let witness = match ff_decompose_with_witnesses(&m, &eq, &mut oracle, &mut GenericPoints::new(seed)) {
                Ok(dec) => json!({ "outcome": "Decomposed", "decomposition": decomposition_json(p, &dec) }),
                Err(SystemError::WitnessUnavailable { target, home, corner, .. }) => json!({
                    "outcome": "Blocked",
                    "torsor_target": target,
                    "home": home.iter().map(|i| i + 1).collect::<Vec<_>>(),
                    "corner": corner.iter().map(|&id| p.gen(id).map(|g| g.name.clone()).unwrap_or_default()).collect::<Vec<_>>(),
                }),
                Err(e) => json!({ "outcome": "Failed", "reason": e.to_string() }),
            };
            let details = json!({ "bounded": { "outcome": "NotFoundWithinBounds", "bounds": b }, "witness_driven": witness });
            Ok(("NotFoundWithinBounds".into(), false, details))
        }
    }
}

fn amalg(e: AmalgError) -> RunError {
    RunError::Input(e.to_string())
}

fn run_character(doc: &Document) -> Result<Verdict, RunError> {
    let p = &doc.presentation;
    let mut table = CharacterTable::new(p);
    let mut queries = Vec::new();
    for s in &doc.statements {
        match s {
            Statement::Entry(x, v) => table.push(x.clone(), v.clone()).map_err(amalg)?,
            Statement::Query(x, Some(v)) => queries.push(Query::Assign(x.clone(), v.clone())),
            Statement::Query(x, None) => queries.push(Query::Free(x.clone())),
            _ => {}
        }
    }
    if let Some(o) = table.consistency() {
        let details = json!({ "obstruction": o, "relation": o.describe() });
        return Ok(("Inconsistent".into(), true, details));
    }
    match extend_character(&table, &queries).map_err(amalg)? {
        Extension::Extended { table, valuations } => {
            let entries: Vec<Value> =
                table.describe().into_iter().map(|(x, v)| json!({ "element": x, "value": v })).collect();
            Ok(("Extended".into(), true, json!({ "valuations": valuations, "table": entries })))
        }
        Extension::Obstruction(o) => {
            Ok(("Obstruction".into(), true, json!({ "obstruction": o, "relation": o.describe() })))
        }
    }
}

fn run_hyperplane(doc: &Document, bounds: SearchBounds) -> Result<Verdict, RunError> {
    let p = &doc.presentation;
    let xs: Vec<Element> = doc
        .statements
        .iter()
        .filter_map(|s| match s {
            Statement::Element(x) => Some(x.clone()),
            _ => None,
        })
        .collect();
    let height = first(doc, "height", |s| match s {
        Statement::Height(h) => Some(*h),
        _ => None,
    })?;
    let names = doc
        .statements
        .iter()
        .find_map(|s| match s {
            Statement::Subfield(n) => Some(n.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let ids: BTreeSet<u32> = names.iter().filter_map(|n| p.id_of(n)).collect();
    let sub = p.restrict(&p.dependency_closure(&ids)).map_err(|e| RunError::Input(e.to_string()))?;
    let found = hyperplane_search(p, &xs, height, &sub, bounds).map_err(amalg)?;
    let details = json!({ "elements": xs.iter().map(|x| fmt(p, x)).collect::<Vec<_>>(), "height": height, "subfield": sub.describe(), "witness": found });
    let verdict = if found.is_some() { "Hyperplane" } else { "NoHyperplane" };
    Ok((verdict.into(), true, details))
}

fn run_amalg_check(doc: &Document) -> Result<Verdict, RunError> {
    let p = &doc.presentation;
    let a = first(doc, "target", |s| match s {
        Statement::Target(x) => Some(x.clone()),
        _ => None,
    })?;
    let r = first(doc, "r", |s| match s {
        Statement::Angles(v) => Some(v.clone()),
        _ => None,
    })?;
    let r: [_; 3] = r.try_into().map_err(|_| RunError::Input("`r` needs exactly three angles".into()))?;
    match build_3amalg_obstruction(p, &a, r.clone(), None) {
        Ok(inst) => {
            let entries: Vec<Value> =
                inst.table.describe().into_iter().map(|(x, v)| json!({ "element": x, "value": v })).collect();
            let mut details = json!({
                "instance": inst.presentation.describe(),
                "table": entries,
                "r": r,
                "certificate_equations": inst.certificate_equations,
            });
            let verdict = match &inst.verdict {
                AmalgVerdict::Solvable => "Solvable",
                AmalgVerdict::Obstruction { obstruction } => {
                    details["obstruction"] = json!(obstruction);
                    "Obstruction"
                }
            };
            Ok((verdict.into(), true, details))
        }
        Err(e @ AmalgError::MissingCertificate { .. }) => {
            Ok(("Refused".into(), false, json!({ "reason": e.to_string() })))
        }
        Err(e) => Err(amalg(e)),
    }
}

fn indexed(doc: &Document, pick: impl Fn(&Statement) -> Option<(usize, Element)>) -> BTreeMap<usize, Element> {
    doc.statements.iter().filter_map(pick).collect()
}

fn run_nsas_check(doc: &Document, bounds: SearchBounds) -> Result<Verdict, RunError> {
    let m = system(doc)?;
    let p = m.presentation();
    let btilde = first(doc, "btilde", |s| match s {
        Statement::Btilde(x) => Some(x.clone()),
        _ => None,
    })?;
    let parts = indexed(doc, |s| match s {
        Statement::Part(i, x) => Some((*i, x.clone())),
        _ => None,
    });
    let mut rewrite = indexed(doc, |s| match s {
        Statement::Rewrite(i, x) => Some((*i, x.clone())),
        _ => None,
    });
    let mut witnesses = indexed(doc, |s| match s {
        Statement::Witness(i, x) => Some((*i, x.clone())),
        _ => None,
    });
    let show = |map: &BTreeMap<usize, Element>| -> Value {
        map.iter().map(|(i, x)| (format!("{}", i + 1), Value::String(fmt(p, x)))).collect::<serde_json::Map<_, _>>().into()
    };
    let mut details = json!({ "btilde": fmt(p, &btilde), "parts": show(&parts) });
    if witnesses.is_empty() {
        let mut shifts: Vec<Element> = doc
            .statements
            .iter()
            .filter_map(|s| match s {
                Statement::Shift(x) => Some(x.clone()),
                _ => None,
            })
            .collect();
        if shifts.is_empty() {
            shifts.push(RatFunc::zero());
        }
        match search_n_sas_witness(&m, &parts, &shifts, bounds) {
            NSasSearch::Found { rewrite: r, witnesses: w } => {
                details["search"] = json!({ "outcome": "Found" });
                (rewrite, witnesses) = (r, w);
            }
            NSasSearch::NotFoundWithinBounds { candidates_tried } => {
                details["search"] = json!({ "outcome": "NotFoundWithinBounds", "candidates_tried": candidates_tried });
                return Ok(("NotFoundWithinBounds".into(), false, details));
            }
        }
    }
    let v = check_n_sas_witness(&m, &btilde, &parts, &rewrite, &witnesses);
    details["rewrite"] = show(&rewrite);
    details["witnesses"] = show(&witnesses);
    details["diagnostics"] = json!(v.diagnostics);
    Ok((if v.valid { "Valid" } else { "Invalid" }.into(), true, details))
}

/// The document must be `gen g free;` followed by torsor generators, which
/// are replayed as closure steps; the `torsor` statement is the new target.
fn run_closure_step(doc: &Document) -> Result<Verdict, RunError> {
    let shape = || RunError::Input("closure-step needs `gen g free;` followed by torsor generators".into());
    let gens = doc.presentation.generators();
    if gens.first().map(|g| (g.name.as_str(), g.is_free())) != Some(("g", true)) {
        return Err(shape());
    }
    let (mut p, mut reg) = build_base().map_err(|e| RunError::Input(e.to_string()))?;
    for g in &gens[1..] {
        let GenKind::Affine { linear, constant } = &g.kind else {
            return Err(shape());
        };
        if !linear.is_one() {
            return Err(shape());
        }
        (p, reg) = closure_step(&p, &reg, constant).map_err(|e| RunError::Input(e.to_string()))?;
    }
    let f = first(doc, "torsor", |s| match s {
        Statement::Torsor(a) => Some(a.clone()),
        _ => None,
    })?;
    let (q, r) = match closure_step(&p, &reg, &f) {
        Ok(x) => x,
        Err(e) => return Ok(("Rejected".into(), false, json!({ "reason": e.to_string() }))),
    };
    let t = q.generators().last().expect("new generator");
    let witness = RatFunc::var(sigma_core::VarId::new(t.id, 0));
    let families: Vec<Value> = r
        .families
        .iter()
        .map(|fam| {
            json!({
                "label": fam.label,
                "certificate": fam.certificate,
                "derived_equations": fam.certificate.derived_equations(),
            })
        })
        .collect();
    let details = json!({
        "generator": t.name,
        "extended": q.describe(),
        "torsor_solved": q.wp(&witness) == f,
        "registry_replays": r.replay().is_ok(),
        "families": families,
    });
    Ok(("Extended".into(), true, details))
}

fn run_verify_counterexample(bounds: SearchBounds, seed: u64) -> Verdict {
    let rep = verify_counterexample(bounds, SearchBounds::default(), seed);
    let ctl = verify_control(bounds, seed);
    let decided = rep.verdict == VERDICT_REFUTED && ctl.verdict == VERDICT_DECOMPOSABLE;
    let details = json!({
        "torsor_bounds": SearchBounds::default(),
        "report": rep,
        "control": { "verdict": ctl.verdict, "report": ctl },
    });
    (rep.verdict.clone(), decided, details)
}
