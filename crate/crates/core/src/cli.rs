//! The `qhist` command line.
//!
//! Every command returns an [`Outcome`] (exit code plus captured stdout and
//! stderr) so the binary only has to print it. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | input error (I/O, parse, validation, unknown observer, bad flags) |
//! | 2 | inconsistent family (`analyze`) or zero-probability condition (`conditional`) |
//! | 3 | refusal under the single-framework rule, or an event absent from the family |
//! | 4 | oracle discrepancy (`verify`) |
//!
//! JSON reports are described in `docs/report.md`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::histories::{ConsistencyReport, History, HistoryFamily, DEFAULT_MAX_HISTORIES};
use crate::linalg::Tolerance;
use crate::oracle::{self, OracleError};
use crate::scenario::{self, Scenario, ScenarioError};
use crate::stablefacts::{self, CompatibilityReport, Fact, FactQuery, FactsError, FailingCondition, ObserverRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

/// Version of the JSON report layout.
pub const REPORT_VERSION: u32 = 1;

/// Largest oracle discrepancy `verify` accepts.
pub const VERIFY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(
    name = "qhist",
    version,
    about = "Consistent-histories analysis of observer scenarios"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Uniform numerical tolerance; overrides any tolerance block in the file
    /// [default: 1e-9]
    #[arg(long, global = true, value_name = "EPS")]
    pub tolerance: Option<f64>,
    /// Print a machine-readable JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Refuse families with more histories than this.
    #[arg(long, global = true, value_name = "N", default_value_t = DEFAULT_MAX_HISTORIES)]
    pub max_histories: usize,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        GlobalOpts {
            tolerance: None,
            json: false,
            max_histories: DEFAULT_MAX_HISTORIES,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Parse and resolve a scenario file.
    Validate { path: PathBuf },
    /// Consistency verdict and probability table for each observer's family.
    Analyze {
        path: PathBuf,
        /// Restrict to these observers (repeatable).
        #[arg(long = "observer", value_name = "NAME")]
        observers: Vec<String>,
    },
    /// Stable/relative verdict for observer pairs.
    Classify {
        path: PathBuf,
        /// Compare one pair of observers.
        #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "all_pairs")]
        pair: Option<Vec<String>>,
        /// Compare every pair (the default).
        #[arg(long)]
        all_pairs: bool,
    },
    /// Conditional probability of an event within one family.
    Conditional {
        path: PathBuf,
        /// Observer name, or `combined` for the product of all observers.
        #[arg(long, value_name = "NAME")]
        family: String,
        /// Event as TIME:LABEL.
        #[arg(long, value_name = "T:LABEL")]
        event: String,
        /// Condition as TIME:LABEL; omit for an unconditional probability.
        #[arg(long, value_name = "T:LABEL")]
        given: Option<String>,
    },
    /// Cross-check chain-ket probabilities against the sequential Born oracle.
    Verify { path: PathBuf },
}

/// Exit code and captured output of one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: impl Into<String>) -> Self {
        Outcome {
            code,
            stdout: String::new(),
            stderr: stderr.into(),
        }
    }
}

/// Formats like C's `%.12g`: twelve significant digits, trailing zeros dropped.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn parse_fact(arg: &str, flag: &str) -> Result<Fact, Outcome> {
    match arg.split_once(':') {
        Some((t, l)) if !t.is_empty() && !l.is_empty() => Ok(Fact::label(t, l)),
        _ => Err(Outcome::fail(
            EXIT_INPUT,
            format!("error: {flag} expects TIME:LABEL, got `{arg}`\n"),
        )),
    }
}

fn input_error(path: &Path, e: impl std::fmt::Display) -> Outcome {
    Outcome::fail(EXIT_INPUT, format!("error: {}: {e}\n", path.display()))
}

struct Loaded {
    scenario: Scenario,
    tol: Tolerance,
    observers: Vec<ObserverRecord>,
}

fn load(path: &Path, opts: &GlobalOpts) -> Result<Loaded, Outcome> {
    let bytes = std::fs::read(path).map_err(|e| input_error(path, format!("cannot read file: {e}")))?;
    let scenario = scenario::parse_scenario(&bytes).map_err(|e| input_error(path, e))?;
    let tol = match opts.tolerance {
        Some(eps) => Tolerance::uniform(eps).map_err(|e| input_error(path, format!("--tolerance: {e}")))?,
        None => scenario
            .tolerance(Tolerance::default())
            .map_err(|e: ScenarioError| input_error(path, e))?,
    };
    let observers = scenario::resolve_with(&scenario, &tol, opts.max_histories).map_err(|e| input_error(path, e))?;
    Ok(Loaded {
        scenario,
        tol,
        observers,
    })
}

fn json_out<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

// --- report structures -----------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ToleranceReport {
    pub eps_norm: f64,
    pub eps_herm: f64,
    pub eps_proj: f64,
    pub eps_comm: f64,
    pub eps_cons: f64,
}

impl From<&Tolerance> for ToleranceReport {
    fn from(t: &Tolerance) -> Self {
        ToleranceReport {
            eps_norm: t.norm(),
            eps_herm: t.herm(),
            eps_proj: t.proj(),
            eps_comm: t.comm(),
            eps_cons: t.cons(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryRow {
    pub label: String,
    pub outcomes: Vec<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub observer: String,
    pub times: Vec<String>,
    /// Outcome labels per time.
    pub slots: Vec<Vec<String>>,
    pub consistent: bool,
    pub max_offdiag: f64,
    pub worst_pair: Option<[String; 2]>,
    pub threshold: f64,
    pub probability_sum: f64,
    /// Gram diagonal; probabilities only when `consistent`.
    pub histories: Vec<HistoryRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub format_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub tolerance: ToleranceReport,
    pub families: Vec<FamilyReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlotCommutationReport {
    pub time: String,
    pub max_residual: f64,
    pub commutes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductReport {
    pub histories: usize,
    pub consistent: bool,
    pub max_offdiag: f64,
    pub worst_pair: Option<[String; 2]>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailingReport {
    /// `commutation` or `product_consistency`.
    pub condition: &'static str,
    pub time: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub first: String,
    pub second: String,
    pub verdict: &'static str,
    pub failing: Option<FailingReport>,
    pub commutation: Vec<SlotCommutationReport>,
    /// Absent when condition 1 fails and the product is not formed.
    pub product: Option<ProductReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointReport {
    pub observers: Vec<String>,
    pub verdict: &'static str,
    pub product: Option<ProductReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub format_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub tolerance: ToleranceReport,
    pub pairs: Vec<PairReport>,
    pub joint: Option<JointReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalReport {
    pub format_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub tolerance: ToleranceReport,
    pub family: String,
    pub event: String,
    pub given: Option<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyFamilyReport {
    pub observer: String,
    pub histories: usize,
    pub max_discrepancy: f64,
    pub worst_history: Option<String>,
    pub passed: bool,
    /// Additivity violations found by the exhaustive merge scan; `None` if
    /// some slot has too many outcomes to scan.
    pub additivity_violations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub format_version: u32,
    pub command: &'static str,
    pub scenario: String,
    pub tolerance: ToleranceReport,
    pub threshold: f64,
    pub passed: bool,
    pub families: Vec<VerifyFamilyReport>,
}

fn pair_labels(family: &HistoryFamily, pair: Option<(usize, usize)>) -> Option<[String; 2]> {
    pair.map(|(a, b)| [family.histories()[a].label(), family.histories()[b].label()])
}

fn family_report(name: &str, family: &HistoryFamily, report: &ConsistencyReport) -> FamilyReport {
    FamilyReport {
        observer: name.to_string(),
        times: family.grid().labels()[1..].to_vec(),
        slots: family.slots().iter().map(|d| d.labels().to_vec()).collect(),
        consistent: report.consistent,
        max_offdiag: report.max_offdiag,
        worst_pair: pair_labels(family, report.worst_pair),
        threshold: report.threshold,
        probability_sum: report.probability_sum(),
        histories: family
            .histories()
            .iter()
            .zip(&report.probabilities)
            .map(|(h, &p)| HistoryRow {
                label: h.label(),
                outcomes: h.labels().to_vec(),
                probability: p,
            })
            .collect(),
    }
}

fn product_report(labels: &[String], report: &ConsistencyReport) -> ProductReport {
    ProductReport {
        histories: labels.len(),
        consistent: report.consistent,
        max_offdiag: report.max_offdiag,
        worst_pair: report.worst_pair.map(|(a, b)| [labels[a].clone(), labels[b].clone()]),
        threshold: report.threshold,
    }
}

fn pair_report(r: &CompatibilityReport) -> PairReport {
    PairReport {
        first: r.first.clone(),
        second: r.second.clone(),
        verdict: r.verdict.as_str(),
        failing: r.failing.as_ref().map(|f| match f {
            FailingCondition::Commutation { time } => FailingReport {
                condition: "commutation",
                time: Some(time.clone()),
            },
            FailingCondition::ProductConsistency => FailingReport {
                condition: "product_consistency",
                time: None,
            },
        }),
        commutation: r
            .per_slot
            .iter()
            .map(|s| SlotCommutationReport {
                time: s.time.clone(),
                max_residual: s.max_residual,
                commutes: s.commutes,
            })
            .collect(),
        product: r
            .product_family
            .as_ref()
            .map(|p| product_report(&r.product_histories, p)),
    }
}

fn tolerance_line(t: &ToleranceReport) -> String {
    format!(
        "tolerance: norm {} herm {} proj {} comm {} cons {}\n",
        sig12(t.eps_norm),
        sig12(t.eps_herm),
        sig12(t.eps_proj),
        sig12(t.eps_comm),
        sig12(t.eps_cons)
    )
}

// --- commands --------------------------------------------------------------

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { path } => cmd_validate(path, &cli.global),
        Command::Analyze { path, observers } => cmd_analyze(path, observers, &cli.global),
        Command::Classify { path, pair, .. } => cmd_classify(path, pair.as_deref(), &cli.global),
        Command::Conditional {
            path,
            family,
            event,
            given,
        } => cmd_conditional(path, family, event, given.as_deref(), &cli.global),
        Command::Verify { path } => cmd_verify(path, &cli.global),
    }
}

/// Parses `args` (including the program name) and runs them. Argument errors
/// exit with code 1; `--help` and `--version` exit with 0.
pub fn run_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome::fail(EXIT_INPUT, text)
            } else {
                Outcome::ok(text)
            }
        }
    }
}

pub fn cmd_validate(path: &Path, opts: &GlobalOpts) -> Outcome {
    let loaded = match load(path, opts) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let s = &loaded.scenario;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "ok: `{}`: dimension {} ({}), times {}, {} observer(s)",
        s.name,
        s.total_dim(),
        s.subsystem_dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x"),
        s.times.join(" "),
        loaded.observers.len()
    );
    for o in &loaded.observers {
        let _ = writeln!(out, "  {}: {} histories", o.name(), o.family().histories().len());
    }
    Outcome::ok(out)
}

pub fn cmd_analyze(path: &Path, only: &[String], opts: &GlobalOpts) -> Outcome {
    let loaded = match load(path, opts) {
        Ok(l) => l,
        Err(o) => return o,
    };
    if let Some(missing) = only.iter().find(|n| !loaded.observers.iter().any(|o| o.name() == *n)) {
        return input_error(path, format!("no observer named `{missing}`"));
    }
    let selected: Vec<&ObserverRecord> = loaded
        .observers
        .iter()
        .filter(|o| only.is_empty() || only.iter().any(|n| n == o.name()))
        .collect();
    if selected.is_empty() {
        return input_error(path, "scenario has no observers to analyze");
    }
    let report = AnalyzeReport {
        format_version: REPORT_VERSION,
        command: "analyze",
        scenario: loaded.scenario.name.clone(),
        tolerance: (&loaded.tol).into(),
        families: selected
            .iter()
            .map(|o| family_report(o.name(), o.family(), &o.family().consistency_check(&loaded.tol)))
            .collect(),
    };
    let all_consistent = report.families.iter().all(|f| f.consistent);
    let stdout = if opts.json {
        json_out(&report)
    } else {
        render_analyze(&report)
    };
    Outcome {
        code: if all_consistent { EXIT_OK } else { EXIT_INCONSISTENT },
        stdout,
        stderr: String::new(),
    }
}

fn render_analyze(r: &AnalyzeReport) -> String {
    let mut out = format!("scenario: {}\n", r.scenario);
    out += &tolerance_line(&r.tolerance);
    for f in &r.families {
        let _ = writeln!(
            out,
            "\nobserver {} (times {}; {} histories)",
            f.observer,
            f.times.join(" "),
            f.histories.len()
        );
        let verdict = if f.consistent { "consistent" } else { "INCONSISTENT" };
        let _ = write!(out, "  {verdict}: max |off-diagonal| {}", sig12(f.max_offdiag));
        if let (false, Some([a, b])) = (f.consistent, &f.worst_pair) {
            let _ = write!(out, " between {a} and {b}");
        }
        let _ = writeln!(out, ", threshold {}", sig12(f.threshold));
        let heading = if f.consistent {
            "probability"
        } else {
            "weight (not additive)"
        };
        let width = f
            .histories
            .iter()
            .map(|h| h.label.chars().count())
            .max()
            .unwrap_or(0)
            .max(7);
        let _ = writeln!(out, "  {:<width$}  {heading}", "history");
        for h in &f.histories {
            let _ = writeln!(out, "  {:<width$}  {}", h.label, sig12(h.probability));
        }
        let _ = writeln!(out, "  {:<width$}  {}", "sum", sig12(f.probability_sum));
    }
    out
}

fn facts_error(path: &Path, e: FactsError) -> Outcome {
    let code = match &e {
        FactsError::ZeroProbabilityCondition { .. } => EXIT_INCONSISTENT,
        FactsError::InconsistentFamily { .. }
        | FactsError::NotCompatible(_)
        | FactsError::UnknownLabel { .. }
        | FactsError::NotInEventAlgebra { .. }
        | FactsError::Framework(crate::framework::FrameworkError::IncompatibleFrameworks { .. }) => EXIT_REFUSED,
        _ => EXIT_INPUT,
    };
    let mut msg = format!("error: {}: {e}\n", path.display());
    match &e {
        FactsError::InconsistentFamily { .. }
        | FactsError::NotCompatible(_)
        | FactsError::Framework(crate::framework::FrameworkError::IncompatibleFrameworks { .. }) => {
            msg += "refused: probabilities may only be combined within a single consistent framework\n";
        }
        FactsError::UnknownLabel { time, .. } => {
            let _ = writeln!(
                msg,
                "refused: the family assigns no property with that label at `{time}`, so it says nothing about it"
            );
        }
        _ => {}
    }
    Outcome::fail(code, msg)
}

pub fn cmd_classify(path: &Path, pair: Option<&[String]>, opts: &GlobalOpts) -> Outcome {
    let loaded = match load(path, opts) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let find = |name: &str| loaded.observers.iter().find(|o| o.name() == name);
    let (pairs, joint) = match pair {
        Some([a, b]) => {
            let (Some(x), Some(y)) = (find(a), find(b)) else {
                let missing = if find(a).is_none() { a } else { b };
                return input_error(path, format!("no observer named `{missing}`"));
            };
            match stablefacts::check_compatibility(x, y, &loaded.tol) {
                Ok(r) => (vec![r], None),
                Err(e) => return facts_error(path, e),
            }
        }
        Some(_) => return input_error(path, "--pair takes exactly two observer names"),
        None => match stablefacts::classify(&loaded.observers, &loaded.tol) {
            Ok(c) => (c.pairs, c.joint),
            Err(e @ FactsError::TooFewObservers { .. }) => return input_error(path, e),
            Err(e) => return facts_error(path, e),
        },
    };
    let report = ClassifyReport {
        format_version: REPORT_VERSION,
        command: "classify",
        scenario: loaded.scenario.name.clone(),
        tolerance: (&loaded.tol).into(),
        pairs: pairs.iter().map(pair_report).collect(),
        joint: joint.map(|j| JointReport {
            verdict: j.verdict.as_str(),
            product: j.consistency.as_ref().map(|c| ProductReport {
                histories: c.probabilities.len(),
                consistent: c.consistent,
                max_offdiag: c.max_offdiag,
                worst_pair: None,
                threshold: c.threshold,
            }),
            observers: j.observers,
        }),
    };
    Outcome::ok(if opts.json {
        json_out(&report)
    } else {
        render_classify(&report)
    })
}

fn render_product(out: &mut String, p: &Option<ProductReport>) {
    match p {
        Some(p) => {
            let verdict = if p.consistent { "consistent" } else { "INCONSISTENT" };
            let _ = write!(
                out,
                "  condition 2 (product consistency): {} histories, {verdict}, max |off-diagonal| {}",
                p.histories,
                sig12(p.max_offdiag)
            );
            if let (false, Some([a, b])) = (p.consistent, &p.worst_pair) {
                let _ = write!(out, " between {a} and {b}");
            }
            let _ = writeln!(out, ", threshold {}", sig12(p.threshold));
        }
        None => out.push_str("  condition 2 (product consistency): not checked, products undefined\n"),
    }
}

fn render_classify(r: &ClassifyReport) -> String {
    let mut out = format!("scenario: {}\n", r.scenario);
    out += &tolerance_line(&r.tolerance);
    for p in &r.pairs {
        let _ = writeln!(out, "\n{} vs {}: {}", p.first, p.second, p.verdict);
        match &p.failing {
            Some(FailingReport { time: Some(t), .. }) => {
                let _ = writeln!(out, "  fails condition 1 (commutation) at {t}");
            }
            Some(_) => out.push_str("  fails condition 2 (product consistency)\n"),
            None => {}
        }
        for s in &p.commutation {
            let _ = writeln!(
                out,
                "  condition 1 at {}: max |[P, Q]| {} ({})",
                s.time,
                sig12(s.max_residual),
                if s.commutes { "commute" } else { "do not commute" }
            );
        }
        render_product(&mut out, &p.product);
    }
    if let Some(j) = &r.joint {
        let _ = writeln!(out, "\nall of {}: {}", j.observers.join(", "), j.verdict);
        render_product(&mut out, &j.product);
    }
    out
}

pub fn cmd_conditional(path: &Path, family: &str, event: &str, given: Option<&str>, opts: &GlobalOpts) -> Outcome {
    let event_fact = match parse_fact(event, "--event") {
        Ok(f) => f,
        Err(o) => return o,
    };
    let given_fact = match given.map(|g| parse_fact(g, "--given")).transpose() {
        Ok(f) => f,
        Err(o) => return o,
    };
    let loaded = match load(path, opts) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let combined;
    let fam: &HistoryFamily = if family == "combined" {
        if loaded.observers.is_empty() {
            return input_error(path, "scenario has no observers to combine");
        }
        combined = match stablefacts::combine_all(&loaded.observers, &loaded.tol) {
            Ok(f) => f,
            Err(e) => return facts_error(path, e),
        };
        &combined
    } else {
        match loaded.observers.iter().find(|o| o.name() == family) {
            Some(o) => o.family(),
            None => return input_error(path, format!("no observer named `{family}`")),
        }
    };
    let result = match given_fact {
        Some(condition) => stablefacts::conditional_probability(
            fam,
            &FactQuery {
                event: event_fact,
                condition,
            },
            &loaded.tol,
        ),
        None => stablefacts::event_probability(fam, &event_fact, &loaded.tol),
    };
    let probability = match result {
        Ok(p) => p,
        Err(e) => return facts_error(path, e),
    };
    let report = ConditionalReport {
        format_version: REPORT_VERSION,
        command: "conditional",
        scenario: loaded.scenario.name.clone(),
        tolerance: (&loaded.tol).into(),
        family: family.to_string(),
        event: event.to_string(),
        given: given.map(str::to_string),
        probability,
    };
    Outcome::ok(if opts.json {
        json_out(&report)
    } else {
        match given {
            Some(g) => format!("P({event} | {g}) = {}  [family {family}]\n", sig12(probability)),
            None => format!("P({event}) = {}  [family {family}]\n", sig12(probability)),
        }
    })
}

pub fn cmd_verify(path: &Path, opts: &GlobalOpts) -> Outcome {
    cmd_verify_with(path, opts, |f, h| f.history_probability(h))
}

/// `verify` against an arbitrary reference probability. The default
/// reference is the chain-ket probability; tests inject faulty ones.
pub fn cmd_verify_with<E: std::fmt::Display>(
    path: &Path,
    opts: &GlobalOpts,
    mut reference: impl FnMut(&HistoryFamily, &History) -> Result<f64, E>,
) -> Outcome {
    let loaded = match load(path, opts) {
        Ok(l) => l,
        Err(o) => return o,
    };
    if loaded.observers.is_empty() {
        return input_error(path, "scenario has no observers to verify");
    }
    let mut families = Vec::new();
    for o in &loaded.observers {
        let check = match oracle::cross_check(o.family(), &mut reference) {
            Ok(c) => c,
            Err(e) => return input_error(path, e),
        };
        let additivity_violations = match oracle::exhaustive_additivity_scan(o.family(), &loaded.tol) {
            Ok(v) => Some(v.len()),
            Err(OracleError::SizeCap { .. }) => None,
            Err(e) => return input_error(path, e),
        };
        families.push(VerifyFamilyReport {
            observer: o.name().to_string(),
            histories: check.histories,
            passed: check.max_discrepancy <= VERIFY_THRESHOLD,
            max_discrepancy: check.max_discrepancy,
            worst_history: check.worst_history,
            additivity_violations,
        });
    }
    let passed = families.iter().all(|f| f.passed);
    let report = VerifyReport {
        format_version: REPORT_VERSION,
        command: "verify",
        scenario: loaded.scenario.name.clone(),
        tolerance: (&loaded.tol).into(),
        threshold: VERIFY_THRESHOLD,
        passed,
        families,
    };
    let stdout = if opts.json {
        json_out(&report)
    } else {
        let mut out = format!("scenario: {}\n", report.scenario);
        for f in &report.families {
            let _ = write!(
                out,
                "{}: {} histories, max |oracle - chain ket| {}",
                f.observer,
                f.histories,
                sig12(f.max_discrepancy)
            );
            if let Some(w) = &f.worst_history {
                let _ = write!(out, " at {w}");
            }
            let _ = write!(out, " ({})", if f.passed { "ok" } else { "FAILED" });
            match f.additivity_violations {
                Some(n) => {
                    let _ = writeln!(out, "; additivity violations {n}");
                }
                None => out.push_str("; additivity scan skipped (too many outcomes)\n"),
            }
        }
        let _ = writeln!(out, "{}", if passed { "verify: ok" } else { "verify: FAILED" });
        out
    };
    let stderr = if passed {
        String::new()
    } else {
        report
            .families
            .iter()
            .filter(|f| !f.passed)
            .map(|f| {
                format!(
                    "error: oracle discrepancy {} for observer `{}` at history {}\n",
                    sig12(f.max_discrepancy),
                    f.observer,
                    f.worst_history.as_deref().unwrap_or("?")
                )
            })
            .collect()
    };
    Outcome {
        code: if passed { EXIT_OK } else { EXIT_ORACLE },
        stdout,
        stderr,
    }
}
