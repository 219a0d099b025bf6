//! Command dispatch for the `cartanforge` binary.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::canonical::GeometryError;
use crate::connection::{curvature, integral_residual, integral_residual2, Connection};
use crate::forms::{Form, VectorField};
use crate::harness::{run_identity_catalog, NumericSettings, Status, SuiteEntry};
use crate::jetchart::prolong_section;
use crate::lagrangian::{
    canonical_form_intrinsic, cartan_forms, check_jetfield, derive_el, energy_density, energy_density_intrinsic,
    jetfield_el, legendre_difference,
};
use crate::noether::{check_conservation, noether_current, symmetry_fallback, total_variation_with, CheckMode};
use crate::problem::{load_problem, Problem, ProblemError};
use crate::symexpr::Expr;

pub const COMMANDS: [&str; 10] = [
    "derive-el",
    "cartan-forms",
    "energy",
    "legendre-diff",
    "curvature",
    "check-section",
    "jetfield-el",
    "symmetry",
    "noether",
    "verify",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown command `{0}` (expected one of: {list})", list = COMMANDS.join(", "))]
    UnknownCommand(String),
    #[error("`{command}` needs --{flag}")]
    MissingArgument { command: String, flag: &'static str },
    #[error("no {kind} named `{name}` in the problem")]
    UnknownName { kind: &'static str, name: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "cartanforge", version, about = "Lagrangian field theory on jet bundles")]
pub struct Args {
    /// One of derive-el, cartan-forms, energy, legendre-diff, curvature,
    /// check-section, jetfield-el, symmetry, noether, verify
    pub command: String,
    pub problem: PathBuf,
    #[arg(long)]
    pub connection: Option<String>,
    #[arg(long)]
    pub vectorfield: Option<String>,
    #[arg(long)]
    pub section: Option<String>,
    #[arg(long)]
    pub jetfield: Option<String>,
    /// Section to evaluate along
    #[arg(long, alias = "check-along")]
    pub along: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Rendered output and whether every verification in it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
struct Item {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    expression: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    form: Option<Value>,
    metadata: Map<String, Value>,
}

impl Item {
    fn expr(name: impl Into<String>, e: &Expr) -> Item {
        Item { name: name.into(), expression: Some(e.to_string()), form: None, metadata: Map::new() }
    }

    fn form(name: impl Into<String>, f: &Form) -> Item {
        Item { name: name.into(), expression: None, form: Some(form_json(f)), metadata: Map::new() }
    }

    fn text(name: impl Into<String>, s: impl ToString) -> Item {
        Item { name: name.into(), expression: Some(s.to_string()), form: None, metadata: Map::new() }
    }

    fn note(name: impl Into<String>) -> Item {
        Item { name: name.into(), expression: None, form: None, metadata: Map::new() }
    }

    fn meta(mut self, key: &str, v: impl Into<Value>) -> Item {
        self.metadata.insert(key.to_string(), v.into());
        self
    }

    fn render(&self) -> String {
        let mut s = self.name.clone();
        if let Some(e) = &self.expression {
            s = format!("{s} = {e}");
        } else if let Some(f) = &self.form {
            s = format!("{s} = {}", f["text"].as_str().unwrap_or_default());
        }
        for (k, v) in &self.metadata {
            let v = match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            s.push_str(&format!("\n  {k}: {v}"));
        }
        s
    }
}

pub fn form_json(f: &Form) -> Value {
    let terms: Vec<Value> = f
        .terms()
        .iter()
        .map(|(k, c)| json!({ "basis": f.basis_names(k), "coefficient": c.to_string() }))
        .collect();
    json!({ "degree": f.degree(), "terms": terms, "text": f.to_string() })
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, kind: &'static str, name: &Option<String>) -> Result<Option<&'a T>, CliError> {
    match name {
        None => Ok(None),
        Some(n) => map.get(n).map(Some).ok_or_else(|| CliError::UnknownName { kind, name: n.clone() }),
    }
}

fn require<T>(v: Option<T>, command: &str, flag: &'static str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::MissingArgument { command: command.to_string(), flag })
}

fn inputs(args: &Args) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("problem".into(), json!(args.problem.display().to_string()));
    let named = [
        ("connection", &args.connection),
        ("vectorfield", &args.vectorfield),
        ("section", &args.section),
        ("jetfield", &args.jetfield),
        ("along", &args.along),
    ];
    for (k, v) in named {
        if let Some(v) = v {
            m.insert(k.into(), json!(v));
        }
    }
    if let Some(s) = args.seed {
        m.insert("seed".into(), json!(s));
    }
    if let Some(s) = args.samples {
        m.insert("samples".into(), json!(s));
    }
    if let Some(t) = args.tol {
        m.insert("tol".into(), json!(t));
    }
    m
}

fn all_zero<'a>(es: impl IntoIterator<Item = &'a Expr>) -> bool {
    es.into_iter().all(Expr::is_zero)
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Runs one command against an already parsed problem.
pub fn run_command(args: &Args, problem: &Problem) -> Result<Outcome, CliError> {
    let mut p = problem.clone();
    if let Some(s) = args.seed {
        p.numeric.seed = s;
    }
    if let Some(s) = args.samples {
        p.numeric.samples = s;
    }
    if let Some(t) = args.tol {
        p.numeric.tol = t;
    }
    let cmd = args.command.as_str();
    let lag = &p.lagrangian;
    let c = &p.chart;
    let connection = lookup(&p.connections, "connection", &args.connection)?;
    let vectorfield: Option<&VectorField> = lookup(&p.vectorfields, "vectorfield", &args.vectorfield)?;
    let section = lookup(&p.sections, "section", &args.section)?;
    let along = lookup(&p.sections, "section", &args.along)?;
    let jetfield = lookup(&p.jetfields, "jetfield", &args.jetfield)?;

    let mut items = Vec::new();
    let mut passed = true;
    match cmd {
        "derive-el" => {
            let el = derive_el(lag);
            for (a, e) in el.equations.iter().enumerate() {
                items.push(Item::expr(format!("EL[{}]", c.y(a)), e));
            }
            if let Some(s) = along.or(section) {
                let res = el.along(&s.section);
                passed = all_zero(&res);
                for (a, e) in res.iter().enumerate() {
                    items.push(Item::expr(format!("EL[{}] along section", c.y(a)), e).meta("satisfied", e.is_zero()));
                }
            }
        }
        "cartan-forms" => {
            let cf = cartan_forms(lag);
            let intrinsic = canonical_form_intrinsic(lag);
            items.push(Item::form("canonical", &cf.canonical).meta("matches_contraction", intrinsic == cf.canonical));
            items.push(Item::form("theta", &cf.theta));
            items.push(Item::form("omega", &cf.omega));
        }
        "energy" => {
            let conn = require(connection, cmd, "connection")?;
            let e = energy_density(lag, conn)?;
            let intrinsic = energy_density_intrinsic(lag, conn)?;
            let agree = intrinsic == Form::volume(c).scale(&e.e);
            passed = agree;
            items.push(Item::expr("E", &e.e).meta("matches_contraction", agree));
        }
        "legendre-diff" => {
            let conn = require(connection, cmd, "connection")?;
            let diff = legendre_difference(lag, &conn.gamma)?;
            let flat = Connection::flat(c);
            let shifted = energy_density(lag, conn)?.e - energy_density(lag, &flat)?.e;
            let agree = Form::volume(c).scale(&shifted) == diff;
            passed = agree;
            items.push(Item::form("difference", &diff).meta("matches_energy_shift", agree));
        }
        "curvature" => {
            let conn = require(connection, cmd, "connection")?;
            let k = curvature(conn);
            for a in 0..c.fiber_dim() {
                for mu in 0..c.base_dim() {
                    for eta in mu + 1..c.base_dim() {
                        let name = format!("R[{};{},{}]", c.y(a), c.x(mu), c.x(eta));
                        items.push(Item::expr(name, &k.coefficient(a, mu, eta)));
                    }
                }
            }
            items.push(Item::note("curvature").meta("flat", k.is_zero()));
        }
        "check-section" => {
            let s = require(section.or(along), cmd, "section")?;
            let el = derive_el(lag).along(&s.section);
            for (a, e) in el.iter().enumerate() {
                items.push(Item::expr(format!("EL[{}]", c.y(a)), e));
            }
            let mut ok = all_zero(&el);
            items.push(Item::note("euler_lagrange").meta("status", pass_word(ok)));
            if let Some(conn) = connection {
                let r = integral_residual(conn, &s.section)?;
                for (a, row) in r.iter().enumerate() {
                    for (mu, e) in row.iter().enumerate() {
                        items.push(Item::expr(format!("integral[{};{}]", c.y(a), c.x(mu)), e));
                    }
                }
                let integral = r.iter().flatten().all(Expr::is_zero);
                items.push(Item::note("connection_integral").meta("status", pass_word(integral)));
                ok &= integral;
            }
            if let Some(y) = jetfield {
                let r = integral_residual2(&y.field, &prolong_section(&s.section))?;
                let integral = r.is_zero();
                items.push(Item::note("jetfield_integral").meta("status", pass_word(integral)).meta(
                    "residuals",
                    r.all().iter().map(|e| e.to_string()).collect::<Vec<_>>(),
                ));
                ok &= integral;
            }
            passed = ok;
        }
        "jetfield-el" => match jetfield {
            None => {
                let sys = jetfield_el(lag);
                for (a, e) in sys.equations.iter().enumerate() {
                    items.push(Item::expr(format!("eq[{}]", c.y(a)), e));
                }
                match &sys.solution {
                    Some(sol) => {
                        for (s, e) in &sol.pivots {
                            items.push(Item::expr(s.to_string(), e));
                        }
                        let free: Vec<String> = sol.free.iter().map(|s| s.to_string()).collect();
                        let residue: Vec<String> = sol.inconsistencies.iter().map(|e| e.to_string()).collect();
                        items.push(
                            Item::note("solution")
                                .meta("rank", sol.rank)
                                .meta("free", free)
                                .meta("consistent", sol.consistent())
                                .meta("inconsistencies", residue),
                        );
                        passed = sol.consistent();
                    }
                    None => items.push(Item::note("solution").meta("solved", false).meta("reason", "Hessian in v is not constant")),
                }
            }
            Some(y) => {
                let chk = check_jetfield(lag, &y.field)?;
                items.push(Item::note("sopde").meta("status", pass_word(chk.sopde)));
                items.push(Item::form("contraction", &chk.contraction));
                for (a, e) in chk.reduced.iter().flatten().enumerate() {
                    items.push(Item::expr(format!("reduced[{}]", c.y(a)), e));
                }
                items.push(Item::note("field_equations").meta("status", pass_word(chk.holds())));
                passed = chk.holds();
            }
        },
        "symmetry" => {
            let z = require(vectorfield, cmd, "vectorfield")?;
            let fallback = symmetry_fallback();
            let settings = NumericSettings {
                samples: args.samples.unwrap_or(fallback.samples),
                tol: args.tol.unwrap_or(fallback.tol),
                ..p.numeric.clone()
            };
            let rep = total_variation_with(lag, z, &settings)?;
            items.push(Item::text("prolongation", &rep.prolonged));
            let mut item = Item::expr("delta", &rep.delta)
                .meta("symmetry", rep.is_symmetry())
                .meta("mode", if rep.symbolic { "symbolic" } else { "numeric" });
            if let Some(n) = &rep.numeric {
                item = item.meta("max_dev", n.max_dev);
            }
            items.push(item);
            passed = rep.is_symmetry();
        }
        "noether" => {
            let z = require(vectorfield, cmd, "vectorfield")?;
            let j = noether_current(lag, z)?;
            items.push(Item::form("J", &j));
            if let Some(s) = along.or(section) {
                let rep = check_conservation(&j, &s.section, &CheckMode::Numeric(p.numeric.clone()))?;
                let mut item = Item::form("conservation", &rep.residual)
                    .meta("status", pass_word(rep.passed()))
                    .meta("mode", if rep.symbolic { "symbolic" } else { "numeric" });
                if let Some(n) = &rep.numeric {
                    item = item.meta("max_dev", n.max_dev);
                }
                items.push(item);
                passed = rep.passed();
            }
        }
        "verify" => {
            let report = run_identity_catalog(&p);
            let text = match args.format {
                Format::Json => {
                    let doc = json!({ "command": cmd, "inputs": inputs(args), "suite": report.suite });
                    serde_json::to_string_pretty(&doc).expect("json")
                }
                Format::Text => render_suite(&report.suite),
            };
            return Ok(Outcome { text, passed: report.passed() });
        }
        other => return Err(CliError::UnknownCommand(other.to_string())),
    }

    let text = match args.format {
        Format::Json => {
            let doc = json!({ "command": cmd, "inputs": inputs(args), "results": items });
            serde_json::to_string_pretty(&doc).expect("json")
        }
        Format::Text => items.iter().map(Item::render).collect::<Vec<_>>().join("\n"),
    };
    Ok(Outcome { text, passed })
}

fn render_suite(suite: &[SuiteEntry]) -> String {
    let mut lines: Vec<String> = suite
        .iter()
        .map(|e| {
            let tag = match e.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
                Status::Error => "ERROR",
            };
            let mut line = format!("{tag:5} {}", e.name);
            if let Some(d) = e.max_dev {
                line.push_str(&format!("  max_dev={d:e}"));
            }
            line.push_str(&format!("  ({})", e.mode));
            if e.status == Status::Fail || e.status == Status::Error {
                let w: Vec<String> = e.witness.iter().map(|(k, v)| format!("{k}={v}")).collect();
                if !w.is_empty() {
                    line.push_str(&format!("  witness: {}", w.join(", ")));
                }
            }
            line
        })
        .collect();
    let failed = suite.iter().filter(|e| matches!(e.status, Status::Fail | Status::Error)).count();
    lines.push(format!("{} entries, {failed} failed", suite.len()));
    lines.join("\n")
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if !COMMANDS.contains(&args.command.as_str()) {
        eprintln!("error: {}", CliError::UnknownCommand(args.command.clone()));
        return 2;
    }
    let result = load_problem(&args.problem).map_err(CliError::from).and_then(|p| run_command(&args, &p));
    match result {
        Ok(out) => {
            // a closed pipe downstream is not our failure
            let _ = writeln!(std::io::stdout().lock(), "{}", out.text);
            if out.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Geometry(_) => 1,
                _ => 2,
            }
        }
    }
}
