//! Problem files: a bundle, a Lagrangian and named auxiliary objects, in TOML.
//!
//! ```toml
//! [bundle]
//! base = ["t"]
//! fiber = ["q"]
//! parameters = ["a", "b"]
//!
//! [lagrangian]
//! L = "1/2*d(q,t)^2"
//!
//! [connection.flat]
//! gamma = { q = ["0"] }
//!
//! [vectorfield.shift]
//! q = "1"
//!
//! [section.line]
//! q = "a*t + b"
//! solution = true
//!
//! [jetfield.free]
//! G = { q = [["0"]] }
//! integral_sections = ["line"]
//!
//! [diffeo.boost]
//! fiber = ["q + t"]
//!
//! [numeric]
//! seed = 7
//! require = ["abs(q) > 0.1"]
//! ```

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;
use toml::{Table, Value};

use crate::connection::{Connection, JetField2};
use crate::forms::{FiberMap, VectorField};
use crate::harness::{Guard, HarnessError, NumericSettings, SampleBox};
use crate::jetchart::{ChartError, JetChart, SectionE};
use crate::lagrangian::Lagrangian;
use crate::symexpr::{parse_expr_with, Expr, ExprError, JetResolver, Symbol};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("unknown coordinate `{name}` in {context}")]
    UnknownCoordinate { context: String, name: String },
    #[error("duplicate definition of `{0}`")]
    DuplicateDefinition(String),
    #[error("{context}: {msg}")]
    Invalid { context: String, msg: String },
}

fn invalid(context: &str, msg: impl ToString) -> ProblemError {
    ProblemError::Invalid { context: context.to_string(), msg: msg.to_string() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionSpec {
    pub section: SectionE,
    /// Declared to solve the Euler–Lagrange equations.
    pub solution: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JetFieldSpec {
    pub field: JetField2,
    /// Names of sections whose prolongations are integral sections.
    pub integral_sections: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffeoSpec {
    pub map: FiberMap,
    /// Declared to preserve the Lagrangian density.
    pub symmetry: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub description: Option<String>,
    pub chart: Arc<JetChart>,
    pub lagrangian: Lagrangian,
    pub connections: BTreeMap<String, Connection>,
    pub vectorfields: BTreeMap<String, VectorField>,
    pub sections: BTreeMap<String, SectionSpec>,
    pub jetfields: BTreeMap<String, JetFieldSpec>,
    pub diffeos: BTreeMap<String, DiffeoSpec>,
    pub numeric: NumericSettings,
}

pub fn load_problem(path: &Path) -> Result<Problem, ProblemError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_problem(&text, &name)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Rejects repeated table headers before TOML sees them, so the error names
/// the definition rather than a key.
fn check_duplicate_headers(text: &str) -> Result<(), ProblemError> {
    let mut seen = BTreeSet::new();
    for line in text.lines() {
        let t = line.trim();
        if !t.starts_with('[') || t.starts_with("[[") {
            continue;
        }
        if let Some(end) = t.find(']') {
            let header: String = t[1..end].split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
            if !seen.insert(header.clone()) {
                return Err(ProblemError::DuplicateDefinition(header));
            }
        }
    }
    Ok(())
}

/// Resolver that remembers the first unknown coordinate it was asked about.
struct Recorder<'a> {
    chart: &'a JetChart,
    unknown: RefCell<Option<String>>,
}

impl JetResolver for Recorder<'_> {
    fn jet_symbol(&self, kind: &str, args: &[String]) -> Result<Symbol, String> {
        let r = self.chart.jet_symbol(kind, args);
        if r.is_err() {
            let bad = args
                .iter()
                .enumerate()
                .find(|(i, a)| if *i == 0 { self.chart.fiber_index(a).is_none() } else { self.chart.base_index(a).is_none() })
                .map(|(_, a)| a.clone());
            self.unknown.borrow_mut().get_or_insert(bad.unwrap_or_else(|| kind.to_string()));
        }
        r
    }
}

struct Ctx<'a> {
    text: &'a str,
    chart: Arc<JetChart>,
}

impl Ctx<'_> {
    fn known(&self, s: &Symbol) -> bool {
        self.chart.is_jet_symbol(s) || self.chart.is_param(s)
    }

    fn expr(&self, context: &str, v: &Value) -> Result<Expr, ProblemError> {
        let src = match v {
            Value::String(s) => s.clone(),
            Value::Integer(i) => i.to_string(),
            Value::Float(f) => f.to_string(),
            _ => return Err(invalid(context, "expected an expression string")),
        };
        let rec = Recorder { chart: &self.chart, unknown: RefCell::new(None) };
        let e = parse_expr_with(&src, &rec).map_err(|err| {
            if let Some(name) = rec.unknown.borrow_mut().take() {
                return ProblemError::UnknownCoordinate { context: context.to_string(), name };
            }
            match err {
                ExprError::Parse { line, col, msg } => {
                    let (l, c) = self.locate(&src);
                    let (line, col) = if line == 1 { (l, c + col - 1) } else { (l + line - 1, col) };
                    ProblemError::Parse { line, col, msg: format!("{context}: {msg}") }
                }
                other => invalid(context, other),
            }
        })?;
        if let Some(s) = e.free_symbols().into_iter().find(|s| !self.known(s)) {
            return Err(ProblemError::UnknownCoordinate { context: context.to_string(), name: s.to_string() });
        }
        Ok(e)
    }

    /// Position of the first character of an expression string in the file.
    fn locate(&self, src: &str) -> (usize, usize) {
        match self.text.find(&format!("\"{src}\"")) {
            Some(p) => line_col(self.text, p + 1),
            None => (1, 1),
        }
    }

    fn list(&self, context: &str, v: &Value, len: usize) -> Result<Vec<Expr>, ProblemError> {
        let arr = v.as_array().ok_or_else(|| invalid(context, "expected an array"))?;
        if arr.len() != len {
            return Err(invalid(context, format!("expected {len} entries, found {}", arr.len())));
        }
        arr.iter().map(|x| self.expr(context, x)).collect()
    }

    fn fiber_keyed<'t>(&self, context: &str, v: &'t Value) -> Result<Vec<Option<&'t Value>>, ProblemError> {
        let t = v.as_table().ok_or_else(|| invalid(context, "expected a table keyed by fiber coordinate"))?;
        for k in t.keys() {
            if self.chart.fiber_index(k).is_none() {
                return Err(ProblemError::UnknownCoordinate { context: context.to_string(), name: k.clone() });
            }
        }
        Ok(self.chart.fiber_names().iter().map(|y| t.get(y.as_str())).collect())
    }
}

fn strings(context: &str, v: Option<&Value>) -> Result<Vec<String>, ProblemError> {
    let Some(v) = v else { return Ok(Vec::new()) };
    match v {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(a) => a
            .iter()
            .map(|x| x.as_str().map(str::to_string).ok_or_else(|| invalid(context, "expected strings")))
            .collect(),
        _ => Err(invalid(context, "expected a string or an array of strings")),
    }
}

fn sub_tables<'t>(root: &'t Table, key: &str) -> Result<Vec<(&'t String, &'t Table)>, ProblemError> {
    let Some(v) = root.get(key) else { return Ok(Vec::new()) };
    let t = v.as_table().ok_or_else(|| invalid(key, "expected named tables"))?;
    t.iter()
        .map(|(n, v)| v.as_table().map(|t| (n, t)).ok_or_else(|| invalid(&format!("{key}.{n}"), "expected a table")))
        .collect()
}

fn chart_error(context: &str, e: ChartError) -> ProblemError {
    match e {
        ChartError::DuplicateName(n) => ProblemError::DuplicateDefinition(n),
        other => invalid(context, other),
    }
}

fn check_keys(context: &str, t: &Table, allowed: &[&str]) -> Result<(), ProblemError> {
    match t.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(invalid(context, format!("unexpected key `{k}`"))),
        None => Ok(()),
    }
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn range(context: &str, v: &Value) -> Result<(f64, f64), ProblemError> {
    let num = |x: &Value| x.as_float().or_else(|| x.as_integer().map(|i| i as f64));
    match v.as_array().map(|a| a.as_slice()) {
        Some([lo, hi]) => match (num(lo), num(hi)) {
            (Some(lo), Some(hi)) if lo <= hi => Ok((lo, hi)),
            _ => Err(invalid(context, "expected [low, high] with low <= high")),
        },
        _ => Err(invalid(context, "expected [low, high]")),
    }
}

pub fn parse_problem(text: &str, name: &str) -> Result<Problem, ProblemError> {
    check_duplicate_headers(text)?;
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ProblemError::Parse { line, col, msg: e.message().to_string() }
    })?;
    check_keys(
        "problem",
        &root,
        &["description", "bundle", "lagrangian", "connection", "vectorfield", "section", "jetfield", "diffeo", "numeric"],
    )?;

    let bundle = root.get("bundle").and_then(Value::as_table).ok_or_else(|| invalid("bundle", "missing [bundle]"))?;
    check_keys("bundle", bundle, &["base", "fiber", "parameters"])?;
    let base = strings("bundle.base", bundle.get("base"))?;
    let fiber = strings("bundle.fiber", bundle.get("fiber"))?;
    let params = strings("bundle.parameters", bundle.get("parameters"))?;
    let chart = JetChart::new(&as_refs(&base), &as_refs(&fiber), &as_refs(&params)).map_err(|e| chart_error("bundle", e))?;
    let ctx = Ctx { text, chart: chart.clone() };
    let (n, m) = (chart.base_dim(), chart.fiber_dim());

    let lt = root.get("lagrangian").and_then(Value::as_table).ok_or_else(|| invalid("lagrangian", "missing [lagrangian]"))?;
    check_keys("lagrangian", lt, &["L"])?;
    let l = ctx.expr("lagrangian.L", lt.get("L").ok_or_else(|| invalid("lagrangian", "missing L"))?)?;
    let lagrangian = Lagrangian::new(&chart, l).map_err(|e| chart_error("lagrangian.L", e))?;

    let mut connections = BTreeMap::new();
    for (cname, t) in sub_tables(&root, "connection")? {
        let context = format!("connection.{cname}");
        check_keys(&context, t, &["gamma"])?;
        let mut gamma = vec![vec![Expr::zero(); n]; m];
        if let Some(g) = t.get("gamma") {
            for (a, row) in ctx.fiber_keyed(&context, g)?.into_iter().enumerate() {
                if let Some(row) = row {
                    gamma[a] = ctx.list(&format!("{context}.gamma.{}", chart.y(a)), row, n)?;
                }
            }
        }
        let conn = Connection::new(&chart, gamma).map_err(|e| chart_error(&context, e))?;
        connections.insert(cname.clone(), conn);
    }

    let mut vectorfields = BTreeMap::new();
    for (vname, t) in sub_tables(&root, "vectorfield")? {
        let context = format!("vectorfield.{vname}");
        let mut z = VectorField::zero(&chart);
        for (k, v) in t {
            let i = match chart.index_of(&Symbol::new(k)) {
                Some(i) if chart.is_e_coord(i) => i,
                _ => return Err(ProblemError::UnknownCoordinate { context, name: k.clone() }),
            };
            let e = ctx.expr(&format!("{context}.{k}"), v)?;
            chart
                .check_scope(k, &e, "E", |s| chart.is_e_symbol(s))
                .map_err(|err| chart_error(&context, err))?;
            z.set(i, e);
        }
        vectorfields.insert(vname.clone(), z);
    }

    let mut sections = BTreeMap::new();
    for (sname, t) in sub_tables(&root, "section")? {
        let context = format!("section.{sname}");
        let mut phi = vec![None; m];
        let mut solution = false;
        for (k, v) in t {
            if let (Some(a), false) = (chart.fiber_index(k), v.is_bool()) {
                phi[a] = Some(ctx.expr(&format!("{context}.{k}"), v)?);
            } else if k == "solution" {
                solution = v.as_bool().ok_or_else(|| invalid(&context, "`solution` must be a boolean"))?;
            } else {
                return Err(ProblemError::UnknownCoordinate { context, name: k.clone() });
            }
        }
        let phi = phi
            .into_iter()
            .enumerate()
            .map(|(a, e)| e.ok_or_else(|| invalid(&context, format!("missing component `{}`", chart.y(a)))))
            .collect::<Result<Vec<_>, _>>()?;
        let section = SectionE::new(&chart, phi).map_err(|e| chart_error(&context, e))?;
        sections.insert(sname.clone(), SectionSpec { section, solution });
    }

    let mut jetfields = BTreeMap::new();
    for (jname, t) in sub_tables(&root, "jetfield")? {
        let context = format!("jetfield.{jname}");
        check_keys(&context, t, &["F", "G", "integral_sections"])?;
        let mut f: Vec<Vec<Expr>> = (0..m).map(|a| (0..n).map(|mu| Expr::sym(chart.v(a, mu))).collect()).collect();
        if let Some(fv) = t.get("F") {
            for (a, row) in ctx.fiber_keyed(&format!("{context}.F"), fv)?.into_iter().enumerate() {
                if let Some(row) = row {
                    f[a] = ctx.list(&format!("{context}.F.{}", chart.y(a)), row, n)?;
                }
            }
        }
        let mut g = vec![vec![vec![Expr::zero(); n]; n]; m];
        if let Some(gv) = t.get("G") {
            for (a, rows) in ctx.fiber_keyed(&format!("{context}.G"), gv)?.into_iter().enumerate() {
                let Some(rows) = rows else { continue };
                let gc = format!("{context}.G.{}", chart.y(a));
                let rows = rows.as_array().ok_or_else(|| invalid(&gc, "expected an array of rows"))?;
                if rows.len() != n {
                    return Err(invalid(&gc, format!("expected {n} rows, found {}", rows.len())));
                }
                for (rho, row) in rows.iter().enumerate() {
                    g[a][rho] = ctx.list(&gc, row, n)?;
                }
            }
        }
        let integral_sections = strings(&format!("{context}.integral_sections"), t.get("integral_sections"))?;
        for s in &integral_sections {
            if !sections.contains_key(s) {
                return Err(invalid(&context, format!("no section named `{s}`")));
            }
        }
        let field = JetField2::new(&chart, f, g).map_err(|e| chart_error(&context, e))?;
        jetfields.insert(jname.clone(), JetFieldSpec { field, integral_sections });
    }

    let mut diffeos = BTreeMap::new();
    for (dname, t) in sub_tables(&root, "diffeo")? {
        let context = format!("diffeo.{dname}");
        check_keys(&context, t, &["base", "base_inverse", "fiber", "symmetry"])?;
        let identity = FiberMap::identity(&chart);
        let base = match t.get("base") {
            Some(v) => ctx.list(&format!("{context}.base"), v, n)?,
            None => identity.base.clone(),
        };
        let base_inverse = match t.get("base_inverse") {
            Some(v) => Some(ctx.list(&format!("{context}.base_inverse"), v, n)?),
            None if t.get("base").is_none() => identity.base_inverse.clone(),
            None => None,
        };
        let fiber = match t.get("fiber") {
            Some(v) => ctx.list(&format!("{context}.fiber"), v, m)?,
            None => identity.fiber.clone(),
        };
        let symmetry = match t.get("symmetry") {
            Some(v) => v.as_bool().ok_or_else(|| invalid(&context, "`symmetry` must be a boolean"))?,
            None => false,
        };
        for e in base.iter().chain(base_inverse.iter().flatten()) {
            chart.check_scope(&context, e, "base", |s| chart.is_base_symbol(s)).map_err(|err| chart_error(&context, err))?;
        }
        for e in &fiber {
            chart.check_scope(&context, e, "E", |s| chart.is_e_symbol(s)).map_err(|err| chart_error(&context, err))?;
        }
        let map = FiberMap { chart: chart.clone(), base, base_inverse, fiber };
        diffeos.insert(dname.clone(), DiffeoSpec { map, symmetry });
    }

    let mut numeric = NumericSettings::default();
    if let Some(nt) = root.get("numeric") {
        let nt = nt.as_table().ok_or_else(|| invalid("numeric", "expected a table"))?;
        check_keys("numeric", nt, &["seed", "samples", "tol", "fd_tol", "box", "require", "ranges"])?;
        let int = |k: &str| -> Result<Option<u64>, ProblemError> {
            nt.get(k)
                .map(|v| v.as_integer().and_then(|i| u64::try_from(i).ok()).ok_or_else(|| invalid("numeric", format!("`{k}` must be a non-negative integer"))))
                .transpose()
        };
        let float = |k: &str| -> Result<Option<f64>, ProblemError> {
            nt.get(k)
                .map(|v| {
                    v.as_float()
                        .or_else(|| v.as_integer().map(|i| i as f64))
                        .filter(|x| *x >= 0.0)
                        .ok_or_else(|| invalid("numeric", format!("`{k}` must be a non-negative number")))
                })
                .transpose()
        };
        if let Some(s) = int("seed")? {
            numeric.seed = s;
        }
        if let Some(s) = int("samples")? {
            numeric.samples = s as usize;
        }
        if let Some(t) = float("tol")? {
            numeric.tol = t;
        }
        if let Some(t) = float("fd_tol")? {
            numeric.fd_tol = t;
        }
        let mut sample_box = SampleBox::default();
        if let Some(b) = nt.get("box") {
            sample_box.default = range("numeric.box", b)?;
        }
        if let Some(r) = nt.get("ranges") {
            let r = r.as_table().ok_or_else(|| invalid("numeric.ranges", "expected a table"))?;
            for (k, v) in r {
                let s = Symbol::new(k);
                if !ctx.known(&s) {
                    return Err(ProblemError::UnknownCoordinate { context: "numeric.ranges".into(), name: k.clone() });
                }
                sample_box.ranges.insert(s, range(&format!("numeric.ranges.{k}"), v)?);
            }
        }
        numeric.sample_box = sample_box;
        for g in strings("numeric.require", nt.get("require"))? {
            let rec = Recorder { chart: &chart, unknown: RefCell::new(None) };
            let guard = Guard::parse(&g, &rec).map_err(|err| match (rec.unknown.borrow_mut().take(), err) {
                (Some(name), _) => ProblemError::UnknownCoordinate { context: "numeric.require".into(), name },
                (None, HarnessError::GuardExpr { source: ExprError::Parse { col, msg, .. }, .. }) => {
                    let (l, c) = ctx.locate(&g);
                    ProblemError::Parse { line: l, col: c + col - 1, msg: format!("numeric.require: {msg}") }
                }
                (None, other) => invalid("numeric.require", other),
            })?;
            let mut syms = guard.lhs.free_symbols();
            syms.extend(guard.rhs.free_symbols());
            if let Some(s) = syms.into_iter().find(|s| !ctx.known(s)) {
                return Err(ProblemError::UnknownCoordinate { context: "numeric.require".into(), name: s.to_string() });
            }
            numeric.guards.push(guard);
        }
    }

    let description = root.get("description").and_then(Value::as_str).map(str::to_string);
    Ok(Problem {
        name: name.to_string(),
        description,
        chart,
        lagrangian,
        connections,
        vectorfields,
        sections,
        jetfields,
        diffeos,
        numeric,
    })
}
