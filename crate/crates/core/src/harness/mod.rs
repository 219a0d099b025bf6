//! Randomized numeric verification of symbolic identities.

mod catalog;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::forms::{Form, FormError};
use crate::symexpr::{parse_expr_with, Expr, ExprError, JetResolver, Symbol};

pub use catalog::{
    build_catalog, monomials, random_polynomial, random_sections, run_catalog, run_identity_catalog, CatalogItem,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("guards rejected {0} consecutive draws")]
    GuardUnsatisfiable(usize),
    #[error("evaluation failed at {point:?}: {source}")]
    Evaluation {
        point: BTreeMap<String, f64>,
        #[source]
        source: ExprError,
    },
    #[error("left side has {0} components, right side has {1}")]
    Shape(usize, usize),
    #[error("invalid guard `{0}`: expected `<expr> <op> <expr>` with op one of < <= > >= !=")]
    Guard(String),
    #[error("guard `{text}`: {source}")]
    GuardExpr {
        text: String,
        #[source]
        source: ExprError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
}

/// A domain restriction such as `abs(h00*h11 - h01^2) > 0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub text: String,
    pub lhs: Expr,
    pub op: Cmp,
    pub rhs: Expr,
}

impl Guard {
    pub fn parse(text: &str, resolver: &dyn JetResolver) -> Result<Guard, HarnessError> {
        let ops = [(">=", Cmp::Ge), ("<=", Cmp::Le), ("!=", Cmp::Ne), (">", Cmp::Gt), ("<", Cmp::Lt)];
        let (pos, tok, op) = ops
            .iter()
            .filter_map(|(t, op)| text.find(t).map(|p| (p, *t, *op)))
            .min_by_key(|(p, t, _)| (*p, usize::MAX - t.len()))
            .ok_or_else(|| HarnessError::Guard(text.to_string()))?;
        let side = |s: &str| {
            parse_expr_with(s.trim(), resolver)
                .map_err(|source| HarnessError::GuardExpr { text: text.to_string(), source })
        };
        let lhs = side(&text[..pos])?;
        let rhs = side(&text[pos + tok.len()..])?;
        Ok(Guard { text: text.to_string(), lhs, op, rhs })
    }

    pub fn holds(&self, point: &BTreeMap<Symbol, f64>) -> bool {
        let (Ok(l), Ok(r)) = (self.lhs.evaluate::<f64, _>(point), self.rhs.evaluate::<f64, _>(point)) else {
            return false;
        };
        match self.op {
            Cmp::Lt => l < r,
            Cmp::Le => l <= r,
            Cmp::Gt => l > r,
            Cmp::Ge => l >= r,
            Cmp::Ne => l != r,
        }
    }

    fn symbols(&self) -> BTreeSet<Symbol> {
        let mut s = self.lhs.free_symbols();
        s.extend(self.rhs.free_symbols());
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub default: (f64, f64),
    pub ranges: BTreeMap<Symbol, (f64, f64)>,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { default: (-1.0, 1.0), ranges: BTreeMap::new() }
    }
}

impl SampleBox {
    pub fn range(&self, s: &Symbol) -> (f64, f64) {
        self.ranges.get(s).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericSettings {
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub fd_tol: f64,
    pub sample_box: SampleBox,
    pub guards: Vec<Guard>,
}

impl Default for NumericSettings {
    fn default() -> Self {
        NumericSettings { seed: 0, samples: 100, tol: 1e-9, fd_tol: 1e-6, sample_box: SampleBox::default(), guards: Vec::new() }
    }
}

const MAX_REDRAWS: usize = 10_000;

/// Seeded point sampler honoring the guards. Variables are drawn in sorted
/// order so a seed fixes the whole sequence.
pub struct Sampler<'a> {
    vars: Vec<Symbol>,
    settings: &'a NumericSettings,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    pub fn new(vars: impl IntoIterator<Item = Symbol>, settings: &'a NumericSettings) -> Self {
        let mut all: BTreeSet<Symbol> = vars.into_iter().collect();
        for g in &settings.guards {
            all.extend(g.symbols());
        }
        Sampler { vars: all.into_iter().collect(), settings, rng: ChaCha8Rng::seed_from_u64(settings.seed) }
    }

    pub fn next_point(&mut self) -> Result<BTreeMap<Symbol, f64>, HarnessError> {
        for _ in 0..MAX_REDRAWS {
            let point: BTreeMap<Symbol, f64> = self
                .vars
                .iter()
                .map(|s| {
                    let (lo, hi) = self.settings.sample_box.range(s);
                    (s.clone(), if lo < hi { self.rng.gen_range(lo..hi) } else { lo })
                })
                .collect();
            if self.settings.guards.iter().all(|g| g.holds(&point)) {
                return Ok(point);
            }
        }
        Err(HarnessError::GuardUnsatisfiable(MAX_REDRAWS))
    }
}

/// An identity `left == right`, componentwise, to be tested at random
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub left: Vec<Expr>,
    pub right: Vec<Expr>,
    pub settings: NumericSettings,
}

impl IdentityCheck {
    pub fn new(name: impl Into<String>, left: Vec<Expr>, right: Vec<Expr>, settings: &NumericSettings) -> Self {
        IdentityCheck { name: name.into(), left, right, settings: settings.clone() }
    }

    pub fn vanishing(name: impl Into<String>, exprs: Vec<Expr>, settings: &NumericSettings) -> Self {
        let right = vec![Expr::zero(); exprs.len()];
        Self::new(name, exprs, right, settings)
    }

    /// Compares two forms coefficient by coefficient.
    pub fn forms(name: impl Into<String>, left: &Form, right: &Form, settings: &NumericSettings) -> Result<Self, FormError> {
        left.same_chart(right)?;
        let keys: BTreeSet<&Vec<usize>> = left.terms().keys().chain(right.terms().keys()).collect();
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for k in keys {
            l.push(left.coefficient(k));
            r.push(right.coefficient(k));
        }
        if left.degree() != right.degree() && !(left.is_zero() && right.is_zero()) {
            l.push(Expr::one());
            r.push(Expr::zero());
        }
        Ok(Self::new(name, l, r, settings))
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.left.iter().chain(&self.right).flat_map(|e| e.free_symbols()).collect()
    }

    /// Whether `left − right` normalizes to zero in every component.
    pub fn symbolic(&self) -> bool {
        self.left.len() == self.right.len() && self.left.iter().zip(&self.right).all(|(l, r)| (l - r).is_zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericReport {
    pub pass: bool,
    pub max_dev: f64,
    /// Sample with the largest deviation.
    pub witness: BTreeMap<String, f64>,
}

fn to_t<T: Float + FromPrimitive>(point: &BTreeMap<Symbol, f64>) -> BTreeMap<Symbol, T> {
    point.iter().map(|(k, v)| (k.clone(), T::from_f64(*v).unwrap_or_else(T::nan))).collect()
}

fn plain(point: &BTreeMap<Symbol, f64>) -> BTreeMap<String, f64> {
    point.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn worse(dev: f64, max: f64) -> bool {
    dev.is_nan() && !max.is_nan() || dev > max
}

/// Max absolute deviation `|left − right|` over the sample points.
pub fn numeric_check<T: Float + FromPrimitive>(c: &IdentityCheck) -> Result<NumericReport, HarnessError> {
    if c.left.len() != c.right.len() {
        return Err(HarnessError::Shape(c.left.len(), c.right.len()));
    }
    let diffs: Vec<Expr> = c.left.iter().zip(&c.right).map(|(l, r)| l - r).collect();
    let mut sampler = Sampler::new(c.symbols(), &c.settings);
    let mut max_dev = 0.0;
    let mut witness = BTreeMap::new();
    for _ in 0..c.settings.samples {
        let p = sampler.next_point()?;
        let pt = to_t::<T>(&p);
        for e in &diffs {
            let v: T = e
                .evaluate(&pt)
                .map_err(|source| HarnessError::Evaluation { point: plain(&p), source })?;
            let dev = v.abs().to_f64().unwrap_or(f64::NAN);
            if worse(dev, max_dev) || witness.is_empty() {
                if worse(dev, max_dev) {
                    max_dev = dev;
                }
                witness = plain(&p);
            }
        }
    }
    Ok(NumericReport { pass: max_dev <= c.settings.tol, max_dev, witness })
}

/// Compares a symbolic derivative against a central difference.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceCheck {
    pub name: String,
    pub expr: Expr,
    pub var: Symbol,
    pub settings: NumericSettings,
}

/// Deviation is `|exact − fd| / max(1, |exact|)`, tested against `fd_tol`.
pub fn finite_difference_check<T: Float + FromPrimitive>(c: &FiniteDifferenceCheck) -> Result<NumericReport, HarnessError> {
    let exact = c.expr.diff(&c.var).map_err(|source| HarnessError::Evaluation { point: BTreeMap::new(), source })?;
    let mut vars = c.expr.free_symbols();
    vars.insert(c.var.clone());
    let mut sampler = Sampler::new(vars, &c.settings);
    let mut max_dev = 0.0;
    let mut witness = BTreeMap::new();
    let eps = T::epsilon();
    let two = T::one() + T::one();
    for _ in 0..c.settings.samples {
        let p = sampler.next_point()?;
        let err = |source| HarnessError::Evaluation { point: plain(&p), source };
        let mut pt = to_t::<T>(&p);
        let x0 = pt[&c.var];
        let h = eps.cbrt() * x0.abs().max(T::one());
        let d: T = exact.evaluate(&pt).map_err(err)?;
        pt.insert(c.var.clone(), x0 + h);
        let fp: T = c.expr.evaluate(&pt).map_err(err)?;
        pt.insert(c.var.clone(), x0 - h);
        let fm: T = c.expr.evaluate(&pt).map_err(err)?;
        let fd = (fp - fm) / (two * h);
        let dev = ((d - fd).abs() / d.abs().max(T::one())).to_f64().unwrap_or(f64::NAN);
        if worse(dev, max_dev) || witness.is_empty() {
            if worse(dev, max_dev) {
                max_dev = dev;
            }
            witness = plain(&p);
        }
    }
    Ok(NumericReport { pass: max_dev <= c.settings.fd_tol, max_dev, witness })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    #[serde(rename = "skip")]
    Skipped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    pub status: Status,
    pub max_dev: Option<f64>,
    pub witness: BTreeMap<String, f64>,
    /// `symbolic`, `numeric`, `finite-difference`, or the reason for a skip
    /// or error.
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.suite.iter().all(|e| matches!(e.status, Status::Pass | Status::Skipped))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn entry(&self, name: &str) -> Option<&SuiteEntry> {
        self.suite.iter().find(|e| e.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{parse_expr, RawJetNames};

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn identity_passes_and_fails() {
        let s = NumericSettings::default();
        let ok = IdentityCheck::new("trig", vec![e("sin(x)^2 + cos(x)^2")], vec![e("1")], &s);
        let r = numeric_check::<f64>(&ok).unwrap();
        assert!(r.pass && r.max_dev < 1e-12);
        let bad = IdentityCheck::new("bad", vec![e("x^2")], vec![e("x^2 + 1e-6*y")], &s);
        let r = numeric_check::<f64>(&bad).unwrap();
        assert!(!r.pass);
        assert!(r.witness.contains_key("x") && r.witness.contains_key("y"));
        assert!((r.max_dev - 1e-6 * r.witness["y"].abs()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let s = NumericSettings { seed: 42, ..Default::default() };
        let c = IdentityCheck::new("c", vec![e("x*y")], vec![e("y*x + 0.001*x")], &s);
        assert_eq!(numeric_check::<f64>(&c).unwrap(), numeric_check::<f64>(&c).unwrap());
        let other = IdentityCheck { settings: NumericSettings { seed: 43, ..s }, ..c.clone() };
        assert_ne!(numeric_check::<f64>(&c).unwrap().witness, numeric_check::<f64>(&other).unwrap().witness);
    }

    #[test]
    fn guards_are_respected() {
        let g = Guard::parse("abs(x) > 0.5", &RawJetNames).unwrap();
        assert_eq!(g.op, Cmp::Gt);
        let s = NumericSettings { guards: vec![g], ..Default::default() };
        let c = IdentityCheck::new("inv", vec![e("x*(1/x)")], vec![e("1")], &s);
        assert!(numeric_check::<f64>(&c).unwrap().pass);
        let mut sampler = Sampler::new([Symbol::new("x")], &s);
        for _ in 0..50 {
            assert!(sampler.next_point().unwrap()[&Symbol::new("x")].abs() > 0.5);
        }
        let never = NumericSettings { guards: vec![Guard::parse("x >= 2", &RawJetNames).unwrap()], ..Default::default() };
        assert!(matches!(Sampler::new([], &never).next_point(), Err(HarnessError::GuardUnsatisfiable(_))));
        assert!(Guard::parse("x = 1", &RawJetNames).is_err());
        assert_eq!(Guard::parse("x <= y", &RawJetNames).unwrap().op, Cmp::Le);
    }

    #[test]
    fn domain_errors_carry_the_point() {
        let s = NumericSettings::default();
        let c = IdentityCheck::new("log", vec![e("log(x - 5)")], vec![e("0")], &s);
        match numeric_check::<f64>(&c) {
            Err(HarnessError::Evaluation { point, .. }) => assert!(point.contains_key("x")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn finite_differences() {
        let s = NumericSettings::default();
        let c = FiniteDifferenceCheck { name: "fd".into(), expr: e("sin(x)*exp(y) + x^3"), var: Symbol::new("x"), settings: s };
        let r = finite_difference_check::<f64>(&c).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn generic_over_scalar() {
        let s = NumericSettings { tol: 1e-4, ..Default::default() };
        let c = IdentityCheck::new("f32", vec![e("(x + 1)^2")], vec![e("x^2 + 2*x + 1")], &s);
        assert!(numeric_check::<f32>(&c).unwrap().pass);
    }
}
